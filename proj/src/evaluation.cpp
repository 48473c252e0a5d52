#include "gzsl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace gzsl {

using nlohmann::json;

Mat decisions_from_scores(const Mat& scores, double threshold) {
    return (scores.array() > threshold).cast<double>();
}

ConfusionCounts code_confusion(const Mat& decisions, const Mat& gold, Eigen::Index col) {
    ConfusionCounts c;
    for (Eigen::Index i = 0; i < decisions.rows(); ++i) {
        const bool d = decisions(i, col) > 0.5;
        const bool g = gold(i, col) > 0.5;
        if (d && g)
            ++c.tp;
        else if (d && !g)
            ++c.fp;
        else if (!d && g)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

ConfusionCounts pooled_confusion(const Mat& decisions, const Mat& gold,
                                 const std::vector<Eigen::Index>& cols) {
    if (decisions.rows() != gold.rows() || decisions.cols() != gold.cols())
        throw ConfigError("confusion: misaligned prediction and gold matrices");
    ConfusionCounts total;
    for (Eigen::Index col : cols) {
        const ConfusionCounts c = code_confusion(decisions, gold, col);
        total.tp += c.tp;
        total.fp += c.fp;
        total.fn += c.fn;
        total.tn += c.tn;
    }
    return total;
}

PrfValues prf_from_counts(const ConfusionCounts& c) {
    PrfValues v;
    const double p_den = static_cast<double>(c.tp + c.fp);
    const double r_den = static_cast<double>(c.tp + c.fn);
    const double p = p_den > 0 ? static_cast<double>(c.tp) / p_den : 0.0;
    const double r = r_den > 0 ? static_cast<double>(c.tp) / r_den : 0.0;
    v.precision = 100.0 * p;
    v.recall = 100.0 * r;
    v.f1 = (p + r) > 0 ? 100.0 * 2.0 * p * r / (p + r) : 0.0;
    return v;
}

double rank_auc(const std::vector<double>& scores, const std::vector<int>& gold) {
    if (scores.size() != gold.size()) throw ConfigError("rank_auc: size mismatch");
    const std::size_t n = scores.size();
    long n_pos = 0;
    for (int g : gold) n_pos += g ? 1 : 0;
    const long n_neg = static_cast<long>(n) - n_pos;
    if (n_pos == 0 || n_neg == 0) throw NumericError("rank_auc: only one class present");

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // average ranks over ties
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k)
            if (gold[idx[k]]) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0);
    return 100.0 * u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

const CohortReport& MetricsReport::cohort(const std::string& name) const {
    for (const auto& c : cohorts)
        if (c.name == name) return c;
    throw ConfigError("no cohort named '" + name + "' in report");
}

namespace {

json metric_set_json(const MetricSet& m) {
    json j;
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["f1"] = m.f1;
    if (m.auc)
        j["auc"] = *m.auc;
    else
        j["auc"] = nullptr;
    return j;
}

std::string fmt_metric(double v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%6.2f", v);
    return buf;
}
std::string fmt_opt(const std::optional<double>& v) {
    return v ? fmt_metric(*v) : "     -";
}

}  // namespace

json MetricsReport::to_json() const {
    json j;
    j["metadata"] = metadata;
    json cj;
    for (const auto& c : cohorts) {
        json e;
        e["n_codes"] = c.n_codes;
        e["empty"] = c.empty;
        e["micro"] = metric_set_json(c.micro);
        e["macro"] = metric_set_json(c.macro);
        e["macro_auc_excluded"] = c.macro_auc_excluded;
        cj[c.name] = e;
    }
    j["cohorts"] = cj;
    return j;
}

std::string MetricsReport::to_table() const {
    std::ostringstream out;
    out << "cohort       codes |  micro  Pre    Rec     F1    AUC |  macro  Pre    Rec     F1    AUC\n";
    for (const auto& c : cohorts) {
        out << c.name;
        for (std::size_t k = c.name.size(); k < 12; ++k) out << ' ';
        if (c.empty) {
            out << "    0 |  (empty cohort)\n";
            continue;
        }
        char buf[8];
        std::snprintf(buf, sizeof(buf), "%5d", c.n_codes);
        out << buf << " |        " << fmt_metric(c.micro.precision) << ' ' << fmt_metric(c.micro.recall)
            << ' ' << fmt_metric(c.micro.f1) << ' ' << fmt_opt(c.micro.auc) << " |        "
            << fmt_metric(c.macro.precision) << ' ' << fmt_metric(c.macro.recall) << ' '
            << fmt_metric(c.macro.f1) << ' ' << fmt_opt(c.macro.auc);
        if (c.macro_auc_excluded > 0) out << "  (macro AUC skipped " << c.macro_auc_excluded << ")";
        out << '\n';
    }
    return out.str();
}

MetricsReport evaluate_predictions(const Mat& scores, const Mat& gold,
                                   const std::vector<int>& code_ids, const LabelHierarchy& h,
                                   double threshold, long eval_min_count) {
    if (scores.rows() != gold.rows() || scores.cols() != gold.cols())
        throw ConfigError("evaluate: misaligned scores and gold");
    if (scores.cols() != static_cast<Eigen::Index>(code_ids.size()))
        throw ConfigError("evaluate: code id list does not match matrix");

    const Mat decisions = decisions_from_scores(scores, threshold);

    // evaluable = strictly more than eval_min_count gold positives in this split
    std::vector<Eigen::Index> evaluable;
    for (Eigen::Index c = 0; c < gold.cols(); ++c)
        if (static_cast<long>(gold.col(c).sum() + 0.5) > eval_min_count) evaluable.push_back(c);

    auto in_cohort = [&](Eigen::Index col, const std::string& name) {
        const long n = h.node(code_ids[static_cast<std::size_t>(col)]).train_count;
        if (name == "zero_shot") return n == 0;
        if (name == "few_shot") return n >= 1 && n <= 5;
        if (name == "frequent") return n > 5;
        return true;  // all
    };

    MetricsReport report;
    for (const std::string name : {"zero_shot", "few_shot", "frequent", "all"}) {
        CohortReport cr;
        cr.name = name;
        std::vector<Eigen::Index> cols;
        for (Eigen::Index c : evaluable)
            if (in_cohort(c, name)) cols.push_back(c);
        cr.n_codes = static_cast<int>(cols.size());
        if (cols.empty()) {
            cr.empty = true;
            report.cohorts.push_back(cr);
            continue;
        }

        const ConfusionCounts pooled = pooled_confusion(decisions, gold, cols);
        const PrfValues micro = prf_from_counts(pooled);
        cr.micro.precision = micro.precision;
        cr.micro.recall = micro.recall;
        cr.micro.f1 = micro.f1;

        // pooled AUC over every (doc, code) pair in the cohort
        {
            std::vector<double> s;
            std::vector<int> g;
            s.reserve(cols.size() * static_cast<std::size_t>(scores.rows()));
            for (Eigen::Index col : cols)
                for (Eigen::Index i = 0; i < scores.rows(); ++i) {
                    s.push_back(scores(i, col));
                    g.push_back(gold(i, col) > 0.5 ? 1 : 0);
                }
            try {
                cr.micro.auc = rank_auc(s, g);
            } catch (const NumericError&) {
                cr.micro.auc = std::nullopt;
            }
        }

        double p_sum = 0, r_sum = 0, f_sum = 0, auc_sum = 0;
        int auc_n = 0;
        for (Eigen::Index col : cols) {
            const PrfValues v = prf_from_counts(code_confusion(decisions, gold, col));
            p_sum += v.precision;
            r_sum += v.recall;
            f_sum += v.f1;
            std::vector<double> s(static_cast<std::size_t>(scores.rows()));
            std::vector<int> g(static_cast<std::size_t>(scores.rows()));
            for (Eigen::Index i = 0; i < scores.rows(); ++i) {
                s[static_cast<std::size_t>(i)] = scores(i, col);
                g[static_cast<std::size_t>(i)] = gold(i, col) > 0.5 ? 1 : 0;
            }
            try {
                auc_sum += rank_auc(s, g);
                ++auc_n;
            } catch (const NumericError&) {
                ++cr.macro_auc_excluded;
            }
        }
        const double inv = 1.0 / static_cast<double>(cols.size());
        cr.macro.precision = p_sum * inv;
        cr.macro.recall = r_sum * inv;
        cr.macro.f1 = f_sum * inv;
        if (auc_n > 0) cr.macro.auc = auc_sum / static_cast<double>(auc_n);

        report.cohorts.push_back(cr);
    }
    return report;
}

json aggregate_reports(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) throw ConfigError("aggregate_reports: no reports");
    json agg;
    agg["n_seeds"] = reports.size();
    json cohorts;
    for (const auto& base : reports.front().cohorts) {
        json entry;
        for (const std::string scope : {"micro", "macro"}) {
            json scope_j;
            for (const std::string metric : {"precision", "recall", "f1", "auc"}) {
                std::vector<double> vals;
                for (const auto& rep : reports) {
                    const auto& c = rep.cohort(base.name);
                    const MetricSet& m = scope == "micro" ? c.micro : c.macro;
                    if (metric == "precision") vals.push_back(m.precision);
                    if (metric == "recall") vals.push_back(m.recall);
                    if (metric == "f1") vals.push_back(m.f1);
                    if (metric == "auc") {
                        if (!m.auc) {
                            vals.clear();
                            break;
                        }
                        vals.push_back(*m.auc);
                    }
                }
                if (vals.empty()) {
                    scope_j[metric] = nullptr;
                    continue;
                }
                const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) /
                                    static_cast<double>(vals.size());
                double var = 0.0;
                for (double v : vals) var += (v - mean) * (v - mean);
                var /= static_cast<double>(vals.size());
                scope_j[metric] = {{"mean", mean}, {"sd", std::sqrt(var)}};
            }
            entry[scope] = scope_j;
        }
        cohorts[base.name] = entry;
    }
    agg["cohorts"] = cohorts;
    return agg;
}

std::string aggregate_table(const json& agg) {
    std::ostringstream out;
    out << "cohort        scope |    Pre          Rec           F1          AUC (mean +/- sd over "
        << agg["n_seeds"].get<std::size_t>() << " seeds)\n";
    for (const std::string name : {"zero_shot", "few_shot", "frequent", "all"}) {
        if (!agg["cohorts"].contains(name)) continue;
        for (const std::string scope : {"micro", "macro"}) {
            const auto& s = agg["cohorts"][name][scope];
            out << name;
            for (std::size_t k = name.size(); k < 13; ++k) out << ' ';
            out << (scope == "micro" ? "micro" : "macro") << " |";
            for (const std::string metric : {"precision", "recall", "f1", "auc"}) {
                if (s[metric].is_null()) {
                    out << "        -    ";
                    continue;
                }
                char buf[32];
                std::snprintf(buf, sizeof(buf), " %6.2f+/-%-5.2f", s[metric]["mean"].get<double>(),
                              s[metric]["sd"].get<double>());
                out << buf;
            }
            out << '\n';
        }
    }
    return out.str();
}

}  // namespace gzsl
