#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gzsl/common.hpp"
#include "gzsl/hierarchy.hpp"

namespace gzsl {

struct ConfusionCounts {
    long tp = 0, fp = 0, fn = 0, tn = 0;
};

struct PrfValues {
    double precision = 0.0, recall = 0.0, f1 = 0.0;  // percent
};

// decisions are 1[score > threshold]
Mat decisions_from_scores(const Mat& scores, double threshold);

// counts over the given code columns; both matrices docs x codes aligned
ConfusionCounts pooled_confusion(const Mat& decisions, const Mat& gold,
                                 const std::vector<Eigen::Index>& cols);
ConfusionCounts code_confusion(const Mat& decisions, const Mat& gold, Eigen::Index col);

// zero-denominator convention: P (or R) = 0; F1 = 0 when P + R = 0
PrfValues prf_from_counts(const ConfusionCounts& c);

// Mann-Whitney rank AUC with tie half-credit, in percent.
// Throws NumericError when only one class is present.
double rank_auc(const std::vector<double>& scores, const std::vector<int>& gold);

struct MetricSet {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    std::optional<double> auc;  // absent when undefined
};

struct CohortReport {
    std::string name;
    int n_codes = 0;  // evaluable codes in the cohort
    bool empty = false;
    MetricSet micro, macro;
    int macro_auc_excluded = 0;  // single-class codes left out of macro AUC
};

struct MetricsReport {
    std::vector<CohortReport> cohorts;  // zero_shot, few_shot, frequent, all
    nlohmann::json metadata;

    const CohortReport& cohort(const std::string& name) const;
    nlohmann::json to_json() const;
    std::string to_table() const;
};

// scores/gold: docs x |code_ids|; cohorts come from the hierarchy's train counts,
// evaluability from gold-positive counts in this split (strictly greater than
// eval_min_count)
MetricsReport evaluate_predictions(const Mat& scores, const Mat& gold,
                                   const std::vector<int>& code_ids, const LabelHierarchy& h,
                                   double threshold, long eval_min_count);

// mean and standard deviation over per-seed reports, cohort by cohort
nlohmann::json aggregate_reports(const std::vector<MetricsReport>& reports);
std::string aggregate_table(const nlohmann::json& agg);

}  // namespace gzsl
