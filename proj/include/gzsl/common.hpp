#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gzsl {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Exit-code-aligned error taxonomy: 2 config/format, 3 missing stage, 4 numeric.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MissingPrerequisite : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- hashing (FNV-1a 64) ----------------------------------------------------

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ull);
std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ull);
std::string hash_hex(std::uint64_t h);
std::string file_hash(const std::string& path);

// Per-stage seed derivation: stage reruns are reproducible independently of
// what ran before them.  seed' = fnv1a64(master || stage || index).
std::uint64_t derive_seed(std::uint64_t master, std::string_view stage, std::uint64_t index = 0);

// ---- rng ---------------------------------------------------------------------

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    double gaussian() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
    // uniform integer in [0, n)
    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }

    Mat gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double stddev = 1.0) {
        Mat m(rows, cols);
        for (Eigen::Index c = 0; c < cols; ++c)
            for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = gaussian() * stddev;
        return m;
    }
    Vec gaussian_vector(Eigen::Index n, double stddev = 1.0) {
        Vec v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = gaussian() * stddev;
        return v;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
    }

    std::mt19937_64& engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
};

// ---- math --------------------------------------------------------------------

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log(1 + e^x) without overflow
inline double log1pexp(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline void softmax_inplace(Vec& v) {
    const double m = v.maxCoeff();
    v = (v.array() - m).exp();
    v /= v.sum();
}

inline double cosine(const Vec& a, const Vec& b) {
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.dot(b) / (na * nb);
}

// ---- adam ----------------------------------------------------------------------

// One optimizer per parameter group; slots are registered once and updated in
// registration order every step.
class Adam {
  public:
    Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

    int add(Mat* param) {
        params_.push_back(param);
        m_.emplace_back(Mat::Zero(param->rows(), param->cols()));
        v_.emplace_back(Mat::Zero(param->rows(), param->cols()));
        return static_cast<int>(params_.size()) - 1;
    }

    // grads must parallel the registered params
    void step(const std::vector<Mat>& grads) {
        ++t_;
        const double bc1 = 1.0 - std::pow(b1_, t_);
        const double bc2 = 1.0 - std::pow(b2_, t_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            m_[i] = b1_ * m_[i] + (1.0 - b1_) * grads[i];
            v_[i] = b2_ * v_[i] + (1.0 - b2_) * grads[i].cwiseProduct(grads[i]);
            params_[i]->array() -=
                lr_ * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps_);
        }
    }

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }

  private:
    double lr_, b1_, b2_, eps_;
    long t_ = 0;
    std::vector<Mat*> params_;
    std::vector<Mat> m_, v_;
};

}  // namespace gzsl
