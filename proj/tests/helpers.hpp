#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gzsl/common.hpp"
#include "gzsl/nn.hpp"

namespace gzsl::testing {

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst;  // "tensor[i,j]"
};

// central finite differences against analytic grads, every entry
inline GradCheckResult grad_check(const std::function<double()>& loss,
                                  const std::vector<std::string>& names,
                                  const std::vector<Mat*>& params,
                                  const std::vector<Mat>& analytic, double eps = 1e-5) {
    GradCheckResult res;
    for (std::size_t p = 0; p < params.size(); ++p) {
        Mat& t = *params[p];
        for (Eigen::Index i = 0; i < t.rows(); ++i)
            for (Eigen::Index j = 0; j < t.cols(); ++j) {
                const double orig = t(i, j);
                t(i, j) = orig + eps;
                const double up = loss();
                t(i, j) = orig - eps;
                const double down = loss();
                t(i, j) = orig;
                const double num = (up - down) / (2.0 * eps);
                const double ana = analytic[p](i, j);
                if (std::abs(num) < 1e-8 && std::abs(ana) < 1e-8) continue;
                const double rel = std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-6});
                if (rel > res.max_rel_err) {
                    res.max_rel_err = rel;
                    res.worst = names[p] + "[" + std::to_string(i) + "," + std::to_string(j) + "]";
                }
            }
    }
    return res;
}

}  // namespace gzsl::testing
