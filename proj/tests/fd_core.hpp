#pragma once

// Finite-difference gradient comparison, framework-free so both the doctest
// suites and the acceptance binary can drive it.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "haug/rng.hpp"
#include "haug/tensor.hpp"

namespace fd {

#ifdef HAUG_SCALAR_F64
inline constexpr double kStep = 1e-5;
inline constexpr double kRelTol = 1e-4;
inline constexpr double kAbsFloor = 1e-8;
#else
inline constexpr double kStep = 1e-3;
inline constexpr double kRelTol = 1e-2;
inline constexpr double kAbsFloor = 1e-3;
#endif

struct Report {
    int checked = 0;
    int failed = 0;
    std::string first_failure;
};

inline haug::Tensor random_tensor(const std::vector<int>& shape, haug::Rng& rng, bool requires_grad,
                                  double lo = -1.0, double hi = 1.0) {
    int n = 1;
    for (int d : shape) n *= d;
    std::vector<haug::scalar> data(n);
    for (auto& v : data) v = static_cast<haug::scalar>(haug::uniform_double(rng, lo, hi));
    return haug::Tensor::from_data(shape, std::move(data), requires_grad);
}

// keeps values away from the rectifier kink so central differences stay valid
inline haug::Tensor random_tensor_away_from_zero(const std::vector<int>& shape, haug::Rng& rng,
                                                 bool requires_grad, double margin = 0.05) {
    haug::Tensor t = random_tensor(shape, rng, requires_grad);
    for (auto& v : t.data()) {
        if (std::abs(static_cast<double>(v)) < margin)
            v += v >= 0 ? haug::scalar(margin) : haug::scalar(-margin);
    }
    return t;
}

// loss_fn must rebuild the graph from the leaves' current values every call
inline Report compare(const std::vector<haug::Tensor>& leaves,
                      const std::function<haug::Tensor()>& loss_fn) {
    Report report;
    for (const auto& l : leaves) l.node()->grad.clear();
    haug::backward(loss_fn());

    for (auto leaf : leaves) {
        if (!leaf.requires_grad()) continue;
        const std::vector<haug::scalar> analytic = leaf.grad_or_zeros();
        auto vals = leaf.data();
        for (size_t i = 0; i < vals.size(); ++i) {
            const haug::scalar saved = vals[i];
            vals[i] = saved + static_cast<haug::scalar>(kStep);
            const double lp = static_cast<double>(loss_fn().item());
            vals[i] = saved - static_cast<haug::scalar>(kStep);
            const double lm = static_cast<double>(loss_fn().item());
            vals[i] = saved;
            const double fdg = (lp - lm) / (2.0 * kStep);
            const double an = static_cast<double>(analytic[i]);
            const double err = std::abs(an - fdg);
            ++report.checked;
            if (err > kAbsFloor && err / std::max(std::abs(an), std::abs(fdg)) > kRelTol) {
                ++report.failed;
                if (report.first_failure.empty()) {
                    report.first_failure = "elem " + std::to_string(i) + ": analytic " +
                                           std::to_string(an) + " vs fd " + std::to_string(fdg);
                }
            }
        }
    }
    return report;
}

}  // namespace fd
