#pragma once

// doctest bindings over the framework-free finite-difference core

#include <doctest.h>

#include "fd_core.hpp"

namespace gradcheck {

using fd::random_tensor;
using fd::random_tensor_away_from_zero;

inline void expect_gradients_match(const std::vector<haug::Tensor>& leaves,
                                   const std::function<haug::Tensor()>& loss_fn,
                                   const char* label) {
    const fd::Report report = fd::compare(leaves, loss_fn);
    CHECK(report.checked > 0);
    CHECK_MESSAGE(report.failed == 0, std::string(label) << ": " << report.failed << "/"
                                                         << report.checked << " elements off ("
                                                         << report.first_failure << ")");
}

}  // namespace gradcheck
