#pragma once

#include "haug/tensor.hpp"

namespace haug {

// All ops are differentiable w.r.t. every floating input unless noted.
// Shapes are strict: no implicit broadcasting.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, scalar c);
Tensor relu(const Tensor& x);

// y = x * W^T + b, x:[B,I], W:[O,I], b:[O]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, int start, int len);

Tensor sum(const Tensor& x);   // -> scalar
Tensor mean(const Tensor& x);  // -> scalar

// NCHW -> N x C
Tensor global_average_pool(const Tensor& x);

// input NCHW, weight OIKK; output spatial extent floor((H + 2p - K)/stride) + 1
Tensor conv2d(const Tensor& input, const Tensor& weight, int stride, int padding);

struct BatchNormStats {
    Tensor running_mean;  // [C], not part of the graph
    Tensor running_var;   // [C]
};

// x rank 2 [N,C] or rank 4 [N,C,H,W]; training mode normalizes with batch
// statistics and updates running stats with fixed momentum
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats,
                  bool training, scalar eps = scalar(1e-5), scalar momentum = scalar(0.1));

// each slice along `axis` scaled to unit norm; zero slices pass through the
// (norm + eps) guard untouched
Tensor l2_normalize(const Tensor& v, int axis, scalar eps = scalar(1e-12));

// per-column (x - mean) / sqrt(var + eps) over the batch dimension, x:[B,D]
Tensor standardize_columns(const Tensor& x, scalar eps = scalar(1e-12));

// forward identity, zero gradient to all ancestors
Tensor stop_gradient(const Tensor& v);

}  // namespace haug
