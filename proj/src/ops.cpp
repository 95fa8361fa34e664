#include "haug/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace haug {

namespace {

Tensor make_op(std::vector<int> shape, std::vector<scalar> value, std::vector<NodePtr> inputs,
               std::function<void(Node&)> bw, const char* op) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->op = op;
    bool rg = false;
    for (const auto& in : inputs) rg = rg || in->requires_grad;
    if (grad_enabled() && rg) {
        n->requires_grad = true;
        n->inputs = std::move(inputs);
        n->backward_fn = std::move(bw);
    }
#if defined(HAUG_CHECK_FINITE) || !defined(NDEBUG)
    for (scalar v : n->value) {
        if (!std::isfinite(static_cast<double>(v)))
            throw std::runtime_error(std::string("non-finite forward output in ") + op);
    }
#endif
    return Tensor(std::move(n));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    const auto av = a.data();
    const auto bv = b.data();
    std::vector<scalar> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    auto an = a.node_ptr(), bn = b.node_ptr();
    return make_op(
        a.shape(), std::move(out), {an, bn},
        [an, bn](Node& n) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (size_t i = 0; i < n.grad.size(); ++i) bn->grad[i] += n.grad[i];
            }
        },
        "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    const auto av = a.data();
    const auto bv = b.data();
    std::vector<scalar> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
    auto an = a.node_ptr(), bn = b.node_ptr();
    return make_op(
        a.shape(), std::move(out), {an, bn},
        [an, bn](Node& n) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (size_t i = 0; i < n.grad.size(); ++i) bn->grad[i] -= n.grad[i];
            }
        },
        "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    const auto av = a.data();
    const auto bv = b.data();
    std::vector<scalar> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    auto an = a.node_ptr(), bn = b.node_ptr();
    return make_op(
        a.shape(), std::move(out), {an, bn},
        [an, bn](Node& n) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i] * bn->value[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (size_t i = 0; i < n.grad.size(); ++i) bn->grad[i] += n.grad[i] * an->value[i];
            }
        },
        "mul");
}

Tensor scale(const Tensor& a, scalar c) {
    const auto av = a.data();
    std::vector<scalar> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c;
    auto an = a.node_ptr();
    return make_op(
        a.shape(), std::move(out), {an},
        [an, c](Node& n) {
            if (!an->requires_grad) return;
            an->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i] * c;
        },
        "scale");
}

Tensor relu(const Tensor& x) {
    const auto xv = x.data();
    std::vector<scalar> out(xv.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > scalar(0) ? xv[i] : scalar(0);
    auto xn = x.node_ptr();
    return make_op(
        x.shape(), std::move(out), {xn},
        [xn](Node& n) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) {
                if (xn->value[i] > scalar(0)) xn->grad[i] += n.grad[i];
            }
        },
        "relu");
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1) {
        throw std::invalid_argument("linear: expected x[B,I], w[O,I], b[O], got " +
                                    shape_str(x.shape()) + " " + shape_str(w.shape()) + " " +
                                    shape_str(b.shape()));
    }
    const int B = x.dim(0), I = x.dim(1), O = w.dim(0);
    if (w.dim(1) != I || b.dim(0) != O) {
        throw std::invalid_argument("linear: shape mismatch " + shape_str(x.shape()) + " vs " +
                                    shape_str(w.shape()));
    }
    const scalar* xp = x.data().data();
    const scalar* wp = w.data().data();
    const scalar* bp = b.data().data();
    // transposed weights keep the inner fma contiguous over output channels
    std::vector<scalar> wt(static_cast<size_t>(I) * O);
    for (int o = 0; o < O; ++o)
        for (int i = 0; i < I; ++i) wt[static_cast<size_t>(i) * O + o] = wp[static_cast<size_t>(o) * I + i];
    std::vector<scalar> out(static_cast<size_t>(B) * O);
    for (int nb = 0; nb < B; ++nb) {
        const scalar* xr = xp + static_cast<size_t>(nb) * I;
        scalar* yr = out.data() + static_cast<size_t>(nb) * O;
        for (int o = 0; o < O; ++o) yr[o] = bp[o];
        int i = 0;
        for (; i + 4 <= I; i += 4) {
            const scalar x0 = xr[i], x1 = xr[i + 1], x2 = xr[i + 2], x3 = xr[i + 3];
            const scalar* w0 = wt.data() + static_cast<size_t>(i) * O;
            const scalar* w1 = w0 + O;
            const scalar* w2 = w1 + O;
            const scalar* w3 = w2 + O;
            for (int o = 0; o < O; ++o) yr[o] += x0 * w0[o] + x1 * w1[o] + x2 * w2[o] + x3 * w3[o];
        }
        for (; i < I; ++i) {
            const scalar xv = xr[i];
            const scalar* wr = wt.data() + static_cast<size_t>(i) * O;
            for (int o = 0; o < O; ++o) yr[o] += xv * wr[o];
        }
    }
    auto xn = x.node_ptr(), wn = w.node_ptr(), bn = b.node_ptr();
    return make_op(
        {B, O}, std::move(out), {xn, wn, bn},
        [xn, wn, bn, B, I, O](Node& n) {
            const scalar* g = n.grad.data();
            if (xn->requires_grad) {
                xn->ensure_grad();
                for (int nb = 0; nb < B; ++nb) {
                    scalar* dxr = xn->grad.data() + static_cast<size_t>(nb) * I;
                    const scalar* gr = g + static_cast<size_t>(nb) * O;
                    for (int o = 0; o < O; ++o) {
                        const scalar go = gr[o];
                        const scalar* wr = wn->value.data() + static_cast<size_t>(o) * I;
                        for (int i = 0; i < I; ++i) dxr[i] += go * wr[i];
                    }
                }
            }
            if (wn->requires_grad) {
                wn->ensure_grad();
                for (int nb = 0; nb < B; ++nb) {
                    const scalar* xr = xn->value.data() + static_cast<size_t>(nb) * I;
                    const scalar* gr = g + static_cast<size_t>(nb) * O;
                    for (int o = 0; o < O; ++o) {
                        const scalar go = gr[o];
                        scalar* dwr = wn->grad.data() + static_cast<size_t>(o) * I;
                        for (int i = 0; i < I; ++i) dwr[i] += go * xr[i];
                    }
                }
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (int nb = 0; nb < B; ++nb) {
                    const scalar* gr = g + static_cast<size_t>(nb) * O;
                    for (int o = 0; o < O; ++o) bn->grad[o] += gr[o];
                }
            }
        },
        "linear");
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                                    shape_str(b.shape()));
    }
    const int M = a.dim(0), K = a.dim(1), N = b.dim(1);
    const scalar* ap = a.data().data();
    const scalar* bp = b.data().data();
    std::vector<scalar> out(static_cast<size_t>(M) * N, scalar(0));
    for (int m = 0; m < M; ++m) {
        scalar* cr = out.data() + static_cast<size_t>(m) * N;
        const scalar* ar = ap + static_cast<size_t>(m) * K;
        for (int k = 0; k < K; ++k) {
            const scalar av = ar[k];
            const scalar* br = bp + static_cast<size_t>(k) * N;
            for (int j = 0; j < N; ++j) cr[j] += av * br[j];
        }
    }
    auto an = a.node_ptr(), bn = b.node_ptr();
    return make_op(
        {M, N}, std::move(out), {an, bn},
        [an, bn, M, K, N](Node& n) {
            const scalar* g = n.grad.data();
            if (an->requires_grad) {
                an->ensure_grad();
                for (int m = 0; m < M; ++m) {
                    scalar* dar = an->grad.data() + static_cast<size_t>(m) * K;
                    const scalar* gr = g + static_cast<size_t>(m) * N;
                    for (int k = 0; k < K; ++k) {
                        const scalar* br = bn->value.data() + static_cast<size_t>(k) * N;
                        scalar acc = 0;
                        for (int j = 0; j < N; ++j) acc += gr[j] * br[j];
                        dar[k] += acc;
                    }
                }
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (int m = 0; m < M; ++m) {
                    const scalar* ar = an->value.data() + static_cast<size_t>(m) * K;
                    const scalar* gr = g + static_cast<size_t>(m) * N;
                    for (int k = 0; k < K; ++k) {
                        const scalar av = ar[k];
                        scalar* dbr = bn->grad.data() + static_cast<size_t>(k) * N;
                        for (int j = 0; j < N; ++j) dbr[j] += av * gr[j];
                    }
                }
            }
        },
        "matmul");
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw std::invalid_argument("transpose: rank-2 only, got " + shape_str(a.shape()));
    const int M = a.dim(0), N = a.dim(1);
    const scalar* ap = a.data().data();
    std::vector<scalar> out(static_cast<size_t>(M) * N);
    for (int m = 0; m < M; ++m)
        for (int j = 0; j < N; ++j) out[static_cast<size_t>(j) * M + m] = ap[static_cast<size_t>(m) * N + j];
    auto an = a.node_ptr();
    return make_op(
        {N, M}, std::move(out), {an},
        [an, M, N](Node& n) {
            if (!an->requires_grad) return;
            an->ensure_grad();
            for (int j = 0; j < N; ++j)
                for (int m = 0; m < M; ++m)
                    an->grad[static_cast<size_t>(m) * N + j] += n.grad[static_cast<size_t>(j) * M + m];
        },
        "transpose");
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    const auto& s0 = parts[0].shape();
    if (axis < 0 || axis >= static_cast<int>(s0.size()))
        throw std::invalid_argument("concat: bad axis " + std::to_string(axis));
    std::vector<int> oshape = s0;
    int axis_total = 0;
    for (const auto& p : parts) {
        const auto& s = p.shape();
        if (s.size() != s0.size()) throw std::invalid_argument("concat: rank mismatch");
        for (size_t d = 0; d < s.size(); ++d) {
            if (static_cast<int>(d) != axis && s[d] != s0[d]) {
                throw std::invalid_argument("concat: shape mismatch " + shape_str(s) + " vs " +
                                            shape_str(s0));
            }
        }
        axis_total += s[axis];
    }
    oshape[axis] = axis_total;

    int outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= s0[d];
    for (size_t d = axis + 1; d < s0.size(); ++d) inner *= s0[d];

    size_t total = static_cast<size_t>(outer) * axis_total * inner;
    std::vector<scalar> out(total);
    std::vector<NodePtr> ins;
    ins.reserve(parts.size());
    for (const auto& p : parts) ins.push_back(p.node_ptr());

    int off = 0;
    for (const auto& p : parts) {
        const int pa = p.shape()[axis];
        const scalar* src = p.data().data();
        for (int ou = 0; ou < outer; ++ou) {
            scalar* dst = out.data() + (static_cast<size_t>(ou) * axis_total + off) * inner;
            const scalar* s = src + static_cast<size_t>(ou) * pa * inner;
            std::copy(s, s + static_cast<size_t>(pa) * inner, dst);
        }
        off += pa;
    }

    const int total_axis = axis_total;
    return make_op(
        std::move(oshape), std::move(out), ins,
        [ins, outer, inner, total_axis, axis](Node& n) {
            int off2 = 0;
            for (const auto& in : ins) {
                const int pa = in->shape[axis];
                if (in->requires_grad) {
                    in->ensure_grad();
                    for (int ou = 0; ou < outer; ++ou) {
                        const scalar* g = n.grad.data() + (static_cast<size_t>(ou) * total_axis + off2) * inner;
                        scalar* d = in->grad.data() + static_cast<size_t>(ou) * pa * inner;
                        for (size_t i = 0; i < static_cast<size_t>(pa) * inner; ++i) d[i] += g[i];
                    }
                }
                off2 += pa;
            }
        },
        "concat");
}

Tensor slice(const Tensor& x, int axis, int start, int len) {
    const auto& s = x.shape();
    if (axis < 0 || axis >= static_cast<int>(s.size()))
        throw std::invalid_argument("slice: bad axis " + std::to_string(axis));
    if (start < 0 || len <= 0 || start + len > s[axis]) {
        throw std::invalid_argument("slice: range [" + std::to_string(start) + "," +
                                    std::to_string(start + len) + ") out of extent " +
                                    std::to_string(s[axis]));
    }
    int outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= s[d];
    for (size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
    const int A = s[axis];
    std::vector<int> oshape = s;
    oshape[axis] = len;
    std::vector<scalar> out(static_cast<size_t>(outer) * len * inner);
    const scalar* xp = x.data().data();
    for (int ou = 0; ou < outer; ++ou) {
        const scalar* src = xp + (static_cast<size_t>(ou) * A + start) * inner;
        scalar* dst = out.data() + static_cast<size_t>(ou) * len * inner;
        std::copy(src, src + static_cast<size_t>(len) * inner, dst);
    }
    auto xn = x.node_ptr();
    return make_op(
        std::move(oshape), std::move(out), {xn},
        [xn, outer, inner, A, start, len](Node& n) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (int ou = 0; ou < outer; ++ou) {
                const scalar* g = n.grad.data() + static_cast<size_t>(ou) * len * inner;
                scalar* d = xn->grad.data() + (static_cast<size_t>(ou) * A + start) * inner;
                for (size_t i = 0; i < static_cast<size_t>(len) * inner; ++i) d[i] += g[i];
            }
        },
        "slice");
}

Tensor sum(const Tensor& x) {
    const auto xv = x.data();
    scalar acc = 0;
    for (scalar v : xv) acc += v;
    auto xn = x.node_ptr();
    return make_op(
        {1}, {acc}, {xn},
        [xn](Node& n) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            const scalar g = n.grad[0];
            for (auto& d : xn->grad) d += g;
        },
        "sum");
}

Tensor mean(const Tensor& x) {
    const auto xv = x.data();
    scalar acc = 0;
    for (scalar v : xv) acc += v;
    const scalar inv = scalar(1) / static_cast<scalar>(xv.size());
    auto xn = x.node_ptr();
    return make_op(
        {1}, {acc * inv}, {xn},
        [xn, inv](Node& n) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            const scalar g = n.grad[0] * inv;
            for (auto& d : xn->grad) d += g;
        },
        "mean");
}

Tensor global_average_pool(const Tensor& x) {
    if (x.rank() != 4) throw std::invalid_argument("global_average_pool: NCHW required, got " + shape_str(x.shape()));
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int hw = H * W;
    const scalar inv = scalar(1) / static_cast<scalar>(hw);
    const scalar* xp = x.data().data();
    std::vector<scalar> out(static_cast<size_t>(N) * C);
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const scalar* p = xp + (static_cast<size_t>(n) * C + c) * hw;
            scalar acc = 0;
            for (int i = 0; i < hw; ++i) acc += p[i];
            out[static_cast<size_t>(n) * C + c] = acc * inv;
        }
    }
    auto xn = x.node_ptr();
    return make_op(
        {N, C}, std::move(out), {xn},
        [xn, N, C, hw, inv](Node& n) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (int nb = 0; nb < N; ++nb) {
                for (int c = 0; c < C; ++c) {
                    const scalar g = n.grad[static_cast<size_t>(nb) * C + c] * inv;
                    scalar* d = xn->grad.data() + (static_cast<size_t>(nb) * C + c) * hw;
                    for (int i = 0; i < hw; ++i) d[i] += g;
                }
            }
        },
        "global_average_pool");
}

namespace {

// im2col patch matrix: one row per output position (n, oy, ox), columns
// ordered (c, ky, kx); out-of-range taps are zero-filled
std::vector<scalar> im2col(const scalar* x, int N, int C, int H, int W, int KH, int KW, int OH,
                           int OW, int stride, int padding) {
    const int K = C * KH * KW;
    std::vector<scalar> patches(static_cast<size_t>(N) * OH * OW * K, scalar(0));
    size_t m = 0;
    for (int n = 0; n < N; ++n) {
        const scalar* xb = x + static_cast<size_t>(n) * C * H * W;
        for (int oy = 0; oy < OH; ++oy) {
            for (int ox = 0; ox < OW; ++ox, ++m) {
                scalar* row = patches.data() + m * K;
                for (int c = 0; c < C; ++c) {
                    const scalar* xc = xb + static_cast<size_t>(c) * H * W;
                    for (int ky = 0; ky < KH; ++ky) {
                        const int iy = oy * stride - padding + ky;
                        if (iy < 0 || iy >= H) continue;
                        const scalar* xr = xc + static_cast<size_t>(iy) * W;
                        scalar* dst = row + (c * KH + ky) * KW;
                        for (int kx = 0; kx < KW; ++kx) {
                            const int ix = ox * stride - padding + kx;
                            if (ix >= 0 && ix < W) dst[kx] = xr[ix];
                        }
                    }
                }
            }
        }
    }
    return patches;
}

// rows = patches(MxK) . wt(KxO), accumulated over k in ascending order per
// output element. Four patch rows are processed per pass so the fma chains
// stay independent at narrow output widths.
template <int OF>
void gemm_rows_fixed(const scalar* patches, const scalar* wt, scalar* rows, int M, int K) {
    int m = 0;
    for (; m + 4 <= M; m += 4) {
        const scalar* p0 = patches + static_cast<size_t>(m) * K;
        const scalar* p1 = p0 + K;
        const scalar* p2 = p1 + K;
        const scalar* p3 = p2 + K;
        scalar a0[OF] = {}, a1[OF] = {}, a2[OF] = {}, a3[OF] = {};
        for (int k = 0; k < K; ++k) {
            const scalar* wr = wt + static_cast<size_t>(k) * OF;
            const scalar v0 = p0[k], v1 = p1[k], v2 = p2[k], v3 = p3[k];
            for (int o = 0; o < OF; ++o) {
                a0[o] += v0 * wr[o];
                a1[o] += v1 * wr[o];
                a2[o] += v2 * wr[o];
                a3[o] += v3 * wr[o];
            }
        }
        scalar* r0 = rows + static_cast<size_t>(m) * OF;
        for (int o = 0; o < OF; ++o) r0[o] = a0[o];
        for (int o = 0; o < OF; ++o) r0[OF + o] = a1[o];
        for (int o = 0; o < OF; ++o) r0[2 * OF + o] = a2[o];
        for (int o = 0; o < OF; ++o) r0[3 * OF + o] = a3[o];
    }
    for (; m < M; ++m) {
        const scalar* pr = patches + static_cast<size_t>(m) * K;
        scalar acc[OF] = {};
        for (int k = 0; k < K; ++k) {
            const scalar pv = pr[k];
            const scalar* wr = wt + static_cast<size_t>(k) * OF;
            for (int o = 0; o < OF; ++o) acc[o] += pv * wr[o];
        }
        scalar* yr = rows + static_cast<size_t>(m) * OF;
        for (int o = 0; o < OF; ++o) yr[o] = acc[o];
    }
}

void gemm_rows(const scalar* patches, const scalar* wt, scalar* rows, int M, int K, int O) {
    switch (O) {
        case 4: return gemm_rows_fixed<4>(patches, wt, rows, M, K);
        case 8: return gemm_rows_fixed<8>(patches, wt, rows, M, K);
        case 16: return gemm_rows_fixed<16>(patches, wt, rows, M, K);
        case 32: return gemm_rows_fixed<32>(patches, wt, rows, M, K);
        case 64: return gemm_rows_fixed<64>(patches, wt, rows, M, K);
        default: break;
    }
    for (int m = 0; m < M; ++m) {
        const scalar* pr = patches + static_cast<size_t>(m) * K;
        scalar* yr = rows + static_cast<size_t>(m) * O;
        for (int k = 0; k < K; ++k) {
            const scalar pv = pr[k];
            const scalar* wr = wt + static_cast<size_t>(k) * O;
            for (int o = 0; o < O; ++o) yr[o] += pv * wr[o];
        }
    }
}

// dw(OxK) += g(MxO)^T . patches(MxK), four rows per pass
void accumulate_weight_grad(const scalar* patches, const scalar* grows, scalar* dw, int M, int K,
                            int O) {
    int m = 0;
    for (; m + 4 <= M; m += 4) {
        const scalar* p0 = patches + static_cast<size_t>(m) * K;
        const scalar* p1 = p0 + K;
        const scalar* p2 = p1 + K;
        const scalar* p3 = p2 + K;
        const scalar* gr = grows + static_cast<size_t>(m) * O;
        for (int o = 0; o < O; ++o) {
            const scalar g0 = gr[o], g1 = gr[O + o], g2 = gr[2 * O + o], g3 = gr[3 * O + o];
            scalar* dwr = dw + static_cast<size_t>(o) * K;
            for (int k = 0; k < K; ++k) dwr[k] += g0 * p0[k] + g1 * p1[k] + g2 * p2[k] + g3 * p3[k];
        }
    }
    for (; m < M; ++m) {
        const scalar* pr = patches + static_cast<size_t>(m) * K;
        const scalar* gr = grows + static_cast<size_t>(m) * O;
        for (int o = 0; o < O; ++o) {
            const scalar gv = gr[o];
            scalar* dwr = dw + static_cast<size_t>(o) * K;
            for (int k = 0; k < K; ++k) dwr[k] += gv * pr[k];
        }
    }
}

// dpatch(MxK) = g(MxO) . w(OxK), four output channels per pass
void patch_grad_rows(const scalar* grows, const scalar* w, scalar* dpatch, int M, int K, int O) {
    for (int m = 0; m < M; ++m) {
        scalar* dpr = dpatch + static_cast<size_t>(m) * K;
        const scalar* gr = grows + static_cast<size_t>(m) * O;
        int o = 0;
        for (; o + 4 <= O; o += 4) {
            const scalar g0 = gr[o], g1 = gr[o + 1], g2 = gr[o + 2], g3 = gr[o + 3];
            const scalar* w0 = w + static_cast<size_t>(o) * K;
            const scalar* w1 = w0 + K;
            const scalar* w2 = w1 + K;
            const scalar* w3 = w2 + K;
            for (int k = 0; k < K; ++k) dpr[k] += g0 * w0[k] + g1 * w1[k] + g2 * w2[k] + g3 * w3[k];
        }
        for (; o < O; ++o) {
            const scalar gv = gr[o];
            const scalar* wr = w + static_cast<size_t>(o) * K;
            for (int k = 0; k < K; ++k) dpr[k] += gv * wr[k];
        }
    }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, int stride, int padding) {
    if (input.rank() != 4 || weight.rank() != 4) {
        throw std::invalid_argument("conv2d: need input NCHW and weight OIKK, got " +
                                    shape_str(input.shape()) + " and " + shape_str(weight.shape()));
    }
    const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int O = weight.dim(0), CI = weight.dim(1), KH = weight.dim(2), KW = weight.dim(3);
    if (C != CI) {
        throw std::invalid_argument("conv2d: channel mismatch, input " + shape_str(input.shape()) +
                                    " vs weight " + shape_str(weight.shape()));
    }
    if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
    if (H + 2 * padding < KH || W + 2 * padding < KW) {
        throw std::invalid_argument("conv2d: kernel " + shape_str(weight.shape()) +
                                    " exceeds padded input " + shape_str(input.shape()));
    }
    const int OH = (H + 2 * padding - KH) / stride + 1;
    const int OW = (W + 2 * padding - KW) / stride + 1;
    const int K = C * KH * KW;
    const int M = N * OH * OW;
    const int HW = OH * OW;

    const scalar* wp = weight.data().data();
    auto patches = std::make_shared<std::vector<scalar>>(
        im2col(input.data().data(), N, C, H, W, KH, KW, OH, OW, stride, padding));

    // weight transposed to K x O so the inner fma runs over contiguous output channels
    std::vector<scalar> wt(static_cast<size_t>(K) * O);
    for (int o = 0; o < O; ++o)
        for (int k = 0; k < K; ++k) wt[static_cast<size_t>(k) * O + o] = wp[static_cast<size_t>(o) * K + k];

    // rows of (patches . w^T), accumulated over k in (c,ky,kx) order
    std::vector<scalar> rows(static_cast<size_t>(M) * O, scalar(0));
    gemm_rows(patches->data(), wt.data(), rows.data(), M, K, O);

    // (n, oy, ox, o) -> NCHW
    std::vector<scalar> out(static_cast<size_t>(N) * O * HW);
    for (int n = 0; n < N; ++n) {
        const scalar* rb = rows.data() + static_cast<size_t>(n) * HW * O;
        scalar* ob = out.data() + static_cast<size_t>(n) * O * HW;
        for (int p = 0; p < HW; ++p)
            for (int o = 0; o < O; ++o) ob[static_cast<size_t>(o) * HW + p] = rb[static_cast<size_t>(p) * O + o];
    }

    auto xn = input.node_ptr(), wn = weight.node_ptr();
    return make_op(
        {N, O, OH, OW}, std::move(out), {xn, wn},
        [xn, wn, patches, N, C, H, W, O, KH, KW, OH, OW, K, M, HW, stride, padding](Node& nd) {
            // gradient in row layout M x O
            std::vector<scalar> grows(static_cast<size_t>(M) * O);
            for (int n = 0; n < N; ++n) {
                const scalar* gb = nd.grad.data() + static_cast<size_t>(n) * O * HW;
                scalar* rb = grows.data() + static_cast<size_t>(n) * HW * O;
                for (int o = 0; o < O; ++o)
                    for (int p = 0; p < HW; ++p)
                        rb[static_cast<size_t>(p) * O + o] = gb[static_cast<size_t>(o) * HW + p];
            }
            if (wn->requires_grad) {
                wn->ensure_grad();
                accumulate_weight_grad(patches->data(), grows.data(), wn->grad.data(), M, K, O);
            }
            if (xn->requires_grad) {
                xn->ensure_grad();
                std::vector<scalar> dpatch(static_cast<size_t>(M) * K, scalar(0));
                patch_grad_rows(grows.data(), wn->value.data(), dpatch.data(), M, K, O);
                // col2im scatter-add
                size_t m = 0;
                for (int n = 0; n < N; ++n) {
                    scalar* dxb = xn->grad.data() + static_cast<size_t>(n) * C * H * W;
                    for (int oy = 0; oy < OH; ++oy) {
                        for (int ox = 0; ox < OW; ++ox, ++m) {
                            const scalar* dpr = dpatch.data() + m * K;
                            for (int c = 0; c < C; ++c) {
                                scalar* dxc = dxb + static_cast<size_t>(c) * H * W;
                                for (int ky = 0; ky < KH; ++ky) {
                                    const int iy = oy * stride - padding + ky;
                                    if (iy < 0 || iy >= H) continue;
                                    scalar* dxr = dxc + static_cast<size_t>(iy) * W;
                                    const scalar* src = dpr + (c * KH + ky) * KW;
                                    for (int kx = 0; kx < KW; ++kx) {
                                        const int ix = ox * stride - padding + kx;
                                        if (ix >= 0 && ix < W) dxr[ix] += src[kx];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        },
        "conv2d");
}

namespace {

struct NormShape {
    int channels;
    int batch;    // leading dim
    int spatial;  // trailing per-channel extent (1 for rank-2)
};

NormShape norm_shape(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
    if (x.rank() != 2 && x.rank() != 4)
        throw std::invalid_argument("batch_norm: rank 2 or 4 required, got " + shape_str(x.shape()));
    const int C = x.dim(1);
    if (gamma.rank() != 1 || gamma.dim(0) != C || beta.rank() != 1 || beta.dim(0) != C) {
        throw std::invalid_argument("batch_norm: gamma/beta length must equal channel extent " +
                                    std::to_string(C) + ", got " + shape_str(gamma.shape()) + " and " +
                                    shape_str(beta.shape()));
    }
    const int spatial = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
    return {C, x.dim(0), spatial};
}

}  // namespace

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats,
                  bool training, scalar eps, scalar momentum) {
    const NormShape ns = norm_shape(x, gamma, beta);
    const int N = ns.batch, C = ns.channels, S = ns.spatial;
    if (training && N == 1) {
        throw std::invalid_argument("batch_norm: degenerate batch of size 1 in training mode");
    }
    const scalar* xp = x.data().data();
    const scalar* gp = gamma.data().data();
    const scalar* bp = beta.data().data();

    const int m = N * S;
    const scalar invm = scalar(1) / static_cast<scalar>(m);
    auto at = [C, S](int n, int c, int s) -> size_t {
        return (static_cast<size_t>(n) * C + c) * S + s;
    };

    std::vector<scalar> mean_c(C), inv_c(C);
    if (training) {
        // two-pass batch statistics per channel
        for (int c = 0; c < C; ++c) {
            scalar acc = 0;
            for (int n = 0; n < N; ++n)
                for (int s = 0; s < S; ++s) acc += xp[at(n, c, s)];
            mean_c[c] = acc * invm;
        }
        for (int c = 0; c < C; ++c) {
            scalar acc = 0;
            for (int n = 0; n < N; ++n)
                for (int s = 0; s < S; ++s) {
                    const scalar d = xp[at(n, c, s)] - mean_c[c];
                    acc += d * d;
                }
            const scalar var = acc * invm;
            inv_c[c] = scalar(1) / std::sqrt(var + eps);
            auto rm = stats.running_mean.data();
            auto rv = stats.running_var.data();
            rm[c] = (scalar(1) - momentum) * rm[c] + momentum * mean_c[c];
            rv[c] = (scalar(1) - momentum) * rv[c] + momentum * var;
        }
    } else {
        auto rm = stats.running_mean.data();
        auto rv = stats.running_var.data();
        for (int c = 0; c < C; ++c) {
            mean_c[c] = rm[c];
            inv_c[c] = scalar(1) / std::sqrt(rv[c] + eps);
        }
    }

    auto xhat = std::make_shared<std::vector<scalar>>(x.data().size());
    std::vector<scalar> out(x.data().size());
    for (int c = 0; c < C; ++c) {
        const scalar mu = mean_c[c], inv = inv_c[c], ga = gp[c], be = bp[c];
        for (int n = 0; n < N; ++n)
            for (int s = 0; s < S; ++s) {
                const size_t i = at(n, c, s);
                const scalar xh = (xp[i] - mu) * inv;
                (*xhat)[i] = xh;
                out[i] = ga * xh + be;
            }
    }

    auto xn = x.node_ptr(), gn = gamma.node_ptr(), bn = beta.node_ptr();
    auto inv_saved = std::make_shared<std::vector<scalar>>(std::move(inv_c));
    return make_op(
        x.shape(), std::move(out), {xn, gn, bn},
        [xn, gn, bn, xhat, inv_saved, N, C, S, invm, training, at](Node& nd) {
            const scalar* g = nd.grad.data();
            // per-channel reductions shared by all three grads
            std::vector<scalar> sum_g(C, 0), sum_gx(C, 0);
            for (int c = 0; c < C; ++c) {
                scalar sg = 0, sgx = 0;
                for (int n = 0; n < N; ++n)
                    for (int s = 0; s < S; ++s) {
                        const size_t i = at(n, c, s);
                        sg += g[i];
                        sgx += g[i] * (*xhat)[i];
                    }
                sum_g[c] = sg;
                sum_gx[c] = sgx;
            }
            if (gn->requires_grad) {
                gn->ensure_grad();
                for (int c = 0; c < C; ++c) gn->grad[c] += sum_gx[c];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (int c = 0; c < C; ++c) bn->grad[c] += sum_g[c];
            }
            if (xn->requires_grad) {
                xn->ensure_grad();
                for (int c = 0; c < C; ++c) {
                    const scalar ga = gn->value[c], inv = (*inv_saved)[c];
                    if (training) {
                        const scalar mg = sum_g[c] * invm, mgx = sum_gx[c] * invm;
                        for (int n = 0; n < N; ++n)
                            for (int s = 0; s < S; ++s) {
                                const size_t i = at(n, c, s);
                                xn->grad[i] += ga * inv * (g[i] - mg - (*xhat)[i] * mgx);
                            }
                    } else {
                        for (int n = 0; n < N; ++n)
                            for (int s = 0; s < S; ++s) {
                                const size_t i = at(n, c, s);
                                xn->grad[i] += ga * inv * g[i];
                            }
                    }
                }
            }
        },
        "batch_norm");
}

Tensor l2_normalize(const Tensor& v, int axis, scalar eps) {
    const auto& s = v.shape();
    if (axis < 0 || axis >= static_cast<int>(s.size()))
        throw std::invalid_argument("l2_normalize: bad axis " + std::to_string(axis));
    int outer = 1, inner = 1;
    const int A = s[axis];
    for (int d = 0; d < axis; ++d) outer *= s[d];
    for (size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];

    const scalar* vp = v.data().data();
    std::vector<scalar> out(v.data().size());
    auto norms = std::make_shared<std::vector<scalar>>(static_cast<size_t>(outer) * inner);
    for (int ou = 0; ou < outer; ++ou) {
        for (int in = 0; in < inner; ++in) {
            scalar acc = 0;
            for (int k = 0; k < A; ++k) {
                const scalar x = vp[(static_cast<size_t>(ou) * A + k) * inner + in];
                acc += x * x;
            }
            const scalar norm = std::sqrt(acc);
            (*norms)[static_cast<size_t>(ou) * inner + in] = norm;
            const scalar inv = scalar(1) / (norm + eps);
            for (int k = 0; k < A; ++k) {
                const size_t i = (static_cast<size_t>(ou) * A + k) * inner + in;
                out[i] = vp[i] * inv;
            }
        }
    }
    auto vn = v.node_ptr();
    return make_op(
        v.shape(), std::move(out), {vn},
        [vn, norms, outer, inner, A, eps](Node& nd) {
            if (!vn->requires_grad) return;
            vn->ensure_grad();
            const scalar* g = nd.grad.data();
            for (int ou = 0; ou < outer; ++ou) {
                for (int in = 0; in < inner; ++in) {
                    const scalar norm = (*norms)[static_cast<size_t>(ou) * inner + in];
                    const scalar denom = norm + eps;
                    scalar dot = 0;
                    for (int k = 0; k < A; ++k) {
                        const size_t i = (static_cast<size_t>(ou) * A + k) * inner + in;
                        dot += g[i] * vn->value[i];
                    }
                    const scalar corr = dot / (std::max(norm, eps) * denom * denom);
                    for (int k = 0; k < A; ++k) {
                        const size_t i = (static_cast<size_t>(ou) * A + k) * inner + in;
                        vn->grad[i] += g[i] / denom - corr * vn->value[i];
                    }
                }
            }
        },
        "l2_normalize");
}

Tensor standardize_columns(const Tensor& x, scalar eps) {
    if (x.rank() != 2) throw std::invalid_argument("standardize_columns: rank-2 required, got " + shape_str(x.shape()));
    const int B = x.dim(0), D = x.dim(1);
    if (B < 2) throw std::invalid_argument("standardize_columns: batch must be >= 2");
    const scalar* xp = x.data().data();
    const scalar invb = scalar(1) / static_cast<scalar>(B);

    auto xhat = std::make_shared<std::vector<scalar>>(x.data().size());
    auto inv_d = std::make_shared<std::vector<scalar>>(D);
    for (int d = 0; d < D; ++d) {
        scalar mu = 0;
        for (int b = 0; b < B; ++b) mu += xp[static_cast<size_t>(b) * D + d];
        mu *= invb;
        scalar var = 0;
        for (int b = 0; b < B; ++b) {
            const scalar dv = xp[static_cast<size_t>(b) * D + d] - mu;
            var += dv * dv;
        }
        var *= invb;
        const scalar inv = scalar(1) / std::sqrt(var + eps);
        (*inv_d)[d] = inv;
        for (int b = 0; b < B; ++b) {
            const size_t i = static_cast<size_t>(b) * D + d;
            (*xhat)[i] = (xp[i] - mu) * inv;
        }
    }
    std::vector<scalar> out = *xhat;
    auto xn = x.node_ptr();
    return make_op(
        x.shape(), std::move(out), {xn},
        [xn, xhat, inv_d, B, D, invb](Node& nd) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            const scalar* g = nd.grad.data();
            for (int d = 0; d < D; ++d) {
                scalar sg = 0, sgx = 0;
                for (int b = 0; b < B; ++b) {
                    const size_t i = static_cast<size_t>(b) * D + d;
                    sg += g[i];
                    sgx += g[i] * (*xhat)[i];
                }
                const scalar mg = sg * invb, mgx = sgx * invb, inv = (*inv_d)[d];
                for (int b = 0; b < B; ++b) {
                    const size_t i = static_cast<size_t>(b) * D + d;
                    xn->grad[i] += inv * (g[i] - mg - (*xhat)[i] * mgx);
                }
            }
        },
        "standardize_columns");
}

Tensor stop_gradient(const Tensor& v) {
    // value copy with no input edges: ancestors receive exactly zero
    auto n = std::make_shared<Node>();
    n->shape = v.shape();
    n->value.assign(v.data().begin(), v.data().end());
    n->op = "stop_gradient";
    n->requires_grad = false;
    return Tensor(std::move(n));
}

}  // namespace haug
