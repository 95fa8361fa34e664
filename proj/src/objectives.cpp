#include "haug/objectives.hpp"

#include <stdexcept>

#include "haug/ops.hpp"

namespace haug {

const char* objective_name(ObjectiveKind k) {
    return k == ObjectiveKind::simsiam ? "simsiam" : "barlow_twins";
}

ObjectiveKind objective_from_name(const std::string& name) {
    if (name == "simsiam") return ObjectiveKind::simsiam;
    if (name == "barlow_twins" || name == "barlow") return ObjectiveKind::barlow_twins;
    throw std::invalid_argument("unknown objective '" + name + "'");
}

namespace {

void require_batch(const Tensor& z1, const Tensor& z2, const char* op) {
    if (z1.rank() != 2 || z2.rank() != 2 || z1.shape() != z2.shape()) {
        throw std::invalid_argument(std::string(op) + ": expected matching [B,D] inputs, got " +
                                    shape_str(z1.shape()) + " vs " + shape_str(z2.shape()));
    }
    if (z1.dim(0) < 2) throw std::invalid_argument(std::string(op) + ": batch must be >= 2");
}

// D(p, t) = mean over rows of -cos(p_r, t_r); t enters detached
Tensor branch_distance(const Tensor& p, const Tensor& target_detached) {
    const scalar inv_b = scalar(1) / static_cast<scalar>(p.dim(0));
    Tensor cos_sum = sum(mul(l2_normalize(p, 1), l2_normalize(target_detached, 1)));
    return scale(cos_sum, -inv_b);
}

}  // namespace

Tensor simsiam_loss(const Tensor& z1, const Tensor& z2, const PredictorFn& predictor) {
    require_batch(z1, z2, "simsiam_loss");
    Tensor p1 = predictor ? predictor(z1) : z1;
    Tensor p2 = predictor ? predictor(z2) : z2;
    Tensor d1 = branch_distance(p1, stop_gradient(z2));
    Tensor d2 = branch_distance(p2, stop_gradient(z1));
    return add(scale(d1, scalar(0.5)), scale(d2, scalar(0.5)));
}

Tensor barlow_twins_loss(const Tensor& z1, const Tensor& z2, scalar lambda) {
    require_batch(z1, z2, "barlow_twins_loss");
    const int B = z1.dim(0), D = z1.dim(1);
    Tensor a = standardize_columns(z1);
    Tensor b = standardize_columns(z2);
    Tensor c = scale(matmul(transpose(a), b), scalar(1) / static_cast<scalar>(B));

    // (C - I)^2 weighted 1 on the diagonal and lambda off it
    std::vector<scalar> eye(static_cast<size_t>(D) * D, scalar(0));
    std::vector<scalar> wmask(static_cast<size_t>(D) * D, lambda);
    for (int i = 0; i < D; ++i) {
        eye[static_cast<size_t>(i) * D + i] = scalar(1);
        wmask[static_cast<size_t>(i) * D + i] = scalar(1);
    }
    Tensor diff = sub(c, Tensor::from_data({D, D}, std::move(eye)));
    return sum(mul(mul(diff, diff), Tensor::from_data({D, D}, std::move(wmask))));
}

LossReport overall_loss(const std::array<Tensor, 4>& stage_losses, ObjectiveKind kind,
                        const std::array<float, 4>& stage_weights) {
    LossReport report;
    report.kind = kind;
    report.per_stage = stage_losses;
    Tensor acc;
    for (int i = 0; i < 4; ++i) {
        if (stage_losses[i].numel() != 1)
            throw std::invalid_argument("overall_loss: stage loss must be scalar");
        const float w = stage_weights[i];
        if (w == 0.0f) continue;  // zero-weight stages stay out of the graph
        Tensor term = w == 1.0f ? stage_losses[i] : scale(stage_losses[i], scalar(w));
        acc = acc.defined() ? add(acc, term) : term;
    }
    report.overall = acc.defined() ? acc : Tensor::zeros({1});
    return report;
}

}  // namespace haug
