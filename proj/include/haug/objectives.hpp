#pragma once

#include <array>
#include <functional>
#include <string>

#include "haug/tensor.hpp"

namespace haug {

enum class ObjectiveKind { simsiam, barlow_twins };

const char* objective_name(ObjectiveKind k);
ObjectiveKind objective_from_name(const std::string& name);

struct LossReport {
    std::array<Tensor, 4> per_stage;  // scalar graph nodes L1..L4
    Tensor overall;                   // scalar; exact fixed-order sum
    ObjectiveKind kind = ObjectiveKind::simsiam;
};

using PredictorFn = std::function<Tensor(const Tensor&)>;

// symmetric stop-gradient objective: mean negative cosine between the
// predicted branch and the detached opposite projection, averaged both ways
Tensor simsiam_loss(const Tensor& z1, const Tensor& z2, const PredictorFn& predictor);

// cross-correlation-to-identity objective over batch-standardized columns
Tensor barlow_twins_loss(const Tensor& z1, const Tensor& z2, scalar lambda = scalar(0.005));

// unweighted fixed-order sum of the four stage losses
LossReport overall_loss(const std::array<Tensor, 4>& stage_losses, ObjectiveKind kind,
                        const std::array<float, 4>& stage_weights = {1, 1, 1, 1});

}  // namespace haug
