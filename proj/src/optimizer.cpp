#include "haug/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace haug {

float lr_at(int step, int total_steps, float base_lr, int batch_size) {
    if (step < 0 || step > total_steps) throw std::invalid_argument("lr_at: step outside schedule");
    const double scaled = static_cast<double>(base_lr) * batch_size / 256.0;
    const double cosine =
        0.5 * (1.0 + std::cos(3.14159265358979323846 * static_cast<double>(step) / total_steps));
    return static_cast<float>(scaled * cosine);
}

SgdMomentum::SgdMomentum(ParamRegistry& params, float momentum, float weight_decay)
    : params_(&params), momentum_(momentum), weight_decay_(weight_decay) {
    for (size_t i = 0; i < params.entries.size(); ++i) {
        if (!params.entries[i].trainable) continue;
        index_.push_back(i);
        velocity_.push_back(Tensor::zeros(params.entries[i].tensor.shape()));
    }
}

void sgd_update(std::span<scalar> param, std::span<const scalar> grad, std::span<scalar> velocity,
                float lr, float momentum, float weight_decay) {
    const scalar m = static_cast<scalar>(momentum);
    const scalar wd = static_cast<scalar>(weight_decay);
    const scalar step = static_cast<scalar>(lr);
    for (size_t i = 0; i < param.size(); ++i) {
        const scalar g = (i < grad.size() ? grad[i] : scalar(0)) + wd * param[i];
        velocity[i] = m * velocity[i] + g;
        param[i] -= step * velocity[i];
    }
}

void SgdMomentum::step(float lr) {
    for (size_t s = 0; s < index_.size(); ++s) {
        auto& entry = params_->entries[index_[s]];
        auto param = entry.tensor.data();
        auto vel = velocity_[s].data();
        const auto grad = entry.tensor.grad();
        const float wd = entry.decay ? weight_decay_ : 0.0f;
        sgd_update(param, grad, vel, lr, momentum_, wd);
    }
}

std::vector<std::pair<std::string, Tensor>> SgdMomentum::state() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.reserve(index_.size());
    for (size_t s = 0; s < index_.size(); ++s) {
        out.emplace_back("optim." + params_->entries[index_[s]].name, velocity_[s]);
    }
    return out;
}

void SgdMomentum::load_state(const std::vector<std::pair<std::string, Tensor>>& entries) {
    for (size_t s = 0; s < index_.size(); ++s) {
        const std::string want = "optim." + params_->entries[index_[s]].name;
        bool found = false;
        for (const auto& [name, tensor] : entries) {
            if (name != want) continue;
            if (tensor.shape() != velocity_[s].shape())
                throw std::runtime_error("optimizer state shape mismatch for " + want);
            std::copy(tensor.data().begin(), tensor.data().end(), velocity_[s].data().begin());
            found = true;
            break;
        }
        if (!found) throw std::runtime_error("optimizer state missing entry " + want);
    }
}

}  // namespace haug
