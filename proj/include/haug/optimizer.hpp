#pragma once

#include <string>
#include <utility>
#include <vector>

#include "haug/model.hpp"
#include "haug/tensor.hpp"

namespace haug {

// lr = (base_lr * batch / 256) * 0.5 * (1 + cos(pi * step / total_steps))
float lr_at(int step, int total_steps, float base_lr, int batch_size);

// classic SGD: v <- m*v + g + wd*p ; p <- p - lr*v.
// weight decay touches entries flagged decay (conv/fc weights) only.
class SgdMomentum {
  public:
    SgdMomentum(ParamRegistry& params, float momentum, float weight_decay);

    void step(float lr);

    // velocity buffers for checkpointing, named "optim.<param name>"
    std::vector<std::pair<std::string, Tensor>> state() const;
    void load_state(const std::vector<std::pair<std::string, Tensor>>& entries);

  private:
    ParamRegistry* params_;
    float momentum_, weight_decay_;
    std::vector<Tensor> velocity_;  // parallel to trainable entries
    std::vector<size_t> index_;     // registry indices of trainable entries
};

// single-buffer variant used by the probe classifiers
void sgd_update(std::span<scalar> param, std::span<const scalar> grad, std::span<scalar> velocity,
                float lr, float momentum, float weight_decay);

}  // namespace haug
