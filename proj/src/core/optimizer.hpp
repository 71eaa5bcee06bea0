#pragma once

#include <memory>
#include <vector>

#include "core/array.hpp"

namespace lswap {

struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// Adaptive moments with decoupled weight decay. Parameters are replaced, not
// mutated, so arrays stay immutable after construction.
class AdamW {
  public:
    AdamW(const AdamWConfig& config, const std::vector<Shape>& shapes);

    std::vector<Array> step(const std::vector<std::shared_ptr<const Array>>& params,
                            const std::vector<Array>& grads);

    size_t steps_taken() const { return t_; }
    const AdamWConfig& config() const { return config_; }

  private:
    AdamWConfig config_;
    std::vector<Array> m_, v_;
    size_t t_ = 0;
};

}  // namespace lswap
