#include "core/optimizer.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace lswap {

AdamW::AdamW(const AdamWConfig& config, const std::vector<Shape>& shapes) : config_(config) {
    m_.reserve(shapes.size());
    v_.reserve(shapes.size());
    for (const Shape& s : shapes) {
        m_.emplace_back(s);
        v_.emplace_back(s);
    }
}

std::vector<Array> AdamW::step(const std::vector<std::shared_ptr<const Array>>& params,
                               const std::vector<Array>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw ContractError("optimizer: parameter/gradient count mismatch");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    std::vector<Array> updated;
    updated.reserve(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
        const Array& p = *params[i];
        const Array& g = grads[i];
        check_same_shape("optimizer", p, g);
        Array out = p;
        Array& m = m_[i];
        Array& v = v_[i];
        for (size_t j = 0; j < p.size(); ++j) {
            m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g[j];
            v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            out[j] -= config_.lr * (mhat / (std::sqrt(vhat) + config_.eps) + config_.weight_decay * p[j]);
        }
        out.apply_precision();
        out.check_finite("optimizer: updated parameter");
        updated.push_back(std::move(out));
    }
    return updated;
}

}  // namespace lswap
