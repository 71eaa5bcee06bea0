#include "core/mixer.hpp"

#include <cmath>

#include "core/serialize.hpp"

namespace lswap {

namespace {

int space_code(Space s) {
    switch (s) {
        case Space::Z: return 0;
        case Space::W: return 1;
        case Space::Wplus: return 2;
    }
    return -1;
}

Space space_from_code(int c) {
    switch (c) {
        case 0: return Space::Z;
        case 1: return Space::W;
        case 2: return Space::Wplus;
    }
    throw IoError("mixer: unknown space code " + std::to_string(c));
}

}  // namespace

void MixerConfig::validate() const {
    if (fc_depth < 1) throw ConfigError("mixer: fc_depth must be >= 1");
    if (residual_coefficient < 0.0 || residual_coefficient > 2.0) {
        throw ConfigError("mixer: residual coefficient must lie in [0, 2], got " +
                          std::to_string(residual_coefficient));
    }
    if (d < 1) throw ConfigError("mixer: latent width must be positive");
    if (space == Space::Wplus && layers < 1) throw ConfigError("mixer: layers must be positive for W+");
}

MixerStack::MixerStack(const MixerConfig& config, uint64_t seed) : config_(config) {
    config_.validate();
    const size_t D = config_.d;
    const size_t H = config_.hidden();
    for (size_t m = 0; m < config_.num_mixers(); ++m) {
        for (size_t j = 0; j < config_.fc_depth; ++j) {
            const size_t in = (j == 0) ? 2 * D : H;
            const size_t out = (j + 1 == config_.fc_depth) ? D : H;
            const std::string base = "mixer" + std::to_string(m) + ".fc" + std::to_string(j);
            Array w(Shape{out, in});
            Array b(Shape{out});
            if (j + 1 < config_.fc_depth) {
                Rng rng(substream(seed, base));
                w = rng.normal_array({out, in}, 1.0 / std::sqrt(static_cast<double>(in)));
                quantize_f32(w);
            }
            // final layer stays zero: a fresh stack is the identity on the target
            params_.push_back(std::make_shared<const Array>(std::move(w)));
            names_.push_back(base + ".w");
            params_.push_back(std::make_shared<const Array>(std::move(b)));
            names_.push_back(base + ".b");
        }
    }
}

void MixerStack::set_params(std::vector<Array> updated) {
    if (updated.size() != params_.size()) throw ContractError("mixer: parameter count mismatch in update");
    for (size_t i = 0; i < updated.size(); ++i) {
        if (!(updated[i].shape() == params_[i]->shape())) {
            throw ContractError("mixer: parameter shape mismatch in update at " + names_[i]);
        }
        params_[i] = std::make_shared<const Array>(std::move(updated[i]));
    }
}

size_t MixerStack::parameter_count() const {
    size_t n = 0;
    for (const auto& p : params_) n += p->size();
    return n;
}

std::vector<Value> MixerStack::wrap(Tape& tape) const {
    std::vector<Value> out;
    out.reserve(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) out.push_back(tape.parameter(params_[i], names_[i]));
    return out;
}

std::vector<Value> MixerStack::wrap_constants() const {
    std::vector<Value> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(constant(p));
    return out;
}

void MixerStack::check_vector(const char* op, const Array& v) const {
    if (v.ndim() != 1 || v.size() != config_.d) {
        throw DimensionError(std::string(op) + ": expected vector of width " + std::to_string(config_.d) +
                             ", got " + shape_str(v.shape()));
    }
}

Value MixerStack::mix_layer(const std::vector<Value>& params, size_t i, const Value& s_i,
                            const Value& t_i) const {
    if (i >= config_.num_mixers()) {
        throw DimensionError("mix_layer: mixer index " + std::to_string(i) + " out of range (" +
                             std::to_string(config_.num_mixers()) + " mixers)");
    }
    check_vector("mix_layer", s_i.a());
    check_vector("mix_layer", t_i.a());
    const size_t per = 2 * config_.fc_depth;
    Value h = concat(s_i, t_i);
    for (size_t j = 0; j < config_.fc_depth; ++j) {
        h = add(matvec(params[i * per + 2 * j], h), params[i * per + 2 * j + 1]);
        if (j + 1 < config_.fc_depth) h = swish(h);
    }
    return add(scale(t_i, config_.residual_coefficient), h);
}

Array MixerStack::mix_layer(size_t i, const Array& s_i, const Array& t_i) const {
    return mix_layer(wrap_constants(), i, constant(s_i), constant(t_i)).a();
}

Value MixerStack::mix(const std::vector<Value>& params, const Value& code_s, const Value& code_t) const {
    check_same_shape("mix", code_s.a(), code_t.a());
    if (config_.space == Space::Wplus) {
        const size_t L = config_.layers;
        if (code_s.a().ndim() != 2 || code_s.a().dim(0) != L || code_s.a().dim(1) != config_.d) {
            throw DimensionError("mix: expected W+ stack of shape (" + std::to_string(L) + "," +
                                 std::to_string(config_.d) + "), got " + shape_str(code_s.a().shape()));
        }
        std::vector<Value> rows;
        rows.reserve(L);
        for (size_t i = 0; i < L; ++i) {
            rows.push_back(mix_layer(params, i, row(code_s, i), row(code_t, i)));
        }
        return stack_rows(rows);
    }
    return mix_layer(params, 0, code_s, code_t);
}

LatentCode MixerStack::mix(const LatentCode& code_s, const LatentCode& code_t) const {
    if (code_s.space != config_.space || code_t.space != config_.space) {
        throw SpaceError(std::string("mix: stack operates on ") + space_name(config_.space) + ", got " +
                         space_name(code_s.space) + " and " + space_name(code_t.space));
    }
    Value out = mix(wrap_constants(), constant(code_s.data), constant(code_t.data));
    return LatentCode{config_.space, out.a()};
}

std::vector<uint8_t> MixerStack::serialize() const {
    Container c("LSMIX001");
    c.put_config("fc_depth", static_cast<double>(config_.fc_depth));
    c.put_config("hidden_width", static_cast<double>(config_.hidden_width));
    c.put_config("alpha", config_.residual_coefficient);
    c.put_config("space", static_cast<double>(space_code(config_.space)));
    c.put_config("d", static_cast<double>(config_.d));
    c.put_config("layers", static_cast<double>(config_.layers));
    for (size_t i = 0; i < params_.size(); ++i) c.put_array(names_[i], *params_[i]);
    return c.serialize();
}

uint64_t MixerStack::checksum() const {
    const auto bytes = serialize();
    return fnv1a64(bytes.data(), bytes.size());
}

void MixerStack::save(const std::string& path) const { write_file_bytes(path, serialize()); }

MixerStack MixerStack::load(const std::string& path) {
    Container c = Container::load(path, "LSMIX001");
    MixerConfig cfg;
    cfg.fc_depth = static_cast<size_t>(c.config_value("fc_depth"));
    cfg.hidden_width = static_cast<size_t>(c.config_value("hidden_width"));
    cfg.residual_coefficient = c.config_value("alpha");
    cfg.space = space_from_code(static_cast<int>(c.config_value("space")));
    cfg.d = static_cast<size_t>(c.config_value("d"));
    cfg.layers = static_cast<size_t>(c.config_value("layers"));
    cfg.validate();
    MixerStack s;
    s.config_ = cfg;
    for (size_t m = 0; m < cfg.num_mixers(); ++m) {
        for (size_t j = 0; j < cfg.fc_depth; ++j) {
            const std::string base = "mixer" + std::to_string(m) + ".fc" + std::to_string(j);
            s.params_.push_back(std::make_shared<const Array>(c.array(base + ".w")));
            s.names_.push_back(base + ".w");
            s.params_.push_back(std::make_shared<const Array>(c.array(base + ".b")));
            s.names_.push_back(base + ".b");
        }
    }
    return s;
}

}  // namespace lswap
