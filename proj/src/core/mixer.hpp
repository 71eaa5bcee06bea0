#pragma once

#include <memory>
#include <string>
#include <vector>

#include "core/world.hpp"

namespace lswap {

struct MixerConfig {
    size_t fc_depth = 5;
    size_t hidden_width = 0;  // 0 means the latent width
    double residual_coefficient = 1.0;
    Space space = Space::Wplus;
    size_t d = 64;      // latent width
    size_t layers = 18; // W+ layers

    size_t num_mixers() const { return space == Space::Wplus ? layers : 1; }
    size_t hidden() const { return hidden_width == 0 ? d : hidden_width; }
    void validate() const;
};

// Trainable latent mixers: per W+ layer (or a single one for Z/W), a stack of
// fully-connected layers with swish between them, over the concatenated
// (source, target) codes, plus a residual add of the target scaled by the
// residual coefficient. The final layer starts at zero so a fresh stack is
// exactly the alpha-scaled target.
class MixerStack {
  public:
    MixerStack(const MixerConfig& config, uint64_t seed);

    const MixerConfig& config() const { return config_; }

    // flat parameter list: mixer-major, then (w, b) per fc layer
    size_t num_params() const { return params_.size(); }
    const std::vector<std::shared_ptr<const Array>>& params() const { return params_; }
    const std::vector<std::string>& param_names() const { return names_; }
    void set_params(std::vector<Array> updated);
    size_t parameter_count() const;  // total scalar parameters

    // wraps every parameter as a trainable leaf on the tape, in flat order
    std::vector<Value> wrap(Tape& tape) const;
    std::vector<Value> wrap_constants() const;

    Value mix_layer(const std::vector<Value>& params, size_t i, const Value& s_i, const Value& t_i) const;
    Array mix_layer(size_t i, const Array& s_i, const Array& t_i) const;

    // W+: layer i of the output comes from mixer i; Z/W: the single mixer
    // applied to the vectors.
    Value mix(const std::vector<Value>& params, const Value& code_s, const Value& code_t) const;
    LatentCode mix(const LatentCode& code_s, const LatentCode& code_t) const;

    uint64_t checksum() const;
    std::vector<uint8_t> serialize() const;
    void save(const std::string& path) const;
    static MixerStack load(const std::string& path);

  private:
    MixerStack() = default;
    void check_vector(const char* op, const Array& v) const;

    MixerConfig config_;
    std::vector<std::shared_ptr<const Array>> params_;
    std::vector<std::string> names_;
};

}  // namespace lswap
