#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tape.hpp"

namespace lswap {

enum class Space { Z, W, Wplus };
const char* space_name(Space s);

// A latent vector ((D,) for Z and W) or stack of layer vectors ((L,D) for W+),
// tagged with the space it lives in.
struct LatentCode {
    Space space = Space::Z;
    Array data;
};

LatentCode broadcast_w(const LatentCode& w, size_t layers);
void check_space(const char* op, const LatentCode& code, Space expect);

struct WorldConfig {
    uint64_t seed = 42;
    size_t d = 64;           // latent width
    size_t layers = 18;      // W+ layers, two per pyramid level
    size_t resolution = 32;  // output image side
    size_t k_id = 16;
    size_t k_ex = 8;
    size_t k_po = 4;
    size_t k_landmarks = 68;
    // architecture widths (not part of the external config schema)
    size_t channels = 8;
    size_t embed_dim = 512;
    size_t id_core = 16;

    size_t num_levels() const { return layers / 2; }
    size_t level_res(size_t k) const;
    void validate() const;
};

struct AffinePair {
    std::shared_ptr<const Array> w, b;
};

struct GeneratorParams {
    struct StyleLayer {
        AffinePair mod_scale, mod_shift;
        std::shared_ptr<const Array> mix;  // (C,C) channel mixer, applied pixelwise
    };
    struct Level {
        size_t res = 0;
        std::shared_ptr<const Array> texture;  // (C,res,res) fixed detail field
        StyleLayer style[2];
        std::shared_ptr<const Array> to_rgb;  // (3,C)
    };
    std::shared_ptr<const Array> base;  // (C,4,4)
    std::vector<Level> levels;

    // canonical parameter order: base, then per level texture, styles, rgb
    std::vector<std::pair<std::string, std::shared_ptr<const Array>>> named() const;
    std::vector<std::shared_ptr<const Array>*> slots();
    GeneratorParams deep_copy() const;
};

// Generator parameters lifted into tape values; constants for frozen use,
// trainable leaves when pivotally tuning a copy.
struct GeneratorValues {
    struct StyleLayer {
        Value scale_w, scale_b, shift_w, shift_b, mix;
    };
    struct Level {
        size_t res = 0;
        Value texture;
        StyleLayer style[2];
        Value to_rgb;
    };
    Value base;
    std::vector<Level> levels;

    static GeneratorValues constants(const GeneratorParams& p);
    // wraps every parameter as a trainable leaf, appending them to flat in
    // the canonical order when given
    static GeneratorValues parameters(Tape& tape, const GeneratorParams& p, const std::string& prefix,
                                      std::vector<Value>* flat = nullptr);
};

enum class EmbedKind { train, eval };

struct CoeffValues {
    Value id, expr, pose;
};

// fuse takes identity coefficients from the source and expression/pose from
// the target.
CoeffValues fuse_coeffs(const CoeffValues& source, const CoeffValues& target);

// Seed-deterministic immutable stand-ins for every pretrained component:
// mapping network, layered generator, train/eval identity embedders, and the
// coefficient/landmark pipeline. All parameters are pure functions of
// (seed, config) and kept f32-representable so serialization is lossless.
class FrozenWorld {
  public:
    explicit FrozenWorld(const WorldConfig& config);

    const WorldConfig& config() const { return config_; }

    // -- latent plumbing --
    Value map_z_to_w(const Value& z) const;
    LatentCode map_z_to_w(const LatentCode& z) const;
    LatentCode sample_z(Rng& rng) const;
    LatentCode anchor_w() const;  // map of the zero latent

    // -- generation --
    Value generate(const Value& wplus) const;
    Value generate(const Value& wplus, const GeneratorValues& gen) const;
    Array generate_image(const LatentCode& code) const;

    // -- identity / coefficients --
    Value identity_features(const Value& image) const;  // shared semantic core
    Value embed(const Value& image, EmbedKind kind) const;
    Array embed_image(const Array& image, EmbedKind kind) const;
    CoeffValues extract_coeffs(const Value& image) const;
    Value decode_landmarks(const CoeffValues& coeffs) const;  // (K,2)

    const GeneratorParams& generator() const { return gen_; }

    // -- persistence --
    uint64_t checksum() const;
    std::vector<uint8_t> serialize() const;
    void save(const std::string& path) const;
    static FrozenWorld load(const std::string& path);

    size_t half_res() const;  // pooled resolution seen by the identity core

  private:
    FrozenWorld() = default;
    void check_image(const char* op, const Array& image) const;
    void build(uint64_t seed, const class Container* file);
    void collect_params();

    WorldConfig config_;

    std::vector<AffinePair> mapping_;  // 8 fc layers
    GeneratorParams gen_;

    struct IdCore {
        AffinePair l1, l2;
        std::shared_ptr<const Array> ref;  // pooled anchor features
    } id_core_;
    struct Embedder {
        AffinePair l1, l2;
    } embed_train_, embed_eval_;
    struct CoeffNet {
        AffinePair id;        // identity core -> k_id
        AffinePair ex1, ex2;  // high band -> k_ex
        AffinePair po;        // coarse pool -> k_po
        AffinePair lm1, lm2;  // coeffs -> 2*k_landmarks
    } coeff_;

    std::vector<std::pair<std::string, std::shared_ptr<const Array>>> params_;
};

// Image-space helpers shared with the losses/analysis code.
Value pool_to(const Value& image, size_t target_res);
Value upsample_to(const Value& image, size_t target_res);
Value flatten(const Value& x);

}  // namespace lswap
