#include "core/world.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "core/serialize.hpp"

namespace lswap {

namespace {

// Gain constants for the seeded stand-in networks. Chosen so feature and
// latent magnitudes stay O(1) through the depth and the three loss terms are
// comparable at their default weights.
constexpr double kMapWeightGain = 1.5;  // x 1/sqrt(fan_in), compensates swish variance loss
constexpr double kMapBiasStd = 0.2;
constexpr double kMixGain = 1.4;     // channel mixer scale per style layer
constexpr double kStyleGain = 0.4;   // modulation strength
constexpr double kTextureStd = 0.6;  // per-level detail field amplitude
constexpr double kCoreWeightGain = 2.5;
constexpr double kEmbedWeightGain = 3.0;
constexpr double kLandmarkScale = 0.08;
constexpr size_t kCoreHidden = 64;
constexpr size_t kEmbedHidden = 128;
constexpr size_t kExprHidden = 32;
constexpr size_t kLandmarkHidden = 64;

bool power_of_two(size_t v) { return v != 0 && (v & (v - 1)) == 0; }

Value aff(const AffinePair& p, const Value& x) { return add(matvec(constant(p.w), x), constant(p.b)); }

std::shared_ptr<const Array> shared(Array a) { return std::make_shared<const Array>(std::move(a)); }

// Random matrix with orthonormal rows, scaled by gain. Deterministic given
// the rng stream.
Array orthogonal(Rng& rng, size_t n, double gain) {
    Array m = rng.normal_array({n, n});
    for (size_t i = 0; i < n; ++i) {
        double* ri = m.data() + i * n;
        for (size_t j = 0; j < i; ++j) {
            const double* rj = m.data() + j * n;
            double proj = 0.0;
            for (size_t k = 0; k < n; ++k) proj += ri[k] * rj[k];
            double njj = 0.0;
            for (size_t k = 0; k < n; ++k) njj += rj[k] * rj[k];
            for (size_t k = 0; k < n; ++k) ri[k] -= proj / njj * rj[k];
        }
    }
    for (size_t i = 0; i < n; ++i) {
        double* ri = m.data() + i * n;
        double nrm = 0.0;
        for (size_t k = 0; k < n; ++k) nrm += ri[k] * ri[k];
        nrm = std::sqrt(nrm);
        for (size_t k = 0; k < n; ++k) ri[k] = gain * ri[k] / nrm;
    }
    return m;
}

}  // namespace

const char* space_name(Space s) {
    switch (s) {
        case Space::Z: return "Z";
        case Space::W: return "W";
        case Space::Wplus: return "W+";
    }
    return "?";
}

void check_space(const char* op, const LatentCode& code, Space expect) {
    if (code.space != expect) {
        throw SpaceError(std::string(op) + ": expected a " + space_name(expect) + " code, got " +
                         space_name(code.space));
    }
}

LatentCode broadcast_w(const LatentCode& w, size_t layers) {
    check_space("broadcast_w", w, Space::W);
    const size_t d = w.data.size();
    Array out(Shape{layers, d});
    for (size_t l = 0; l < layers; ++l) {
        for (size_t j = 0; j < d; ++j) out[l * d + j] = w.data[j];
    }
    return LatentCode{Space::Wplus, std::move(out)};
}

size_t WorldConfig::level_res(size_t k) const {
    size_t res = 4;
    for (size_t i = 0; i < k; ++i) res = std::min(res * 2, resolution);
    return res;
}

void WorldConfig::validate() const {
    if (layers < 2 || layers % 2 != 0) {
        throw ConfigError("world: layers must be even and >= 2, got " + std::to_string(layers));
    }
    if (!power_of_two(resolution) || resolution < 8) {
        throw ConfigError("world: resolution must be a power of two >= 8, got " + std::to_string(resolution));
    }
    if (d < 4) throw ConfigError("world: latent width must be >= 4, got " + std::to_string(d));
    if (k_id == 0 || k_ex == 0 || k_po == 0 || k_landmarks == 0) {
        throw ConfigError("world: coefficient widths must be positive");
    }
    if (channels < 2 || embed_dim < 8 || id_core < 2) throw ConfigError("world: architecture widths too small");
}

std::vector<std::pair<std::string, std::shared_ptr<const Array>>> GeneratorParams::named() const {
    std::vector<std::pair<std::string, std::shared_ptr<const Array>>> out;
    out.emplace_back("gen.base", base);
    for (size_t k = 0; k < levels.size(); ++k) {
        const std::string p = "gen.L" + std::to_string(k) + ".";
        if (levels[k].texture) out.emplace_back(p + "texture", levels[k].texture);
        for (int j = 0; j < 2; ++j) {
            const std::string q = p + "s" + std::to_string(j) + ".";
            out.emplace_back(q + "scale_w", levels[k].style[j].mod_scale.w);
            out.emplace_back(q + "scale_b", levels[k].style[j].mod_scale.b);
            out.emplace_back(q + "shift_w", levels[k].style[j].mod_shift.w);
            out.emplace_back(q + "shift_b", levels[k].style[j].mod_shift.b);
            out.emplace_back(q + "mix", levels[k].style[j].mix);
        }
        out.emplace_back(p + "rgb", levels[k].to_rgb);
    }
    return out;
}

GeneratorParams GeneratorParams::deep_copy() const {
    GeneratorParams c;
    auto dup = [](const std::shared_ptr<const Array>& a) {
        return a ? std::make_shared<const Array>(*a) : nullptr;
    };
    c.base = dup(base);
    c.levels.resize(levels.size());
    for (size_t k = 0; k < levels.size(); ++k) {
        c.levels[k].res = levels[k].res;
        c.levels[k].texture = dup(levels[k].texture);
        c.levels[k].to_rgb = dup(levels[k].to_rgb);
        for (int j = 0; j < 2; ++j) {
            c.levels[k].style[j].mod_scale = {dup(levels[k].style[j].mod_scale.w),
                                              dup(levels[k].style[j].mod_scale.b)};
            c.levels[k].style[j].mod_shift = {dup(levels[k].style[j].mod_shift.w),
                                              dup(levels[k].style[j].mod_shift.b)};
            c.levels[k].style[j].mix = dup(levels[k].style[j].mix);
        }
    }
    return c;
}

GeneratorValues GeneratorValues::constants(const GeneratorParams& p) {
    GeneratorValues v;
    v.base = constant(p.base);
    v.levels.resize(p.levels.size());
    for (size_t k = 0; k < p.levels.size(); ++k) {
        v.levels[k].res = p.levels[k].res;
        if (p.levels[k].texture) v.levels[k].texture = constant(p.levels[k].texture);
        v.levels[k].to_rgb = constant(p.levels[k].to_rgb);
        for (int j = 0; j < 2; ++j) {
            v.levels[k].style[j].scale_w = constant(p.levels[k].style[j].mod_scale.w);
            v.levels[k].style[j].scale_b = constant(p.levels[k].style[j].mod_scale.b);
            v.levels[k].style[j].shift_w = constant(p.levels[k].style[j].mod_shift.w);
            v.levels[k].style[j].shift_b = constant(p.levels[k].style[j].mod_shift.b);
            v.levels[k].style[j].mix = constant(p.levels[k].style[j].mix);
        }
    }
    return v;
}

std::vector<std::shared_ptr<const Array>*> GeneratorParams::slots() {
    std::vector<std::shared_ptr<const Array>*> out;
    out.push_back(&base);
    for (auto& lv : levels) {
        if (lv.texture) out.push_back(&lv.texture);
        for (int j = 0; j < 2; ++j) {
            out.push_back(&lv.style[j].mod_scale.w);
            out.push_back(&lv.style[j].mod_scale.b);
            out.push_back(&lv.style[j].mod_shift.w);
            out.push_back(&lv.style[j].mod_shift.b);
            out.push_back(&lv.style[j].mix);
        }
        out.push_back(&lv.to_rgb);
    }
    return out;
}

GeneratorValues GeneratorValues::parameters(Tape& tape, const GeneratorParams& p, const std::string& prefix,
                                            std::vector<Value>* flat) {
    GeneratorValues v;
    auto wrap = [&](const std::shared_ptr<const Array>& arr, const std::string& name) {
        Value val = tape.parameter(arr, prefix + name);
        if (flat) flat->push_back(val);
        return val;
    };
    v.base = wrap(p.base, "gen.base");
    v.levels.resize(p.levels.size());
    for (size_t k = 0; k < p.levels.size(); ++k) {
        const std::string lp = "gen.L" + std::to_string(k) + ".";
        v.levels[k].res = p.levels[k].res;
        if (p.levels[k].texture) v.levels[k].texture = wrap(p.levels[k].texture, lp + "texture");
        for (int j = 0; j < 2; ++j) {
            const std::string sp = lp + "s" + std::to_string(j) + ".";
            v.levels[k].style[j].scale_w = wrap(p.levels[k].style[j].mod_scale.w, sp + "scale_w");
            v.levels[k].style[j].scale_b = wrap(p.levels[k].style[j].mod_scale.b, sp + "scale_b");
            v.levels[k].style[j].shift_w = wrap(p.levels[k].style[j].mod_shift.w, sp + "shift_w");
            v.levels[k].style[j].shift_b = wrap(p.levels[k].style[j].mod_shift.b, sp + "shift_b");
            v.levels[k].style[j].mix = wrap(p.levels[k].style[j].mix, sp + "mix");
        }
        v.levels[k].to_rgb = wrap(p.levels[k].to_rgb, lp + "rgb");
    }
    return v;
}

CoeffValues fuse_coeffs(const CoeffValues& source, const CoeffValues& target) {
    return CoeffValues{source.id, target.expr, target.pose};
}

// ---- image helpers -----------------------------------------------------------

Value pool_to(const Value& image, size_t target_res) {
    if (image.a().ndim() != 3) throw DimensionError("pool_to: expects (C,H,W)");
    Value v = image;
    while (v.a().dim(1) > target_res) v = avgpool2(v);
    if (v.a().dim(1) != target_res) throw DimensionError("pool_to: resolution not reachable by halving");
    return v;
}

Value upsample_to(const Value& image, size_t target_res) {
    if (image.a().ndim() != 3) throw DimensionError("upsample_to: expects (C,H,W)");
    Value v = image;
    while (v.a().dim(1) < target_res) v = upsample2(v);
    if (v.a().dim(1) != target_res) throw DimensionError("upsample_to: resolution not reachable by doubling");
    return v;
}

Value flatten(const Value& x) { return reshape(x, Shape{x.a().size()}); }

// ---- construction ------------------------------------------------------------

FrozenWorld::FrozenWorld(const WorldConfig& config) : config_(config) {
    config_.validate();
    build(config_.seed, nullptr);
}

size_t FrozenWorld::half_res() const { return std::max<size_t>(4, config_.resolution / 2); }

void FrozenWorld::build(uint64_t seed, const Container* file) {
    const size_t D = config_.d, C = config_.channels, R = config_.resolution;

    auto adopt = [&](const std::string& name, Array a) -> std::shared_ptr<const Array> {
        if (file) {
            const Array& fa = file->array(name);
            if (!(fa.shape() == a.shape())) throw IoError("world: array '" + name + "' has unexpected shape");
            a = fa;
        }
        quantize_f32(a);
        a.check_finite("world parameter " + name);
        return shared(std::move(a));
    };
    auto gauss = [&](const std::string& name, Shape shape, double stddev) {
        Rng r(substream(seed, name));
        return adopt(name, r.normal_array(std::move(shape), stddev));
    };
    auto ortho = [&](const std::string& name, size_t n, double gain) {
        Rng r(substream(seed, name));
        return adopt(name, orthogonal(r, n, gain));
    };

    // mapping network: 8 affine+swish layers D -> D
    mapping_.clear();
    for (int i = 0; i < 8; ++i) {
        const std::string p = "map.fc" + std::to_string(i) + ".";
        mapping_.push_back({gauss(p + "w", {D, D}, kMapWeightGain / std::sqrt(double(D))),
                            gauss(p + "b", {D}, kMapBiasStd)});
    }

    // generator pyramid
    gen_ = GeneratorParams{};
    gen_.base = gauss("gen.base", {C, 4, 4}, 1.0);
    gen_.levels.resize(config_.num_levels());
    for (size_t k = 0; k < gen_.levels.size(); ++k) {
        auto& lv = gen_.levels[k];
        lv.res = config_.level_res(k);
        const std::string p = "gen.L" + std::to_string(k) + ".";
        if (k > 0) lv.texture = gauss(p + "texture", {C, lv.res, lv.res}, kTextureStd);
        for (int j = 0; j < 2; ++j) {
            const std::string q = p + "s" + std::to_string(j) + ".";
            lv.style[j].mod_scale = {gauss(q + "scale_w", {C, D}, 1.0 / std::sqrt(double(D))),
                                     gauss(q + "scale_b", {C}, 0.3)};
            lv.style[j].mod_shift = {gauss(q + "shift_w", {C, D}, 1.0 / std::sqrt(double(D))),
                                     gauss(q + "shift_b", {C}, 0.3)};
            lv.style[j].mix = ortho(q + "mix", C, kMixGain);
        }
        lv.to_rgb = gauss(p + "rgb", {3, C}, 1.0 / std::sqrt(double(C)));
    }

    // identity core: pooled anchor-centered features -> id_core dims
    const size_t core_in = 3 * half_res() * half_res();
    {
        // reference features from the world's anchor image, G(broadcast(map(0)))
        LatentCode z0{Space::Z, Array(Shape{D})};
        const LatentCode w0 = map_z_to_w(z0);
        const Array anchor = generate_image(broadcast_w(w0, config_.layers));
        Value pooled = flatten(pool_to(constant(anchor), half_res()));
        Array ref(Shape{core_in});
        for (size_t i = 0; i < core_in; ++i) ref[i] = pooled.a()[i];
        id_core_.ref = adopt("idcore.ref", std::move(ref));
    }
    id_core_.l1 = {gauss("idcore.l1.w", {kCoreHidden, core_in}, kCoreWeightGain / std::sqrt(double(core_in))),
                   gauss("idcore.l1.b", {kCoreHidden}, 0.1)};
    id_core_.l2 = {
        gauss("idcore.l2.w", {config_.id_core, kCoreHidden}, kCoreWeightGain / std::sqrt(double(kCoreHidden))),
        gauss("idcore.l2.b", {config_.id_core}, 0.1)};

    // identity embedders: disjoint seed streams, private lifts over the core
    auto build_embed = [&](const char* name) {
        Embedder e;
        const std::string p = name;
        e.l1 = {gauss(p + ".l1.w", {kEmbedHidden, config_.id_core},
                      kEmbedWeightGain / std::sqrt(double(config_.id_core))),
                gauss(p + ".l1.b", {kEmbedHidden}, 0.02)};
        e.l2 = {gauss(p + ".l2.w", {config_.embed_dim, kEmbedHidden}, 1.0 / std::sqrt(double(kEmbedHidden))),
                gauss(p + ".l2.b", {config_.embed_dim}, 0.01)};
        return e;
    };
    embed_train_ = build_embed("embed.train");
    embed_eval_ = build_embed("embed.eval");

    // coefficient extractor heads and landmark decoder
    const size_t hi_in = 3 * R * R;
    coeff_.id = {gauss("coef.id.w", {config_.k_id, config_.id_core}, 1.0 / std::sqrt(double(config_.id_core))),
                 gauss("coef.id.b", {config_.k_id}, 0.1)};
    coeff_.ex1 = {gauss("coef.ex1.w", {kExprHidden, hi_in}, 1.0 / std::sqrt(double(hi_in))),
                  gauss("coef.ex1.b", {kExprHidden}, 0.1)};
    coeff_.ex2 = {gauss("coef.ex2.w", {config_.k_ex, kExprHidden}, 1.0 / std::sqrt(double(kExprHidden))),
                  gauss("coef.ex2.b", {config_.k_ex}, 0.1)};
    coeff_.po = {gauss("coef.po.w", {config_.k_po, 3 * 4 * 4}, 1.0 / std::sqrt(48.0)),
                 gauss("coef.po.b", {config_.k_po}, 0.1)};
    const size_t k_total = config_.k_id + config_.k_ex + config_.k_po;
    coeff_.lm1 = {gauss("lmk.l1.w", {kLandmarkHidden, k_total}, 1.0 / std::sqrt(double(k_total))),
                  gauss("lmk.l1.b", {kLandmarkHidden}, 0.1)};
    coeff_.lm2 = {gauss("lmk.l2.w", {2 * config_.k_landmarks, kLandmarkHidden},
                        kLandmarkScale / std::sqrt(double(kLandmarkHidden))),
                  gauss("lmk.l2.b", {2 * config_.k_landmarks}, 0.01)};

    collect_params();
}

void FrozenWorld::collect_params() {
    params_.clear();
    for (size_t i = 0; i < mapping_.size(); ++i) {
        params_.emplace_back("map.fc" + std::to_string(i) + ".w", mapping_[i].w);
        params_.emplace_back("map.fc" + std::to_string(i) + ".b", mapping_[i].b);
    }
    for (auto& kv : gen_.named()) params_.push_back(kv);
    params_.emplace_back("idcore.ref", id_core_.ref);
    params_.emplace_back("idcore.l1.w", id_core_.l1.w);
    params_.emplace_back("idcore.l1.b", id_core_.l1.b);
    params_.emplace_back("idcore.l2.w", id_core_.l2.w);
    params_.emplace_back("idcore.l2.b", id_core_.l2.b);
    auto add_embed = [&](const char* name, const Embedder& e) {
        params_.emplace_back(std::string(name) + ".l1.w", e.l1.w);
        params_.emplace_back(std::string(name) + ".l1.b", e.l1.b);
        params_.emplace_back(std::string(name) + ".l2.w", e.l2.w);
        params_.emplace_back(std::string(name) + ".l2.b", e.l2.b);
    };
    add_embed("embed.train", embed_train_);
    add_embed("embed.eval", embed_eval_);
    params_.emplace_back("coef.id.w", coeff_.id.w);
    params_.emplace_back("coef.id.b", coeff_.id.b);
    params_.emplace_back("coef.ex1.w", coeff_.ex1.w);
    params_.emplace_back("coef.ex1.b", coeff_.ex1.b);
    params_.emplace_back("coef.ex2.w", coeff_.ex2.w);
    params_.emplace_back("coef.ex2.b", coeff_.ex2.b);
    params_.emplace_back("coef.po.w", coeff_.po.w);
    params_.emplace_back("coef.po.b", coeff_.po.b);
    params_.emplace_back("lmk.l1.w", coeff_.lm1.w);
    params_.emplace_back("lmk.l1.b", coeff_.lm1.b);
    params_.emplace_back("lmk.l2.w", coeff_.lm2.w);
    params_.emplace_back("lmk.l2.b", coeff_.lm2.b);
}

// ---- operations ---------------------------------------------------------------

Value FrozenWorld::map_z_to_w(const Value& z) const {
    if (z.a().ndim() != 1 || z.a().size() != config_.d) {
        throw DimensionError("map_z_to_w: expected vector of width " + std::to_string(config_.d) + ", got " +
                             shape_str(z.a().shape()));
    }
    Value h = z;
    for (const AffinePair& layer : mapping_) h = swish(aff(layer, h));
    return h;
}

LatentCode FrozenWorld::map_z_to_w(const LatentCode& z) const {
    check_space("map_z_to_w", z, Space::Z);
    Value w = map_z_to_w(constant(z.data));
    return LatentCode{Space::W, w.a()};
}

LatentCode FrozenWorld::sample_z(Rng& rng) const {
    return LatentCode{Space::Z, rng.normal_array({config_.d})};
}

LatentCode FrozenWorld::anchor_w() const {
    return map_z_to_w(LatentCode{Space::Z, Array(Shape{config_.d})});
}

Value FrozenWorld::generate(const Value& wplus) const {
    return generate(wplus, GeneratorValues::constants(gen_));
}

Value FrozenWorld::generate(const Value& wplus, const GeneratorValues& gen) const {
    const size_t L = config_.layers, D = config_.d, C = config_.channels, R = config_.resolution;
    if (wplus.a().ndim() != 2 || wplus.a().dim(0) != L || wplus.a().dim(1) != D) {
        throw SpaceError("generate: expected a W+ stack of shape (" + std::to_string(L) + "," +
                         std::to_string(D) + "), got " + shape_str(wplus.a().shape()));
    }
    Value f = gen.base;
    Value img;
    bool first = true;
    size_t prev_res = 4;
    for (size_t k = 0; k < gen.levels.size(); ++k) {
        const auto& lv = gen.levels[k];
        const size_t res = lv.res;
        if (k > 0 && res > prev_res) f = upsample2(f);
        if (lv.texture.arr) f = add(f, lv.texture);
        for (int j = 0; j < 2; ++j) {
            Value wl = row(wplus, 2 * k + static_cast<size_t>(j));
            Value y_scale = add(matvec(lv.style[j].scale_w, wl), lv.style[j].scale_b);
            Value y_shift = add(matvec(lv.style[j].shift_w, wl), lv.style[j].shift_b);
            f = swish(modmix(f, lv.style[j].mix, shift(scale(y_scale, kStyleGain), 1.0),
                             scale(y_shift, kStyleGain)));
        }
        Value rgb = reshape(matmul(lv.to_rgb, reshape(f, Shape{C, res * res})), Shape{3, res, res});
        // Each level past the base contributes only the detail band above the
        // previous resolution, so layer groups stay tied to frequency bands.
        Value contrib = (k == 0) ? rgb : sub(rgb, upsample_to(pool_to(rgb, res / 2), res));
        contrib = upsample_to(contrib, R);
        img = first ? contrib : add(img, contrib);
        first = false;
        prev_res = res;
    }
    return img;
}

Array FrozenWorld::generate_image(const LatentCode& code) const {
    check_space("generate", code, Space::Wplus);
    return generate(constant(code.data)).a();
}

void FrozenWorld::check_image(const char* op, const Array& image) const {
    const size_t R = config_.resolution;
    if (image.ndim() != 3 || image.dim(0) != 3 || image.dim(1) != R || image.dim(2) != R) {
        throw DimensionError(std::string(op) + ": expected image of shape (3," + std::to_string(R) + "," +
                             std::to_string(R) + "), got " + shape_str(image.shape()));
    }
}

Value FrozenWorld::identity_features(const Value& image) const {
    check_image("identity_features", image.a());
    Value x = sub(flatten(pool_to(image, half_res())), constant(id_core_.ref));
    Value h = swish(aff(id_core_.l1, x));
    return aff(id_core_.l2, h);
}

Value FrozenWorld::embed(const Value& image, EmbedKind kind) const {
    const Embedder& e = (kind == EmbedKind::train) ? embed_train_ : embed_eval_;
    Value core = identity_features(image);
    Value h = swish(aff(e.l1, core));
    return normalize(aff(e.l2, h));
}

Array FrozenWorld::embed_image(const Array& image, EmbedKind kind) const {
    return embed(constant(image), kind).a();
}

CoeffValues FrozenWorld::extract_coeffs(const Value& image) const {
    check_image("extract_coeffs", image.a());
    CoeffValues c;
    c.id = aff(coeff_.id, identity_features(image));
    Value hi = sub(image, upsample_to(pool_to(image, half_res()), config_.resolution));
    c.expr = aff(coeff_.ex2, swish(aff(coeff_.ex1, flatten(hi))));
    c.pose = aff(coeff_.po, flatten(pool_to(image, 4)));
    return c;
}

Value FrozenWorld::decode_landmarks(const CoeffValues& coeffs) const {
    if (coeffs.id.a().size() != config_.k_id || coeffs.expr.a().size() != config_.k_ex ||
        coeffs.pose.a().size() != config_.k_po) {
        throw DimensionError("decode_landmarks: coefficient widths do not match the world config");
    }
    Value c = concat(concat(coeffs.id, coeffs.expr), coeffs.pose);
    Value h = swish(aff(coeff_.lm1, c));
    return reshape(aff(coeff_.lm2, h), Shape{config_.k_landmarks, 2});
}

// ---- persistence ---------------------------------------------------------------

std::vector<uint8_t> FrozenWorld::serialize() const {
    Container c("LSWORLD1");
    c.put_config("seed_lo", static_cast<double>(config_.seed & 0xffffffffull));
    c.put_config("seed_hi", static_cast<double>(config_.seed >> 32));
    c.put_config("d", static_cast<double>(config_.d));
    c.put_config("layers", static_cast<double>(config_.layers));
    c.put_config("resolution", static_cast<double>(config_.resolution));
    c.put_config("k_id", static_cast<double>(config_.k_id));
    c.put_config("k_ex", static_cast<double>(config_.k_ex));
    c.put_config("k_po", static_cast<double>(config_.k_po));
    c.put_config("k_landmarks", static_cast<double>(config_.k_landmarks));
    c.put_config("channels", static_cast<double>(config_.channels));
    c.put_config("embed_dim", static_cast<double>(config_.embed_dim));
    c.put_config("id_core", static_cast<double>(config_.id_core));
    for (const auto& [name, arr] : params_) c.put_array(name, *arr);
    return c.serialize();
}

uint64_t FrozenWorld::checksum() const {
    const auto bytes = serialize();
    return fnv1a64(bytes.data(), bytes.size());
}

void FrozenWorld::save(const std::string& path) const { write_file_bytes(path, serialize()); }

FrozenWorld FrozenWorld::load(const std::string& path) {
    Container c = Container::load(path, "LSWORLD1");
    WorldConfig cfg;
    cfg.seed = static_cast<uint64_t>(c.config_value("seed_lo")) |
               (static_cast<uint64_t>(c.config_value("seed_hi")) << 32);
    cfg.d = static_cast<size_t>(c.config_value("d"));
    cfg.layers = static_cast<size_t>(c.config_value("layers"));
    cfg.resolution = static_cast<size_t>(c.config_value("resolution"));
    cfg.k_id = static_cast<size_t>(c.config_value("k_id"));
    cfg.k_ex = static_cast<size_t>(c.config_value("k_ex"));
    cfg.k_po = static_cast<size_t>(c.config_value("k_po"));
    cfg.k_landmarks = static_cast<size_t>(c.config_value("k_landmarks"));
    cfg.channels = static_cast<size_t>(c.config_value("channels"));
    cfg.embed_dim = static_cast<size_t>(c.config_value("embed_dim"));
    cfg.id_core = static_cast<size_t>(c.config_value("id_core"));
    cfg.validate();
    FrozenWorld w;
    w.config_ = cfg;
    w.build(cfg.seed, &c);
    return w;
}

}  // namespace lswap
