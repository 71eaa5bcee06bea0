#include "core/losses.hpp"

namespace lswap {

void LossWeights::validate() const {
    if (lambda < 0.0 || mu < 0.0) throw ConfigError("loss weights must be non-negative");
}

Value detach(const Value& v) { return constant(v.arr); }

Value id_loss_from_embeddings(const Value& e_s, const Value& e_swap) {
    check_same_shape("id_loss", e_s.a(), e_swap.a());
    // embeddings are unit vectors, so the cosine is their dot product
    return shift(scale(dot(e_s, e_swap), -1.0), 1.0);
}

Value id_loss(const FrozenWorld& world, const Value& img_s, const Value& img_swap) {
    return id_loss_from_embeddings(world.embed(img_s, EmbedKind::train),
                                   world.embed(img_swap, EmbedKind::train));
}

Value latent_penalty(const Value& code_t, const Value& code_swap) {
    check_same_shape("latent_penalty", code_t.a(), code_swap.a());
    return mse(code_t, code_swap);
}

double latent_penalty(const LatentCode& code_t, const LatentCode& code_swap) {
    if (code_t.space != code_swap.space) {
        throw SpaceError(std::string("latent_penalty: codes live in different spaces, ") +
                         space_name(code_t.space) + " vs " + space_name(code_swap.space));
    }
    return latent_penalty(constant(code_t.data), constant(code_swap.data)).a().scalar_value();
}

Value shape_loss(const FrozenWorld& world, const Value& img_s, const Value& img_t, const Value& img_swap) {
    const CoeffValues c_s = world.extract_coeffs(img_s);
    const CoeffValues c_t = world.extract_coeffs(img_t);
    const Value q_fuse = world.decode_landmarks(fuse_coeffs(c_s, c_t));
    const Value q_swap = world.decode_landmarks(world.extract_coeffs(img_swap));
    return sum(absval(sub(q_swap, q_fuse)));
}

LossBreakdown TotalLoss::breakdown() const {
    LossBreakdown b;
    b.id_loss = id.a().scalar_value();
    b.lp_loss = lp.a().scalar_value();
    b.shape_loss = shape.a().scalar_value();
    b.total = total.a().scalar_value();
    return b;
}

TotalLoss total_loss(const FrozenWorld& world, const LossWeights& weights, const Value& img_s,
                     const Value& img_t, const Value& img_swap, const Value& code_t,
                     const Value& code_swap) {
    weights.validate();
    TotalLoss out;
    out.id = id_loss(world, img_s, img_swap);
    // zero-weighted terms are still reported but detached, so no gradient
    // work is spent on them
    out.lp = (weights.lambda == 0.0) ? latent_penalty(detach(code_t), detach(code_swap))
                                     : latent_penalty(code_t, code_swap);
    out.shape = (weights.mu == 0.0) ? shape_loss(world, detach(img_s), detach(img_t), detach(img_swap))
                                    : shape_loss(world, img_s, img_t, img_swap);
    out.total = add(add(out.id, scale(out.lp, weights.lambda)), scale(out.shape, weights.mu));
    return out;
}

}  // namespace lswap
