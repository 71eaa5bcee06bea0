#pragma once

#include "core/world.hpp"

namespace lswap {

struct LossWeights {
    double lambda = 1e2;  // latent penalty weight
    double mu = 0.1;      // shape weight
    void validate() const;
};

struct LossBreakdown {
    double id_loss = 0.0;
    double lp_loss = 0.0;
    double shape_loss = 0.0;
    double total = 0.0;
};

// Terms of the training objective. All are tape-aware: gradients flow through
// whichever inputs are tracked.

// 1 - cos of the train-embedder embeddings of source and swapped images.
Value id_loss(const FrozenWorld& world, const Value& img_s, const Value& img_swap);
Value id_loss_from_embeddings(const Value& e_s, const Value& e_swap);

// Dimension-normalized squared distance between target and swapped codes.
Value latent_penalty(const Value& code_t, const Value& code_swap);
double latent_penalty(const LatentCode& code_t, const LatentCode& code_swap);

// L1 distance between the swapped image's landmarks and the landmarks decoded
// from fused (source id, target expression/pose) coefficients.
Value shape_loss(const FrozenWorld& world, const Value& img_s, const Value& img_t, const Value& img_swap);

struct TotalLoss {
    Value id, lp, shape, total;
    LossBreakdown breakdown() const;
};

// Composes the three terms: id + lambda * lp + mu * shape. Source and target
// images may be untracked constants; gradients reach whatever the swapped
// image and codes depend on.
TotalLoss total_loss(const FrozenWorld& world, const LossWeights& weights, const Value& img_s,
                     const Value& img_t, const Value& img_swap, const Value& code_t,
                     const Value& code_swap);

// A value cut loose from its tape: same array, no gradient flow.
Value detach(const Value& v);

}  // namespace lswap
