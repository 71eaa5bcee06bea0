#pragma once

#include "core/mixer.hpp"
#include "core/world.hpp"

namespace lswap {

struct InversionConfig {
    size_t steps = 500;
    double learning_rate = 1e-2;
    size_t pivotal_steps = 200;
    double pivotal_learning_rate = 1e-3;
    double reconstruction_tolerance = 1e-3;  // reporting threshold, not an abort
    void validate() const;
};

struct InversionResult {
    LatentCode w;                    // best-seen W code
    double mse = 0.0;                // its reconstruction error
    std::vector<double> best_trace;  // best-so-far MSE per step, non-increasing
};

// Gradient descent on w minimizing the reconstruction error of
// generate(broadcast(w)) against the image. Starts from the world's anchor,
// keeps the best-seen iterate.
InversionResult invert(const FrozenWorld& world, const Array& image, const InversionConfig& config);

// Fine-tunes a copy of the generator to reconstruct the pivot images at their
// fixed inverted codes. The shared world is never touched; with zero steps the
// copy equals the original.
GeneratorParams pivotal_tune(const FrozenWorld& world,
                             const std::vector<std::pair<LatentCode, Array>>& pivots,
                             const InversionConfig& config, double* tuned_mse = nullptr);
GeneratorParams pivotal_tune(const FrozenWorld& world, const LatentCode& w, const Array& image,
                             const InversionConfig& config, double* tuned_mse = nullptr);

struct SwapTimings {
    double total_ms = 0.0;
    double invert_ms = 0.0;
    double tune_ms = 0.0;
    double mix_ms = 0.0;  // mixer forward only
};

// Full image pipeline: invert both images, pivotally tune a generator copy,
// mix the codes, and generate with the tuned copy.
Array swap_images(const FrozenWorld& world, const MixerStack& stack, const Array& img_s,
                  const Array& img_t, const InversionConfig& config, SwapTimings* timings = nullptr);

}  // namespace lswap
