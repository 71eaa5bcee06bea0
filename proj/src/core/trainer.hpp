#pragma once

#include <functional>

#include "core/losses.hpp"
#include "core/mixer.hpp"
#include "core/optimizer.hpp"
#include "core/world.hpp"

namespace lswap {

struct TrainConfig {
    size_t batch_size = 64;
    double same_pair_probability = 0.125;  // per-pair independent Bernoulli
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.01;
    size_t steps = 5000;
    LossWeights weights;
    Space space = Space::Wplus;
    uint64_t seed = 1;
    size_t log_window = 250;
    size_t checkpoint_interval = 0;  // 0 = final checkpoint only
    bool early_stop = true;
    double plateau_tol = 1e-4;
    size_t plateau_windows = 4;
    Precision precision = Precision::f64;
    // mixer architecture; d/layers/space are filled in from the world and the
    // operating space
    size_t fc_depth = 5;
    size_t hidden_width = 0;
    double alpha = 1.0;

    void validate() const;
    MixerConfig mixer_config(const WorldConfig& world) const;
    AdamWConfig optimizer_config() const;
};

enum class LossTerm { id, lp, shape, total };

struct RunLog {
    size_t window = 250;
    std::vector<LossBreakdown> per_step;  // entry i is step i+1
    std::vector<long> wall_ms;
    std::vector<size_t> checkpoint_steps;
    size_t steps_run() const { return per_step.size(); }

    // mean of a term over the window (end_step - window, end_step]
    double windowed_at(size_t end_step, LossTerm term) const;
    // (window end step, windowed mean) for every complete window
    std::vector<std::pair<size_t, double>> windowed_series(LossTerm term) const;
};

// One training pair: the codes the mixer sees plus their W+ forms used for
// generation and the latent penalty.
struct PairSample {
    LatentCode mix_s, mix_t;
    Array splus, tplus;  // (L,D)
    bool same = false;
};

// z ~ N(0, I); with same_pair_probability the pair shares one latent. W and
// W+ samples are pushed through the mapping network (and broadcast) first.
std::vector<PairSample> sample_batch(const FrozenWorld& world, const TrainConfig& config, Rng& rng);

// One optimizer step on the mixer parameters from the mean batch gradient of
// the total loss. The world is never touched.
LossBreakdown train_step(const FrozenWorld& world, MixerStack& stack, AdamW& opt,
                         const std::vector<PairSample>& batch, const LossWeights& weights,
                         size_t step_index);

struct TrainResult {
    MixerStack stack;
    RunLog log;
    bool stopped_early = false;
};

using ProgressFn = std::function<void(size_t step, const LossBreakdown&)>;
using CheckpointFn = std::function<void(size_t step, const MixerStack&)>;

TrainResult train(const FrozenWorld& world, const TrainConfig& config, const ProgressFn& progress = {},
                  const CheckpointFn& checkpoint = {});

}  // namespace lswap
