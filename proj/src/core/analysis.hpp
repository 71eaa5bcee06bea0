#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core/inversion.hpp"
#include "core/trainer.hpp"

namespace lswap {

// ---- layer groups -----------------------------------------------------------
// Two style layers per pyramid level; groups partition the levels in the
// fixed 2:2:2:3 proportion (coarse/middle/fine1/fine2), so for L=18 the
// layers split as 0-3 / 4-7 / 8-11 / 12-17.

struct LayerGroup {
    std::string name;
    std::vector<size_t> layers;
};

std::vector<LayerGroup> layer_groups(size_t total_layers);
LayerGroup layer_group(size_t total_layers, const std::string& name);

// output layer i = swap_i if i is in the group, else target_i
LatentCode layerwise_swap(const LatentCode& code_t, const LatentCode& code_swap,
                          const std::vector<size_t>& group);

// ---- diffusion fit ------------------------------------------------------------

struct DiffusionFit {
    double nu = 0.0;
    size_t step_lo = 0, step_hi = 0;
    double residual = 0.0;
    size_t points = 0;
};

// Least-squares slope of log(lp) vs log(step) over [step_lo, step_hi].
DiffusionFit diffusion_fit(const std::vector<std::pair<size_t, double>>& lp_series, size_t step_lo,
                           size_t step_hi);

// ---- evaluation metrics ---------------------------------------------------------

struct EvalMetrics {
    double id_similarity = 0.0;   // eval-embedder cosine, swap vs source
    double expression_mse = 0.0;  // coefficient MSE, swap vs target
    double pose_mse = 0.0;        // coefficient MSE, swap vs target
};

EvalMetrics eval_metrics(const FrozenWorld& world, const Array& img_s, const Array& img_t,
                         const Array& img_swap);
double embedding_cosine(const Array& a, const Array& b);

// Mean metrics of a trained stack over held-out random pairs, plus the
// retrieval accuracy: each swap must find its source among `retrieval_n`
// generated identities by nearest eval embedding.
struct SwapEval {
    double id_sim_source = 0.0;
    double id_sim_target = 0.0;
    double expr_mse_target = 0.0;
    double expr_mse_source = 0.0;
    double pose_mse_target = 0.0;
    double retrieval_accuracy = 0.0;
    size_t pairs = 0;
};

SwapEval evaluate_stack(const FrozenWorld& world, const MixerStack& stack, uint64_t eval_seed,
                        size_t pairs, size_t retrieval_n);

// Mean eval id-similarity (to source and target) when only the given layer
// group takes the swapped code.
struct GroupEffect {
    std::string group;
    double id_sim_source = 0.0;
    double id_sim_target = 0.0;
};

std::vector<GroupEffect> layerwise_experiment(const FrozenWorld& world, const MixerStack& stack,
                                              uint64_t eval_seed, size_t pairs);

// ---- experiment drivers -----------------------------------------------------------

struct SweepCell {
    double lambda = 0.0;
    LossBreakdown final_window;  // windowed means over the last full window
    SwapEval eval;
    bool divergent = false;
    size_t steps_run = 0;
};

// Trains one stack per lambda with a shared seed; cells may run in parallel
// jobs, results are merged in grid order. The sink, when given, receives each
// cell's training result (indexed, so parallel cells stay untangled).
using CellSink = std::function<void(size_t index, const TrainResult&)>;
std::vector<SweepCell> lambda_sweep(const FrozenWorld& world, const TrainConfig& base,
                                    const std::vector<double>& grid, size_t eval_pairs,
                                    size_t retrieval_n, double divergence_threshold, size_t jobs = 1,
                                    const CellSink& sink = {});

struct SpaceCell {
    Space space = Space::Wplus;
    double lambda = 0.0;
    LossBreakdown final_window;
    SwapEval eval;
    size_t steps_run = 0;
};

// Z/W/W+ ablation at the defaults lambda=1e1 for Z and W, 1e2 for W+.
std::vector<SpaceCell> space_ablation(const FrozenWorld& world, const TrainConfig& base,
                                      size_t eval_pairs, size_t retrieval_n, size_t jobs = 1,
                                      const CellSink& sink = {});

// ---- PCA editing -------------------------------------------------------------------

struct PcaResult {
    Array directions;  // (k, D), orthonormal rows, by non-increasing variance
    Array variances;   // (k,)
    size_t n_samples = 0;
};

PcaResult pca_directions(const FrozenWorld& world, uint64_t seed, size_t n_samples, size_t k);

// Adds magnitude * direction to every layer, or only to the given group.
LatentCode edit(const LatentCode& code, const Array& direction, double magnitude,
                const std::vector<size_t>* group = nullptr);

}  // namespace lswap
