#include "core/trainer.hpp"

#include <chrono>
#include <cmath>

namespace lswap {

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (steps < 1) throw ConfigError("train: steps must be >= 1");
    if (same_pair_probability < 0.0 || same_pair_probability > 1.0) {
        throw ConfigError("train: same_pair_probability must lie in [0, 1]");
    }
    if (learning_rate <= 0.0) throw ConfigError("train: learning_rate must be positive");
    if (log_window < 1) throw ConfigError("train: log_window must be >= 1");
    if (plateau_windows < 2) throw ConfigError("train: plateau_windows must be >= 2");
    weights.validate();
}

MixerConfig TrainConfig::mixer_config(const WorldConfig& world) const {
    MixerConfig m;
    m.fc_depth = fc_depth;
    m.hidden_width = hidden_width;
    m.residual_coefficient = alpha;
    m.space = space;
    m.d = world.d;
    m.layers = world.layers;
    m.validate();
    return m;
}

AdamWConfig TrainConfig::optimizer_config() const {
    AdamWConfig a;
    a.lr = learning_rate;
    a.beta1 = beta1;
    a.beta2 = beta2;
    a.eps = adam_eps;
    a.weight_decay = weight_decay;
    return a;
}

double RunLog::windowed_at(size_t end_step, LossTerm term) const {
    if (end_step < window || end_step > per_step.size()) {
        throw ContractError("runlog: window ending at step " + std::to_string(end_step) +
                            " is not fully recorded");
    }
    double acc = 0.0;
    for (size_t s = end_step - window; s < end_step; ++s) {
        const LossBreakdown& b = per_step[s];
        switch (term) {
            case LossTerm::id: acc += b.id_loss; break;
            case LossTerm::lp: acc += b.lp_loss; break;
            case LossTerm::shape: acc += b.shape_loss; break;
            case LossTerm::total: acc += b.total; break;
        }
    }
    return acc / static_cast<double>(window);
}

std::vector<std::pair<size_t, double>> RunLog::windowed_series(LossTerm term) const {
    std::vector<std::pair<size_t, double>> out;
    for (size_t end = window; end <= per_step.size(); end += window) {
        out.emplace_back(end, windowed_at(end, term));
    }
    return out;
}

std::vector<PairSample> sample_batch(const FrozenWorld& world, const TrainConfig& config, Rng& rng) {
    const size_t L = world.config().layers;
    std::vector<PairSample> batch;
    batch.reserve(config.batch_size);
    for (size_t i = 0; i < config.batch_size; ++i) {
        PairSample p;
        const double u = rng.uniform();
        LatentCode z_s = world.sample_z(rng);
        p.same = u < config.same_pair_probability;
        LatentCode z_t = p.same ? z_s : world.sample_z(rng);

        const LatentCode w_s = world.map_z_to_w(z_s);
        const LatentCode w_t = world.map_z_to_w(z_t);
        p.splus = broadcast_w(w_s, L).data;
        p.tplus = broadcast_w(w_t, L).data;
        switch (config.space) {
            case Space::Z:
                p.mix_s = std::move(z_s);
                p.mix_t = std::move(z_t);
                break;
            case Space::W:
                p.mix_s = w_s;
                p.mix_t = w_t;
                break;
            case Space::Wplus:
                p.mix_s = LatentCode{Space::Wplus, p.splus};
                p.mix_t = LatentCode{Space::Wplus, p.tplus};
                break;
        }
        batch.push_back(std::move(p));
    }
    return batch;
}

namespace {

// Broadcast a tracked W vector into an (L,D) stack; the adjoint sums over
// layers.
Value broadcast_value(const Value& w, size_t layers) {
    std::vector<Value> rows(layers, w);
    return stack_rows(rows);
}

struct PairResult {
    LossBreakdown breakdown;
};

// Forward + backward for one pair; accumulates unnormalized gradients.
PairResult pair_pass(const FrozenWorld& world, const MixerStack& stack,
                     const std::vector<std::shared_ptr<const Array>>& stack_params, const PairSample& pair,
                     const LossWeights& weights, std::vector<Array>* grad_acc) {
    Tape tape;
    std::vector<Value> params;
    params.reserve(stack_params.size());
    for (size_t i = 0; i < stack_params.size(); ++i) {
        params.push_back(tape.parameter(stack_params[i], stack.param_names()[i]));
    }

    // swapped code routed to W+ for generation and the latent penalty
    Value wplus_swap;
    switch (stack.config().space) {
        case Space::Wplus:
            wplus_swap = stack.mix(params, constant(pair.mix_s.data), constant(pair.mix_t.data));
            break;
        case Space::W: {
            Value w_swap = stack.mix(params, constant(pair.mix_s.data), constant(pair.mix_t.data));
            wplus_swap = broadcast_value(w_swap, world.config().layers);
            break;
        }
        case Space::Z: {
            Value z_swap = stack.mix(params, constant(pair.mix_s.data), constant(pair.mix_t.data));
            wplus_swap = broadcast_value(world.map_z_to_w(z_swap), world.config().layers);
            break;
        }
    }

    // source/target images are constants: no gradient flows to them
    const Value img_s = constant(world.generate(constant(pair.splus)).arr);
    const Value img_t = pair.same ? img_s : constant(world.generate(constant(pair.tplus)).arr);
    const Value img_swap = world.generate(wplus_swap);

    TotalLoss loss =
        total_loss(world, weights, img_s, img_t, img_swap, constant(pair.tplus), wplus_swap);

    if (grad_acc) {
        std::vector<Array> grads = tape.gradients(loss.total, params);
        for (size_t i = 0; i < grads.size(); ++i) {
            Array& acc = (*grad_acc)[i];
            for (size_t j = 0; j < acc.size(); ++j) acc[j] += grads[i][j];
        }
    }
    return PairResult{loss.breakdown()};
}

}  // namespace

LossBreakdown train_step(const FrozenWorld& world, MixerStack& stack, AdamW& opt,
                         const std::vector<PairSample>& batch, const LossWeights& weights,
                         size_t step_index) {
    const auto& stack_params = stack.params();
    std::vector<Array> grad_acc;
    grad_acc.reserve(stack_params.size());
    for (const auto& p : stack_params) grad_acc.emplace_back(p->shape());

    LossBreakdown mean;
    for (const PairSample& pair : batch) {
        const PairResult r = pair_pass(world, stack, stack_params, pair, weights, &grad_acc);
        mean.id_loss += r.breakdown.id_loss;
        mean.lp_loss += r.breakdown.lp_loss;
        mean.shape_loss += r.breakdown.shape_loss;
        mean.total += r.breakdown.total;
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    mean.id_loss *= inv;
    mean.lp_loss *= inv;
    mean.shape_loss *= inv;
    mean.total *= inv;
    if (!std::isfinite(mean.total)) {
        throw NumericError("train: non-finite loss at step " + std::to_string(step_index) +
                           " (id " + std::to_string(mean.id_loss) + ", lp " + std::to_string(mean.lp_loss) +
                           ", shape " + std::to_string(mean.shape_loss) + ")");
    }
    for (Array& g : grad_acc) {
        for (size_t j = 0; j < g.size(); ++j) g[j] *= inv;
    }
    stack.set_params(opt.step(stack_params, grad_acc));
    return mean;
}

TrainResult train(const FrozenWorld& world, const TrainConfig& config, const ProgressFn& progress,
                  const CheckpointFn& checkpoint) {
    config.validate();
    set_precision(config.precision);
    MixerStack stack(config.mixer_config(world.config()), substream(config.seed, "mixer.init"));
    AdamW opt(config.optimizer_config(), [&] {
        std::vector<Shape> shapes;
        for (const auto& p : stack.params()) shapes.push_back(p->shape());
        return shapes;
    }());
    Rng rng(substream(config.seed, "train.batch"));

    RunLog log;
    log.window = config.log_window;
    bool stopped_early = false;

    for (size_t step = 1; step <= config.steps; ++step) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto batch = sample_batch(world, config, rng);
        const LossBreakdown b = train_step(world, stack, opt, batch, config.weights, step);
        const auto t1 = std::chrono::steady_clock::now();
        log.per_step.push_back(b);
        log.wall_ms.push_back(std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count());
        if (progress) progress(step, b);
        if (checkpoint && config.checkpoint_interval > 0 && step % config.checkpoint_interval == 0 &&
            step != config.steps) {
            checkpoint(step, stack);
            log.checkpoint_steps.push_back(step);
        }
        // plateau detection on the windowed total loss
        if (config.early_stop && step % config.log_window == 0) {
            const auto series = log.windowed_series(LossTerm::total);
            if (series.size() >= config.plateau_windows) {
                const double last = series.back().second;
                double max_change = 0.0;
                for (size_t i = series.size() - config.plateau_windows; i < series.size(); ++i) {
                    max_change = std::max(max_change, std::fabs(series[i].second - last));
                }
                if (max_change < config.plateau_tol * std::max(1e-12, std::fabs(last))) {
                    stopped_early = true;
                }
            }
        }
        if (stopped_early) break;
    }
    if (checkpoint) {
        checkpoint(log.steps_run(), stack);
        log.checkpoint_steps.push_back(log.steps_run());
    }
    set_precision(Precision::f64);
    return TrainResult{std::move(stack), std::move(log), stopped_early};
}

}  // namespace lswap
