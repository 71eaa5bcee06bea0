#include "core/analysis.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "core/mathfit.hpp"

namespace lswap {

namespace {

size_t round_boundary(double x) { return static_cast<size_t>(std::llround(x)); }

double mean_sq_diff(const Array& a, const Array& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return acc / static_cast<double>(a.size());
}

// windowed means over the last complete window, falling back to the plain
// mean for runs shorter than one window
LossBreakdown final_window_means(const RunLog& log) {
    LossBreakdown out;
    if (log.steps_run() >= log.window) {
        const size_t end = (log.steps_run() / log.window) * log.window;
        out.id_loss = log.windowed_at(end, LossTerm::id);
        out.lp_loss = log.windowed_at(end, LossTerm::lp);
        out.shape_loss = log.windowed_at(end, LossTerm::shape);
        out.total = log.windowed_at(end, LossTerm::total);
        return out;
    }
    for (const LossBreakdown& b : log.per_step) {
        out.id_loss += b.id_loss;
        out.lp_loss += b.lp_loss;
        out.shape_loss += b.shape_loss;
        out.total += b.total;
    }
    const double inv = 1.0 / static_cast<double>(log.steps_run());
    out.id_loss *= inv;
    out.lp_loss *= inv;
    out.shape_loss *= inv;
    out.total *= inv;
    return out;
}

struct EvalPair {
    Array splus, tplus;       // W+ codes
    LatentCode mix_s, mix_t;  // codes in the stack's operating space
};

EvalPair sample_eval_pair(const FrozenWorld& world, Space space, Rng& rng) {
    const size_t L = world.config().layers;
    EvalPair p;
    LatentCode z_s = world.sample_z(rng);
    LatentCode z_t = world.sample_z(rng);
    const LatentCode w_s = world.map_z_to_w(z_s);
    const LatentCode w_t = world.map_z_to_w(z_t);
    p.splus = broadcast_w(w_s, L).data;
    p.tplus = broadcast_w(w_t, L).data;
    switch (space) {
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
    return p;
}

// swapped W+ code for an eval pair (value-only)
Array swap_code_of(const FrozenWorld& world, const MixerStack& stack, const EvalPair& p) {
    const LatentCode swapped = stack.mix(p.mix_s, p.mix_t);
    switch (stack.config().space) {
        case Space::Wplus: return swapped.data;
        case Space::W: return broadcast_w(swapped, world.config().layers).data;
        case Space::Z:
            return broadcast_w(world.map_z_to_w(swapped), world.config().layers).data;
    }
    throw ContractError("swap_code_of: unreachable");
}

void run_cells(size_t cells, size_t jobs, const std::function<void(size_t)>& work) {
    if (jobs <= 1 || cells <= 1) {
        for (size_t i = 0; i < cells; ++i) work(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    const size_t n = std::min(jobs, cells);
    for (size_t t = 0; t < n; ++t) {
        pool.emplace_back([&] {
            while (true) {
                const size_t i = next.fetch_add(1);
                if (i >= cells) return;
                work(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace

std::vector<LayerGroup> layer_groups(size_t total_layers) {
    if (total_layers % 2 != 0) throw ConfigError("layer_groups: layer count must be even");
    const size_t levels = total_layers / 2;
    // proportional level boundaries in the 2:2:2:3 ratio used at L=18
    size_t e1 = round_boundary(2.0 * static_cast<double>(levels) / 9.0);
    size_t e2 = round_boundary(4.0 * static_cast<double>(levels) / 9.0);
    size_t e3 = round_boundary(6.0 * static_cast<double>(levels) / 9.0);
    e1 = std::min(e1, levels);
    e2 = std::min(std::max(e2, e1), levels);
    e3 = std::min(std::max(e3, e2), levels);
    auto make = [&](const char* name, size_t lo_level, size_t hi_level) {
        LayerGroup g;
        g.name = name;
        for (size_t lv = lo_level; lv < hi_level; ++lv) {
            g.layers.push_back(2 * lv);
            g.layers.push_back(2 * lv + 1);
        }
        return g;
    };
    return {make("coarse", 0, e1), make("middle", e1, e2), make("fine1", e2, e3),
            make("fine2", e3, levels)};
}

LayerGroup layer_group(size_t total_layers, const std::string& name) {
    for (LayerGroup& g : layer_groups(total_layers)) {
        if (g.name == name) return g;
    }
    throw ConfigError("layer_group: unknown group '" + name + "' (coarse, middle, fine1, fine2)");
}

LatentCode layerwise_swap(const LatentCode& code_t, const LatentCode& code_swap,
                          const std::vector<size_t>& group) {
    check_space("layerwise_swap", code_t, Space::Wplus);
    check_space("layerwise_swap", code_swap, Space::Wplus);
    check_same_shape("layerwise_swap", code_t.data, code_swap.data);
    const size_t L = code_t.data.dim(0), D = code_t.data.dim(1);
    LatentCode out = code_t;
    for (size_t l : group) {
        if (l >= L) throw DimensionError("layerwise_swap: layer index out of range");
        for (size_t j = 0; j < D; ++j) out.data[l * D + j] = code_swap.data[l * D + j];
    }
    return out;
}

DiffusionFit diffusion_fit(const std::vector<std::pair<size_t, double>>& lp_series, size_t step_lo,
                           size_t step_hi) {
    if (step_lo >= step_hi) throw ContractError("diffusion_fit: empty window");
    std::vector<double> x, y;
    for (const auto& [step, lp] : lp_series) {
        if (step < step_lo || step > step_hi) continue;
        if (lp <= 0.0) continue;
        x.push_back(std::log(static_cast<double>(step)));
        y.push_back(std::log(lp));
    }
    if (x.size() < 2) throw ContractError("diffusion_fit: fewer than two usable points in the window");
    const LineFit f = fit_line(x, y);
    DiffusionFit out;
    out.nu = f.slope;
    out.step_lo = step_lo;
    out.step_hi = step_hi;
    out.residual = f.residual;
    out.points = x.size();
    return out;
}

double embedding_cosine(const Array& a, const Array& b) {
    double num = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        num += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return num / (std::sqrt(na) * std::sqrt(nb) + 1e-12);
}

EvalMetrics eval_metrics(const FrozenWorld& world, const Array& img_s, const Array& img_t,
                         const Array& img_swap) {
    EvalMetrics m;
    m.id_similarity = embedding_cosine(world.embed_image(img_swap, EmbedKind::eval),
                                       world.embed_image(img_s, EmbedKind::eval));
    const CoeffValues c_swap = world.extract_coeffs(constant(img_swap));
    const CoeffValues c_t = world.extract_coeffs(constant(img_t));
    m.expression_mse = mean_sq_diff(c_swap.expr.a(), c_t.expr.a());
    m.pose_mse = mean_sq_diff(c_swap.pose.a(), c_t.pose.a());
    return m;
}

SwapEval evaluate_stack(const FrozenWorld& world, const MixerStack& stack, uint64_t eval_seed,
                        size_t pairs, size_t retrieval_n) {
    SwapEval out;
    out.pairs = pairs;
    Rng rng(substream(eval_seed, "eval.pairs"));
    for (size_t i = 0; i < pairs; ++i) {
        const EvalPair p = sample_eval_pair(world, stack.config().space, rng);
        const Array img_s = world.generate_image(LatentCode{Space::Wplus, p.splus});
        const Array img_t = world.generate_image(LatentCode{Space::Wplus, p.tplus});
        const Array img_swap = world.generate_image(LatentCode{Space::Wplus, swap_code_of(world, stack, p)});

        const Array e_swap = world.embed_image(img_swap, EmbedKind::eval);
        out.id_sim_source += embedding_cosine(e_swap, world.embed_image(img_s, EmbedKind::eval));
        out.id_sim_target += embedding_cosine(e_swap, world.embed_image(img_t, EmbedKind::eval));

        const CoeffValues c_s = world.extract_coeffs(constant(img_s));
        const CoeffValues c_t = world.extract_coeffs(constant(img_t));
        const CoeffValues c_x = world.extract_coeffs(constant(img_swap));
        out.expr_mse_target += mean_sq_diff(c_x.expr.a(), c_t.expr.a());
        out.expr_mse_source += mean_sq_diff(c_x.expr.a(), c_s.expr.a());
        out.pose_mse_target += mean_sq_diff(c_x.pose.a(), c_t.pose.a());
    }
    if (pairs > 0) {
        const double inv = 1.0 / static_cast<double>(pairs);
        out.id_sim_source *= inv;
        out.id_sim_target *= inv;
        out.expr_mse_target *= inv;
        out.expr_mse_source *= inv;
        out.pose_mse_target *= inv;
    }

    if (retrieval_n > 0) {
        Rng rrng(substream(eval_seed, "eval.retrieval"));
        std::vector<EvalPair> ps;
        std::vector<Array> source_embeddings;
        for (size_t i = 0; i < retrieval_n; ++i) {
            ps.push_back(sample_eval_pair(world, stack.config().space, rrng));
            const Array img_s = world.generate_image(LatentCode{Space::Wplus, ps.back().splus});
            source_embeddings.push_back(world.embed_image(img_s, EmbedKind::eval));
        }
        size_t hits = 0;
        for (size_t i = 0; i < retrieval_n; ++i) {
            const Array img_swap =
                world.generate_image(LatentCode{Space::Wplus, swap_code_of(world, stack, ps[i])});
            const Array e = world.embed_image(img_swap, EmbedKind::eval);
            size_t best = 0;
            double best_cos = -2.0;
            for (size_t j = 0; j < retrieval_n; ++j) {
                const double c = embedding_cosine(e, source_embeddings[j]);
                if (c > best_cos) {
                    best_cos = c;
                    best = j;
                }
            }
            if (best == i) ++hits;
        }
        out.retrieval_accuracy = static_cast<double>(hits) / static_cast<double>(retrieval_n);
    }
    return out;
}

std::vector<GroupEffect> layerwise_experiment(const FrozenWorld& world, const MixerStack& stack,
                                              uint64_t eval_seed, size_t pairs) {
    if (stack.config().space != Space::Wplus) {
        throw SpaceError("layerwise_experiment: requires a W+ stack");
    }
    const auto groups = layer_groups(world.config().layers);
    std::vector<GroupEffect> out(groups.size());
    for (size_t g = 0; g < groups.size(); ++g) out[g].group = groups[g].name;

    Rng rng(substream(eval_seed, "eval.layerwise"));
    for (size_t i = 0; i < pairs; ++i) {
        const EvalPair p = sample_eval_pair(world, Space::Wplus, rng);
        const Array img_s = world.generate_image(LatentCode{Space::Wplus, p.splus});
        const Array img_t = world.generate_image(LatentCode{Space::Wplus, p.tplus});
        const Array e_s = world.embed_image(img_s, EmbedKind::eval);
        const Array e_t = world.embed_image(img_t, EmbedKind::eval);
        const LatentCode full_swap{Space::Wplus, swap_code_of(world, stack, p)};
        const LatentCode target{Space::Wplus, p.tplus};
        for (size_t g = 0; g < groups.size(); ++g) {
            const LatentCode partial = layerwise_swap(target, full_swap, groups[g].layers);
            const Array img = world.generate_image(partial);
            const Array e = world.embed_image(img, EmbedKind::eval);
            out[g].id_sim_source += embedding_cosine(e, e_s);
            out[g].id_sim_target += embedding_cosine(e, e_t);
        }
    }
    for (auto& ge : out) {
        ge.id_sim_source /= static_cast<double>(pairs);
        ge.id_sim_target /= static_cast<double>(pairs);
    }
    return out;
}

std::vector<SweepCell> lambda_sweep(const FrozenWorld& world, const TrainConfig& base,
                                    const std::vector<double>& grid, size_t eval_pairs,
                                    size_t retrieval_n, double divergence_threshold, size_t jobs,
                                    const CellSink& sink) {
    if (grid.empty()) throw ConfigError("lambda_sweep: empty grid");
    std::vector<SweepCell> cells(grid.size());
    run_cells(grid.size(), jobs, [&](size_t i) {
        TrainConfig cfg = base;
        cfg.weights.lambda = grid[i];
        const TrainResult r = train(world, cfg);
        if (sink) sink(i, r);
        SweepCell& cell = cells[i];
        cell.lambda = grid[i];
        cell.steps_run = r.log.steps_run();
        cell.final_window = final_window_means(r.log);
        cell.eval = evaluate_stack(world, r.stack, substream(base.seed, "sweep.eval"), eval_pairs,
                                   retrieval_n);
        cell.divergent = cell.final_window.lp_loss > divergence_threshold;
    });
    return cells;
}

std::vector<SpaceCell> space_ablation(const FrozenWorld& world, const TrainConfig& base,
                                      size_t eval_pairs, size_t retrieval_n, size_t jobs,
                                      const CellSink& sink) {
    const std::vector<std::pair<Space, double>> plan = {
        {Space::Z, 1e1}, {Space::W, 1e1}, {Space::Wplus, 1e2}};
    std::vector<SpaceCell> cells(plan.size());
    run_cells(plan.size(), jobs, [&](size_t i) {
        TrainConfig cfg = base;
        cfg.space = plan[i].first;
        cfg.weights.lambda = plan[i].second;
        const TrainResult r = train(world, cfg);
        if (sink) sink(i, r);
        SpaceCell& cell = cells[i];
        cell.space = plan[i].first;
        cell.lambda = plan[i].second;
        cell.steps_run = r.log.steps_run();
        cell.final_window = final_window_means(r.log);
        cell.eval = evaluate_stack(world, r.stack, substream(base.seed, "spaces.eval"), eval_pairs,
                                   retrieval_n);
    });
    return cells;
}

PcaResult pca_directions(const FrozenWorld& world, uint64_t seed, size_t n_samples, size_t k) {
    const size_t D = world.config().d;
    if (k == 0 || k > D) throw ConfigError("pca: k must lie in [1, D]");
    if (n_samples < k) throw ConfigError("pca: need at least k samples");
    Rng rng(substream(seed, "pca.samples"));
    std::vector<Array> ws;
    ws.reserve(n_samples);
    Array mean(Shape{D});
    for (size_t i = 0; i < n_samples; ++i) {
        ws.push_back(world.map_z_to_w(world.sample_z(rng)).data);
        for (size_t j = 0; j < D; ++j) mean[j] += ws.back()[j];
    }
    for (size_t j = 0; j < D; ++j) mean[j] /= static_cast<double>(n_samples);

    Array cov(Shape{D, D});
    for (const Array& w : ws) {
        for (size_t a = 0; a < D; ++a) {
            const double da = w[a] - mean[a];
            for (size_t b = a; b < D; ++b) cov[a * D + b] += da * (w[b] - mean[b]);
        }
    }
    const double norm = 1.0 / static_cast<double>(n_samples - 1);
    for (size_t a = 0; a < D; ++a) {
        for (size_t b = a; b < D; ++b) {
            cov[a * D + b] *= norm;
            cov[b * D + a] = cov[a * D + b];
        }
    }

    Array values, vectors;
    eigh(cov, values, vectors);
    PcaResult out;
    out.n_samples = n_samples;
    out.directions = Array(Shape{k, D});
    out.variances = Array(Shape{k});
    for (size_t r = 0; r < k; ++r) {
        out.variances[r] = values[r];
        for (size_t j = 0; j < D; ++j) out.directions[r * D + j] = vectors[r * D + j];
    }
    return out;
}

LatentCode edit(const LatentCode& code, const Array& direction, double magnitude,
                const std::vector<size_t>* group) {
    check_space("edit", code, Space::Wplus);
    const size_t L = code.data.dim(0), D = code.data.dim(1);
    if (direction.ndim() != 1 || direction.size() != D) {
        throw DimensionError("edit: direction must be a W vector of width " + std::to_string(D));
    }
    LatentCode out = code;
    auto apply = [&](size_t l) {
        for (size_t j = 0; j < D; ++j) out.data[l * D + j] += magnitude * direction[j];
    };
    if (group) {
        for (size_t l : *group) {
            if (l >= L) throw DimensionError("edit: layer index out of range");
            apply(l);
        }
    } else {
        for (size_t l = 0; l < L; ++l) apply(l);
    }
    return out;
}

}  // namespace lswap
