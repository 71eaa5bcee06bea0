#include "core/inversion.hpp"

#include <chrono>
#include <cmath>

#include "core/optimizer.hpp"

namespace lswap {

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

Value broadcast_value(const Value& w, size_t layers) {
    std::vector<Value> rows(layers, w);
    return stack_rows(rows);
}

// latent optimization has no business shrinking w toward zero
AdamWConfig plain_adam(double lr) {
    AdamWConfig a;
    a.lr = lr;
    a.weight_decay = 0.0;
    return a;
}

}  // namespace

void InversionConfig::validate() const {
    if (steps < 1) throw ConfigError("invert: steps must be >= 1");
    if (learning_rate <= 0.0 || pivotal_learning_rate <= 0.0) {
        throw ConfigError("invert: learning rates must be positive");
    }
}

InversionResult invert(const FrozenWorld& world, const Array& image, const InversionConfig& config) {
    config.validate();
    const size_t L = world.config().layers;
    image.check_finite("invert: input image");

    std::shared_ptr<const Array> w = std::make_shared<const Array>(world.anchor_w().data);
    AdamW opt(plain_adam(config.learning_rate), {w->shape()});

    InversionResult out;
    out.mse = -1.0;
    for (size_t step = 0; step < config.steps; ++step) {
        Tape tape;
        Value wv = tape.parameter(w, "w");
        Value recon = world.generate(broadcast_value(wv, L));
        Value loss = mse(recon, constant(image));
        const double cur = loss.a().scalar_value();
        if (!std::isfinite(cur)) {
            throw NumericError("invert: non-finite objective at step " + std::to_string(step));
        }
        if (out.mse < 0.0 || cur < out.mse) {
            out.mse = cur;
            out.w = LatentCode{Space::W, *w};
        }
        out.best_trace.push_back(out.mse);
        auto grads = tape.gradients(loss, {wv});
        w = std::make_shared<const Array>(std::move(opt.step({w}, grads)[0]));
    }
    // the final iterate competes too
    Value recon = world.generate(constant(broadcast_w(LatentCode{Space::W, *w}, L).data));
    const double last = mse(recon, constant(image)).a().scalar_value();
    if (last < out.mse) {
        out.mse = last;
        out.w = LatentCode{Space::W, *w};
    }
    out.best_trace.push_back(out.mse);
    return out;
}

GeneratorParams pivotal_tune(const FrozenWorld& world,
                             const std::vector<std::pair<LatentCode, Array>>& pivots,
                             const InversionConfig& config, double* tuned_mse) {
    config.validate();
    if (pivots.empty()) throw ContractError("pivotal_tune: no pivots");
    const size_t L = world.config().layers;

    // fixed W+ codes per pivot
    std::vector<Array> codes;
    for (const auto& [w, image] : pivots) {
        check_space("pivotal_tune", w, Space::W);
        codes.push_back(broadcast_w(w, L).data);
    }

    GeneratorParams tuned = world.generator().deep_copy();
    auto slots = tuned.slots();

    auto objective_at = [&](const GeneratorParams& gp) {
        double acc = 0.0;
        const GeneratorValues gv = GeneratorValues::constants(gp);
        for (size_t i = 0; i < pivots.size(); ++i) {
            acc += mse(world.generate(constant(codes[i]), gv), constant(pivots[i].second)).a().scalar_value();
        }
        return acc / static_cast<double>(pivots.size());
    };

    double best = objective_at(tuned);
    std::vector<Array> best_params;
    for (auto* s : slots) best_params.push_back(**s);

    std::vector<Shape> shapes;
    for (auto* s : slots) shapes.push_back((*s)->shape());
    AdamW opt(plain_adam(config.pivotal_learning_rate), shapes);

    for (size_t step = 0; step < config.pivotal_steps; ++step) {
        Tape tape;
        std::vector<Value> leaves;
        const GeneratorValues gv = GeneratorValues::parameters(tape, tuned, "", &leaves);
        Value loss;
        for (size_t i = 0; i < pivots.size(); ++i) {
            Value term = mse(world.generate(constant(codes[i]), gv), constant(pivots[i].second));
            loss = (i == 0) ? term : add(loss, term);
        }
        loss = scale(loss, 1.0 / static_cast<double>(pivots.size()));
        const double cur = loss.a().scalar_value();
        if (!std::isfinite(cur)) {
            throw NumericError("pivotal_tune: non-finite objective at step " + std::to_string(step));
        }
        auto grads = tape.gradients(loss, leaves);
        std::vector<std::shared_ptr<const Array>> flat;
        for (auto* s : slots) flat.push_back(*s);
        auto updated = opt.step(flat, grads);
        for (size_t i = 0; i < slots.size(); ++i) {
            *slots[i] = std::make_shared<const Array>(std::move(updated[i]));
        }
        const double after = objective_at(tuned);
        if (after < best) {
            best = after;
            for (size_t i = 0; i < slots.size(); ++i) best_params[i] = **slots[i];
        }
    }
    for (size_t i = 0; i < slots.size(); ++i) {
        *slots[i] = std::make_shared<const Array>(std::move(best_params[i]));
    }
    if (tuned_mse) *tuned_mse = best;
    return tuned;
}

GeneratorParams pivotal_tune(const FrozenWorld& world, const LatentCode& w, const Array& image,
                             const InversionConfig& config, double* tuned_mse) {
    return pivotal_tune(world, {{w, image}}, config, tuned_mse);
}

Array swap_images(const FrozenWorld& world, const MixerStack& stack, const Array& img_s,
                  const Array& img_t, const InversionConfig& config, SwapTimings* timings) {
    if (stack.config().space == Space::Z) {
        throw SpaceError("swap_images: inversion produces W codes; a Z-space mixer cannot consume them");
    }
    const size_t L = world.config().layers;
    const double t_start = now_ms();

    const InversionResult inv_s = invert(world, img_s, config);
    const InversionResult inv_t = invert(world, img_t, config);
    const double t_inverted = now_ms();

    GeneratorParams tuned =
        pivotal_tune(world, {{inv_s.w, img_s}, {inv_t.w, img_t}}, config, nullptr);
    const double t_tuned = now_ms();

    // mix in the stack's operating space, then route to W+
    LatentCode code;
    const double t_mix0 = now_ms();
    if (stack.config().space == Space::W) {
        code = broadcast_w(stack.mix(inv_s.w, inv_t.w), L);
    } else {
        code = stack.mix(broadcast_w(inv_s.w, L), broadcast_w(inv_t.w, L));
    }
    const double t_mix1 = now_ms();

    Array out = world.generate(constant(code.data), GeneratorValues::constants(tuned)).a();
    const double t_end = now_ms();
    if (timings) {
        timings->total_ms = t_end - t_start;
        timings->invert_ms = t_inverted - t_start;
        timings->tune_ms = t_tuned - t_inverted;
        timings->mix_ms = t_mix1 - t_mix0;
    }
    return out;
}

}  // namespace lswap
