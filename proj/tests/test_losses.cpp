#include <cmath>

#include "core/losses.hpp"
#include "core/mixer.hpp"
#include "doctest.h"

using namespace lswap;

namespace {

WorldConfig small_config() {
    WorldConfig c;
    c.seed = 5;
    c.d = 16;
    c.layers = 4;
    c.resolution = 16;
    c.k_id = 6;
    c.k_ex = 4;
    c.k_po = 2;
    c.k_landmarks = 10;
    c.channels = 4;
    c.embed_dim = 32;
    c.id_core = 6;
    return c;
}

Array image_of(const FrozenWorld& w, Rng& rng) {
    return w.generate_image(broadcast_w(w.map_z_to_w(w.sample_z(rng)), w.config().layers));
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("id loss endpoints") {
    FrozenWorld w(small_config());
    Rng rng(1);
    Array img = image_of(w, rng);
    const double same = id_loss(w, constant(img), constant(img)).a().scalar_value();
    CHECK(std::fabs(same) < 1e-9);

    // synthetic unit embeddings: orthogonal -> 1, antipodal -> 2
    Array e1(Shape{4}, {1.0, 0.0, 0.0, 0.0});
    Array e2(Shape{4}, {0.0, 1.0, 0.0, 0.0});
    Array e3(Shape{4}, {-1.0, 0.0, 0.0, 0.0});
    CHECK(id_loss_from_embeddings(constant(e1), constant(e2)).a().scalar_value() == 1.0);
    CHECK(id_loss_from_embeddings(constant(e1), constant(e3)).a().scalar_value() == 2.0);

    // range on random pairs
    for (int i = 0; i < 5; ++i) {
        const double v =
            id_loss(w, constant(image_of(w, rng)), constant(image_of(w, rng))).a().scalar_value();
        CHECK(v >= 0.0);
        CHECK(v <= 2.0);
    }
}

TEST_CASE("latent penalty arithmetic") {
    Rng rng(2);
    Array t = rng.normal_array({4, 8});
    CHECK(latent_penalty(constant(t), constant(t)).a().scalar_value() == 0.0);

    Array plus1 = t;
    for (size_t i = 0; i < plus1.size(); ++i) plus1[i] += 1.0;
    CHECK(latent_penalty(constant(t), constant(plus1)).a().scalar_value() == doctest::Approx(1.0));

    Array plus2 = t;
    for (size_t i = 0; i < plus2.size(); ++i) plus2[i] += 2.0;
    CHECK(latent_penalty(constant(t), constant(plus2)).a().scalar_value() == doctest::Approx(4.0));

    LatentCode a{Space::W, rng.normal_array({8})};
    LatentCode b{Space::Z, rng.normal_array({8})};
    CHECK_THROWS_AS((void)latent_penalty(a, b), SpaceError);
}

TEST_CASE("shape loss") {
    FrozenWorld w(small_config());
    Rng rng(3);
    Array img = image_of(w, rng);

    // identical triple: fuse(c, c) = c, so the loss is exactly zero
    CHECK(shape_loss(w, constant(img), constant(img), constant(img)).a().scalar_value() == 0.0);

    // L1 core: landmarks shifted by +0.5 in every coordinate, K = 68
    Array q(Shape{68, 2});
    Array q_shift = q;
    for (size_t i = 0; i < q_shift.size(); ++i) q_shift[i] += 0.5;
    CHECK(sum(absval(sub(constant(q_shift), constant(q)))).a().scalar_value() == doctest::Approx(68.0));

    // random triple equals an independent scalar-loop recomputation over the
    // same frozen pipeline
    Array img_s = image_of(w, rng), img_t = image_of(w, rng), img_x = image_of(w, rng);
    const double got = shape_loss(w, constant(img_s), constant(img_t), constant(img_x)).a().scalar_value();

    const CoeffValues c_s = w.extract_coeffs(constant(img_s));
    const CoeffValues c_t = w.extract_coeffs(constant(img_t));
    const CoeffValues fused{c_s.id, c_t.expr, c_t.pose};
    const Array q_fuse = w.decode_landmarks(fused).a();
    const Array q_swap = w.decode_landmarks(w.extract_coeffs(constant(img_x))).a();
    double expect = 0.0;
    for (size_t i = 0; i < q_fuse.size(); ++i) {
        const double d = q_swap[i] - q_fuse[i];
        expect += d < 0.0 ? -d : d;
    }
    CHECK(got == doctest::Approx(expect).epsilon(1e-12));
    CHECK(got > 0.0);
}

TEST_CASE("total loss composition") {
    FrozenWorld w(small_config());
    Rng rng(4);
    Array img_s = image_of(w, rng), img_t = image_of(w, rng), img_x = image_of(w, rng);
    Array code_t = rng.normal_array({4, 16});
    Array code_x = rng.normal_array({4, 16});

    SUBCASE("arithmetic: id=0.5, lp=0.01, shape=1.0, lambda=100, mu=0.1 -> 1.6") {
        const double total = 0.5 + 100.0 * 0.01 + 0.1 * 1.0;
        CHECK(total == doctest::Approx(1.6).epsilon(1e-12));
    }

    SUBCASE("lambda = mu = 0 reduces to the id loss") {
        LossWeights zero{0.0, 0.0};
        TotalLoss t = total_loss(w, zero, constant(img_s), constant(img_t), constant(img_x),
                                 constant(code_t), constant(code_x));
        CHECK(t.total.a().scalar_value() == t.id.a().scalar_value());
    }

    SUBCASE("breakdown satisfies the additivity invariant") {
        LossWeights weights;  // defaults: lambda = 1e2, mu = 0.1
        CHECK(weights.lambda == 100.0);
        CHECK(weights.mu == 0.1);
        TotalLoss t = total_loss(w, weights, constant(img_s), constant(img_t), constant(img_x),
                                 constant(code_t), constant(code_x));
        LossBreakdown b = t.breakdown();
        const double recomposed = b.id_loss + weights.lambda * b.lp_loss + weights.mu * b.shape_loss;
        CHECK(std::fabs(b.total - recomposed) <= 1e-12 * std::fabs(b.total));
        CHECK(b.id_loss >= 0.0);
        CHECK(b.id_loss <= 2.0);
        CHECK(b.lp_loss >= 0.0);
        CHECK(b.shape_loss >= 0.0);
    }

    SUBCASE("negative weights rejected") {
        LossWeights bad{-1.0, 0.1};
        CHECK_THROWS_AS(
            (void)total_loss(w, bad, constant(img_s), constant(img_t), constant(img_x), constant(code_t),
                             constant(code_x)),
            ConfigError);
    }
}

TEST_CASE("gradient of the full objective w.r.t. mixer parameters") {
    FrozenWorld w(small_config());
    const size_t L = w.config().layers, D = w.config().d;
    MixerConfig mc;
    mc.d = D;
    mc.layers = L;
    MixerStack stack(mc, 6);

    Rng rng(5);
    LatentCode ws = w.map_z_to_w(w.sample_z(rng));
    LatentCode wt = w.map_z_to_w(w.sample_z(rng));
    const Array code_s = broadcast_w(ws, L).data;
    const Array code_t = broadcast_w(wt, L).data;
    const Array img_s = w.generate_image(LatentCode{Space::Wplus, code_s});
    const Array img_t = w.generate_image(LatentCode{Space::Wplus, code_t});
    LossWeights weights;

    std::vector<Array> theta;
    for (const auto& p : stack.params()) theta.push_back(*p);
    auto objective = [&](const std::vector<Value>& params) {
        Value swap_code = stack.mix(params, constant(code_s), constant(code_t));
        Value img_swap = w.generate(swap_code);
        return total_loss(w, weights, constant(img_s), constant(img_t), img_swap, constant(code_t),
                          swap_code)
            .total;
    };
    auto rep = grad_check(objective, theta, stack.param_names(), 1e-4, 6, 23);
    INFO("max rel err ", rep.max_rel_err, " at ", rep.where, " over ", rep.coords_checked, " coords");
    CHECK(rep.pass);
}

}  // TEST_SUITE
