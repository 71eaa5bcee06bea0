#include <cmath>
#include <cstdio>

#include "core/serialize.hpp"
#include "core/world.hpp"
#include "doctest.h"

using namespace lswap;

namespace {

WorldConfig desk_config(uint64_t seed = 42) {
    WorldConfig c;
    c.seed = seed;
    return c;  // defaults are the desk scale: D=64, L=18, R=32
}

double cosine(const Array& a, const Array& b) {
    double num = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        num += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return num / (std::sqrt(na) * std::sqrt(nb) + 1e-12);
}

double low_freq_energy(const Array& delta) {
    Value p = pool_to(constant(delta), 4);
    double e = 0.0;
    for (size_t i = 0; i < p.a().size(); ++i) e += p.a()[i] * p.a()[i];
    return e;
}

}  // namespace

TEST_SUITE("world") {

TEST_CASE("seeded construction is deterministic") {
    FrozenWorld a(desk_config());
    FrozenWorld b(desk_config());
    CHECK(a.serialize() == b.serialize());
    CHECK(a.checksum() == b.checksum());

    FrozenWorld c(desk_config(43));
    CHECK(a.checksum() != c.checksum());
}

TEST_CASE("invalid configs are rejected") {
    WorldConfig c = desk_config();
    c.layers = 17;  // odd
    CHECK_THROWS_AS(FrozenWorld{c}, ConfigError);
    c = desk_config();
    c.resolution = 48;  // not a power of two
    CHECK_THROWS_AS(FrozenWorld{c}, ConfigError);
}

TEST_CASE("paper-scale config produces 18x512 W+ codes") {
    WorldConfig c = desk_config();
    c.d = 512;
    FrozenWorld w(c);
    Rng rng(1);
    LatentCode z = w.sample_z(rng);
    LatentCode wp = broadcast_w(w.map_z_to_w(z), c.layers);
    CHECK(wp.data.shape() == Shape{18, 512});
}

TEST_CASE("desk config generator output shape") {
    FrozenWorld w(desk_config());
    Rng rng(2);
    LatentCode code = broadcast_w(w.map_z_to_w(w.sample_z(rng)), 18);
    Array img = w.generate_image(code);
    CHECK(img.shape() == Shape{3, 32, 32});
}

TEST_CASE("mapping is deterministic, injective in practice, and smooth") {
    FrozenWorld w(desk_config());
    const size_t D = w.config().d;
    LatentCode zero{Space::Z, Array(Shape{D})};
    LatentCode w0a = w.map_z_to_w(zero);
    LatentCode w0b = w.map_z_to_w(zero);
    CHECK(w0a.data.bitwise_equal(w0b.data));
    CHECK(w0a.space == Space::W);

    // distinct inputs give distinct outputs across 100 sampled pairs
    Rng rng(3);
    std::vector<Array> ws;
    for (int i = 0; i < 100; ++i) ws.push_back(w.map_z_to_w(w.sample_z(rng)).data);
    for (size_t i = 0; i < ws.size(); ++i) {
        for (size_t j = i + 1; j < ws.size(); ++j) CHECK_FALSE(ws[i].bitwise_equal(ws[j]));
    }

    // finite-difference Lipschitz probe: ||net(z+d) - net(z)|| <= C ||d|| as d -> 0
    LatentCode z = w.sample_z(rng);
    Array base = w.map_z_to_w(z).data;
    Array dir = rng.normal_array({D});
    double nd = 0.0;
    for (size_t i = 0; i < D; ++i) nd += dir[i] * dir[i];
    nd = std::sqrt(nd);
    double prev_ratio = 0.0;
    for (double h : {1e-3, 1e-4, 1e-5}) {
        LatentCode zp = z;
        for (size_t i = 0; i < D; ++i) zp.data[i] += h * dir[i] / nd;
        Array moved = w.map_z_to_w(zp).data;
        double dist = 0.0;
        for (size_t i = 0; i < D; ++i) dist += (moved[i] - base[i]) * (moved[i] - base[i]);
        const double ratio = std::sqrt(dist) / h;
        CHECK(ratio < 1e3);
        if (prev_ratio != 0.0) CHECK(std::fabs(ratio - prev_ratio) / prev_ratio < 0.05);
        prev_ratio = ratio;
    }

    LatentCode wtag{Space::W, Array(Shape{D})};
    CHECK_THROWS_AS((void)w.map_z_to_w(wtag), SpaceError);
}

TEST_CASE("broadcast duplicates and round-trips") {
    WorldConfig c = desk_config();
    c.d = 512;
    FrozenWorld w(c);
    Rng rng(4);
    LatentCode wv = w.map_z_to_w(w.sample_z(rng));
    LatentCode wp = broadcast_w(wv, 18);
    CHECK(wp.data.shape() == Shape{18, 512});
    for (size_t l = 0; l < 18; ++l) {
        for (size_t j = 0; j < 512; ++j) CHECK(wp.data[l * 512 + j] == wv.data[j]);
    }
    // slice layer 7 back out
    Value layer7 = row(constant(wp.data), 7);
    CHECK(layer7.a().bitwise_equal(wv.data));
    CHECK_THROWS_AS(broadcast_w(wp, 18), SpaceError);
}

TEST_CASE("generate is deterministic and frequency-localized by layer group") {
    FrozenWorld w(desk_config());
    Rng rng(5);
    LatentCode code = broadcast_w(w.map_z_to_w(w.sample_z(rng)), 18);
    Array img1 = w.generate_image(code);
    Array img2 = w.generate_image(code);
    CHECK(img1.bitwise_equal(img2));

    // Perturbing fine2 layers (12..17) must change the 4x4-downsampled image
    // less than perturbing coarse layers (0..3), over 20 random perturbations.
    const size_t D = w.config().d;
    double coarse_energy = 0.0, fine2_energy = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        Array noise = rng.normal_array({D}, 0.1);
        auto perturbed = [&](size_t lo, size_t hi) {
            LatentCode p = code;
            for (size_t l = lo; l <= hi; ++l) {
                for (size_t j = 0; j < D; ++j) p.data[l * D + j] += noise[j];
            }
            Array delta = w.generate_image(p);
            for (size_t i = 0; i < delta.size(); ++i) delta[i] -= img1[i];
            return delta;
        };
        coarse_energy += low_freq_energy(perturbed(0, 3));
        fine2_energy += low_freq_energy(perturbed(12, 17));
    }
    INFO("coarse ", coarse_energy, " fine2 ", fine2_energy);
    CHECK(fine2_energy < coarse_energy);
}

TEST_CASE("generate gradient matches finite differences") {
    FrozenWorld w(desk_config());
    Rng rng(6);
    Array code = broadcast_w(w.map_z_to_w(w.sample_z(rng)), 18).data;
    auto objective = [&](const std::vector<Value>& p) { return sum(w.generate(p[0])); };
    auto rep = grad_check(objective, {code}, {"code"}, 1e-4, 48, 7);
    INFO("max rel err ", rep.max_rel_err, " at ", rep.where);
    CHECK(rep.pass);
}

TEST_CASE("identity embedders") {
    FrozenWorld w(desk_config());
    Rng rng(7);
    std::vector<Array> images;
    for (int i = 0; i < 10; ++i) {
        images.push_back(w.generate_image(broadcast_w(w.map_z_to_w(w.sample_z(rng)), 18)));
    }

    // unit norm contract
    for (const Array& img : images) {
        const Array e = w.embed_image(img, EmbedKind::train);
        CHECK(e.size() == 512);
        double n = 0.0;
        for (size_t i = 0; i < e.size(); ++i) n += e[i] * e[i];
        CHECK(std::fabs(std::sqrt(n) - 1.0) < 1e-6);
    }

    // identical images embed identically
    CHECK(cosine(w.embed_image(images[0], EmbedKind::train), w.embed_image(images[0], EmbedKind::train)) ==
          doctest::Approx(1.0).epsilon(1e-12));

    // train and eval embedders are different functions
    double mean_cos = 0.0;
    for (const Array& img : images) {
        mean_cos += std::fabs(cosine(w.embed_image(img, EmbedKind::train), w.embed_image(img, EmbedKind::eval)));
    }
    mean_cos /= static_cast<double>(images.size());
    INFO("mean |cos| train vs eval ", mean_cos);
    CHECK(mean_cos < 0.99);

    // wrong image shape
    CHECK_THROWS_AS((void)w.embed_image(Array(Shape{3, 16, 16}), EmbedKind::train), DimensionError);
}

TEST_CASE("coefficients, fusion, landmarks") {
    FrozenWorld w(desk_config());
    Rng rng(8);
    Array img = w.generate_image(broadcast_w(w.map_z_to_w(w.sample_z(rng)), 18));
    CoeffValues c = w.extract_coeffs(constant(img));
    CHECK(c.id.a().size() == 16);
    CHECK(c.expr.a().size() == 8);
    CHECK(c.pose.a().size() == 4);

    // fuse(c, c) == c
    CoeffValues f = fuse_coeffs(c, c);
    CHECK(f.id.a().bitwise_equal(c.id.a()));
    CHECK(f.expr.a().bitwise_equal(c.expr.a()));
    CHECK(f.pose.a().bitwise_equal(c.pose.a()));

    // fuse takes id from source, expr/pose from target
    Array img2 = w.generate_image(broadcast_w(w.map_z_to_w(w.sample_z(rng)), 18));
    CoeffValues c2 = w.extract_coeffs(constant(img2));
    CoeffValues f2 = fuse_coeffs(c, c2);
    CHECK(f2.id.a().bitwise_equal(c.id.a()));
    CHECK(f2.expr.a().bitwise_equal(c2.expr.a()));
    CHECK(f2.pose.a().bitwise_equal(c2.pose.a()));

    // landmark decode shape: 68 x 2
    Value q = w.decode_landmarks(c);
    CHECK(q.a().shape() == Shape{68, 2});
}

TEST_CASE("pipeline maps are smooth under step halving") {
    FrozenWorld w(desk_config());
    Rng rng(9);
    Array code = broadcast_w(w.map_z_to_w(w.sample_z(rng)), 18).data;
    Array dir = rng.normal_array(code.shape());

    auto scalar_probe = [&](const Array& c) {
        Value img = w.generate(constant(c));
        Value e = w.embed(img, EmbedKind::train);
        Value q = w.decode_landmarks(w.extract_coeffs(img));
        return sum(e).a().scalar_value() + sum(q).a().scalar_value();
    };
    auto directional = [&](double h) {
        Array plus = code, minus = code;
        for (size_t i = 0; i < code.size(); ++i) {
            plus[i] += h * dir[i];
            minus[i] -= h * dir[i];
        }
        return (scalar_probe(plus) - scalar_probe(minus)) / (2.0 * h);
    };
    const double d1 = directional(1e-4);
    const double d2 = directional(5e-5);
    CHECK(std::fabs(d1 - d2) / std::max(1e-8, std::fabs(d2)) < 1e-4);
}

TEST_CASE("serialization round-trips losslessly and verifies checksums") {
    FrozenWorld a(desk_config());
    const auto bytes = a.serialize();

    const std::string path = "/tmp/lswap_world_test.bin";
    a.save(path);
    FrozenWorld b = FrozenWorld::load(path);
    CHECK(b.serialize() == bytes);
    CHECK(b.checksum() == a.checksum());

    // corrupting a payload byte must fail the checksum
    auto corrupted = bytes;
    corrupted[64] ^= 0x01;
    write_file_bytes(path, corrupted);
    CHECK_THROWS_AS((void)FrozenWorld::load(path), IoError);
}

TEST_CASE("world magnitude probe") {
    // Sanity rails on the seeded world's scales; prints diagnostics used to
    // calibrate the gain constants.
    FrozenWorld w(desk_config());
    Rng rng(10);
    const size_t D = w.config().d;

    double wnorm = 0.0, istd = 0.0;
    std::vector<Array> imgs, embs;
    for (int i = 0; i < 12; ++i) {
        LatentCode wv = w.map_z_to_w(w.sample_z(rng));
        double n = 0.0;
        for (size_t j = 0; j < D; ++j) n += wv.data[j] * wv.data[j];
        wnorm += std::sqrt(n / static_cast<double>(D));
        Array img = w.generate_image(broadcast_w(wv, 18));
        double m = 0.0, s = 0.0;
        for (size_t j = 0; j < img.size(); ++j) m += img[j];
        m /= static_cast<double>(img.size());
        for (size_t j = 0; j < img.size(); ++j) s += (img[j] - m) * (img[j] - m);
        istd += std::sqrt(s / static_cast<double>(img.size()));
        imgs.push_back(img);
        embs.push_back(w.embed_image(img, EmbedKind::train));
    }
    wnorm /= 12.0;
    istd /= 12.0;

    double pair_cos = 0.0, id_loss = 0.0;
    int pairs = 0;
    for (size_t i = 0; i < embs.size(); ++i) {
        for (size_t j = i + 1; j < embs.size(); ++j) {
            const double c = cosine(embs[i], embs[j]);
            pair_cos += std::fabs(c);
            id_loss += 1.0 - c;
            ++pairs;
        }
    }
    pair_cos /= pairs;
    id_loss /= pairs;

    std::printf("[probe] per-dim |w| %.3f, image std %.3f, mean |cos| %.3f, mean id loss %.3f\n", wnorm,
                istd, pair_cos, id_loss);
    CHECK(wnorm > 0.05);
    CHECK(wnorm < 20.0);
    CHECK(istd > 0.05);
    CHECK(istd < 50.0);
    CHECK(pair_cos < 0.9);   // embeddings of random identities are spread out
    CHECK(id_loss > 0.3);    // a random pair starts with a substantial id loss
}

}  // TEST_SUITE
