#include <cmath>

#include "doctest.h"
#include "gradient_check.hpp"
#include "hsc/error.hpp"
#include "hsc/training.hpp"
#include "test_support.hpp"

using namespace hsc;
using namespace hsc::testing;

namespace {

HeadOutputs outputs_of(const Taxonomy& t, std::vector<double> coarse,
                       std::vector<std::vector<double>> fine) {
    HeadOutputs o{std::move(coarse), std::move(fine), {}};
    o.joint = joint_scores(t, o.coarse, o.fine_local);
    return o;
}

const Scheme kAllSchemes[] = {Scheme::Baseline, Scheme::Scheme1, Scheme::Scheme2, Scheme::Scheme3};

}  // namespace

TEST_CASE("loss of a single-species taxonomy is zero") {
    const auto t = small_taxonomy({1});
    const auto o = outputs_of(t, {1.0}, {{1.0}});
    for (Scheme s : {Scheme::Scheme1, Scheme::Scheme2, Scheme::Scheme3})
        CHECK(compute_loss(s, o, t, {0, 0}) == 0.0);
}

TEST_CASE("scheme2 loss on a hand-computed example") {
    const auto t = small_taxonomy({2, 1});
    const auto o = outputs_of(t, {0.7, 0.3}, {{0.8, 0.2}, {1.0}});
    // -ln 0.7 - ln(0.7 * 0.8), evaluated with mpmath at 30 digits.
    const double expected = 0.9364934391916745;
    CHECK(compute_loss(Scheme::Scheme2, o, t, {0, 0}) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(compute_loss(Scheme::Scheme2, o, t, {0, 0}) == compute_loss(Scheme::Scheme3, o, t, {0, 0}));
}

TEST_CASE("loss identities hold on random outputs") {
    std::mt19937_64 rng(11);
    const auto t = small_taxonomy({2, 3, 4});
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::vector<double>> fine;
        for (std::size_t g = 0; g < 3; ++g) fine.push_back(random_simplex(t.group_size(g), rng));
        const auto o = outputs_of(t, random_simplex(3, rng), fine);
        const std::size_t s = rng() % t.species_count();
        const Label label{t.group_of(s), s};
        const double l1 = compute_loss(Scheme::Scheme1, o, t, label);
        const double l2 = compute_loss(Scheme::Scheme2, o, t, label);
        const double l3 = compute_loss(Scheme::Scheme3, o, t, label);
        CHECK(std::abs(l2 - l3) <= 1e-12);
        CHECK(std::abs(l3 - (l1 - std::log(o.coarse[label.group]))) <= 1e-12);
    }
}

TEST_CASE("loss rejects bad labels") {
    const auto t = small_taxonomy({2, 1});
    const auto o = outputs_of(t, {0.5, 0.5}, {{0.5, 0.5}, {1.0}});
    CHECK_THROWS_AS(compute_loss(Scheme::Scheme3, o, t, {0, 5}), Error);
    try {
        compute_loss(Scheme::Scheme3, o, t, {1, 0});
        FAIL("expected InconsistentLabels");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InconsistentLabels);
    }
    try {
        compute_flat_loss(std::vector<double>{0.5, 0.25, 0.25}, t, {3, 0});
        FAIL("expected LabelOutOfRange");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::LabelOutOfRange);
    }
}

TEST_CASE("analytic gradients match central differences") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto c = random_case(seed);
        for (Scheme s : kAllSchemes) {
            CAPTURE(seed);
            CAPTURE(to_string(s));
            CHECK(max_relative_error(c, s) <= 1e-4);
        }
    }
}

TEST_CASE("scheme2 and scheme3 gradients coincide") {
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
        const auto c = random_case(seed);
        const auto g2 = compute_gradients(c.params, c.batch, Scheme::Scheme2, c.taxonomy).grad;
        const auto g3 = compute_gradients(c.params, c.batch, Scheme::Scheme3, c.taxonomy).grad;
        const auto a = g2.layers();
        const auto b = g3.layers();
        for (std::size_t l = 0; l < a.size(); ++l)
            for (std::size_t i = 0; i < a[l]->weight.size(); ++i)
                CHECK(std::abs(a[l]->weight[i] - b[l]->weight[i]) <= 1e-12);
    }
}

TEST_CASE("softmax gradient rows sum to zero on the coarse bias") {
    const auto t = small_taxonomy({2, 2});
    auto p = zeros_like(init_params(t, FeatureMode::Trunk, {4, 3, 3, 3}, 1));
    std::vector<LabeledExample> batch;
    for (std::size_t s = 0; s < 4; ++s) batch.push_back({std::vector<double>(4, 1.0), {t.group_of(s), s}});
    for (Scheme s : {Scheme::Scheme1, Scheme::Scheme3}) {
        const auto g = compute_gradients(p, batch, s, t).grad;
        double total = 0.0;
        for (double b : g.coarse2.bias) total += b;
        CHECK(std::abs(total) <= 1e-15);
    }
}

TEST_CASE("unused heads receive zero gradient") {
    const auto c = random_case(5);
    const auto hier = compute_gradients(c.params, c.batch, Scheme::Scheme3, c.taxonomy).grad;
    for (double w : hier.flat1.weight) CHECK(w == 0.0);
    const auto flat = compute_gradients(c.params, c.batch, Scheme::Baseline, c.taxonomy).grad;
    for (double w : flat.coarse2.weight) CHECK(w == 0.0);
}

TEST_CASE("training with zero epochs returns the seeded initialization") {
    const auto t = small_taxonomy({2, 1});
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.dims = {4, 3, 3, 3};
    std::vector<LabeledExample> data{{std::vector<double>(4, 0.5), {0, 1}}};
    const auto r = train(cfg, data, t);
    CHECK(r.loss_history.empty());
    CHECK(r.params == init_params(t, FeatureMode::Trunk, cfg.dims, derive_seed(cfg.seed, "init")));
}

TEST_CASE("training is deterministic and reduces loss on separable data") {
    const auto t = small_taxonomy({2, 2});
    std::mt19937_64 rng(3);
    std::vector<std::vector<double>> centers;
    for (int s = 0; s < 4; ++s) centers.push_back(random_vector(6, rng, 2.0));
    std::vector<LabeledExample> data;
    for (int k = 0; k < 200; ++k) {
        const std::size_t s = static_cast<std::size_t>(k % 4);
        auto x = centers[s];
        for (double& v : x) v += 0.3 * standard_normal(rng);
        data.push_back({x, {t.group_of(s), s}});
    }
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.dims = {6, 8, 8, 8};
    for (Scheme s : kAllSchemes) {
        cfg.scheme = s;
        const auto a = train(cfg, data, t);
        const auto b = train(cfg, data, t);
        CHECK(a.params == b.params);
        CHECK(a.loss_history == b.loss_history);
        CHECK(a.loss_history.back() < a.loss_history.front());
    }
}

TEST_CASE("training error paths") {
    const auto t = small_taxonomy({2, 1});
    TrainConfig cfg;
    CHECK_THROWS_AS(train(cfg, {}, t), Error);
    cfg.learning_rate = 0.0;
    std::vector<LabeledExample> data{{std::vector<double>(32, 0.5), {0, 1}}};
    CHECK_THROWS_AS(train(cfg, data, t), Error);

    cfg.learning_rate = 1e6;
    cfg.epochs = 5;
    std::vector<LabeledExample> loud;
    for (int k = 0; k < 64; ++k)
        loud.push_back({std::vector<double>(32, k % 2 ? 50.0 : -50.0), {k % 2 ? 1u : 0u, k % 2 ? 2u : 0u}});
    try {
        train(cfg, loud, t);
        FAIL("expected DivergedTraining");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DivergedTraining);
    }
}

TEST_CASE("train config JSON overrides only present fields") {
    const auto c = TrainConfig::from_json(R"({"learning_rate": 0.01, "scheme": "scheme1"})");
    CHECK(c.learning_rate == 0.01);
    CHECK(c.scheme == Scheme::Scheme1);
    CHECK(c.momentum == 0.9);
    CHECK(c.batch_size == 32);
    CHECK_THROWS_AS(TrainConfig::from_json(R"({"momentum": 1.0})"), Error);
    CHECK(TrainConfig::from_json(c.to_json()).learning_rate == 0.01);
}
