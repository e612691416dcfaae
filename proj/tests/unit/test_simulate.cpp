#include <doctest.h>

#include <cmath>

#include "lcirt/error.hpp"
#include "lcirt/simulate.hpp"
#include "oracle.hpp"

using namespace lcirt;

namespace {

SimulationPlan plan_for(std::uint64_t seed, std::size_t units) {
    SimulationPlan plan;
    plan.spec = make_spec(2, LinkKind::Global, Discrimination::Free, Difficulty::Free, {{0, 1}, {2}}, {3, 2, 4});
    plan.params = oracle::random_params(plan.spec, 5);
    plan.units = units;
    plan.seed = seed;
    return plan;
}

}  // namespace

TEST_CASE("simulation is reproducible and thread-independent") {
    auto plan = plan_for(11, 10000);
    const auto a = simulate(plan);
    const auto b = simulate(plan);
    CHECK(a.responses == b.responses);
    CHECK(a.classes == b.classes);
    plan.threads = 4;
    const auto c = simulate(plan);
    CHECK(a.responses == c.responses);
    CHECK(a.classes == c.classes);
    plan.seed = 12;
    CHECK_FALSE(simulate(plan).responses == a.responses);
}

TEST_CASE("simulated frequencies follow the model") {
    auto plan = plan_for(13, 40000);
    const auto sim = simulate(plan);
    const auto probs = conditional_probs(plan.spec, plan.params);
    const int k = plan.spec.classes;
    std::vector<double> class_n(k, 0.0);
    for (int c : sim.classes) class_n[c] += 1;
    for (int c = 0; c < k; ++c) {
        const double expected = plan.params.weights(c);
        const double sd = std::sqrt(expected * (1 - expected) / plan.units);
        CHECK(std::abs(class_n[c] / plan.units - expected) < 5 * sd);
    }
    for (int j = 0; j < plan.spec.items(); ++j)
        for (int c = 0; c < k; ++c) {
            std::vector<double> counts(plan.spec.cats[j], 0.0);
            for (std::size_t i = 0; i < plan.units; ++i)
                if (sim.classes[i] == c) counts[sim.responses.code(i, j)] += 1;
            for (int x = 0; x < plan.spec.cats[j]; ++x) {
                const double p = probs[j](x, c);
                const double sd = std::sqrt(p * (1 - p) / class_n[c]);
                CHECK(std::abs(counts[x] / class_n[c] - p) < 5 * sd + 1e-12);
            }
        }
}

TEST_CASE("missing cells at the requested rate") {
    auto plan = plan_for(17, 20000);
    plan.missing_rate = 0.1;
    const auto sim = simulate(plan);
    double missing = 0;
    for (std::size_t i = 0; i < plan.units; ++i)
        for (std::size_t j = 0; j < 3; ++j) missing += sim.responses.missing(i, j);
    const double rate = missing / (3.0 * plan.units);
    CHECK(rate == doctest::Approx(0.1).epsilon(0.05));
}

TEST_CASE("latent class simulation") {
    SimulationPlan plan;
    plan.spec = make_spec(3, LinkKind::None, Discrimination::Constrained, Difficulty::Free, unidimensional(4),
                          {2, 3, 2, 2});
    plan.params = oracle::random_params(plan.spec, 9);
    plan.units = 500;
    plan.seed = 1;
    const auto sim = simulate(plan);
    CHECK(sim.responses.units() == 500);
    for (int c : sim.classes) CHECK((c >= 0 && c < 3));
}

TEST_CASE("invalid plans") {
    auto plan = plan_for(1, 0);
    CHECK_THROWS_AS(simulate(plan), ValidationError);
    plan.units = 10;
    plan.missing_rate = 1.0;
    CHECK_THROWS_AS(simulate(plan), ValidationError);
    plan.missing_rate = 0.0;
    plan.params.weights(0) = 2.0;
    CHECK_THROWS_AS(simulate(plan), ValidationError);
}

TEST_CASE("point-mass items give identical rows") {
    SimulationPlan plan;
    plan.spec = make_spec(1, LinkKind::None, Discrimination::Constrained, Difficulty::Free, unidimensional(3), {2, 3, 2});
    plan.params.weights = Eigen::VectorXd::Ones(1);
    plan.params.class_probs = {Eigen::Vector2d(0.0, 1.0), Eigen::Vector3d(0.0, 0.0, 1.0), Eigen::Vector2d(1.0, 0.0)};
    plan.units = 200;
    plan.seed = 4;
    const auto data = aggregate(simulate(plan).responses, plan.spec.cats);
    CHECK(data.patterns() == 1);
    CHECK(data.codes == std::vector<int>{1, 2, 0});
}

TEST_CASE("empirical pattern frequencies match the mixture probabilities") {
    SimulationPlan plan;
    plan.spec = make_spec(2, LinkKind::Global, Discrimination::Free, Difficulty::Free, unidimensional(2), {2, 2});
    plan.params = oracle::random_params(plan.spec, 21);
    plan.units = 1'000'000;
    plan.seed = 99;
    plan.threads = 2;
    const auto data = aggregate(simulate(plan).responses, plan.spec.cats);
    double worst = 0.0;
    const std::vector<bool> all(2, true);
    for (std::size_t q = 0; q < data.patterns(); ++q) {
        const std::vector<int> x{data.code(q, 0), data.code(q, 1)};
        worst = std::max(worst, std::abs(data.freq[q] / 1e6 - oracle::pattern_prob(plan.spec, plan.params, x, all)));
    }
    CHECK(data.patterns() == 4);
    CHECK(worst < 0.005);
}

TEST_CASE("missing fraction concentrates") {
    auto plan = plan_for(31, 100'000);
    plan.missing_rate = 0.1;
    const auto sim = simulate(plan);
    double missing = 0;
    for (std::size_t i = 0; i < plan.units; ++i)
        for (std::size_t j = 0; j < 3; ++j) missing += sim.responses.missing(i, j);
    CHECK(std::abs(missing / (3.0 * plan.units) - 0.1) < 0.01);
}
