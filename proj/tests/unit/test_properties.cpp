// Randomized properties over the whole model family.
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "lcirt/estimation.hpp"
#include "oracle.hpp"

using namespace lcirt;

TEST_CASE("log-likelihood is invariant to relabelling classes") {
    std::mt19937_64 rng(201);
    for (int rep = 0; rep < 40; ++rep) {
        const auto spec = oracle::random_spec(rng, {5, 4, 4, true});
        const auto data = aggregate(oracle::random_data(spec, 60, 0.1, rep), spec.cats);
        const auto p = oracle::random_params(spec, 900 + rep);
        std::vector<int> perm(spec.classes);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        ParameterSet q = p;
        for (int c = 0; c < spec.classes; ++c) {
            q.weights(c) = p.weights(perm[c]);
            if (!spec.is_latent_class()) q.support.row(c) = p.support.row(perm[c]);
            for (std::size_t j = 0; j < p.class_probs.size(); ++j) q.class_probs[j].col(c) = p.class_probs[j].col(perm[c]);
        }
        CHECK(log_likelihood(spec, q, data) == doctest::Approx(log_likelihood(spec, p, data)).epsilon(1e-12));
    }
}

TEST_CASE("posterior rows are probability vectors") {
    std::mt19937_64 rng(203);
    for (int rep = 0; rep < 40; ++rep) {
        const auto spec = oracle::random_spec(rng, {6, 4, 4, true});
        const auto data = aggregate(oracle::random_data(spec, 80, 0.2, rep), spec.cats);
        const auto counts = e_step(spec, oracle::random_params(spec, rep), data);
        CHECK(counts.posterior.minCoeff() >= 0.0);
        CHECK((counts.posterior.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("constraint normalization leaves the likelihood unchanged") {
    std::mt19937_64 rng(205);
    for (int rep = 0; rep < 40; ++rep) {
        const auto spec = oracle::random_spec(rng, {6, 4, 3, false});
        const auto data = aggregate(oracle::random_data(spec, 80, 0.0, rep), spec.cats);
        ParameterSet p = oracle::random_params(spec, rep);
        const double before = log_likelihood(spec, p, data);
        const double shift = std::normal_distribution<double>(0.0, 2.0)(rng);
        p.support.array() += shift;
        for (auto& t : p.thresholds) t.array() += shift;
        if (p.item_location.size()) p.item_location.array() += shift;
        CHECK(log_likelihood(spec, p, data) == doctest::Approx(before).epsilon(1e-12));
        normalize_constraints(spec, p);
        CHECK(log_likelihood(spec, p, data) == doctest::Approx(before).epsilon(1e-12));
    }
}

TEST_CASE("fitted model never loses to its starting point") {
    std::mt19937_64 rng(207);
    for (int rep = 0; rep < 20; ++rep) {
        const auto spec = oracle::random_spec(rng, {6, 3, 3, true});
        const auto data = aggregate(oracle::random_data(spec, 150, 0.1, rep), spec.cats);
        const auto start = random_start(spec, data, rep + 1);
        FitOptions opt;
        opt.max_iter = 300;
        const auto f = fit_from(spec, data, start, opt);
        CHECK(f.loglik >= log_likelihood(spec, start, data) - 1e-10);
        CHECK_NOTHROW(validate_params(spec, f.params));
    }
}

TEST_CASE("nesting of model families shows in the maximized likelihood") {
    // A latent class model with the same k contains every logit model.
    std::mt19937_64 rng(209);
    for (int rep = 0; rep < 8; ++rep) {
        auto spec = oracle::random_spec(rng, {5, 3, 3, false});
        const auto data = aggregate(oracle::random_data(spec, 200, 0.0, rep), spec.cats);
        ModelSpec lc = spec;
        lc.link = LinkKind::None;
        const auto irt = fit(spec, data, StartPolicy::random({1, 2, 3}, true));
        // Warm-start the LC model at the fitted conditional probabilities.
        ParameterSet warm;
        warm.weights = irt.params.weights;
        warm.class_probs = irt.probs.items;
        const auto unrestricted = fit(lc, data, StartPolicy::from(warm));
        CHECK(unrestricted.loglik >= irt.loglik - 1e-8);
    }
}
