#include "lcirt/simulate.hpp"

#include <random>

#include "lcirt/error.hpp"
#include "parallel.hpp"

namespace lcirt {

namespace {

constexpr std::size_t kBlockUnits = 4096;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

int draw(const Eigen::VectorXd& cumulative, double u) {
    const Eigen::Index last = cumulative.size() - 1;
    for (Eigen::Index i = 0; i < last; ++i)
        if (u < cumulative(i)) return static_cast<int>(i);
    return static_cast<int>(last);
}

Eigen::VectorXd cumsum(const Eigen::VectorXd& p) {
    Eigen::VectorXd out(p.size());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) out(i) = (acc += p(i));
    return out;
}

}  // namespace

Simulation simulate(const SimulationPlan& plan) {
    plan.spec.validate();
    validate_params(plan.spec, plan.params);
    if (plan.units == 0) throw ValidationError("simulation needs at least one unit");
    if (!(plan.missing_rate >= 0.0 && plan.missing_rate < 1.0))
        throw ValidationError("missing_rate must lie in [0, 1)");

    const int r = plan.spec.items();
    const int k = plan.spec.classes;
    const auto probs = conditional_probs(plan.spec, plan.params);
    const Eigen::VectorXd class_cdf = cumsum(plan.params.weights);
    std::vector<std::vector<Eigen::VectorXd>> item_cdf(r, std::vector<Eigen::VectorXd>(k));
    for (int j = 0; j < r; ++j)
        for (int c = 0; c < k; ++c) item_cdf[j][c] = cumsum(probs[j].col(c));

    Simulation out;
    out.responses = RawResponses(plan.units, static_cast<std::size_t>(r));
    out.classes.assign(plan.units, 0);
    const std::size_t blocks = (plan.units + kBlockUnits - 1) / kBlockUnits;
    detail::parallel_for(blocks, plan.threads, [&](std::size_t b) {
        std::mt19937_64 rng(splitmix64(plan.seed ^ splitmix64(b)));
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        const std::size_t begin = b * kBlockUnits;
        const std::size_t end = std::min(plan.units, begin + kBlockUnits);
        for (std::size_t i = begin; i < end; ++i) {
            const int c = draw(class_cdf, unif(rng));
            out.classes[i] = c;
            for (int j = 0; j < r; ++j) {
                const int x = draw(item_cdf[j][c], unif(rng));
                const bool drop = plan.missing_rate > 0.0 && unif(rng) < plan.missing_rate;
                if (drop)
                    out.responses.set_missing(i, static_cast<std::size_t>(j));
                else
                    out.responses.set(i, static_cast<std::size_t>(j), x);
            }
        }
    });
    return out;
}

}  // namespace lcirt
