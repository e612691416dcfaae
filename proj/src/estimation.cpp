#include "lcirt/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lcirt/error.hpp"
#include "parallel.hpp"

namespace lcirt {

std::string to_string(StartKind kind) {
    switch (kind) {
        case StartKind::Deterministic: return "deterministic";
        case StartKind::Random: return "random";
        case StartKind::User: return "user";
    }
    return "deterministic";
}

void check_compatible(const ModelSpec& spec, const ResponseMatrix& data) {
    if (static_cast<int>(data.items) != spec.items())
        throw ValidationError("data has " + std::to_string(data.items) + " items but the model has " +
                              std::to_string(spec.items()));
    for (std::size_t p = 0; p < data.patterns(); ++p)
        for (std::size_t j = 0; j < data.items; ++j)
            if (data.observed(p, j) && data.code(p, j) >= spec.cats[j])
                throw ValidationError("item " + std::to_string(j + 1) + " has code " +
                                      std::to_string(data.code(p, j)) + " but only " +
                                      std::to_string(spec.cats[j]) + " categories");
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log(double v) { return v > 0.0 ? std::log(v) : kNegInf; }

ExpectedCounts expected_counts(const std::vector<Eigen::MatrixXd>& probs,
                               const Eigen::VectorXd& weights, const ResponseMatrix& data) {
    const std::size_t m = data.patterns();
    const std::size_t r = data.items;
    const Eigen::Index k = weights.size();

    std::vector<Eigen::MatrixXd> log_probs(r);
    for (std::size_t j = 0; j < r; ++j) log_probs[j] = probs[j].unaryExpr(&safe_log);
    const Eigen::VectorXd log_weights = weights.unaryExpr(&safe_log);

    ExpectedCounts out;
    out.joint.resize(m, k);
    out.posterior.resize(m, k);
    out.loglik = 0.0;
    Eigen::VectorXd lp(k);
    for (std::size_t p = 0; p < m; ++p) {
        lp = log_weights;
        for (std::size_t j = 0; j < r; ++j)
            if (data.observed(p, j)) lp += log_probs[j].row(data.code(p, j)).transpose();
        const double top = lp.maxCoeff();
        if (!std::isfinite(top))
            throw NumericError("response pattern " + std::to_string(p + 1) +
                               " has zero probability under every class");
        const double lse = top + std::log((lp.array() - top).exp().sum());
        out.posterior.row(p) = (lp.array() - lse).exp().transpose();
        out.joint.row(p) = data.freq[p] * out.posterior.row(p);
        out.loglik += data.freq[p] * lse;
    }
    out.class_totals = out.joint.colwise().sum().transpose();
    out.item_counts.resize(r);
    out.item_totals = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(r), k);
    for (std::size_t j = 0; j < r; ++j) {
        out.item_counts[j] = Eigen::MatrixXd::Zero(probs[j].rows(), k);
        for (std::size_t p = 0; p < m; ++p)
            if (data.observed(p, j)) out.item_counts[j].row(data.code(p, j)) += out.joint.row(p);
        out.item_totals.row(static_cast<Eigen::Index>(j)) = out.item_counts[j].colwise().sum();
    }
    return out;
}

double item_expected_loglik(const Eigen::MatrixXd& counts, const Eigen::MatrixXd& probs) {
    double total = 0.0;
    for (Eigen::Index c = 0; c < counts.cols(); ++c)
        for (Eigen::Index x = 0; x < counts.rows(); ++x)
            if (counts(x, c) > 0.0) total += counts(x, c) * safe_log(probs(x, c));
    return total;
}

// Cached layout and design blocks for one spec.
class Engine {
public:
    explicit Engine(const ModelSpec& spec) : spec_(spec), layout_(spec) {
        if (spec.is_latent_class()) return;
        blocks_.reserve(static_cast<std::size_t>(spec.classes * spec.items()));
        for (int c = 0; c < spec.classes; ++c)
            for (int j = 0; j < spec.items(); ++j) blocks_.push_back(design_block(layout_, c, j));
    }

    const ParameterLayout& layout() const { return layout_; }

    const DesignBlock& block(int c, int j) const {
        return blocks_[static_cast<std::size_t>(c * spec_.items() + j)];
    }

    double gamma(const PackedParams& x, int j) const {
        const int col = layout_.gamma_column(j);
        return col >= 0 ? x.gamma_free(col) : 1.0;
    }

    // Z_cj phi.
    Eigen::VectorXd design_times_phi(const Eigen::VectorXd& phi, int c, int j) const {
        const DesignBlock& b = block(c, j);
        Eigen::VectorXd v(static_cast<Eigen::Index>(b.columns.size()));
        for (std::size_t i = 0; i < b.columns.size(); ++i) v(static_cast<Eigen::Index>(i)) = phi(b.columns[i]);
        return b.coef * v;
    }

    bool item_probs(const PackedParams& x, int j, Eigen::MatrixXd& out) const {
        out.resize(spec_.cats[j], spec_.classes);
        const double g = gamma(x, j);
        for (int c = 0; c < spec_.classes; ++c) {
            auto lambda = logits_to_probs(g * design_times_phi(x.phi, c, j), spec_.link);
            if (!lambda) return false;
            out.col(c) = *lambda;
        }
        return true;
    }

    bool all_probs(const PackedParams& x, std::vector<Eigen::MatrixXd>& out) const {
        out.resize(spec_.items());
        for (int j = 0; j < spec_.items(); ++j)
            if (!item_probs(x, j, out[j])) return false;
        return true;
    }

    FisherTerms terms(const PackedParams& x, const std::vector<Eigen::MatrixXd>& probs,
                      const ExpectedCounts& counts) const {
        FisherTerms t;
        t.phi_score = Eigen::VectorXd::Zero(layout_.phi_size());
        t.phi_info = Eigen::MatrixXd::Zero(layout_.phi_size(), layout_.phi_size());
        t.gamma_score = Eigen::VectorXd::Zero(layout_.gamma_size());
        t.gamma_info = Eigen::VectorXd::Zero(layout_.gamma_size());
        for (int j = 0; j < spec_.items(); ++j) {
            const int q = spec_.cats[j] - 1;
            const double g = gamma(x, j);
            const int gcol = layout_.gamma_column(j);
            for (int c = 0; c < spec_.classes; ++c) {
                const double total = counts.item_totals(j, c);
                if (total <= 0.0) continue;
                const Eigen::VectorXd lambda = probs[j].col(c);
                const Eigen::VectorXd tail = lambda.tail(q);
                const Eigen::VectorXd resid = counts.item_counts[j].col(c).tail(q) - total * tail;
                const Eigen::MatrixXd var =
                    Eigen::MatrixXd(tail.asDiagonal()) - tail * tail.transpose();
                const Eigen::MatrixXd deriv = derivative_matrix(lambda, spec_.link);
                const Eigen::VectorXd score_eta = deriv.transpose() * resid;
                const Eigen::MatrixXd info_eta = deriv.transpose() * var * deriv;

                const DesignBlock& b = block(c, j);
                if (gcol >= 0) {
                    const Eigen::VectorXd zphi = design_times_phi(x.phi, c, j);
                    t.gamma_score(gcol) += zphi.dot(score_eta);
                    t.gamma_info(gcol) += total * zphi.dot(info_eta * zphi);
                }
                const Eigen::VectorXd s_local = g * b.coef.transpose() * score_eta;
                const Eigen::MatrixXd f_local =
                    (total * g * g) * b.coef.transpose() * info_eta * b.coef;
                for (std::size_t a = 0; a < b.columns.size(); ++a) {
                    t.phi_score(b.columns[a]) += s_local(static_cast<Eigen::Index>(a));
                    for (std::size_t e = 0; e < b.columns.size(); ++e)
                        t.phi_info(b.columns[a], b.columns[e]) +=
                            f_local(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(e));
                }
            }
        }
        return t;
    }

    double expected_loglik(const std::vector<Eigen::MatrixXd>& probs,
                           const ExpectedCounts& counts) const {
        double total = 0.0;
        for (int j = 0; j < spec_.items(); ++j)
            total += item_expected_loglik(counts.item_counts[j], probs[j]);
        return total;
    }

    // One gamma pass followed by one phi pass. `probs` tracks `x`.
    void sweep(PackedParams& x, std::vector<Eigen::MatrixXd>& probs, const ExpectedCounts& counts,
               int max_halvings, std::vector<std::string>* warnings) const {
        if (layout_.gamma_size() > 0) {
            const FisherTerms t = terms(x, probs, counts);
            Eigen::MatrixXd trial_probs;
            for (int j : layout_.free_gamma_items()) {
                const int col = layout_.gamma_column(j);
                if (!(t.gamma_info(col) > 0.0)) continue;
                const double step = t.gamma_score(col) / t.gamma_info(col);
                const double base = x.gamma_free(col);
                const double current = item_expected_loglik(counts.item_counts[j], probs[j]);
                double scale = 1.0;
                for (int h = 0; h <= max_halvings; ++h, scale *= 0.5) {
                    x.gamma_free(col) = base + scale * step;
                    if (item_probs(x, j, trial_probs) &&
                        accept(item_expected_loglik(counts.item_counts[j], trial_probs), current, h)) {
                        probs[j] = trial_probs;
                        break;
                    }
                    x.gamma_free(col) = base;
                }
            }
        }

        if (layout_.phi_size() == 0) return;
        const FisherTerms t = terms(x, probs, counts);
        const Eigen::VectorXd step = solve(t.phi_info, t.phi_score, warnings);
        if (!step.allFinite() || step.isZero(0.0)) return;
        const Eigen::VectorXd base = x.phi;
        const double current = expected_loglik(probs, counts);
        std::vector<Eigen::MatrixXd> trial;
        double scale = 1.0;
        for (int h = 0; h <= max_halvings; ++h, scale *= 0.5) {
            x.phi = base + scale * step;
            if (all_probs(x, trial) && accept(expected_loglik(trial, counts), current, h)) {
                probs = std::move(trial);
                return;
            }
        }
        // Halving cannot tame a step dominated by a near-flat direction of F; damp
        // toward the score direction instead.
        const double unit = std::max(t.phi_info.trace(), 1e-300) / static_cast<double>(t.phi_info.rows());
        const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(t.phi_info.rows(), t.phi_info.cols());
        for (double mu = 1e-4 * unit; mu <= 1e8 * unit; mu *= 10.0) {
            Eigen::LLT<Eigen::MatrixXd> damped(t.phi_info + mu * eye);
            if (damped.info() != Eigen::Success) continue;
            x.phi = base + damped.solve(t.phi_score);
            if (all_probs(x, trial) && expected_loglik(trial, counts) > current) {
                probs = std::move(trial);
                return;
            }
        }
        x.phi = base;
    }

private:
    // Near the maximizer the Newton gain drops below the rounding noise of Q, so the
    // full step is allowed a rounding-sized loss. Halved steps must not lose anything.
    static bool accept(double trial, double current, int halvings) {
        if (halvings == 0)
            return trial >= current - 16.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(current));
        return trial >= current;
    }

    static Eigen::VectorXd solve(const Eigen::MatrixXd& info, const Eigen::VectorXd& score,
                                 std::vector<std::string>* warnings) {
        Eigen::LLT<Eigen::MatrixXd> llt(info);
        if (llt.info() == Eigen::Success && llt.rcond() > 1e-12) return llt.solve(score);
        const double ridge = 1e-8 * std::max(info.trace(), 1e-300) / static_cast<double>(info.rows());
        if (warnings) {
            const std::string msg = "information matrix near-singular; ridge regularization applied";
            if (std::find(warnings->begin(), warnings->end(), msg) == warnings->end())
                warnings->push_back(msg);
        }
        const Eigen::MatrixXd regular =
            info + ridge * Eigen::MatrixXd::Identity(info.rows(), info.cols());
        Eigen::LDLT<Eigen::MatrixXd> ldlt(regular);
        if (ldlt.info() != Eigen::Success) return Eigen::VectorXd::Zero(score.size());
        return ldlt.solve(score);
    }

    ModelSpec spec_;
    ParameterLayout layout_;
    std::vector<DesignBlock> blocks_;
};

std::vector<Eigen::MatrixXd> checked_probs(const ModelSpec& spec, const ParameterSet& params) {
    return conditional_probs(spec, params);
}

void latent_class_update(std::vector<Eigen::MatrixXd>& class_probs, const ExpectedCounts& counts) {
    for (std::size_t j = 0; j < class_probs.size(); ++j) {
        for (Eigen::Index c = 0; c < class_probs[j].cols(); ++c) {
            const double total = counts.item_totals(static_cast<Eigen::Index>(j), c);
            if (total > 0.0) class_probs[j].col(c) = counts.item_counts[j].col(c) / total;
        }
    }
}

// Classes in ascending order of the first-dimension support point (expected
// total score for the unrestricted LC model).
std::vector<int> class_order(const ModelSpec& spec, const ParameterSet& p,
                             const std::vector<Eigen::MatrixXd>& probs) {
    const int k = spec.classes;
    std::vector<double> key(k, 0.0);
    for (int c = 0; c < k; ++c) {
        if (!spec.is_latent_class()) {
            key[c] = p.support(c, 0);
        } else {
            for (const auto& item : probs)
                for (Eigen::Index x = 0; x < item.rows(); ++x) key[c] += static_cast<double>(x) * item(x, c);
        }
    }
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) { return key[a] < key[b]; });
    return perm;
}

Eigen::MatrixXd permute_cols(const Eigen::MatrixXd& m, const std::vector<int>& perm) {
    Eigen::MatrixXd out(m.rows(), m.cols());
    for (std::size_t c = 0; c < perm.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = m.col(perm[c]);
    return out;
}

void reorder_classes(FitResult& fit) {
    const auto perm = class_order(fit.spec, fit.params, fit.probs.items);
    if (std::is_sorted(perm.begin(), perm.end())) return;
    ParameterSet& p = fit.params;
    Eigen::VectorXd w(p.weights.size());
    for (std::size_t c = 0; c < perm.size(); ++c) w(static_cast<Eigen::Index>(c)) = p.weights(perm[c]);
    p.weights = w;
    if (p.support.size() > 0) p.support = permute_cols(p.support.transpose(), perm).transpose();
    for (auto& m : p.class_probs) m = permute_cols(m, perm);
    for (auto& m : fit.probs.items) m = permute_cols(m, perm);
    fit.posterior = permute_cols(fit.posterior, perm);
}

}  // namespace

double log_likelihood(const ModelSpec& spec, const ParameterSet& params, const ResponseMatrix& data) {
    return expected_counts(checked_probs(spec, params), params.weights, data).loglik;
}

ExpectedCounts e_step(const ModelSpec& spec, const ParameterSet& params, const ResponseMatrix& data) {
    return expected_counts(checked_probs(spec, params), params.weights, data);
}

Eigen::VectorXd m_step_weights(const ExpectedCounts& counts) {
    const double n = counts.class_totals.sum();
    if (!(n > 0.0)) throw NumericError("expected class totals sum to zero");
    return counts.class_totals / n;
}

double expected_item_loglik(const ModelSpec& spec, const ParameterSet& params,
                            const ExpectedCounts& counts) {
    const auto probs = checked_probs(spec, params);
    double total = 0.0;
    for (std::size_t j = 0; j < probs.size(); ++j)
        total += item_expected_loglik(counts.item_counts[j], probs[j]);
    return total;
}

FisherTerms fisher_terms(const ModelSpec& spec, const ParameterSet& params,
                         const ExpectedCounts& counts) {
    if (spec.is_latent_class()) throw ValidationError("the standard LC model has no Fisher-scoring step");
    const Engine engine(spec);
    return engine.terms(engine.layout().pack(params), checked_probs(spec, params), counts);
}

ParameterSet m_step_fisher(const ModelSpec& spec, const ParameterSet& params,
                           const ExpectedCounts& counts, int sweeps, int max_halvings,
                           std::vector<std::string>* warnings) {
    if (spec.is_latent_class()) throw ValidationError("the standard LC model has no Fisher-scoring step");
    const Engine engine(spec);
    PackedParams x = engine.layout().pack(params);
    auto probs = checked_probs(spec, params);
    for (int s = 0; s < sweeps; ++s) engine.sweep(x, probs, counts, max_halvings, warnings);
    ParameterSet out = params;
    engine.layout().unpack(x, out);
    return out;
}

ParameterSet m_step_latent_class(const ModelSpec& spec, const ParameterSet& params,
                                 const ExpectedCounts& counts) {
    if (!spec.is_latent_class()) throw ValidationError("closed-form update applies to link none only");
    ParameterSet out = params;
    latent_class_update(out.class_probs, counts);
    return out;
}

FitResult fit_from(const ModelSpec& spec, const ResponseMatrix& data, const ParameterSet& start,
                   const FitOptions& options) {
    spec.validate();
    check_compatible(spec, data);
    validate_params(spec, start);

    const Engine engine(spec);
    FitResult result;
    result.spec = spec;
    ParameterSet params = start;
    PackedParams x = engine.layout().pack(params);
    std::vector<Eigen::MatrixXd> probs;
    if (spec.is_latent_class()) {
        probs = params.class_probs;
    } else if (!engine.all_probs(x, probs)) {
        throw NumericError("starting values give infeasible global logits");
    }

    ExpectedCounts counts = expected_counts(probs, params.weights, data);
    result.trace.push_back(counts.loglik);
    double previous = counts.loglik;
    const double n = data.units();
    int iter = 0;
    while (iter < options.max_iter) {
        ++iter;
        params.weights = counts.class_totals / n;
        if (spec.is_latent_class()) {
            latent_class_update(probs, counts);
        } else {
            for (int s = 0; s < options.fisher_sweeps; ++s)
                engine.sweep(x, probs, counts, options.max_halvings, &result.warnings);
        }
        counts = expected_counts(probs, params.weights, data);
        result.trace.push_back(counts.loglik);
        const double change = counts.loglik - previous;
        previous = counts.loglik;
        if (std::abs(change) <= options.tol * std::abs(counts.loglik)) {
            result.converged = true;
            break;
        }
    }

    if (spec.is_latent_class())
        params.class_probs = probs;
    else
        engine.layout().unpack(x, params);
    result.params = std::move(params);
    result.loglik = counts.loglik;
    result.n_params = count_free_params(spec);
    result.units = n;
    result.aic = -2.0 * result.loglik + 2.0 * result.n_params;
    result.bic = -2.0 * result.loglik + std::log(n) * result.n_params;
    result.probs.items = std::move(probs);
    result.posterior = std::move(counts.posterior);
    result.iterations = iter;
    reorder_classes(result);
    for (int c = 0; c < spec.classes; ++c)
        if (result.params.weights(c) < 1e-8)
            result.warnings.push_back("class " + std::to_string(c + 1) +
                                      " is degenerate (weight below 1e-8)");
    if (!result.converged)
        result.warnings.push_back("EM did not converge in " + std::to_string(options.max_iter) +
                                  " iterations");
    return result;
}

FitResult fit(const ModelSpec& spec, const ResponseMatrix& data, const StartPolicy& policy,
              const FitOptions& options) {
    spec.validate();
    check_compatible(spec, data);

    struct Start {
        StartKind kind;
        std::uint64_t seed;
    };
    std::vector<Start> starts;
    if (policy.deterministic) starts.push_back({StartKind::Deterministic, 0});
    if (policy.user) starts.push_back({StartKind::User, 0});
    std::vector<std::uint64_t> seeds = policy.seeds;
    std::sort(seeds.begin(), seeds.end());
    seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
    for (auto seed : seeds) starts.push_back({StartKind::Random, seed});
    if (starts.empty()) throw ValidationError("start policy has no starting points");

    std::vector<std::optional<FitResult>> fits(starts.size());
    std::vector<StartRecord> records(starts.size());
    detail::parallel_for(starts.size(), options.threads, [&](std::size_t i) {
        StartRecord& rec = records[i];
        rec.kind = starts[i].kind;
        rec.seed = starts[i].seed;
        try {
            ParameterSet init;
            switch (starts[i].kind) {
                case StartKind::Deterministic: init = deterministic_start(spec, data); break;
                case StartKind::User: init = *policy.user; break;
                case StartKind::Random: init = random_start(spec, data, starts[i].seed); break;
            }
            FitResult f = fit_from(spec, data, init, options);
            rec.loglik = f.loglik;
            rec.iterations = f.iterations;
            rec.converged = f.converged;
            fits[i] = std::move(f);
        } catch (const NumericError& e) {
            rec.loglik = kNegInf;
            rec.error = e.what();
        }
    });

    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < fits.size(); ++i)
        if (fits[i] && (!best || fits[i]->loglik > fits[*best]->loglik)) best = i;
    if (!best) throw NumericError("every start failed: " + records.front().error);

    FitResult out = std::move(*fits[*best]);
    out.start = records[*best];
    out.starts = std::move(records);
    return out;
}

Eigen::MatrixXd posterior_memberships(const FitResult& fit, const ResponseMatrix& data) {
    return e_step(fit.spec, fit.params, data).posterior;
}

}  // namespace lcirt
