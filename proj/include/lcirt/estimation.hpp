#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lcirt/data.hpp"
#include "lcirt/design.hpp"

namespace lcirt {

// p(X_j = x | class c), one l_j x k matrix per item.
struct ConditionalProbs {
    std::vector<Eigen::MatrixXd> items;

    double operator()(int j, int x, int c) const { return items[j](x, c); }
};

struct ExpectedCounts {
    Eigen::MatrixXd joint;                   // m_hat, patterns x k
    Eigen::MatrixXd posterior;               // p(c | pattern), patterns x k
    Eigen::VectorXd class_totals;            // m_c
    std::vector<Eigen::MatrixXd> item_counts;  // m_cj as l_j x k, observed responses only
    Eigen::MatrixXd item_totals;             // sum_x m_cj[x], items x k
    double loglik = 0.0;                     // observed-data log-likelihood at the E-step point
};

// What a Fisher-scoring sweep sees at the current point.
struct FisherTerms {
    Eigen::VectorXd phi_score;    // s*_2
    Eigen::MatrixXd phi_info;     // F*_2
    Eigen::VectorXd gamma_score;  // s*_2j, indexed like PackedParams::gamma_free
    Eigen::VectorXd gamma_info;   // f*_2j
};

struct StartPolicy {
    bool deterministic = true;
    std::vector<std::uint64_t> seeds;
    std::optional<ParameterSet> user;

    static StartPolicy deterministic_only() { return {}; }
    static StartPolicy random(std::vector<std::uint64_t> seeds, bool with_deterministic = false) {
        return {with_deterministic, std::move(seeds), std::nullopt};
    }
    static StartPolicy from(ParameterSet params) { return {false, {}, std::move(params)}; }
};

struct FitOptions {
    double tol = 1e-9;         // relative log-likelihood change
    int max_iter = 5000;
    int fisher_sweeps = 1;     // gamma + phi passes per EM iteration
    int max_halvings = 10;
    int threads = 1;           // independent starts run concurrently
};

enum class StartKind { Deterministic, Random, User };
std::string to_string(StartKind kind);

struct StartRecord {
    StartKind kind = StartKind::Deterministic;
    std::uint64_t seed = 0;
    double loglik = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string error;  // non-empty when the start could not be evaluated
};

struct FitResult {
    ModelSpec spec;
    ParameterSet params;
    double loglik = 0.0;
    int n_params = 0;
    double units = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    ConditionalProbs probs;
    Eigen::MatrixXd posterior;  // Pp
    int iterations = 0;
    bool converged = false;
    StartRecord start;
    std::vector<StartRecord> starts;
    std::vector<double> trace;  // log-likelihood after every EM iteration, start value first
    std::vector<std::string> warnings;
};

// Sum over patterns of freq * log sum_c pi_c prod_{j observed} p(x_j | c).
double log_likelihood(const ModelSpec& spec, const ParameterSet& params, const ResponseMatrix& data);

ExpectedCounts e_step(const ModelSpec& spec, const ParameterSet& params, const ResponseMatrix& data);

// pi_c = m_c / n.
Eigen::VectorXd m_step_weights(const ExpectedCounts& counts);

// Expected complete log-likelihood of the item part: sum_c sum_j m_cj' log lambda_cj.
double expected_item_loglik(const ModelSpec& spec, const ParameterSet& params,
                            const ExpectedCounts& counts);

FisherTerms fisher_terms(const ModelSpec& spec, const ParameterSet& params,
                         const ExpectedCounts& counts);

// One or more (gamma pass, phi pass) sweeps with step halving; the expected
// item log-likelihood never decreases. Ridge warnings are appended to `warnings`.
ParameterSet m_step_fisher(const ModelSpec& spec, const ParameterSet& params,
                           const ExpectedCounts& counts, int sweeps = 1, int max_halvings = 10,
                           std::vector<std::string>* warnings = nullptr);

// Closed-form class-conditional proportions for the unrestricted LC model.
ParameterSet m_step_latent_class(const ModelSpec& spec, const ParameterSet& params,
                                 const ExpectedCounts& counts);

// EM from a single starting point.
FitResult fit_from(const ModelSpec& spec, const ResponseMatrix& data, const ParameterSet& start,
                   const FitOptions& options = {});

// Best log-likelihood over all starts in the policy; ties go to the earliest
// start (deterministic, user, then seeds in ascending order).
FitResult fit(const ModelSpec& spec, const ResponseMatrix& data, const StartPolicy& policy = {},
              const FitOptions& options = {});

Eigen::MatrixXd posterior_memberships(const FitResult& fit, const ResponseMatrix& data);

// Checks that the data and spec agree on item count and category ranges.
void check_compatible(const ModelSpec& spec, const ResponseMatrix& data);

}  // namespace lcirt
