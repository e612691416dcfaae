#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lcirt/estimation.hpp"

namespace lcirt {

// Upper tail of the chi-square distribution; 1 when df == 0.
double chi2_survival(double statistic, int df);

struct LrTestResult {
    double lk0 = 0.0;        // restricted model
    double lk1 = 0.0;        // general model
    double deviance = 0.0;   // -2 (lk0 - lk1), clamped at 0
    double raw_deviance = 0.0;
    int df = 0;              // np1 - np0
    double p_value = 1.0;
    FitResult fit0;
    FitResult fit1;
};

// True when every group of `fine` lies inside one group of `coarse`.
bool is_coarsening(const std::vector<std::vector<int>>& coarse,
                   const std::vector<std::vector<int>>& fine);

// LR test of the dimension structure `groups0` against `spec.groups`; every
// other spec field is shared.
LrTestResult test_dim(const ResponseMatrix& data, const ModelSpec& spec,
                      const std::vector<std::vector<int>>& groups0, const StartPolicy& policy = {},
                      const FitOptions& options = {});

// fit0 must be a restriction of fit1: same k and link, coarser (or equal)
// dimensions, and discrimination / difficulty constraints at least as strict.
LrTestResult compare_nested(const FitResult& fit0, const FitResult& fit1);

struct ClusterStep {
    int left = 0;     // negative: original item (1-based); positive: group formed at that step
    int right = 0;
    double height = 0.0;   // deviance of this step's model against the item-per-dimension model
    double step_lr = 0.0;  // deviance against the previous step's model
    double loglik = 0.0;
    int n_params = 0;
    bool converged = true;
    std::vector<std::vector<int>> groups;  // 0-based, after the merge
};

struct ClusterTrace {
    int items = 0;
    double base_loglik = 0.0;  // item-per-dimension model
    int base_params = 0;
    bool base_converged = true;
    std::vector<ClusterStep> steps;
    std::vector<int> order;  // 1-based leaf order for plotting
};

struct ClusterOptions {
    int random_starts = 1;  // extra random starts per candidate merge
    std::uint64_t seed = 1;
};

// Agglomerative clustering of items into dimensions. `spec.groups` is ignored.
ClusterTrace class_item(const ResponseMatrix& data, const ModelSpec& spec,
                        const StartPolicy& policy = {}, const FitOptions& options = {},
                        const ClusterOptions& cluster = {});

// s = r - h + 1 where h is the first step whose deviance p-value is below alpha;
// 1 when no step rejects.
int suggest_cut(const ClusterTrace& trace, double alpha);

// p-value of each step's height, with df the parameter difference to the
// item-per-dimension model.
std::vector<double> step_p_values(const ClusterTrace& trace);

// Starting values for `merged` from a fit on a finer partition: merged support
// points are weight-averaged and difficulties shifted so that predictors are
// preserved on average.
ParameterSet merge_start(const FitResult& finer, const ModelSpec& merged);

struct InfoRow {
    ModelSpec spec;
    double loglik = 0.0;
    int n_params = 0;
    double aic = 0.0;
    double bic = 0.0;
};

// Rows sorted by BIC ascending; ties keep input order.
std::vector<InfoRow> information_table(std::span<const FitResult> fits);

std::string merge_table_text(const ClusterTrace& trace);
std::string dendrogram_dot(const ClusterTrace& trace);

}  // namespace lcirt
