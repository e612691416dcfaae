#include "lcirt/selection.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>

#include <boost/math/special_functions/gamma.hpp>

#include "lcirt/error.hpp"
#include "parallel.hpp"

namespace lcirt {

double chi2_survival(double statistic, int df) {
    if (df < 0) throw ValidationError("negative degrees of freedom");
    if (df == 0) return 1.0;
    if (!(statistic > 0.0)) return 1.0;
    return boost::math::gamma_q(0.5 * df, 0.5 * statistic);
}

bool is_coarsening(const std::vector<std::vector<int>>& coarse,
                   const std::vector<std::vector<int>>& fine) {
    int items = 0;
    for (const auto& g : coarse) items += static_cast<int>(g.size());
    std::vector<int> owner(static_cast<std::size_t>(std::max(items, 0)), -1);
    for (std::size_t d = 0; d < coarse.size(); ++d)
        for (int j : coarse[d]) {
            if (j < 0 || j >= items) return false;
            owner[j] = static_cast<int>(d);
        }
    int fine_items = 0;
    for (const auto& g : fine) {
        fine_items += static_cast<int>(g.size());
        if (g.empty()) return false;
        for (int j : g)
            if (j < 0 || j >= items || owner[j] != owner[g.front()]) return false;
    }
    return fine_items == items;
}

namespace {

LrTestResult lr_from(FitResult fit0, FitResult fit1) {
    LrTestResult out;
    out.lk0 = fit0.loglik;
    out.lk1 = fit1.loglik;
    out.raw_deviance = -2.0 * (out.lk0 - out.lk1);
    out.deviance = std::max(0.0, out.raw_deviance);
    out.df = fit1.n_params - fit0.n_params;
    out.p_value = chi2_survival(out.deviance, out.df);
    out.fit0 = std::move(fit0);
    out.fit1 = std::move(fit1);
    return out;
}

}  // namespace

LrTestResult test_dim(const ResponseMatrix& data, const ModelSpec& spec,
                      const std::vector<std::vector<int>>& groups0, const StartPolicy& policy,
                      const FitOptions& options) {
    spec.validate();
    if (spec.is_latent_class()) throw ValidationError("test_dim needs a link (global or local)");
    ModelSpec restricted = spec;
    restricted.groups = groups0;
    restricted.validate();
    if (!is_coarsening(groups0, spec.groups))
        throw ValidationError("multi0 is not a coarsening of multi1");
    FitResult fit0 = fit(restricted, data, policy, options);
    FitResult fit1 = fit(spec, data, policy, options);
    return lr_from(std::move(fit0), std::move(fit1));
}

LrTestResult compare_nested(const FitResult& fit0, const FitResult& fit1) {
    const ModelSpec& a = fit0.spec;
    const ModelSpec& b = fit1.spec;
    if (fit0.units != fit1.units) throw ValidationError("fits were computed on different data");
    if (a.classes != b.classes || a.link != b.link || a.cats != b.cats)
        throw ValidationError("models differ in k, link or categories; not nested");
    if (a.is_latent_class()) {
        if (!(a == b)) throw ValidationError("standard LC models with different specs are not nested");
    } else {
        if (!is_coarsening(a.groups, b.groups))
            throw ValidationError("restricted dimensions are not a coarsening of the general ones");
        if (a.disc == Discrimination::Free && b.disc == Discrimination::Constrained)
            throw ValidationError("free discrimination does not nest in constrained discrimination");
        if (a.difl == Difficulty::Free && b.difl == Difficulty::RatingScale)
            throw ValidationError("free difficulties do not nest in a rating scale");
    }
    return lr_from(fit0, fit1);
}

namespace {

std::vector<std::vector<int>> sorted_groups(std::vector<std::vector<int>> groups) {
    for (auto& g : groups) std::sort(g.begin(), g.end());
    std::sort(groups.begin(), groups.end(),
              [](const auto& x, const auto& y) { return x.front() < y.front(); });
    return groups;
}

}  // namespace

ParameterSet merge_start(const FitResult& finer, const ModelSpec& merged) {
    const ModelSpec& fine = finer.spec;
    if (!is_coarsening(merged.groups, fine.groups))
        throw ValidationError("merged structure is not a coarsening of the fitted one");
    const ParameterSet& old = finer.params;
    const int k = fine.classes;
    const auto old_dim = fine.dimension_of();
    const auto new_dim = merged.dimension_of();

    ParameterSet p = old;
    p.support = Eigen::MatrixXd::Zero(k, merged.dims());
    std::vector<int> members(merged.dims(), 0);
    for (int d = 0; d < fine.dims(); ++d) {
        const int h = new_dim[fine.groups[d].front()];
        p.support.col(h) += old.support.col(d);
        ++members[h];
    }
    for (int h = 0; h < merged.dims(); ++h) p.support.col(h) /= members[h];

    for (int j = 0; j < fine.items(); ++j) {
        const double shift = old.weights.dot(p.support.col(new_dim[j]) - old.support.col(old_dim[j]));
        if (fine.difl == Difficulty::Free)
            p.thresholds[j].array() += shift;
        else
            p.item_location(j) += shift;
    }
    normalize_constraints(merged, p);
    return p;
}

ClusterTrace class_item(const ResponseMatrix& data, const ModelSpec& spec_in,
                        const StartPolicy& policy, const FitOptions& options,
                        const ClusterOptions& cluster) {
    ModelSpec spec = spec_in;
    if (spec.is_latent_class()) throw ValidationError("class_item needs a link (global or local)");
    const int r = spec.items();
    if (r < 2) throw ValidationError("class_item needs at least two items");
    spec.groups = item_per_dimension(r);
    spec.validate();

    FitResult baseline = fit(spec, data, policy, options);
    ClusterTrace trace;
    trace.items = r;
    trace.base_loglik = baseline.loglik;
    trace.base_params = baseline.n_params;
    trace.base_converged = baseline.converged;

    std::vector<std::vector<int>> groups = spec.groups;
    std::vector<int> codes(r);
    for (int j = 0; j < r; ++j) codes[j] = -(j + 1);

    for (int step = 1; step < r; ++step) {
        struct Candidate {
            std::size_t a, b;
            std::optional<FitResult> fit;
        };
        std::vector<Candidate> candidates;
        for (std::size_t a = 0; a < groups.size(); ++a)
            for (std::size_t b = a + 1; b < groups.size(); ++b) candidates.push_back({a, b, std::nullopt});

        detail::parallel_for(candidates.size(), options.threads, [&](std::size_t i) {
            Candidate& cand = candidates[i];
            std::vector<std::vector<int>> merged;
            for (std::size_t g = 0; g < groups.size(); ++g)
                if (g != cand.b) merged.push_back(groups[g]);
            auto& target = merged[cand.a];
            target.insert(target.end(), groups[cand.b].begin(), groups[cand.b].end());
            ModelSpec cand_spec = spec;
            cand_spec.groups = sorted_groups(std::move(merged));

            StartPolicy starts;
            starts.deterministic = false;
            starts.user = merge_start(baseline, cand_spec);
            for (int s = 0; s < cluster.random_starts; ++s)
                starts.seeds.push_back(cluster.seed + 1000003ULL * static_cast<std::uint64_t>(step) +
                                       97ULL * i + static_cast<std::uint64_t>(s));
            FitOptions inner = options;
            inner.threads = 1;
            try {
                cand.fit = fit(cand_spec, data, starts, inner);
            } catch (const NumericError&) {
                cand.fit.reset();
            }
        });

        std::optional<std::size_t> best;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (!candidates[i].fit) continue;
            if (!best || candidates[i].fit->loglik > candidates[*best].fit->loglik) best = i;
        }
        if (!best) throw NumericError("no candidate merge could be fitted at step " + std::to_string(step));

        Candidate& chosen = candidates[*best];
        ClusterStep rec;
        int left = codes[chosen.a];
        int right = codes[chosen.b];
        // Singletons first; otherwise ascending, as in hclust merge tables.
        if ((left > 0 && right < 0) || (left < 0 && right < 0 && left < right) ||
            (left > 0 && right > 0 && left > right))
            std::swap(left, right);
        rec.left = left;
        rec.right = right;
        rec.loglik = chosen.fit->loglik;
        rec.n_params = chosen.fit->n_params;
        rec.converged = chosen.fit->converged;
        rec.step_lr = -2.0 * (rec.loglik - baseline.loglik);
        rec.height = -2.0 * (rec.loglik - trace.base_loglik);

        std::vector<std::vector<int>> next_groups;
        std::vector<int> next_codes;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            if (g == chosen.b) continue;
            next_groups.push_back(groups[g]);
            next_codes.push_back(g == chosen.a ? step : codes[g]);
            if (g == chosen.a)
                next_groups.back().insert(next_groups.back().end(), groups[chosen.b].begin(),
                                          groups[chosen.b].end());
        }
        for (auto& g : next_groups) std::sort(g.begin(), g.end());
        std::vector<std::size_t> idx(next_groups.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(),
                  [&](std::size_t x, std::size_t y) { return next_groups[x].front() < next_groups[y].front(); });
        groups.clear();
        codes.clear();
        for (std::size_t i : idx) {
            groups.push_back(next_groups[i]);
            codes.push_back(next_codes[i]);
        }
        rec.groups = groups;
        trace.steps.push_back(std::move(rec));
        baseline = std::move(*chosen.fit);
    }

    // Leaf order: depth-first expansion from the final merge.
    std::vector<int> stack{static_cast<int>(trace.steps.size())};
    while (!stack.empty()) {
        const int node = stack.back();
        stack.pop_back();
        if (node < 0) {
            trace.order.push_back(-node);
            continue;
        }
        const ClusterStep& s = trace.steps[node - 1];
        stack.push_back(s.right);
        stack.push_back(s.left);
    }
    return trace;
}

std::vector<double> step_p_values(const ClusterTrace& trace) {
    std::vector<double> out;
    out.reserve(trace.steps.size());
    for (const auto& s : trace.steps) out.push_back(chi2_survival(std::max(0.0, s.height), trace.base_params - s.n_params));
    return out;
}

int suggest_cut(const ClusterTrace& trace, double alpha) {
    const auto p = step_p_values(trace);
    for (std::size_t h = 0; h < p.size(); ++h)
        if (p[h] < alpha) return trace.items - static_cast<int>(h + 1) + 1;
    return 1;
}

std::vector<InfoRow> information_table(std::span<const FitResult> fits) {
    std::vector<InfoRow> rows;
    for (const auto& f : fits) {
        if (!rows.empty() && f.units != fits.front().units)
            throw ValidationError("fits were computed on different data (sample sizes differ)");
        rows.push_back({f.spec, f.loglik, f.n_params, f.aic, f.bic});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const InfoRow& a, const InfoRow& b) { return a.bic < b.bic; });
    return rows;
}

std::string merge_table_text(const ClusterTrace& trace) {
    int decimals = 0;
    for (const auto& s : trace.steps) {
        const double v = std::abs(s.height);
        const int mag = v > 0.0 ? static_cast<int>(std::floor(std::log10(v))) : 0;
        decimals = std::max(decimals, 6 - mag);
    }
    decimals = std::clamp(decimals, 0, 12);
    std::vector<std::string> heights;
    std::size_t hw = 4;
    for (const auto& s : trace.steps) {
        std::ostringstream v;
        v << std::fixed << std::setprecision(decimals) << s.height;
        heights.push_back(v.str());
        hw = std::max(hw, heights.back().size());
    }
    const std::size_t n = trace.steps.size();
    const std::size_t lw = std::to_string(n).size() + 3;
    std::ostringstream out;
    out << std::string(lw, ' ') << std::setw(5) << "[,1]" << std::setw(5) << "[,2]"
        << std::setw(static_cast<int>(hw) + 1) << "[,3]" << '\n';
    for (std::size_t h = 0; h < n; ++h) {
        const std::string label = "[" + std::to_string(h + 1) + ",]";
        out << std::setw(static_cast<int>(lw)) << label << std::setw(5) << trace.steps[h].left
            << std::setw(5) << trace.steps[h].right << std::setw(static_cast<int>(hw) + 1)
            << heights[h] << '\n';
    }
    return out.str();
}

std::string dendrogram_dot(const ClusterTrace& trace) {
    std::ostringstream out;
    out << "digraph dendrogram {\n  rankdir=TB;\n  node [shape=plaintext];\n";
    for (int j : trace.order) out << "  item" << j << " [label=\"" << j << "\"];\n";
    for (std::size_t h = 0; h < trace.steps.size(); ++h) {
        const auto& s = trace.steps[h];
        out << "  step" << (h + 1) << " [shape=box, label=\"" << (h + 1) << ": "
            << std::setprecision(4) << s.height << "\"];\n";
        for (int child : {s.left, s.right}) {
            out << "  step" << (h + 1) << " -> ";
            if (child < 0)
                out << "item" << -child;
            else
                out << "step" << child;
            out << ";\n";
        }
    }
    out << "}\n";
    return out.str();
}

}  // namespace lcirt
