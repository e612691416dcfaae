#include "lcirt/design.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "lcirt/error.hpp"

namespace lcirt {

std::vector<int> ModelSpec::dimension_of() const {
    std::vector<int> dim(cats.size(), -1);
    for (int d = 0; d < dims(); ++d)
        for (int j : groups[d]) dim[j] = d;
    return dim;
}

std::vector<int> ModelSpec::reference_items() const {
    std::vector<int> refs;
    refs.reserve(groups.size());
    for (const auto& g : groups) refs.push_back(g.front());
    return refs;
}

void ModelSpec::validate() const {
    if (classes < 1) throw ValidationError("number of classes k must be at least 1");
    if (cats.empty()) throw ValidationError("model has no items");
    for (int j = 0; j < items(); ++j) {
        if (cats[j] < 2)
            throw ValidationError("item " + std::to_string(j + 1) + " has fewer than 2 categories");
    }
    if (groups.empty()) throw ValidationError("multi: no dimension groups");
    std::vector<int> seen(cats.size(), 0);
    for (const auto& g : groups) {
        if (g.empty()) throw ValidationError("multi: empty dimension group");
        for (int j : g) {
            if (j < 0 || j >= items())
                throw ValidationError("multi: item " + std::to_string(j + 1) + " out of range 1.." +
                                      std::to_string(items()));
            if (seen[j]++)
                throw ValidationError("multi: item " + std::to_string(j + 1) +
                                      " listed more than once");
        }
    }
    for (int j = 0; j < items(); ++j) {
        if (!seen[j])
            throw ValidationError("multi: item " + std::to_string(j + 1) +
                                  " is not assigned to any dimension");
    }
    if (!is_latent_class() && difl == Difficulty::RatingScale) {
        if (std::any_of(cats.begin(), cats.end(), [&](int l) { return l != cats.front(); }))
            throw ValidationError("rating-scale difficulties require equal category counts");
    }
}

std::string ModelSpec::describe() const {
    std::ostringstream out;
    out << "k=" << classes << ' ' << to_string(link);
    if (!is_latent_class()) {
        out << " disc=" << (disc == Discrimination::Free ? "free" : "constrained")
            << " difl=" << (difl == Difficulty::Free ? "free" : "rating_scale") << " s=" << dims();
    }
    return out.str();
}

std::vector<std::vector<int>> unidimensional(int items) {
    std::vector<int> all(items);
    for (int j = 0; j < items; ++j) all[j] = j;
    return {all};
}

std::vector<std::vector<int>> item_per_dimension(int items) {
    std::vector<std::vector<int>> groups(items);
    for (int j = 0; j < items; ++j) groups[j] = {j};
    return groups;
}

ModelSpec make_spec(int classes, LinkKind link, Discrimination disc, Difficulty difl,
                    std::vector<std::vector<int>> groups, std::vector<int> cats) {
    ModelSpec spec;
    spec.classes = classes;
    spec.link = link;
    spec.disc = disc;
    spec.difl = difl;
    spec.cats = std::move(cats);
    spec.groups = groups.empty() ? unidimensional(spec.items()) : std::move(groups);
    spec.validate();
    return spec;
}

namespace {

bool same(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

}  // namespace

bool operator==(const ParameterSet& a, const ParameterSet& b) {
    if (!same(a.weights, b.weights) || !same(a.support, b.support) ||
        !same(a.item_location, b.item_location) || !same(a.category_step, b.category_step) ||
        !same(a.discrimination, b.discrimination))
        return false;
    if (a.thresholds.size() != b.thresholds.size() || a.class_probs.size() != b.class_probs.size())
        return false;
    for (std::size_t j = 0; j < a.thresholds.size(); ++j)
        if (!same(a.thresholds[j], b.thresholds[j])) return false;
    for (std::size_t j = 0; j < a.class_probs.size(); ++j)
        if (!same(a.class_probs[j], b.class_probs[j])) return false;
    return true;
}

ParameterLayout::ParameterLayout(const ModelSpec& spec) : spec_(spec) {
    const int r = spec.items();
    dim_of_ = spec.dimension_of();
    threshold_col_.assign(r, {});
    location_col_.assign(r, -1);
    gamma_col_.assign(r, -1);
    if (spec.is_latent_class()) return;

    std::vector<bool> is_ref(r, false);
    for (int j : spec.reference_items()) is_ref[j] = true;

    int col = spec.classes * spec.dims();
    if (spec.difl == Difficulty::Free) {
        for (int j = 0; j < r; ++j) {
            threshold_col_[j].assign(spec.cats[j] - 1, -1);
            for (int x = 1; x < spec.cats[j]; ++x) {
                if (is_ref[j] && x == 1) continue;
                threshold_col_[j][x - 1] = col++;
            }
        }
    } else {
        for (int j = 0; j < r; ++j)
            if (!is_ref[j]) location_col_[j] = col++;
        step_base_ = col;
        col += std::max(0, spec.common_categories() - 2);
    }
    phi_size_ = col;

    if (spec.disc == Discrimination::Free) {
        for (int j = 0; j < r; ++j) {
            if (is_ref[j]) continue;
            gamma_col_[j] = gamma_size_++;
            gamma_items_.push_back(j);
        }
    }
}

int ParameterLayout::threshold_column(int j, int x) const {
    const auto& cols = threshold_col_[j];
    return (x >= 1 && x <= static_cast<int>(cols.size())) ? cols[x - 1] : -1;
}

PackedParams ParameterLayout::pack(const ParameterSet& p) const {
    PackedParams out;
    out.phi = Eigen::VectorXd::Zero(phi_size_);
    out.gamma_free = Eigen::VectorXd::Zero(gamma_size_);
    if (spec_.is_latent_class()) return out;
    for (int c = 0; c < spec_.classes; ++c)
        for (int d = 0; d < spec_.dims(); ++d) out.phi(support_column(c, d)) = p.support(c, d);
    const int r = spec_.items();
    if (spec_.difl == Difficulty::Free) {
        for (int j = 0; j < r; ++j)
            for (int x = 1; x < spec_.cats[j]; ++x)
                if (const int col = threshold_column(j, x); col >= 0)
                    out.phi(col) = p.thresholds[j](x - 1);
    } else {
        for (int j = 0; j < r; ++j)
            if (location_col_[j] >= 0) out.phi(location_col_[j]) = p.item_location(j);
        for (int x = 2; x < spec_.common_categories(); ++x)
            out.phi(step_column(x)) = p.category_step(x - 1);
    }
    for (int j : gamma_items_) out.gamma_free(gamma_col_[j]) = p.discrimination(j);
    return out;
}

void ParameterLayout::unpack(const PackedParams& packed, ParameterSet& out) const {
    if (spec_.is_latent_class()) return;
    const int k = spec_.classes;
    const int s = spec_.dims();
    const int r = spec_.items();
    out.support.resize(k, s);
    for (int c = 0; c < k; ++c)
        for (int d = 0; d < s; ++d) out.support(c, d) = packed.phi(support_column(c, d));
    if (spec_.difl == Difficulty::Free) {
        out.thresholds.resize(r);
        for (int j = 0; j < r; ++j) {
            out.thresholds[j].resize(spec_.cats[j] - 1);
            for (int x = 1; x < spec_.cats[j]; ++x) {
                const int col = threshold_column(j, x);
                out.thresholds[j](x - 1) = col >= 0 ? packed.phi(col) : 0.0;
            }
        }
    } else {
        out.item_location.resize(r);
        for (int j = 0; j < r; ++j)
            out.item_location(j) = location_col_[j] >= 0 ? packed.phi(location_col_[j]) : 0.0;
        const int l = spec_.common_categories();
        out.category_step.resize(l - 1);
        for (int x = 1; x < l; ++x)
            out.category_step(x - 1) = x >= 2 ? packed.phi(step_column(x)) : 0.0;
    }
    out.discrimination = Eigen::VectorXd::Ones(r);
    for (int j : gamma_items_) out.discrimination(j) = packed.gamma_free(gamma_col_[j]);
}

DesignBlock design_block(const ParameterLayout& layout, int c, int j) {
    const ModelSpec& spec = layout.spec();
    const int q = spec.cats[j] - 1;
    DesignBlock block;
    block.columns.push_back(layout.support_column(c, layout.dimension(j)));
    std::vector<std::pair<int, int>> entries;  // (row, column slot) with coefficient -1
    if (spec.difl == Difficulty::Free) {
        for (int x = 1; x <= q; ++x) {
            if (const int col = layout.threshold_column(j, x); col >= 0) {
                entries.emplace_back(x - 1, static_cast<int>(block.columns.size()));
                block.columns.push_back(col);
            }
        }
    } else {
        if (const int col = layout.location_column(j); col >= 0) {
            const int slot = static_cast<int>(block.columns.size());
            block.columns.push_back(col);
            for (int x = 1; x <= q; ++x) entries.emplace_back(x - 1, slot);
        }
        for (int x = 2; x <= q; ++x) {
            entries.emplace_back(x - 1, static_cast<int>(block.columns.size()));
            block.columns.push_back(layout.step_column(x));
        }
    }
    block.coef = Eigen::MatrixXd::Zero(q, static_cast<Eigen::Index>(block.columns.size()));
    block.coef.col(0).setOnes();
    for (auto [row, slot] : entries) block.coef(row, slot) = -1.0;
    return block;
}

Eigen::MatrixXd build_design_matrix(const ModelSpec& spec, int c, int j) {
    const ParameterLayout layout(spec);
    const DesignBlock block = design_block(layout, c, j);
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(spec.cats[j] - 1, layout.phi_size());
    for (std::size_t i = 0; i < block.columns.size(); ++i)
        z.col(block.columns[i]) += block.coef.col(static_cast<Eigen::Index>(i));
    return z;
}

Eigen::VectorXd linear_predictor(const ModelSpec& spec, const ParameterSet& p, int c, int j) {
    const int q = spec.cats[j] - 1;
    const int d = spec.dimension_of()[j];
    Eigen::VectorXd eta(q);
    for (int x = 1; x <= q; ++x) {
        const double difficulty = spec.difl == Difficulty::Free
                                      ? p.thresholds[j](x - 1)
                                      : p.item_location(j) + p.category_step(x - 1);
        eta(x - 1) = p.discrimination(j) * (p.support(c, d) - difficulty);
    }
    return eta;
}

int count_free_params(const ModelSpec& spec) {
    const int k = spec.classes;
    const int r = spec.items();
    const int s = spec.dims();
    int sum_q = 0;
    for (int l : spec.cats) sum_q += l - 1;
    if (spec.is_latent_class()) return (k - 1) + k * sum_q;
    int np = (k - 1) + s * k;
    np += spec.difl == Difficulty::Free ? sum_q - s : (r - s) + (spec.common_categories() - 2);
    if (spec.disc == Discrimination::Free) np += r - s;
    return np;
}

void normalize_constraints(const ModelSpec& spec, ParameterSet& p) {
    p.weights /= p.weights.sum();
    if (spec.is_latent_class()) {
        for (auto& probs : p.class_probs)
            for (Eigen::Index c = 0; c < probs.cols(); ++c) probs.col(c) /= probs.col(c).sum();
        return;
    }
    const auto refs = spec.reference_items();
    const int s = spec.dims();
    if (spec.disc == Discrimination::Constrained) {
        p.discrimination.setOnes();
    } else {
        for (int d = 0; d < s; ++d) {
            const double g = p.discrimination(refs[d]);
            if (g == 1.0 || g == 0.0) continue;
            if (spec.difl == Difficulty::Free) {
                for (int j : spec.groups[d]) {
                    p.discrimination(j) /= g;
                    p.thresholds[j] *= g;
                }
                p.support.col(d) *= g;
            } else if (s == 1) {
                p.discrimination /= g;
                p.item_location *= g;
                p.category_step *= g;
                p.support *= g;
            }
        }
        for (int j : refs) p.discrimination(j) = 1.0;
    }
    if (spec.difl == Difficulty::RatingScale) {
        const double t = p.category_step(0);
        p.category_step.array() -= t;
        p.item_location.array() += t;
    }
    for (int d = 0; d < s; ++d) {
        const int ref = refs[d];
        const double a = spec.difl == Difficulty::Free ? p.thresholds[ref](0) : p.item_location(ref);
        for (int j : spec.groups[d]) {
            if (spec.difl == Difficulty::Free)
                p.thresholds[j].array() -= a;
            else
                p.item_location(j) -= a;
        }
        p.support.col(d).array() -= a;
    }
}

void validate_params(const ModelSpec& spec, const ParameterSet& p) {
    const int k = spec.classes;
    const int r = spec.items();
    if (p.weights.size() != k) throw ValidationError("piv must have k entries");
    if ((p.weights.array() < 0.0).any() || std::abs(p.weights.sum() - 1.0) > 1e-8)
        throw ValidationError("piv must be nonnegative and sum to 1");
    if (spec.is_latent_class()) {
        if (static_cast<int>(p.class_probs.size()) != r)
            throw ValidationError("Phi must have one block per item");
        for (int j = 0; j < r; ++j) {
            const auto& probs = p.class_probs[j];
            if (probs.rows() != spec.cats[j] || probs.cols() != k)
                throw ValidationError("Phi block for item " + std::to_string(j + 1) +
                                      " has the wrong shape");
            if ((probs.array() < 0.0).any() ||
                ((probs.colwise().sum().array() - 1.0).abs() > 1e-8).any())
                throw ValidationError("Phi columns must be probability vectors");
        }
        return;
    }
    if (p.support.rows() != k || p.support.cols() != spec.dims())
        throw ValidationError("Th must be k x s");
    if (p.discrimination.size() != r) throw ValidationError("gac must have r entries");
    const auto refs = spec.reference_items();
    if (spec.disc == Discrimination::Constrained) {
        if ((p.discrimination.array() != 1.0).any())
            throw ValidationError("gac must be all ones with constrained discrimination");
    } else {
        for (int j : refs)
            if (p.discrimination(j) != 1.0)
                throw ValidationError("gac of reference item " + std::to_string(j + 1) +
                                      " must be 1");
    }
    if (spec.difl == Difficulty::Free) {
        if (static_cast<int>(p.thresholds.size()) != r)
            throw ValidationError("Bec must have one row per item");
        for (int j = 0; j < r; ++j)
            if (p.thresholds[j].size() != spec.cats[j] - 1)
                throw ValidationError("Bec row for item " + std::to_string(j + 1) +
                                      " must have l_j - 1 entries");
        for (int j : refs)
            if (p.thresholds[j](0) != 0.0)
                throw ValidationError("first difficulty of reference item " +
                                      std::to_string(j + 1) + " must be 0");
    } else {
        if (p.item_location.size() != r) throw ValidationError("item difficulties must have r entries");
        if (p.category_step.size() != spec.common_categories() - 1)
            throw ValidationError("category steps must have l - 1 entries");
        if (p.category_step(0) != 0.0) throw ValidationError("first category step must be 0");
        for (int j : refs)
            if (p.item_location(j) != 0.0)
                throw ValidationError("difficulty of reference item " + std::to_string(j + 1) +
                                      " must be 0");
    }
}

namespace {

// Marginal category proportions per item, with a half count added to every
// category so that logits stay finite.
std::vector<Eigen::VectorXd> marginal_probs(const ModelSpec& spec, const ResponseMatrix& data) {
    std::vector<Eigen::VectorXd> out(spec.items());
    for (int j = 0; j < spec.items(); ++j) {
        Eigen::VectorXd counts = Eigen::VectorXd::Constant(spec.cats[j], 0.5);
        for (std::size_t p = 0; p < data.patterns(); ++p)
            if (data.observed(p, j)) counts(data.code(p, j)) += data.freq[p];
        out[j] = counts / counts.sum();
    }
    return out;
}

// Difficulties implied by the marginals at ability 0, then shifted within each
// dimension so that the reference constraints hold. Abilities are not moved.
void marginal_difficulties(const ModelSpec& spec, const ResponseMatrix& data, ParameterSet& p) {
    const LinkKind kind = spec.is_latent_class() ? LinkKind::Global : spec.link;
    const auto marg = marginal_probs(spec, data);
    const int r = spec.items();
    p.thresholds.assign(r, {});
    for (int j = 0; j < r; ++j) p.thresholds[j] = -probs_to_logits(marg[j], kind);
    if (spec.difl == Difficulty::RatingScale && !spec.is_latent_class()) {
        const int l = spec.common_categories();
        p.item_location.resize(r);
        p.category_step = Eigen::VectorXd::Zero(l - 1);
        for (int j = 0; j < r; ++j) {
            p.item_location(j) = p.thresholds[j].mean();
            p.category_step += (p.thresholds[j].array() - p.item_location(j)).matrix();
        }
        p.category_step /= r;
        p.thresholds.clear();
    }
}

void shift_difficulties(const ModelSpec& spec, ParameterSet& p) {
    if (spec.difl == Difficulty::RatingScale) {
        const double t = p.category_step(0);
        p.category_step.array() -= t;
        p.item_location.array() += t;
    }
    for (int d = 0; d < spec.dims(); ++d) {
        const int ref = spec.groups[d].front();
        if (spec.difl == Difficulty::Free) {
            const double a = p.thresholds[ref](0);
            for (int j : spec.groups[d]) p.thresholds[j].array() -= a;
        } else {
            const double a = p.item_location(ref);
            for (int j : spec.groups[d]) p.item_location(j) -= a;
        }
    }
}

std::vector<Eigen::MatrixXd> graded_class_probs(const ModelSpec& spec, const ParameterSet& p) {
    std::vector<Eigen::MatrixXd> out(spec.items());
    for (int j = 0; j < spec.items(); ++j) {
        out[j].resize(spec.cats[j], spec.classes);
        for (int c = 0; c < spec.classes; ++c) {
            const Eigen::VectorXd eta = p.support(c, 0) - p.thresholds[j].array();
            auto lambda = logits_to_probs(eta, LinkKind::Global);
            out[j].col(c) = lambda ? *lambda : Eigen::VectorXd::Constant(spec.cats[j], 1.0 / spec.cats[j]);
        }
    }
    return out;
}

}  // namespace

ParameterSet deterministic_start(const ModelSpec& spec, const ResponseMatrix& data) {
    spec.validate();
    const int k = spec.classes;
    ParameterSet p;
    p.weights = Eigen::VectorXd::Constant(k, 1.0 / k);
    const boost::math::normal standard;
    const int s = spec.is_latent_class() ? 1 : spec.dims();
    p.support.resize(k, s);
    for (int c = 0; c < k; ++c) {
        const double q = boost::math::quantile(standard, (2.0 * c + 1.0) / (2.0 * k));
        p.support.row(c).setConstant(q);
    }
    marginal_difficulties(spec, data, p);
    if (spec.is_latent_class()) {
        p.class_probs = graded_class_probs(spec, p);
        p.support.resize(0, 0);
        p.thresholds.clear();
        return p;
    }
    p.discrimination = Eigen::VectorXd::Ones(spec.items());
    shift_difficulties(spec, p);
    return p;
}

ParameterSet random_start(const ModelSpec& spec, const ResponseMatrix& data, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int k = spec.classes;
    const int r = spec.items();

    ParameterSet p;
    p.weights.resize(k);
    for (int c = 0; c < k; ++c) p.weights(c) = 1.0 - unif(rng);  // (0, 1]
    p.weights /= p.weights.sum();

    if (spec.is_latent_class()) {
        p.class_probs.resize(r);
        for (int j = 0; j < r; ++j) {
            p.class_probs[j].resize(spec.cats[j], k);
            for (int c = 0; c < k; ++c) {
                for (int x = 0; x < spec.cats[j]; ++x) p.class_probs[j](x, c) = -std::log(1.0 - unif(rng));
                p.class_probs[j].col(c) /= p.class_probs[j].col(c).sum();
            }
        }
        return p;
    }

    p.support.resize(k, spec.dims());
    for (int c = 0; c < k; ++c)
        for (int d = 0; d < spec.dims(); ++d) p.support(c, d) = normal(rng);

    marginal_difficulties(spec, data, p);
    const double noise_sd = 0.5;
    if (spec.difl == Difficulty::Free) {
        for (auto& beta : p.thresholds) {
            for (Eigen::Index x = 0; x < beta.size(); ++x) beta(x) += noise_sd * normal(rng);
            if (spec.link == LinkKind::Global) std::sort(beta.begin(), beta.end());
        }
    } else {
        for (Eigen::Index j = 0; j < p.item_location.size(); ++j) p.item_location(j) += noise_sd * normal(rng);
        for (Eigen::Index x = 0; x < p.category_step.size(); ++x) p.category_step(x) += noise_sd * normal(rng);
        if (spec.link == LinkKind::Global) std::sort(p.category_step.begin(), p.category_step.end());
    }

    p.discrimination = Eigen::VectorXd::Ones(r);
    if (spec.disc == Discrimination::Free) {
        for (int j = 0; j < r; ++j) {
            double g;
            do g = 1.0 + 0.2 * normal(rng);
            while (g <= 0.0);
            p.discrimination(j) = g;
        }
        for (int j : spec.reference_items()) p.discrimination(j) = 1.0;
    }
    shift_difficulties(spec, p);
    return p;
}

std::vector<Eigen::MatrixXd> conditional_probs(const ModelSpec& spec, const ParameterSet& p) {
    if (spec.is_latent_class()) return p.class_probs;
    std::vector<Eigen::MatrixXd> out(spec.items());
    for (int j = 0; j < spec.items(); ++j) {
        out[j].resize(spec.cats[j], spec.classes);
        for (int c = 0; c < spec.classes; ++c) {
            auto lambda = logits_to_probs(linear_predictor(spec, p, c, j), spec.link);
            if (!lambda)
                throw NumericError("infeasible global logits for item " + std::to_string(j + 1) +
                                   ", class " + std::to_string(c + 1));
            out[j].col(c) = *lambda;
        }
    }
    return out;
}

}  // namespace lcirt
