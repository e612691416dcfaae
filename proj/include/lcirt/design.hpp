#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lcirt/data.hpp"
#include "lcirt/link.hpp"

namespace lcirt {

enum class Discrimination { Constrained, Free };  // gamma_j = 1 for all j, or free
enum class Difficulty { Free, RatingScale };      // beta_jx free, or beta_j + tau_x

// Everything that defines a model apart from its parameter values.
// Items and groups are 0-based here; user-facing I/O is 1-based.
struct ModelSpec {
    int classes = 1;
    LinkKind link = LinkKind::Global;
    Discrimination disc = Discrimination::Constrained;
    Difficulty difl = Difficulty::Free;
    std::vector<std::vector<int>> groups;  // partition of items into dimensions
    std::vector<int> cats;                 // l_j

    int items() const { return static_cast<int>(cats.size()); }
    int dims() const { return static_cast<int>(groups.size()); }
    bool is_latent_class() const { return link == LinkKind::None; }

    // Dimension index per item.
    std::vector<int> dimension_of() const;
    // First listed item of every group.
    std::vector<int> reference_items() const;
    // Shared category count under the rating-scale constraint.
    int common_categories() const { return cats.empty() ? 0 : cats.front(); }

    // Throws ValidationError when the groups are not a partition, a rating
    // scale is requested with unequal category counts, or an item has fewer
    // than two categories.
    void validate() const;

    // Short human-readable summary, e.g. "k=3 global disc=free difl=free s=2".
    std::string describe() const;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// All items on one dimension.
std::vector<std::vector<int>> unidimensional(int items);
// One dimension per item.
std::vector<std::vector<int>> item_per_dimension(int items);

ModelSpec make_spec(int classes, LinkKind link, Discrimination disc, Difficulty difl,
                    std::vector<std::vector<int>> groups, std::vector<int> cats);

// Model parameters in natural coordinates. Constrained entries are stored with
// their fixed values (reference discriminations 1, reference difficulties 0).
struct ParameterSet {
    Eigen::VectorXd weights;                   // pi_c
    Eigen::MatrixXd support;                   // xi_cd, k x s
    std::vector<Eigen::VectorXd> thresholds;   // free difficulties: beta_j1..beta_j,l_j-1
    Eigen::VectorXd item_location;             // rating scale: beta_j
    Eigen::VectorXd category_step;             // rating scale: tau_1..tau_{l-1}
    Eigen::VectorXd discrimination;            // gamma_j
    std::vector<Eigen::MatrixXd> class_probs;  // link None: l_j x k per item

    friend bool operator==(const ParameterSet& a, const ParameterSet& b);
};

// Free coordinates of the item-response part.
struct PackedParams {
    Eigen::VectorXd phi;         // abilities then difficulties
    Eigen::VectorXd gamma_free;  // non-reference discriminations
};

// Index map between natural coordinates and the flat vectors phi / gamma_free.
// Columns for constrained coordinates are -1.
class ParameterLayout {
public:
    explicit ParameterLayout(const ModelSpec& spec);

    const ModelSpec& spec() const { return spec_; }
    int phi_size() const { return phi_size_; }
    int gamma_size() const { return gamma_size_; }

    int support_column(int c, int d) const { return c * spec_.dims() + d; }
    // x is the 1-based threshold index (1..l_j-1).
    int threshold_column(int j, int x) const;
    int location_column(int j) const { return location_col_[j]; }
    int step_column(int x) const { return x >= 2 ? step_base_ + x - 2 : -1; }
    int gamma_column(int j) const { return gamma_col_[j]; }
    int dimension(int j) const { return dim_of_[j]; }
    const std::vector<int>& free_gamma_items() const { return gamma_items_; }

    PackedParams pack(const ParameterSet& p) const;
    // Writes free coordinates into `out`; constrained coordinates are reset to
    // their fixed values.
    void unpack(const PackedParams& packed, ParameterSet& out) const;

private:
    ModelSpec spec_;
    int phi_size_ = 0;
    int gamma_size_ = 0;
    int step_base_ = 0;
    std::vector<int> dim_of_;
    std::vector<std::vector<int>> threshold_col_;
    std::vector<int> location_col_;
    std::vector<int> gamma_col_;
    std::vector<int> gamma_items_;
};

// Compact form of Z_cj: only the columns of phi the item touches.
struct DesignBlock {
    std::vector<int> columns;
    Eigen::MatrixXd coef;  // (l_j - 1) x columns.size()
};

DesignBlock design_block(const ParameterLayout& layout, int c, int j);

// Dense Z_cj, (l_j - 1) x phi_size, with Z_cj phi = (xi_cd - beta_jx)_x.
Eigen::MatrixXd build_design_matrix(const ModelSpec& spec, int c, int j);

// gamma_j (xi_cd - beta_jx) evaluated from natural coordinates.
Eigen::VectorXd linear_predictor(const ModelSpec& spec, const ParameterSet& p, int c, int j);

int count_free_params(const ModelSpec& spec);

// Shifts each dimension so that reference difficulties are zero (and tau_1 = 0),
// leaving every linear predictor unchanged. Reference discriminations are set
// to 1 and, with constrained discrimination, all of them.
void normalize_constraints(const ModelSpec& spec, ParameterSet& p);

// Throws ValidationError when shapes or constraints do not match the spec.
void validate_params(const ModelSpec& spec, const ParameterSet& p);

ParameterSet deterministic_start(const ModelSpec& spec, const ResponseMatrix& data);
ParameterSet random_start(const ModelSpec& spec, const ResponseMatrix& data, std::uint64_t seed);

// Class-conditional response probabilities lambda_cj as l_j x k matrices.
// Throws NumericError when a Global parameter point is infeasible.
std::vector<Eigen::MatrixXd> conditional_probs(const ModelSpec& spec, const ParameterSet& p);

}  // namespace lcirt
