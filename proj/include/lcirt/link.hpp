#pragma once

#include <optional>
#include <string>

#include <Eigen/Dense>

namespace lcirt {

// None is the unrestricted latent class model: class-conditional probabilities
// are free parameters and no logit parameterization applies.
enum class LinkKind { None, Global, Local };

std::string to_string(LinkKind kind);
LinkKind parse_link(const std::string& name);

// Logits beyond this magnitude are clamped before exponentiation.
inline constexpr double kLogitClamp = 35.0;

// g(lambda) = C log(M lambda).
//   C = (-I | I), (l-1) x 2(l-1)
//   M, 2(l-1) x l: Global stacks cumulative "below x" sums over "x or above"
//   sums; Local stacks lambda_{x-1} over lambda_x.
struct LinkMatrices {
    Eigen::MatrixXd contrast;
    Eigen::MatrixXd marginal;
    int categories = 0;
};

LinkMatrices link_matrices(LinkKind kind, int categories);

// Requires strictly positive lambda summing to one.
Eigen::VectorXd probs_to_logits(const Eigen::VectorXd& lambda, LinkKind kind);

// Closed-form inverse. Returns nullopt when a Global logit vector implies a
// non-decreasing survival function (some lambda_x <= 0).
std::optional<Eigen::VectorXd> logits_to_probs(const Eigen::VectorXd& eta, LinkKind kind);

// Jacobian of the logits with respect to the baseline-category canonical
// parameters c_x = log(lambda_x / lambda_0), x = 1..l-1.
Eigen::MatrixXd logit_jacobian(const Eigen::VectorXd& lambda, LinkKind kind);

// R = d c / d eta, the inverse of logit_jacobian. For Local links this is the
// lower-triangular matrix of ones.
Eigen::MatrixXd derivative_matrix(const Eigen::VectorXd& lambda, LinkKind kind);

}  // namespace lcirt
