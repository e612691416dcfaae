#include "lcirt/link.hpp"

#include <algorithm>
#include <cmath>

#include "lcirt/error.hpp"

namespace lcirt {

std::string to_string(LinkKind kind) {
    switch (kind) {
        case LinkKind::None: return "none";
        case LinkKind::Global: return "global";
        case LinkKind::Local: return "local";
    }
    return "none";
}

LinkKind parse_link(const std::string& name) {
    if (name == "none" || name == "0" || name == "lc") return LinkKind::None;
    if (name == "global" || name == "1") return LinkKind::Global;
    if (name == "local" || name == "2") return LinkKind::Local;
    throw ValidationError("unknown link '" + name + "' (expected none, global or local)");
}

LinkMatrices link_matrices(LinkKind kind, int l) {
    if (l < 2) throw ValidationError("link matrices need at least 2 categories");
    if (kind == LinkKind::None) throw ValidationError("the standard latent class model has no link");
    const int q = l - 1;
    LinkMatrices out;
    out.categories = l;
    out.contrast = Eigen::MatrixXd::Zero(q, 2 * q);
    out.contrast.leftCols(q) = -Eigen::MatrixXd::Identity(q, q);
    out.contrast.rightCols(q) = Eigen::MatrixXd::Identity(q, q);

    out.marginal = Eigen::MatrixXd::Zero(2 * q, l);
    if (kind == LinkKind::Global) {
        for (int x = 0; x < q; ++x) {
            for (int y = 0; y <= x; ++y) out.marginal(x, y) = 1.0;
            for (int y = x + 1; y < l; ++y) out.marginal(q + x, y) = 1.0;
        }
    } else {
        for (int x = 0; x < q; ++x) {
            out.marginal(x, x) = 1.0;
            out.marginal(q + x, x + 1) = 1.0;
        }
    }
    return out;
}

namespace {

void require_positive(const Eigen::VectorXd& lambda) {
    if (lambda.size() < 2) throw ValidationError("probability vector needs at least 2 categories");
    if ((lambda.array() <= 0.0).any())
        throw ValidationError("probability vector has a non-positive component");
}

}  // namespace

Eigen::VectorXd probs_to_logits(const Eigen::VectorXd& lambda, LinkKind kind) {
    require_positive(lambda);
    const Eigen::Index q = lambda.size() - 1;
    Eigen::VectorXd eta(q);
    if (kind == LinkKind::Global) {
        // Tail sums accumulated from each end, so for l = 2 this is log(lambda_1) - log(lambda_0).
        Eigen::VectorXd above(q);
        double acc = 0.0;
        for (Eigen::Index x = q; x >= 1; --x) above(x - 1) = (acc += lambda(x));
        double below = 0.0;
        for (Eigen::Index x = 0; x < q; ++x) {
            below += lambda(x);
            eta(x) = std::log(above(x)) - std::log(below);
        }
    } else if (kind == LinkKind::Local) {
        for (Eigen::Index x = 0; x < q; ++x) eta(x) = std::log(lambda(x + 1)) - std::log(lambda(x));
    } else {
        throw ValidationError("the standard latent class model has no link");
    }
    return eta;
}

std::optional<Eigen::VectorXd> logits_to_probs(const Eigen::VectorXd& eta, LinkKind kind) {
    const Eigen::Index q = eta.size();
    Eigen::VectorXd lambda(q + 1);
    if (kind == LinkKind::Global) {
        // P(X >= x) = logistic(eta_x); lambda_x is the drop between thresholds.
        double prev = 1.0;
        for (Eigen::Index x = 0; x < q; ++x) {
            const double e = std::clamp(eta(x), -kLogitClamp, kLogitClamp);
            const double survival = 1.0 / (1.0 + std::exp(-e));
            lambda(x) = prev - survival;
            prev = survival;
        }
        lambda(q) = prev;
        if ((lambda.array() <= 0.0).any()) return std::nullopt;
        return lambda;
    }
    if (kind == LinkKind::Local) {
        Eigen::VectorXd level(q + 1);
        level(0) = 0.0;
        for (Eigen::Index x = 0; x < q; ++x)
            level(x + 1) = level(x) + std::clamp(eta(x), -kLogitClamp, kLogitClamp);
        lambda = (level.array() - level.maxCoeff()).exp();
        lambda /= lambda.sum();
        return lambda;
    }
    throw ValidationError("the standard latent class model has no link");
}

Eigen::MatrixXd logit_jacobian(const Eigen::VectorXd& lambda, LinkKind kind) {
    require_positive(lambda);
    const int l = static_cast<int>(lambda.size());
    const LinkMatrices mats = link_matrices(kind, l);
    // d lambda / d c for the free canonical coordinates 1..l-1.
    Eigen::MatrixXd dlambda = -lambda * lambda.tail(l - 1).transpose();
    for (int z = 1; z < l; ++z) dlambda(z, z - 1) += lambda(z);
    const Eigen::VectorXd margins = mats.marginal * lambda;
    return mats.contrast * margins.cwiseInverse().asDiagonal() * mats.marginal * dlambda;
}

Eigen::MatrixXd derivative_matrix(const Eigen::VectorXd& lambda, LinkKind kind) {
    require_positive(lambda);
    const Eigen::Index q = lambda.size() - 1;
    if (kind == LinkKind::Local) {
        return Eigen::MatrixXd::Ones(q, q).triangularView<Eigen::Lower>();
    }
    if (q == 1) return Eigen::MatrixXd::Ones(1, 1);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(logit_jacobian(lambda, kind));
    if (!lu.isInvertible()) throw NumericError("logit Jacobian is singular");
    return lu.inverse();
}

}  // namespace lcirt
