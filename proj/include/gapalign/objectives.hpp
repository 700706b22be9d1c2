#pragma once

// Contrastive (class-prototype softmax) and cross-entropy objectives with
// analytic gradients, plus the negative-term domination diagnostic.

#include "gapalign/core.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace gapalign {

struct LossValue {
    double total = 0.0;            ///< mean of per_node
    std::vector<double> per_node;  ///< one term per batch row
    double neg_share = 0.0;        ///< share of |terms| carried by the negative log-partition, in [0,1]
};

namespace detail {

inline void check_labels(std::span<const ClassId> y, Eigen::Index rows, Eigen::Index n_classes, const char* who) {
    require(static_cast<Eigen::Index>(y.size()) == rows,
            std::string(who) + ": " + std::to_string(y.size()) + " labels for " + std::to_string(rows) + " rows");
    for (auto c : y)
        require(c >= 0 && c < n_classes, std::string(who) + ": label " + std::to_string(c) + " out of range [0," +
                                             std::to_string(n_classes) + ")");
}

/// log sum_j exp(z_j) with max subtraction; `skip` excludes one index.
inline double log_sum_exp(const double* z, Eigen::Index n, Eigen::Index skip = -1) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j)
        if (j != skip) mx = std::max(mx, z[j]);
    if (!std::isfinite(mx)) return mx;
    CompensatedSum s;
    for (Eigen::Index j = 0; j < n; ++j)
        if (j != skip) s.add(std::exp(z[j] - mx));
    return mx + std::log(s.value());
}

/// Softmax cross-entropy over precomputed logits: loss, neg_share and
/// optionally d loss / d logits (mean-reduced).
inline LossValue softmax_ce(const Matrix& logits, std::span<const ClassId> y, Matrix* grad) {
    const auto b = logits.rows();
    const auto c = logits.cols();
    LossValue out;
    out.per_node.resize(static_cast<std::size_t>(b));
    if (grad) grad->setZero(b, c);
    CompensatedSum pos_mag, neg_mag;
    for (Eigen::Index i = 0; i < b; ++i) {
        const double* z = logits.row(i).data();
        const auto yi = static_cast<Eigen::Index>(y[static_cast<std::size_t>(i)]);
        const double lse = log_sum_exp(z, c);
        out.per_node[static_cast<std::size_t>(i)] = lse - z[yi];
        pos_mag.add(std::abs(z[yi]));
        if (c > 1) neg_mag.add(std::abs(log_sum_exp(z, c, yi)));
        if (grad) {
            for (Eigen::Index j = 0; j < c; ++j) (*grad)(i, j) = std::exp(z[j] - lse) / static_cast<double>(b);
            (*grad)(i, yi) -= 1.0 / static_cast<double>(b);
        }
    }
    out.total = compensated_mean(out.per_node);
    const double denom = pos_mag.value() + neg_mag.value();
    out.neg_share = denom > 0.0 ? neg_mag.value() / denom : 0.0;
    return out;
}

inline Matrix scaled_similarities(const Matrix& h, const Matrix& t, double tau) {
    require(h.cols() == t.cols(), "contrastive: H has dim " + std::to_string(h.cols()) + ", T has dim " +
                                      std::to_string(t.cols()));
    require(tau > 0.0 && std::isfinite(tau), "contrastive: tau must be > 0");
    return (h * t.transpose()) / tau;
}

}  // namespace detail

/// Mean over rows of -log softmax_j(h_i . t_j / tau)[y_i]. Rows of H and T
/// are expected to be unit (or zero) so the dot product is the cosine.
inline LossValue contrastive_loss(const Matrix& h, const Matrix& t, std::span<const ClassId> y, double tau) {
    auto logits = detail::scaled_similarities(h, t, tau);
    detail::check_labels(y, h.rows(), t.rows(), "contrastive_loss");
    return detail::softmax_ce(logits, y, nullptr);
}

/// d contrastive_loss / d H = (1/(B tau)) sum_j (p_ij - [j = y_i]) t_j.
/// The prototypes are frozen, so no gradient is returned for T.
inline Matrix contrastive_grad(const Matrix& h, const Matrix& t, std::span<const ClassId> y, double tau) {
    auto logits = detail::scaled_similarities(h, t, tau);
    detail::check_labels(y, h.rows(), t.rows(), "contrastive_grad");
    Matrix dlogits;
    detail::softmax_ce(logits, y, &dlogits);
    return (dlogits * t) / tau;
}

/// Loss and dH in one pass.
struct ContrastiveEval {
    LossValue loss;
    Matrix grad;
};

inline ContrastiveEval contrastive_loss_and_grad(const Matrix& h, const Matrix& t, std::span<const ClassId> y,
                                                 double tau) {
    auto logits = detail::scaled_similarities(h, t, tau);
    detail::check_labels(y, h.rows(), t.rows(), "contrastive_loss");
    Matrix dlogits;
    ContrastiveEval out;
    out.loss = detail::softmax_ce(logits, y, &dlogits);
    out.grad = (dlogits * t) / tau;
    return out;
}

/// ((C-1)/C) * mean_i log sum_{j != y_i} exp(h_i . t_j / tau): the expected
/// negative-pair term of the contrastive loss.
inline double neg_domination(std::int32_t n_classes, const Matrix& h, const Matrix& t, std::span<const ClassId> y,
                             double tau) {
    require(n_classes >= 2, "neg_domination: needs C >= 2");
    require(t.rows() == n_classes, "neg_domination: T has " + std::to_string(t.rows()) + " rows, C = " +
                                       std::to_string(n_classes));
    auto logits = detail::scaled_similarities(h, t, tau);
    detail::check_labels(y, h.rows(), t.rows(), "neg_domination");
    std::vector<double> terms(static_cast<std::size_t>(h.rows()));
    for (Eigen::Index i = 0; i < h.rows(); ++i)
        terms[static_cast<std::size_t>(i)] =
            detail::log_sum_exp(logits.row(i).data(), logits.cols(), y[static_cast<std::size_t>(i)]);
    const double c = static_cast<double>(n_classes);
    return (c - 1.0) / c * compensated_mean(terms);
}

struct CrossEntropy {
    LossValue loss;
    Matrix grad;  ///< (softmax - onehot) / B
};

inline CrossEntropy cross_entropy(const Matrix& logits, std::span<const ClassId> y) {
    detail::check_labels(y, logits.rows(), logits.cols(), "cross_entropy");
    require(logits.allFinite(), "cross_entropy: non-finite logits");
    CrossEntropy out;
    out.loss = detail::softmax_ce(logits, y, &out.grad);
    return out;
}

}  // namespace gapalign
