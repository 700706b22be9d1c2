#pragma once

// Representation-gap measurements between node embeddings H and class
// prototypes T: overall / positive / negative cosine similarity, the gap,
// structural degree weights, intra-class variance, EMA smoothing and the
// split of T into its part inside span(H) and the orthogonal residual.

#include "gapalign/core.hpp"
#include "gapalign/graphdata.hpp"
#include "gapalign/text_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gapalign {

inline double cosine(std::span<const double> u, std::span<const double> v) {
    require(u.size() == v.size(), "cosine: length mismatch (" + std::to_string(u.size()) + " vs " +
                                      std::to_string(v.size()) + ")");
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        dot += u[k] * v[k];
        nu += u[k] * u[k];
        nv += v[k] * v[k];
    }
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

template <typename RowA, typename RowB>
double cosine_rows(const RowA& a, const RowB& b) {
    return cosine(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())),
                  std::span<const double>(b.data(), static_cast<std::size_t>(b.size())));
}

/// N x C matrix of cos(h_i, t_j).
inline Matrix cosine_matrix(const Matrix& h, const Matrix& t) {
    require(h.cols() == t.cols(), "cosine_matrix: dimension mismatch");
    Matrix s(h.rows(), t.rows());
    for (Eigen::Index i = 0; i < h.rows(); ++i)
        for (Eigen::Index j = 0; j < t.rows(); ++j) s(i, j) = cosine_rows(h.row(i), t.row(j));
    return s;
}

struct GapReport {
    std::int32_t epoch = 0;
    double sim_overall = 0.0;
    double sim_pos = 0.0;
    double sim_neg = 0.0;
    double gap = 0.0;  ///< sim_pos - sim_neg
    std::vector<std::optional<double>> var_per_class;  ///< absent for classes without members

    /// Mean over classes that have members.
    [[nodiscard]] double var_mean() const {
        std::vector<double> present;
        for (const auto& v : var_per_class)
            if (v) present.push_back(*v);
        return compensated_mean(present);
    }
};

/// Gap statistics of H against T. `weights`, when given, reweights sim_pos
/// only; sim_neg and sim_overall stay uniform.
inline GapReport gap_report(const Matrix& h, const Matrix& t, std::span<const ClassId> y,
                            std::optional<std::span<const double>> weights = std::nullopt) {
    const auto n = h.rows();
    const auto c = t.rows();
    require(n >= 1, "gap_report: empty H");
    require(c >= 2, "gap_report: needs at least 2 classes");
    require(h.cols() == t.cols(), "gap_report: H has dim " + std::to_string(h.cols()) + ", T has dim " +
                                      std::to_string(t.cols()));
    require(static_cast<Eigen::Index>(y.size()) == n, "gap_report: label count != rows of H");
    for (auto yi : y) require(yi >= 0 && yi < c, "gap_report: label " + std::to_string(yi) + " out of range");
    if (weights) {
        require(static_cast<Eigen::Index>(weights->size()) == n, "gap_report: weight count != rows of H");
        double sum = 0.0;
        for (double w : *weights) {
            require(w >= 0.0 && std::isfinite(w), "gap_report: weights must be finite and >= 0");
            sum += w;
        }
        require(sum > 0.0, "gap_report: weights must have positive sum");
    }

    const Matrix s = cosine_matrix(h, t);
    std::vector<double> overall(static_cast<std::size_t>(n)), pos(static_cast<std::size_t>(n)),
        neg(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto yi = y[static_cast<std::size_t>(i)];
        CompensatedSum all, others;
        for (Eigen::Index j = 0; j < c; ++j) {
            all.add(s(i, j));
            if (j != yi) others.add(s(i, j));
        }
        overall[static_cast<std::size_t>(i)] = all.value() / static_cast<double>(c);
        neg[static_cast<std::size_t>(i)] = others.value() / static_cast<double>(c - 1);
        pos[static_cast<std::size_t>(i)] = s(i, yi);
    }

    GapReport r;
    r.sim_overall = compensated_mean(overall);
    r.sim_neg = compensated_mean(neg);
    if (weights) {
        CompensatedSum num, den;
        for (Eigen::Index i = 0; i < n; ++i) {
            num.add((*weights)[static_cast<std::size_t>(i)] * pos[static_cast<std::size_t>(i)]);
            den.add((*weights)[static_cast<std::size_t>(i)]);
        }
        r.sim_pos = num.value() / den.value();
    } else {
        r.sim_pos = compensated_mean(pos);
    }
    r.gap = r.sim_pos - r.sim_neg;

    r.var_per_class.assign(static_cast<std::size_t>(c), std::nullopt);
    for (Eigen::Index cls = 0; cls < c; ++cls) {
        std::vector<Eigen::Index> members;
        for (Eigen::Index i = 0; i < n; ++i)
            if (y[static_cast<std::size_t>(i)] == cls) members.push_back(i);
        if (members.empty()) continue;
        Vector centroid = Vector::Zero(h.cols());
        for (auto i : members) centroid += h.row(i).transpose();
        centroid /= static_cast<double>(members.size());
        std::vector<double> sq;
        sq.reserve(members.size());
        for (auto i : members) sq.push_back((h.row(i).transpose() - centroid).squaredNorm());
        r.var_per_class[static_cast<std::size_t>(cls)] = compensated_mean(sq);
    }
    return r;
}

/// w_i = (deg(i) + 1) / (max_j deg(j) + 1).
inline std::vector<double> degree_weights(const TagGraph& g) {
    const auto deg = g.degrees();
    const auto max_deg = deg.empty() ? 0 : *std::max_element(deg.begin(), deg.end());
    std::vector<double> w(deg.size());
    for (std::size_t i = 0; i < deg.size(); ++i)
        w[i] = static_cast<double>(deg[i] + 1) / static_cast<double>(max_deg + 1);
    return w;
}

/// Exponential moving average; the first observation initializes the value.
class EmaState {
public:
    explicit EmaState(double decay = 0.9) : decay_(decay) {
        require(decay > 0.0 && decay < 1.0, "ema: decay must lie in (0,1)");
    }
    [[nodiscard]] double decay() const noexcept { return decay_; }
    [[nodiscard]] const std::optional<double>& value() const noexcept { return value_; }

    friend EmaState ema_update(EmaState state, double x) {
        require(std::isfinite(x), "ema_update: non-finite observation");
        state.value_ = state.value_ ? state.decay_ * *state.value_ + (1.0 - state.decay_) * x : x;
        return state;
    }

private:
    double decay_;
    std::optional<double> value_;
};

struct SpanDecomposition {
    Matrix t_par;   ///< projection of each prototype onto the row space of H
    Matrix t_perp;  ///< t - t_par
    double perp_norm_fraction = 0.0;  ///< |T_perp|_F / |T|_F
};

inline constexpr double span_ridge = 1e-10;

/// Least-squares projection of every prototype onto span(rows of H) via ridge
/// normal equations, using whichever Gram matrix (N x N or d x d) is smaller.
inline SpanDecomposition span_decompose(const Matrix& h, const Matrix& t) {
    require(h.rows() >= 1, "span_decompose: H has no rows");
    require(h.cols() == t.cols(), "span_decompose: dimension mismatch");
    const double t_norm = t.norm();
    require(t_norm > 0.0, "span_decompose: T is the zero matrix");

    // Ridge-regularised normal equations, then a few refinement sweeps against
    // the unregularised system so the ridge bias (about ridge / sigma_min^2)
    // does not survive into t_par. Components outside the range stay zero.
    auto refine = [](const Matrix& gram, const Matrix& rhs) {
        Matrix reg = gram;
        reg.diagonal().array() += span_ridge;
        const auto solver = reg.ldlt();
        Matrix x = solver.solve(rhs);
        for (int sweep = 0; sweep < 3; ++sweep) x += solver.solve(rhs - gram * x);
        return x;
    };
    SpanDecomposition out;
    if (h.rows() <= h.cols()) {
        // t_par = H^T (H H^T)^-1 H t
        const Matrix coeff = refine(h * h.transpose(), h * t.transpose());  // N x C
        out.t_par = (h.transpose() * coeff).transpose();
    } else {
        // (H^T H) t_par^T = (H^T H) t^T, the same projector pushed through
        const Matrix k = h.transpose() * h;
        out.t_par = refine(k, k * t.transpose()).transpose();
    }
    out.t_perp = t - out.t_par;
    out.perp_norm_fraction = out.t_perp.norm() / t_norm;
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline constexpr const char* gap_csv_header = "epoch,sim_overall,sim_pos,sim_neg,gap,var_mean";

inline std::string gap_csv_row(const GapReport& r) {
    using text::format_double;
    return std::to_string(r.epoch) + "," + format_double(r.sim_overall) + "," + format_double(r.sim_pos) + "," +
           format_double(r.sim_neg) + "," + format_double(r.gap) + "," + format_double(r.var_mean());
}

inline nlohmann::json to_json(const GapReport& r) {
    nlohmann::json vars = nlohmann::json::array();
    for (const auto& v : r.var_per_class) vars.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
    return {{"epoch", r.epoch},     {"sim_overall", r.sim_overall}, {"sim_pos", r.sim_pos},
            {"sim_neg", r.sim_neg}, {"gap", r.gap},                 {"var_per_class", vars},
            {"var_mean", r.var_mean()}};
}

}  // namespace gapalign
