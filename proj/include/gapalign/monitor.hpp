#pragma once

// Gap-dynamics monitoring and negative-similarity early stopping.
//
// The baseline is the validation sim_neg of the encoder before any update.
// Each epoch the current validation sim_neg is EMA-smoothed and compared to
// the baseline through delta = |smoothed - base| / |base|; training stops the
// first time delta exceeds theta. The gap change rate rho is recorded for
// diagnostics and never gates stopping.

#include "gapalign/core.hpp"
#include "gapalign/gapmetrics.hpp"

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gapalign {

inline constexpr double kDegenerateBaseline = 1e-9;

/// Named threshold presets.
enum class MonitorProfile { citation, social };

inline double profile_theta(MonitorProfile p) { return p == MonitorProfile::citation ? 0.10 : 0.12; }

inline double relative_change(double base, double curr) {
    if (!(std::abs(base) >= kDegenerateBaseline))
        throw Error(ErrorCode::degenerate, "relative_change: degenerate baseline " + std::to_string(base));
    require(std::isfinite(curr), "relative_change: non-finite current value");
    return std::abs(curr - base) / std::abs(base);
}

struct GapRateSeries {
    std::vector<double> rhos;  ///< rhos[k] = gap[k+1] - gap[k], i.e. the rate at epoch k+1
    std::optional<std::int32_t> transition_epoch;  ///< first epoch where rho turns from > 0 to < 0

    /// Rate at epoch t (t >= 1).
    [[nodiscard]] double at(std::int32_t t) const { return rhos.at(static_cast<std::size_t>(t - 1)); }
};

/// Finite-difference gap change rate. With `ema_decay` the sign test runs on
/// the EMA-smoothed rates; by default it runs on the raw rates. Zero rates
/// neither start nor break a positive run.
inline GapRateSeries gap_rate(std::span<const double> gaps, std::optional<double> ema_decay = std::nullopt) {
    require(gaps.size() >= 2, "gap_rate: needs at least 2 epochs");
    GapRateSeries out;
    out.rhos.reserve(gaps.size() - 1);
    std::optional<EmaState> ema;
    if (ema_decay) ema.emplace(*ema_decay);
    int last_sign = 0;
    for (std::size_t t = 1; t < gaps.size(); ++t) {
        const double rho = gaps[t] - gaps[t - 1];
        out.rhos.push_back(rho);
        double probe = rho;
        if (ema) {
            *ema = ema_update(*ema, rho);
            probe = *ema->value();
        }
        const int sign = (probe > 0.0) - (probe < 0.0);
        if (sign == 0) continue;
        if (!out.transition_epoch && last_sign > 0 && sign < 0) out.transition_epoch = static_cast<std::int32_t>(t);
        last_sign = sign;
    }
    return out;
}

struct MonitorRecord {
    std::int32_t epoch = 0;
    double gap = 0.0;
    std::optional<double> rho;  ///< absent for the first record
    double delta = 0.0;
    bool stopped = false;
};

/// Single-owner monitor for one training run.
class GapMonitor {
public:
    explicit GapMonitor(double theta, double ema_decay = 0.9) : theta_(theta), ema_(ema_decay) {
        require(theta > 0.0 && std::isfinite(theta), "monitor: theta must be > 0");
    }

    /// Records sim_neg over the validation rows from the untrained encoder.
    double establish_baseline(const Matrix& h_val, const Matrix& t, std::span<const ClassId> y_val) {
        require(!base_, "monitor: baseline already established");
        require(h_val.rows() > 0, "monitor: empty validation set");
        const double base = gap_report(h_val, t, y_val).sim_neg;
        if (!(std::abs(base) >= kDegenerateBaseline))
            throw Error(ErrorCode::degenerate, "monitor: degenerate baseline sim_neg = " + std::to_string(base) +
                                                   " (relative change undefined)");
        base_ = base;
        return base;
    }

    /// Sets a baseline computed elsewhere.
    void set_baseline(double base) {
        require(!base_, "monitor: baseline already established");
        if (!(std::abs(base) >= kDegenerateBaseline))
            throw Error(ErrorCode::degenerate, "monitor: degenerate baseline " + std::to_string(base));
        base_ = base;
    }

    /// Folds one epoch's validation sim_neg into the EMA and tests delta > theta.
    /// Once stopped, later calls return true and leave the EMA untouched.
    bool should_stop(double sim_neg_curr) {
        if (!base_) throw Error(ErrorCode::invalid_argument, "monitor: baseline missing");
        if (stopped_at_) return true;
        ema_ = ema_update(ema_, sim_neg_curr);
        last_delta_ = relative_change(*base_, *ema_.value());
        ++calls_;
        if (*last_delta_ > theta_) {
            stopped_at_ = calls_;
            return true;
        }
        return false;
    }

    /// should_stop plus bookkeeping of gap, rho and delta. Epochs are 1-based
    /// and must be observed in order, so stopped_at is the triggering epoch.
    MonitorRecord observe(std::int32_t epoch, double gap, double sim_neg_curr) {
        require(stopped_at_ || epoch == calls_ + 1, "monitor: epochs must be observed in order from 1");
        const bool stop = should_stop(sim_neg_curr);
        MonitorRecord rec;
        rec.epoch = epoch;
        rec.gap = gap;
        if (!history_.empty()) rec.rho = gap - history_.back().gap;
        rec.delta = last_delta_.value_or(0.0);
        rec.stopped = stop;
        history_.push_back(rec);
        return rec;
    }

    [[nodiscard]] double theta() const noexcept { return theta_; }
    [[nodiscard]] std::optional<double> baseline() const noexcept { return base_; }
    [[nodiscard]] std::optional<double> smoothed() const { return ema_.value(); }
    [[nodiscard]] std::optional<double> last_delta() const noexcept { return last_delta_; }
    [[nodiscard]] std::optional<std::int32_t> stopped_at() const noexcept { return stopped_at_; }
    [[nodiscard]] const std::vector<MonitorRecord>& history() const noexcept { return history_; }

private:
    double theta_;
    EmaState ema_;
    std::optional<double> base_;
    std::optional<double> last_delta_;
    std::optional<std::int32_t> stopped_at_;  ///< 1-based index of the triggering should_stop call
    std::int32_t calls_ = 0;
    std::vector<MonitorRecord> history_;
};

}  // namespace gapalign
