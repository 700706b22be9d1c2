#pragma once

// Alignment training: AdamW with a cosine schedule on the contrastive
// objective, per-epoch gap metrics, validation accuracy and the monitor.

#include "gapalign/core.hpp"
#include "gapalign/encoder.hpp"
#include "gapalign/gapmetrics.hpp"
#include "gapalign/graphdata.hpp"
#include "gapalign/monitor.hpp"
#include "gapalign/objectives.hpp"
#include "gapalign/text_io.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gapalign {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

struct AdamState {
    EncoderParams m;
    EncoderParams v;
    std::int64_t step = 0;
};

inline AdamState make_adam_state(const EncoderParams& p) {
    AdamState s;
    s.m = {Matrix::Zero(p.W1.rows(), p.W1.cols()), Matrix::Zero(p.W2.rows(), p.W2.cols()),
           Matrix::Zero(p.P.rows(), p.P.cols())};
    s.v = s.m;
    return s;
}

/// One decoupled-weight-decay Adam update of a single tensor; `step` is the
/// 1-based step count used for bias correction.
inline void adamw_update(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, std::int64_t step, double lr,
                         const AdamWConfig& cfg) {
    require(param.rows() == grad.rows() && param.cols() == grad.cols() && m.rows() == param.rows() &&
                m.cols() == param.cols() && v.rows() == param.rows() && v.cols() == param.cols(),
            "adamw: shape mismatch (param " + shape_str(param) + ", grad " + shape_str(grad) + ")");
    require(step >= 1, "adamw: step must be >= 1");
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (Eigen::Index k = 0; k < param.size(); ++k) {
        const double g = grad.data()[k];
        double& mk = m.data()[k];
        double& vk = v.data()[k];
        mk = cfg.beta1 * mk + (1.0 - cfg.beta1) * g;
        vk = cfg.beta2 * vk + (1.0 - cfg.beta2) * g * g;
        double& p = param.data()[k];
        p *= 1.0 - lr * cfg.weight_decay;
        p -= lr * (mk / bc1) / (std::sqrt(vk / bc2) + cfg.eps);
    }
}

inline void adamw_step(EncoderParams& params, const EncoderGrads& grads, AdamState& state, double lr_t,
                       const AdamWConfig& cfg = {}) {
    ++state.step;
    adamw_update(params.W1, grads.W1, state.m.W1, state.v.W1, state.step, lr_t, cfg);
    adamw_update(params.W2, grads.W2, state.m.W2, state.v.W2, state.step, lr_t, cfg);
    adamw_update(params.P, grads.P, state.m.P, state.v.P, state.step, lr_t, cfg);
}

inline double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr0) {
    require(total_steps > 0 && step >= 0 && step <= total_steps, "cosine_lr: step outside [0, total]");
    return lr0 * 0.5 *
           (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps)));
}

enum class LrSchedule { cosine, constant };

struct TrainConfig {
    double lr = 1e-4;
    std::int32_t epochs = 140;
    std::int32_t batch_size = 256;  ///< full batch when the training set is no larger
    double tau = 0.2;
    double theta = 0.10;
    double ema_decay = 0.9;
    bool monitor_enabled = true;
    bool degree_weights = false;
    std::int32_t hidden = 64;
    std::uint64_t seed = 0;
    LrSchedule schedule = LrSchedule::cosine;
    AdamWConfig adamw;
};

inline void validate(const TrainConfig& c) {
    require(c.lr > 0.0 && std::isfinite(c.lr), "train: lr must be > 0");
    require(c.epochs >= 1, "train: epochs must be >= 1");
    require(c.batch_size >= 1, "train: batch size must be >= 1");
    require(c.tau > 0.0 && std::isfinite(c.tau), "train: tau must be > 0");
    require(c.theta > 0.0 && std::isfinite(c.theta), "train: theta must be > 0");
    require(c.ema_decay > 0.0 && c.ema_decay < 1.0, "train: ema_decay must lie in (0,1)");
    require(c.hidden >= 1, "train: hidden width must be >= 1");
    require(c.adamw.weight_decay >= 0.0, "train: weight decay must be >= 0");
}

struct EpochRecord {
    GapReport report;  ///< over all nodes
    double loss = 0.0;  ///< mean training loss over the epoch's batches
    std::optional<double> val_acc;
    std::optional<double> val_sim_neg;
    std::optional<double> delta;
    std::optional<double> rho;
    bool stopped = false;
};

struct RunArtifacts {
    EncoderParams final_params;
    GapReport initial;  ///< before any update (epoch 0)
    std::vector<EpochRecord> curves;
    std::optional<double> baseline;
    std::optional<std::int32_t> stopped_at;
    [[nodiscard]] std::optional<double> final_delta() const {
        return curves.empty() ? std::nullopt : curves.back().delta;
    }
};

/// argmax_j cos(h, t_j), ties toward the lowest class index.
inline ClassId nearest_prototype(const Matrix& t, const Eigen::Ref<const Eigen::RowVectorXd>& h) {
    ClassId best = 0;
    double best_sim = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < t.rows(); ++j) {
        const double s = cosine_rows(h, t.row(j));
        if (s > best_sim) {
            best_sim = s;
            best = static_cast<ClassId>(j);
        }
    }
    return best;
}

inline double zero_shot_accuracy(const Matrix& h, const Matrix& t, std::span<const NodeId> ids,
                                 std::span<const ClassId> labels) {
    require(!ids.empty(), "zero_shot_accuracy: empty node set");
    std::size_t hits = 0;
    for (NodeId i : ids)
        hits += nearest_prototype(t, h.row(i)) == labels[static_cast<std::size_t>(i)] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(ids.size());
}

inline Matrix gather_rows(const Matrix& m, std::span<const NodeId> ids) {
    Matrix out(static_cast<Eigen::Index>(ids.size()), m.cols());
    for (std::size_t k = 0; k < ids.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(ids[k]);
    return out;
}

inline std::vector<ClassId> gather_labels(std::span<const ClassId> labels, std::span<const NodeId> ids) {
    std::vector<ClassId> out;
    out.reserve(ids.size());
    for (NodeId i : ids) out.push_back(labels[static_cast<std::size_t>(i)]);
    return out;
}

/// Trains the encoder on the labelled split with the contrastive objective.
/// An empty training split skips optimisation and returns the initialised
/// encoder with no curve rows. With the monitor enabled the validation
/// baseline is taken before the first update; a degenerate baseline aborts.
inline RunArtifacts run_training(const TagGraph& g, const SplitSpec& split, const TrainConfig& cfg,
                                 const std::optional<EncoderParams>& init = std::nullopt) {
    validate(g, false);
    validate(cfg);
    for (const auto* ids : {&split.train_ids, &split.val_ids, &split.test_ids})
        for (NodeId i : *ids) require(i >= 0 && i < g.n_nodes, "train: split node id out of range");

    RunArtifacts art;
    const Matrix protos = normalize_rows(g.text_protos);
    const auto adj = normalize_adjacency(g);
    art.final_params = init ? *init : init_params(g.dim, cfg.hidden, g.dim, cfg.seed);
    require(art.final_params.in_dim() == g.dim && art.final_params.out_dim() == g.dim,
            "train: encoder dimensions do not match the dataset");
    auto& params = art.final_params;

    std::optional<std::vector<double>> weights;
    if (cfg.degree_weights) weights = degree_weights(g);
    auto report_of = [&](const Matrix& h) {
        return weights ? gap_report(h, protos, g.labels, std::span<const double>(*weights))
                       : gap_report(h, protos, g.labels);
    };

    const std::vector<ClassId> y_val = gather_labels(g.labels, split.val_ids);
    Matrix h = encode(params, adj, g.features);
    art.initial = report_of(h);
    art.initial.epoch = 0;

    std::optional<GapMonitor> monitor;
    if (cfg.monitor_enabled) {
        monitor.emplace(cfg.theta, cfg.ema_decay);
        art.baseline = monitor->establish_baseline(gather_rows(h, split.val_ids), protos, y_val);
    }
    if (split.train_ids.empty()) return art;

    const auto n_train = static_cast<std::int64_t>(split.train_ids.size());
    const std::int64_t batch = std::min<std::int64_t>(cfg.batch_size, n_train);
    const std::int64_t steps_per_epoch = (n_train + batch - 1) / batch;
    const std::int64_t total_steps = steps_per_epoch * cfg.epochs;
    Rng shuffle_rng(cfg.seed ^ 0x5bd1e995ULL);
    AdamState opt = make_adam_state(params);
    std::vector<NodeId> order = split.train_ids;
    std::int64_t step = 0;

    for (std::int32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (n_train > batch) shuffle_rng.shuffle(std::span<NodeId>(order));
        CompensatedSum loss_sum;
        for (std::int64_t start = 0; start < n_train; start += batch) {
            const auto stop = std::min(start + batch, n_train);
            const std::span<const NodeId> ids(order.data() + start, static_cast<std::size_t>(stop - start));
            const double lr_t =
                cfg.schedule == LrSchedule::cosine ? cosine_lr(step, total_steps, cfg.lr) : cfg.lr;

            const auto fwd = encode_forward(params, adj, g.features);
            const auto y_batch = gather_labels(g.labels, ids);
            const auto ce = contrastive_loss_and_grad(gather_rows(fwd.h, ids), protos, y_batch, cfg.tau);
            Matrix upstream = Matrix::Zero(fwd.h.rows(), fwd.h.cols());
            for (std::size_t k = 0; k < ids.size(); ++k) upstream.row(ids[k]) = ce.grad.row(static_cast<Eigen::Index>(k));
            loss_sum.add(ce.loss.total * static_cast<double>(ids.size()));
            adamw_step(params, encode_backward(params, adj, fwd, upstream), opt, lr_t, cfg.adamw);
            ++step;
        }

        h = encode(params, adj, g.features);
        EpochRecord rec;
        rec.report = report_of(h);
        rec.report.epoch = epoch;
        rec.loss = loss_sum.value() / static_cast<double>(n_train);
        if (!split.val_ids.empty()) {
            const Matrix h_val = gather_rows(h, split.val_ids);
            rec.val_acc = zero_shot_accuracy(h, protos, split.val_ids, g.labels);
            rec.val_sim_neg = gap_report(h_val, protos, y_val).sim_neg;
        }
        if (monitor) {
            const auto m = monitor->observe(epoch, rec.report.gap, *rec.val_sim_neg);
            rec.delta = m.delta;
            rec.stopped = m.stopped;
        }
        if (!art.curves.empty()) rec.rho = rec.report.gap - art.curves.back().report.gap;
        art.curves.push_back(rec);
        if (rec.stopped) {
            art.stopped_at = epoch;
            break;
        }
    }
    return art;
}

// ---------------------------------------------------------------------------
// Curve files

inline constexpr const char* curves_csv_header =
    "epoch,sim_overall,sim_pos,sim_neg,gap,var_mean,loss,val_acc,val_sim_neg,delta,rho,stopped";

inline std::string curves_csv(const RunArtifacts& art) {
    auto opt = [](const std::optional<double>& v) { return v ? text::format_double(*v) : std::string(); };
    std::string out = std::string(curves_csv_header) + "\n";
    for (const auto& r : art.curves)
        out += gap_csv_row(r.report) + "," + text::format_double(r.loss) + "," + opt(r.val_acc) + "," +
               opt(r.val_sim_neg) + "," + opt(r.delta) + "," + opt(r.rho) + "," + (r.stopped ? "1" : "0") + "\n";
    return out;
}

inline std::string curves_jsonl(const RunArtifacts& art) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    std::string out;
    for (const auto& r : art.curves) {
        auto j = to_json(r.report);
        j["loss"] = r.loss;
        j["val_acc"] = opt(r.val_acc);
        j["val_sim_neg"] = opt(r.val_sim_neg);
        j["delta"] = opt(r.delta);
        j["rho"] = opt(r.rho);
        j["stopped"] = r.stopped;
        out += j.dump() + "\n";
    }
    return out;
}

}  // namespace gapalign
