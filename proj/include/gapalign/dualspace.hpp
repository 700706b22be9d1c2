#pragma once

// Graph-space compensating classifier and dual-space fused prediction:
//
//     P(y | h) = softmax( cos(h, T) + lambda * (Wg^T h + b) )
//
// The classifier is a linear softmax probe fitted on frozen encoder outputs.

#include "gapalign/core.hpp"
#include "gapalign/encoder.hpp"
#include "gapalign/gapmetrics.hpp"
#include "gapalign/graphdata.hpp"
#include "gapalign/objectives.hpp"
#include "gapalign/text_io.hpp"
#include "gapalign/trainer.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace gapalign {

struct GraphClassifier {
    Matrix Wg;    ///< d x C
    Vector bias;  ///< C
};

struct FusionModel {
    Matrix T;  ///< C x d prototypes
    GraphClassifier clf;
    double lambda = 0.8;
};

inline void validate(const FusionModel& m) {
    require(m.T.rows() >= 1, "fusion: empty prototype matrix");
    require(m.clf.Wg.rows() == m.T.cols() && m.clf.Wg.cols() == m.T.rows() && m.clf.bias.size() == m.T.rows(),
            "fusion: classifier is " + shape_str(m.clf.Wg) + " but prototypes are " + shape_str(m.T));
    require(m.lambda >= 0.0 && std::isfinite(m.lambda), "fusion: lambda must be >= 0");
}

inline GraphClassifier zero_classifier(Eigen::Index dim, Eigen::Index n_classes) {
    return {Matrix::Zero(dim, n_classes), Vector::Zero(n_classes)};
}

inline Matrix probe_logits(const GraphClassifier& clf, const Matrix& h) {
    Matrix z = h * clf.Wg;
    z.rowwise() += clf.bias.transpose();
    return z;
}

struct ProbeEval {
    LossValue loss;
    GraphClassifier grad;
};

/// Mean softmax cross-entropy of the probe and its gradient in (Wg, bias).
inline ProbeEval probe_loss_and_grad(const GraphClassifier& clf, const Matrix& h, std::span<const ClassId> y) {
    require(h.cols() == clf.Wg.rows(), "probe: H dim does not match Wg rows");
    auto ce = cross_entropy(probe_logits(clf, h), y);
    ProbeEval out;
    out.loss = std::move(ce.loss);
    out.grad.Wg = h.transpose() * ce.grad;
    out.grad.bias = ce.grad.colwise().sum().transpose();
    return out;
}

/// Full-batch gradient descent on the probe's cross-entropy from zero init.
inline GraphClassifier train_graph_classifier(const Matrix& h_train, std::span<const ClassId> y_train,
                                              std::int32_t n_classes, std::int32_t iters = 500, double lr = 0.5) {
    require(h_train.rows() > 0, "probe: empty training set (zero-shot evaluation must not fit a probe)");
    require(n_classes >= 1, "probe: n_classes must be >= 1");
    require(iters >= 0, "probe: iters must be >= 0");
    require(lr > 0.0 && std::isfinite(lr), "probe: lr must be > 0");
    require(static_cast<Eigen::Index>(y_train.size()) == h_train.rows(), "probe: label count != rows");
    const std::set<ClassId> present(y_train.begin(), y_train.end());
    if (present.size() < 2)
        throw Error(ErrorCode::degenerate, "probe: training set contains a single class");

    auto clf = zero_classifier(h_train.cols(), n_classes);
    for (std::int32_t it = 0; it < iters; ++it) {
        const auto pe = probe_loss_and_grad(clf, h_train, y_train);
        clf.Wg -= lr * pe.grad.Wg;
        clf.bias -= lr * pe.grad.bias;
    }
    return clf;
}

/// Fused class logits for one representation.
inline Vector fused_logits(const FusionModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& h) {
    const auto c = model.T.rows();
    Vector z(c);
    const Vector probe = (h * model.clf.Wg).transpose() + model.clf.bias;
    for (Eigen::Index j = 0; j < c; ++j) z(j) = cosine_rows(h, model.T.row(j)) + model.lambda * probe(j);
    return z;
}

inline Vector softmax(const Vector& z) {
    const double mx = z.maxCoeff();
    Vector p = (z.array() - mx).exp();
    return p / p.sum();
}

inline Vector fuse_predict(const FusionModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& h) {
    validate(model);
    require(h.size() == model.T.cols(), "fuse_predict: dimension mismatch");
    return softmax(fused_logits(model, h));
}

enum class EvalMode { zero_shot, fused };

inline const char* to_string(EvalMode m) { return m == EvalMode::zero_shot ? "zero_shot" : "fused"; }

inline EvalMode parse_eval_mode(const std::string& s) {
    if (s == "zero_shot") return EvalMode::zero_shot;
    if (s == "fused") return EvalMode::fused;
    throw Error(ErrorCode::invalid_argument, "unknown evaluation mode '" + s + "'");
}

struct EvalResult {
    double accuracy = 0.0;
    std::vector<std::optional<double>> per_class;  ///< absent for classes missing from the test set
};

inline ClassId argmax_lowest(const Vector& z) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < z.size(); ++j)
        if (z(j) > z(best)) best = j;
    return static_cast<ClassId>(best);
}

/// Accuracy on a held-out set; argmax ties go to the lowest class index.
inline EvalResult evaluate(const FusionModel& model, const Matrix& h_test, std::span<const ClassId> y_test,
                           EvalMode mode) {
    require(h_test.rows() > 0, "evaluate: empty test set");
    require(static_cast<Eigen::Index>(y_test.size()) == h_test.rows(), "evaluate: label count != rows");
    if (mode == EvalMode::fused) validate(model);
    const auto c = model.T.rows();
    std::vector<std::size_t> hits(static_cast<std::size_t>(c), 0), totals(static_cast<std::size_t>(c), 0);
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < h_test.rows(); ++i) {
        const ClassId pred =
            mode == EvalMode::zero_shot ? nearest_prototype(model.T, h_test.row(i)) : argmax_lowest(fused_logits(model, h_test.row(i)));
        const auto yi = static_cast<std::size_t>(y_test[static_cast<std::size_t>(i)]);
        require(yi < static_cast<std::size_t>(c), "evaluate: label out of range");
        ++totals[yi];
        if (pred == static_cast<ClassId>(yi)) {
            ++hits[yi];
            ++correct;
        }
    }
    EvalResult r;
    r.accuracy = static_cast<double>(correct) / static_cast<double>(h_test.rows());
    r.per_class.resize(static_cast<std::size_t>(c));
    for (std::size_t j = 0; j < r.per_class.size(); ++j)
        if (totals[j] > 0) r.per_class[j] = static_cast<double>(hits[j]) / static_cast<double>(totals[j]);
    return r;
}

// ---------------------------------------------------------------------------
// Multi-seed harness

struct EvalOptions {
    std::string dataset = "dataset";
    std::optional<std::int32_t> shots;
    double val_frac = 0.1;
    double lambda = 0.8;
    std::int32_t probe_iters = 500;
    double probe_lr = 0.5;
    std::vector<EvalMode> modes;  ///< empty = fused with shots, zero_shot without
};

struct ResultRow {
    std::string dataset;
    EvalMode mode = EvalMode::zero_shot;
    std::uint64_t seed = 0;
    std::optional<std::int32_t> shots;
    double accuracy = 0.0;
};

struct SummaryRow {
    std::string dataset;
    EvalMode mode = EvalMode::zero_shot;
    std::optional<std::int32_t> shots;
    double mean = 0.0;
    double std = 0.0;  ///< population standard deviation
    std::size_t n_seeds = 0;
};

inline std::vector<EvalMode> resolve_modes(const EvalOptions& opt) {
    if (!opt.modes.empty()) return opt.modes;
    return {opt.shots ? EvalMode::fused : EvalMode::zero_shot};
}

/// Evaluates a frozen encoder on the split's test nodes in each requested mode.
inline std::vector<ResultRow> evaluate_split(const TagGraph& g, const SplitSpec& split, const EncoderParams& params,
                                             const EvalOptions& opt, std::uint64_t seed) {
    const auto adj = normalize_adjacency(g);
    const Matrix h = encode(params, adj, g.features);
    const Matrix h_test = gather_rows(h, split.test_ids);
    const auto y_test = gather_labels(g.labels, split.test_ids);

    FusionModel model{normalize_rows(g.text_protos), zero_classifier(g.dim, g.n_classes), opt.lambda};
    std::vector<ResultRow> rows;
    for (EvalMode mode : resolve_modes(opt)) {
        if (mode == EvalMode::fused) {
            require(!split.train_ids.empty(), "fused evaluation needs labelled training nodes (--shots)");
            model.clf = train_graph_classifier(gather_rows(h, split.train_ids),
                                               gather_labels(g.labels, split.train_ids), g.n_classes, opt.probe_iters,
                                               opt.probe_lr);
        }
        rows.push_back({opt.dataset, mode, seed, opt.shots, evaluate(model, h_test, y_test, mode).accuracy});
    }
    return rows;
}

inline std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
    std::vector<SummaryRow> out;
    for (EvalMode mode : {EvalMode::zero_shot, EvalMode::fused}) {
        std::vector<double> acc;
        const ResultRow* first = nullptr;
        for (const auto& r : rows)
            if (r.mode == mode) {
                acc.push_back(r.accuracy);
                if (!first) first = &r;
            }
        if (acc.empty()) continue;
        const double mean = compensated_mean(acc);
        std::vector<double> sq;
        for (double a : acc) sq.push_back((a - mean) * (a - mean));
        out.push_back({first->dataset, mode, first->shots, mean, std::sqrt(compensated_mean(sq)), acc.size()});
    }
    return out;
}

struct MultiSeedResult {
    std::vector<ResultRow> rows;
    std::vector<SummaryRow> summary;
    std::vector<RunArtifacts> runs;  ///< one per seed, in seed order
};

/// Split, train and evaluate once per seed, then aggregate.
inline MultiSeedResult multi_seed_eval(const TagGraph& g, TrainConfig cfg, std::span<const std::uint64_t> seeds,
                                       const EvalOptions& opt) {
    require(!seeds.empty(), "multi_seed_eval: no seeds");
    MultiSeedResult out;
    for (auto seed : seeds) {
        const auto split = make_split(g, opt.shots, opt.val_frac, seed);
        cfg.seed = seed;
        auto art = run_training(g, split, cfg);
        auto rows = evaluate_split(g, split, art.final_params, opt, seed);
        out.rows.insert(out.rows.end(), rows.begin(), rows.end());
        out.runs.push_back(std::move(art));
    }
    out.summary = summarize(out.rows);
    return out;
}

inline constexpr const char* results_csv_header = "dataset,mode,seed,shots,accuracy";
inline constexpr const char* summary_csv_header = "dataset,mode,shots,mean,std,n_seeds";

inline std::string results_csv(const std::vector<ResultRow>& rows) {
    std::string s = std::string(results_csv_header) + "\n";
    for (const auto& r : rows)
        s += r.dataset + "," + to_string(r.mode) + "," + std::to_string(r.seed) + "," +
             (r.shots ? std::to_string(*r.shots) : "0") + "," + text::format_double(r.accuracy) + "\n";
    return s;
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::string s = std::string(summary_csv_header) + "\n";
    for (const auto& r : rows)
        s += r.dataset + "," + to_string(r.mode) + "," + (r.shots ? std::to_string(*r.shots) : "0") + "," +
             text::format_double(r.mean) + "," + text::format_double(r.std) + "," + std::to_string(r.n_seeds) + "\n";
    return s;
}

inline nlohmann::json to_json(const GraphClassifier& clf) {
    std::vector<double> w(clf.Wg.data(), clf.Wg.data() + clf.Wg.size());
    std::vector<double> b(clf.bias.data(), clf.bias.data() + clf.bias.size());
    return {{"rows", clf.Wg.rows()}, {"cols", clf.Wg.cols()}, {"Wg", w}, {"bias", b}};
}

}  // namespace gapalign
