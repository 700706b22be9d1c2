#pragma once

// Text-attributed graphs: validation, on-disk format, SBM synthesis,
// stratified zero-/few-shot splits and ego-subgraph sampling.

#include "gapalign/core.hpp"
#include "gapalign/text_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace gapalign {

using Edge = std::pair<NodeId, NodeId>;

/// Dataset: undirected graph, node features X (N x d), labels in [0, C)
/// and one text-prototype row per class (C x d).
struct TagGraph {
    std::int32_t n_nodes = 0;
    std::int32_t dim = 0;
    std::int32_t n_classes = 0;
    std::vector<Edge> edges;  ///< u < v, sorted, unique
    Matrix features;
    std::vector<ClassId> labels;
    Matrix text_protos;
    std::vector<std::string> class_names;  ///< optional, empty or size C

    friend bool operator==(const TagGraph& a, const TagGraph& b) {
        return a.n_nodes == b.n_nodes && a.dim == b.dim && a.n_classes == b.n_classes &&
               a.edges == b.edges && a.labels == b.labels && a.class_names == b.class_names &&
               a.features.rows() == b.features.rows() && a.features.cols() == b.features.cols() &&
               a.features == b.features && a.text_protos.rows() == b.text_protos.rows() &&
               a.text_protos.cols() == b.text_protos.cols() && a.text_protos == b.text_protos;
    }

    [[nodiscard]] std::vector<std::int32_t> degrees() const {
        std::vector<std::int32_t> deg(static_cast<std::size_t>(n_nodes), 0);
        for (const auto& [u, v] : edges) {
            ++deg[static_cast<std::size_t>(u)];
            ++deg[static_cast<std::size_t>(v)];
        }
        return deg;
    }

    [[nodiscard]] std::vector<std::vector<NodeId>> neighbors() const {
        std::vector<std::vector<NodeId>> nb(static_cast<std::size_t>(n_nodes));
        for (const auto& [u, v] : edges) {
            nb[static_cast<std::size_t>(u)].push_back(v);
            nb[static_cast<std::size_t>(v)].push_back(u);
        }
        for (auto& row : nb) std::sort(row.begin(), row.end());
        return nb;
    }

    /// Node ids per class, ascending.
    [[nodiscard]] std::vector<std::vector<NodeId>> class_members() const {
        std::vector<std::vector<NodeId>> out(static_cast<std::size_t>(n_classes));
        for (NodeId i = 0; i < n_nodes; ++i)
            out[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])].push_back(i);
        return out;
    }
};

/// Structural checks. `require_all_classes` is off for sampled subgraphs.
inline void validate(const TagGraph& g, bool require_all_classes = true) {
    constexpr auto bad = ErrorCode::data;
    require(g.n_nodes >= 0 && g.dim >= 1 && g.n_classes >= 1, "graph: non-positive dimensions", bad);
    require(g.features.rows() == g.n_nodes && g.features.cols() == g.dim,
            "graph: features shape " + shape_str(g.features) + " does not match N x d", bad);
    require(g.text_protos.rows() == g.n_classes && g.text_protos.cols() == g.dim,
            "graph: text_protos shape " + shape_str(g.text_protos) + " does not match C x d", bad);
    require(static_cast<std::int32_t>(g.labels.size()) == g.n_nodes, "graph: label count != N", bad);
    require(g.features.allFinite() && g.text_protos.allFinite(), "graph: non-finite value", bad);
    require(g.class_names.empty() || static_cast<std::int32_t>(g.class_names.size()) == g.n_classes,
            "graph: class_names size != C", bad);
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
        const auto [u, v] = g.edges[k];
        require(u >= 0 && v < g.n_nodes && u < v, "graph: edge out of range or not normalized", bad);
        if (k > 0) require(g.edges[k - 1] < g.edges[k], "graph: edges unsorted or duplicated", bad);
    }
    std::vector<bool> seen(static_cast<std::size_t>(g.n_classes), false);
    for (auto c : g.labels) {
        require(c >= 0 && c < g.n_classes, "graph: label out of range", bad);
        seen[static_cast<std::size_t>(c)] = true;
    }
    if (require_all_classes)
        for (std::int32_t c = 0; c < g.n_classes; ++c)
            require(seen[static_cast<std::size_t>(c)], "graph: class " + std::to_string(c) + " has no nodes",
                    bad);
}

// ---------------------------------------------------------------------------
// On-disk format

namespace dataset_files {
inline constexpr const char* edges = "edges.tsv";
inline constexpr const char* features = "features.csv";
inline constexpr const char* labels = "labels.csv";
inline constexpr const char* protos = "text_protos.csv";
inline constexpr const char* meta = "meta.json";
}  // namespace dataset_files

/// Reads and validates a dataset directory. Errors name the file and line.
inline TagGraph load_graph(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    using text::data_error;
    for (const char* f : {dataset_files::edges, dataset_files::features, dataset_files::labels,
                          dataset_files::protos})
        if (!fs::exists(dir / f)) throw Error(ErrorCode::io, "missing dataset file " + (dir / f).string());

    TagGraph g;
    const auto feat_path = dir / dataset_files::features;
    const auto proto_path = dir / dataset_files::protos;
    g.features = text::read_real_csv(feat_path);
    g.text_protos = text::read_real_csv(proto_path);
    g.n_nodes = static_cast<std::int32_t>(g.features.rows());
    g.n_classes = static_cast<std::int32_t>(g.text_protos.rows());
    require(g.n_nodes > 0, "features.csv: no rows", ErrorCode::data);
    require(g.n_classes > 0, "text_protos.csv: no rows", ErrorCode::data);
    if (g.features.cols() != g.text_protos.cols())
        throw Error(ErrorCode::data, "dimension mismatch: features.csv has " +
                                         std::to_string(g.features.cols()) + " columns, text_protos.csv has " +
                                         std::to_string(g.text_protos.cols()));
    g.dim = static_cast<std::int32_t>(g.features.cols());

    const auto meta_path = dir / dataset_files::meta;
    if (fs::exists(meta_path)) {
        nlohmann::json meta;
        try {
            meta = nlohmann::json::parse(text::read_file(meta_path));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::data, "meta.json: " + std::string(e.what()));
        }
        auto check = [&](const char* key, std::int32_t actual) {
            if (!meta.contains(key)) throw Error(ErrorCode::data, std::string("meta.json: missing key ") + key);
            if (meta.at(key).get<std::int64_t>() != actual)
                throw Error(ErrorCode::data, std::string("meta.json: ") + key + "=" + meta.at(key).dump() +
                                                 " disagrees with data (" + std::to_string(actual) + ")");
        };
        check("n_nodes", g.n_nodes);
        check("dim", g.dim);
        check("n_classes", g.n_classes);
        if (meta.contains("class_names")) {
            g.class_names = meta.at("class_names").get<std::vector<std::string>>();
            require(static_cast<std::int32_t>(g.class_names.size()) == g.n_classes,
                    "meta.json: class_names has wrong length", ErrorCode::data);
        }
    }

    const auto label_path = dir / dataset_files::labels;
    g.labels.assign(static_cast<std::size_t>(g.n_nodes), -1);
    for (const auto& ln : text::read_content_lines(label_path)) {
        const auto f = text::split(ln.text, ",");
        std::int64_t node = 0, cls = 0;
        if (f.size() != 2 || !text::parse_int(f[0], node) || !text::parse_int(f[1], cls))
            throw data_error(label_path, ln.number, "expected 'node_id,class_id'");
        if (node < 0 || node >= g.n_nodes)
            throw data_error(label_path, ln.number, "node id " + std::to_string(node) + " out of range");
        if (cls < 0 || cls >= g.n_classes)
            throw data_error(label_path, ln.number,
                             "label out of range: class " + std::to_string(cls) + " with C=" +
                                 std::to_string(g.n_classes));
        auto& slot = g.labels[static_cast<std::size_t>(node)];
        if (slot != -1) throw data_error(label_path, ln.number, "node " + std::to_string(node) + " labelled twice");
        slot = static_cast<ClassId>(cls);
    }
    for (std::int32_t i = 0; i < g.n_nodes; ++i)
        if (g.labels[static_cast<std::size_t>(i)] < 0)
            throw Error(ErrorCode::data, "labels.csv: node " + std::to_string(i) + " has no label");

    const auto edge_path = dir / dataset_files::edges;
    std::set<Edge> directed;
    std::set<Edge> undirected;
    for (const auto& ln : text::read_content_lines(edge_path)) {
        const auto t = text::tokens(ln.text);
        std::int64_t u = 0, v = 0;
        if (t.size() != 2 || !text::parse_int(t[0], u) || !text::parse_int(t[1], v))
            throw data_error(edge_path, ln.number, "expected 'u<TAB>v'");
        if (u < 0 || v < 0 || u >= g.n_nodes || v >= g.n_nodes)
            throw data_error(edge_path, ln.number, "edge endpoint out of range");
        if (u == v) throw data_error(edge_path, ln.number, "self-loop");
        const Edge e{static_cast<NodeId>(u), static_cast<NodeId>(v)};
        if (!directed.insert(e).second)
            throw data_error(edge_path, ln.number,
                             "duplicate edge " + std::to_string(u) + " " + std::to_string(v));
        undirected.insert({std::min(e.first, e.second), std::max(e.first, e.second)});
    }
    g.edges.assign(undirected.begin(), undirected.end());

    validate(g);
    return g;
}

/// Inverse of load_graph: writes all five dataset files.
inline void save_graph(const TagGraph& g, const std::filesystem::path& dir) {
    validate(g, false);
    std::filesystem::create_directories(dir);
    std::string edges;
    for (const auto& [u, v] : g.edges) edges += std::to_string(u) + "\t" + std::to_string(v) + "\n";
    std::string labels;
    for (NodeId i = 0; i < g.n_nodes; ++i)
        labels += std::to_string(i) + "," + std::to_string(g.labels[static_cast<std::size_t>(i)]) + "\n";
    nlohmann::json meta = {{"n_nodes", g.n_nodes}, {"dim", g.dim}, {"n_classes", g.n_classes}};
    if (!g.class_names.empty()) meta["class_names"] = g.class_names;

    text::write_file(dir / dataset_files::edges, edges);
    text::write_file(dir / dataset_files::features, text::matrix_csv(g.features));
    text::write_file(dir / dataset_files::labels, labels);
    text::write_file(dir / dataset_files::protos, text::matrix_csv(g.text_protos));
    text::write_file(dir / dataset_files::meta, meta.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Stochastic block model

struct SbmConfig {
    std::int32_t nodes_per_class = 100;
    std::int32_t n_classes = 3;
    std::int32_t dim = 64;  ///< feature / prototype dimension, >= n_classes
    double p_intra = 0.8;
    double p_inter = 0.05;
    double feature_noise = 0.3;
    double proto_separation = 0.5;
    std::uint64_t seed = 0;
};

inline void validate(const SbmConfig& cfg) {
    require(cfg.nodes_per_class >= 1, "sbm: nodes_per_class must be >= 1");
    require(cfg.n_classes >= 1, "sbm: n_classes must be >= 1");
    require(cfg.dim >= cfg.n_classes, "sbm: dim must be >= n_classes");
    require(cfg.p_intra >= 0.0 && cfg.p_intra <= 1.0, "sbm: p_intra must lie in [0,1]");
    require(cfg.p_inter >= 0.0 && cfg.p_inter <= 1.0, "sbm: p_inter must lie in [0,1]");
    require(cfg.feature_noise >= 0.0 && std::isfinite(cfg.feature_noise), "sbm: feature_noise must be >= 0");
    require(cfg.proto_separation > 0.0 && std::isfinite(cfg.proto_separation),
            "sbm: proto_separation must be > 0");
}

/// Planted-partition graph. Class c occupies the node block
/// [c*n, (c+1)*n); its centroid is (s/sqrt 2) e_c so centroids are pairwise
/// distance s apart. Features are centroid + N(0, sigma^2) noise and the
/// prototypes are the centroids.
inline TagGraph synth_sbm(const SbmConfig& cfg) {
    validate(cfg);
    Rng rng(cfg.seed);
    TagGraph g;
    g.n_classes = cfg.n_classes;
    g.n_nodes = cfg.nodes_per_class * cfg.n_classes;
    g.dim = cfg.dim;
    g.labels.resize(static_cast<std::size_t>(g.n_nodes));
    for (NodeId i = 0; i < g.n_nodes; ++i) g.labels[static_cast<std::size_t>(i)] = i / cfg.nodes_per_class;

    g.text_protos = Matrix::Zero(cfg.n_classes, cfg.dim);
    const double scale = cfg.proto_separation / std::sqrt(2.0);
    for (std::int32_t c = 0; c < cfg.n_classes; ++c) g.text_protos(c, c) = scale;

    g.features.resize(g.n_nodes, g.dim);
    for (NodeId i = 0; i < g.n_nodes; ++i)
        for (std::int32_t k = 0; k < g.dim; ++k)
            g.features(i, k) = g.text_protos(g.labels[static_cast<std::size_t>(i)], k) +
                               (cfg.feature_noise > 0.0 ? cfg.feature_noise * rng.normal() : 0.0);

    for (NodeId u = 0; u < g.n_nodes; ++u)
        for (NodeId v = u + 1; v < g.n_nodes; ++v) {
            const bool same = g.labels[static_cast<std::size_t>(u)] == g.labels[static_cast<std::size_t>(v)];
            if (rng.uniform() < (same ? cfg.p_intra : cfg.p_inter)) g.edges.emplace_back(u, v);
        }
    validate(g);
    return g;
}

// ---------------------------------------------------------------------------
// Splits

struct SplitSpec {
    std::vector<NodeId> train_ids;
    std::vector<NodeId> val_ids;
    std::vector<NodeId> test_ids;
    std::optional<std::int32_t> shots;  ///< absent = zero-shot
};

/// Stratified split. With `shots = k` each class contributes min(k, |class|)
/// training nodes; without it the training set is empty. Per class,
/// round(val_frac * |class|) of the remaining nodes go to validation.
inline SplitSpec make_split(const TagGraph& g, std::optional<std::int32_t> shots, double val_frac,
                            std::uint64_t seed) {
    require(val_frac > 0.0 && val_frac < 1.0, "split: val_frac must lie in (0,1)");
    require(!shots || *shots >= 1, "split: shots must be >= 1");
    Rng rng(seed);
    SplitSpec s;
    s.shots = shots;
    auto members = g.class_members();
    for (std::size_t c = 0; c < members.size(); ++c) {
        auto& ids = members[c];
        require(!ids.empty(), "split: class " + std::to_string(c) + " has zero nodes", ErrorCode::data);
        rng.shuffle(std::span<NodeId>(ids));
        std::size_t pos = 0;
        if (shots) {
            const auto k = std::min(ids.size(), static_cast<std::size_t>(*shots));
            s.train_ids.insert(s.train_ids.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
            pos = k;
        }
        const auto remaining = ids.size() - pos;
        const auto n_val = std::min(
            remaining, static_cast<std::size_t>(std::lround(val_frac * static_cast<double>(ids.size()))));
        s.val_ids.insert(s.val_ids.end(), ids.begin() + static_cast<std::ptrdiff_t>(pos),
                         ids.begin() + static_cast<std::ptrdiff_t>(pos + n_val));
        s.test_ids.insert(s.test_ids.end(), ids.begin() + static_cast<std::ptrdiff_t>(pos + n_val), ids.end());
    }
    std::sort(s.train_ids.begin(), s.train_ids.end());
    std::sort(s.val_ids.begin(), s.val_ids.end());
    std::sort(s.test_ids.begin(), s.test_ids.end());
    return s;
}

// ---------------------------------------------------------------------------
// Ego subgraphs

struct EgoGraph {
    TagGraph graph;
    std::vector<NodeId> new_to_old;
    std::map<NodeId, NodeId> old_to_new;
};

/// Induced subgraph on every node within `hops` edges of `center`. New ids
/// follow ascending old ids; prototypes are carried over unchanged.
inline EgoGraph ego_subgraph(const TagGraph& g, NodeId center, std::int32_t hops) {
    require(center >= 0 && center < g.n_nodes, "ego_subgraph: center " + std::to_string(center) + " out of range");
    require(hops >= 0, "ego_subgraph: hops must be >= 0");
    const auto nb = g.neighbors();
    std::vector<std::int32_t> dist(static_cast<std::size_t>(g.n_nodes), -1);
    std::queue<NodeId> frontier;
    dist[static_cast<std::size_t>(center)] = 0;
    frontier.push(center);
    while (!frontier.empty()) {
        const NodeId u = frontier.front();
        frontier.pop();
        if (dist[static_cast<std::size_t>(u)] == hops) continue;
        for (NodeId v : nb[static_cast<std::size_t>(u)])
            if (dist[static_cast<std::size_t>(v)] < 0) {
                dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
                frontier.push(v);
            }
    }

    EgoGraph ego;
    for (NodeId i = 0; i < g.n_nodes; ++i)
        if (dist[static_cast<std::size_t>(i)] >= 0) {
            ego.old_to_new[i] = static_cast<NodeId>(ego.new_to_old.size());
            ego.new_to_old.push_back(i);
        }

    auto& sub = ego.graph;
    sub.n_nodes = static_cast<std::int32_t>(ego.new_to_old.size());
    sub.dim = g.dim;
    sub.n_classes = g.n_classes;
    sub.text_protos = g.text_protos;
    sub.class_names = g.class_names;
    sub.features.resize(sub.n_nodes, g.dim);
    sub.labels.resize(static_cast<std::size_t>(sub.n_nodes));
    for (NodeId k = 0; k < sub.n_nodes; ++k) {
        const NodeId old = ego.new_to_old[static_cast<std::size_t>(k)];
        sub.features.row(k) = g.features.row(old);
        sub.labels[static_cast<std::size_t>(k)] = g.labels[static_cast<std::size_t>(old)];
    }
    for (const auto& [u, v] : g.edges) {
        const auto iu = ego.old_to_new.find(u);
        const auto iv = ego.old_to_new.find(v);
        if (iu != ego.old_to_new.end() && iv != ego.old_to_new.end()) sub.edges.emplace_back(iu->second, iv->second);
    }
    std::sort(sub.edges.begin(), sub.edges.end());
    return ego;
}

}  // namespace gapalign
