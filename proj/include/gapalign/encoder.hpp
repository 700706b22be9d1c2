#pragma once

// Two-layer GCN encoder with a linear projection head:
//
//     H = rownorm( A_hat * relu(A_hat * X * W1) * W2 * P )
//
// with A_hat = D^-1/2 (A + I) D^-1/2. Gradients are analytic, including the
// Jacobian of the row normalization.
//
// All products are evaluated row by row with a fixed summation order, and
// neighbor sums run in an order determined by the summed values themselves,
// so relabelling nodes permutes the output bit-for-bit.

#include "gapalign/core.hpp"
#include "gapalign/graphdata.hpp"
#include "gapalign/text_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

namespace gapalign {

struct AdjEntry {
    NodeId col;
    double weight;
};

/// Sparse symmetric normalized adjacency with self-loops, one row per node.
struct NormAdjacency {
    std::vector<std::vector<AdjEntry>> rows;

    [[nodiscard]] std::int32_t size() const { return static_cast<std::int32_t>(rows.size()); }

    [[nodiscard]] Matrix dense() const {
        Matrix m = Matrix::Zero(size(), size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (const auto& e : rows[i]) m(static_cast<Eigen::Index>(i), e.col) = e.weight;
        return m;
    }
};

inline NormAdjacency normalize_adjacency(const TagGraph& g) {
    const auto deg = g.degrees();
    const auto nb = g.neighbors();
    NormAdjacency adj;
    adj.rows.resize(static_cast<std::size_t>(g.n_nodes));
    for (NodeId i = 0; i < g.n_nodes; ++i) {
        const auto di = static_cast<double>(deg[static_cast<std::size_t>(i)] + 1);
        auto& row = adj.rows[static_cast<std::size_t>(i)];
        row.reserve(nb[static_cast<std::size_t>(i)].size() + 1);
        bool self_done = false;
        for (NodeId j : nb[static_cast<std::size_t>(i)]) {
            if (!self_done && j > i) {
                row.push_back({i, 1.0 / di});
                self_done = true;
            }
            const auto dj = static_cast<double>(deg[static_cast<std::size_t>(j)] + 1);
            row.push_back({j, 1.0 / std::sqrt(di * dj)});
        }
        if (!self_done) row.push_back({i, 1.0 / di});
    }
    return adj;
}

struct EncoderParams {
    Matrix W1;  ///< d x d_h
    Matrix W2;  ///< d_h x d_h
    Matrix P;   ///< d_h x d_out

    [[nodiscard]] Eigen::Index in_dim() const { return W1.rows(); }
    [[nodiscard]] Eigen::Index hidden_dim() const { return W1.cols(); }
    [[nodiscard]] Eigen::Index out_dim() const { return P.cols(); }

    friend bool operator==(const EncoderParams& a, const EncoderParams& b) {
        auto same = [](const Matrix& x, const Matrix& y) {
            return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
        };
        return same(a.W1, b.W1) && same(a.W2, b.W2) && same(a.P, b.P);
    }
};

/// Gradients share the parameter layout.
using EncoderGrads = EncoderParams;

inline void validate(const EncoderParams& p) {
    require(p.W1.rows() > 0 && p.W1.cols() > 0 && p.P.cols() > 0, "encoder: empty parameter matrix");
    require(p.W2.rows() == p.W1.cols() && p.W2.cols() == p.W1.cols(),
            "encoder: W2 must be d_h x d_h, got " + shape_str(p.W2));
    require(p.P.rows() == p.W1.cols(), "encoder: P must have d_h rows, got " + shape_str(p.P));
    require(p.W1.allFinite() && p.W2.allFinite() && p.P.allFinite(), "encoder: non-finite parameter");
}

/// Xavier-uniform init, U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
inline double xavier_bound(Eigen::Index fan_in, Eigen::Index fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

inline EncoderParams init_params(std::int32_t d, std::int32_t d_h, std::int32_t d_out, std::uint64_t seed) {
    require(d > 0 && d_h > 0 && d_out > 0, "init_params: dimensions must be positive");
    Rng rng(seed);
    auto draw = [&](std::int32_t rows, std::int32_t cols) {
        const double a = xavier_bound(rows, cols);
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-a, a);
        return m;
    };
    EncoderParams p;
    p.W1 = draw(d, d_h);
    p.W2 = draw(d_h, d_h);
    p.P = draw(d_h, d_out);
    return p;
}

namespace detail {

/// out = a * b with a fixed k-order per entry.
inline Matrix rowwise_product(const Matrix& a, const Matrix& b) {
    Matrix out = Matrix::Zero(a.rows(), b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        double* o = out.row(i).data();
        for (Eigen::Index k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            const double* brow = b.row(k).data();
            for (Eigen::Index j = 0; j < b.cols(); ++j) o[j] += aik * brow[j];
        }
    }
    return out;
}

/// out = a^T * b accumulated over rows of a and b in increasing index order.
inline Matrix transposed_product(const Matrix& a, const Matrix& b) {
    Matrix out = Matrix::Zero(a.cols(), b.cols());
    for (Eigen::Index r = 0; r < a.rows(); ++r)
        for (Eigen::Index i = 0; i < a.cols(); ++i) {
            const double ari = a(r, i);
            if (ari == 0.0) continue;
            double* o = out.row(i).data();
            const double* brow = b.row(r).data();
            for (Eigen::Index j = 0; j < b.cols(); ++j) o[j] += ari * brow[j];
        }
    return out;
}

/// out = A_hat * y. Each row's terms are summed in (weight, source-row)
/// lexicographic order, which does not depend on node labels.
inline Matrix aggregate(const NormAdjacency& adj, const Matrix& y) {
    Matrix out = Matrix::Zero(y.rows(), y.cols());
    const auto cols = y.cols();
    std::vector<AdjEntry> order;
    for (std::size_t i = 0; i < adj.rows.size(); ++i) {
        order = adj.rows[i];
        std::sort(order.begin(), order.end(), [&](const AdjEntry& a, const AdjEntry& b) {
            if (a.weight != b.weight) return a.weight < b.weight;
            const double* ra = y.row(a.col).data();
            const double* rb = y.row(b.col).data();
            return std::lexicographical_compare(ra, ra + cols, rb, rb + cols);
        });
        double* o = out.row(static_cast<Eigen::Index>(i)).data();
        for (const auto& e : order) {
            const double* src = y.row(e.col).data();
            for (Eigen::Index k = 0; k < cols; ++k) o[k] += e.weight * src[k];
        }
    }
    return out;
}

/// Scalar, left-to-right L2 norm so the result is independent of row alignment.
inline double row_norm(const Matrix& m, Eigen::Index i) {
    const double* r = m.row(i).data();
    double s = 0.0;
    for (Eigen::Index k = 0; k < m.cols(); ++k) s += r[k] * r[k];
    return std::sqrt(s);
}

}  // namespace detail

/// Intermediate activations of one forward pass.
struct EncoderForward {
    Matrix ax;     ///< A_hat X
    Matrix z1;     ///< A_hat X W1
    Matrix r;      ///< relu(z1)
    Matrix ar;     ///< A_hat r
    Matrix z2;     ///< A_hat r W2
    Matrix m;      ///< z2 P (pre-normalization output)
    Vector norms;  ///< row norms of m
    Matrix h;      ///< rownorm(m)
};

inline EncoderForward encode_forward(const EncoderParams& params, const NormAdjacency& adj, const Matrix& x) {
    validate(params);
    require(x.rows() == adj.size(), "encode: X has " + std::to_string(x.rows()) + " rows, adjacency has " +
                                        std::to_string(adj.size()));
    require(x.cols() == params.in_dim(),
            "encode: X has " + std::to_string(x.cols()) + " columns, W1 expects " + std::to_string(params.in_dim()));
    EncoderForward f;
    f.ax = detail::aggregate(adj, x);
    f.z1 = detail::rowwise_product(f.ax, params.W1);
    f.r = f.z1.cwiseMax(0.0);
    f.ar = detail::aggregate(adj, f.r);
    f.z2 = detail::rowwise_product(f.ar, params.W2);
    f.m = detail::rowwise_product(f.z2, params.P);
    f.norms.resize(f.m.rows());
    f.h = f.m;
    for (Eigen::Index i = 0; i < f.m.rows(); ++i) {
        const double n = detail::row_norm(f.m, i);
        f.norms(i) = n;
        if (n > 0.0)
            f.h.row(i) /= n;
        else
            f.h.row(i).setZero();
    }
    return f;
}

/// Unit-norm (or zero) node representations.
inline Matrix encode(const EncoderParams& params, const NormAdjacency& adj, const Matrix& x) {
    return encode_forward(params, adj, x).h;
}

/// Gradient of <upstream, encode(params, adj, x)> with respect to W1, W2, P,
/// reusing the activations of a forward pass at the same parameters.
/// Zero-norm rows contribute nothing; relu'(0) = 0.
inline EncoderGrads encode_backward(const EncoderParams& params, const NormAdjacency& adj, const EncoderForward& f,
                                    const Matrix& upstream) {
    require(upstream.rows() == f.h.rows() && upstream.cols() == f.h.cols(),
            "encode_backward: upstream shape " + shape_str(upstream) + " != output shape " + shape_str(f.h));

    // d h / d m = (I - h h^T) / |m|
    Matrix dm = Matrix::Zero(f.m.rows(), f.m.cols());
    for (Eigen::Index i = 0; i < f.m.rows(); ++i) {
        if (f.norms(i) <= 0.0) continue;
        const double proj = upstream.row(i).dot(f.h.row(i));
        dm.row(i) = (upstream.row(i) - proj * f.h.row(i)) / f.norms(i);
    }

    EncoderGrads g;
    g.P = detail::transposed_product(f.z2, dm);
    const Matrix dz2 = detail::rowwise_product(dm, params.P.transpose());
    g.W2 = detail::transposed_product(f.ar, dz2);
    const Matrix dar = detail::rowwise_product(dz2, params.W2.transpose());
    Matrix dz1 = detail::aggregate(adj, dar);  // A_hat is symmetric
    for (Eigen::Index i = 0; i < dz1.rows(); ++i)
        for (Eigen::Index j = 0; j < dz1.cols(); ++j)
            if (f.z1(i, j) <= 0.0) dz1(i, j) = 0.0;
    g.W1 = detail::transposed_product(f.ax, dz1);
    return g;
}

inline EncoderGrads encode_backward(const EncoderParams& params, const NormAdjacency& adj, const Matrix& x,
                                    const Matrix& upstream) {
    return encode_backward(params, adj, encode_forward(params, adj, x), upstream);
}

// ---------------------------------------------------------------------------
// Checkpoint: params.json

namespace detail {
inline std::string matrix_json(const Matrix& m) {
    std::string s = "{\"rows\": " + std::to_string(m.rows()) + ", \"cols\": " + std::to_string(m.cols()) +
                    ", \"data\": [";
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        if (i) s += ", ";
        s += text::format_double17(m.data()[i]);
    }
    return s + "]}";
}

inline Matrix matrix_from_json(const nlohmann::json& j, const char* name) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    require(rows >= 0 && cols >= 0 && static_cast<Eigen::Index>(data.size()) == rows * cols,
            std::string("params.json: ") + name + " data length does not match rows*cols", ErrorCode::data);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = data[static_cast<std::size_t>(i)].get<double>();
    return m;
}
}  // namespace detail

/// Row-major arrays with 17 significant digits so reload is exact.
inline std::string params_to_json(const EncoderParams& p) {
    std::string s = "{\n";
    s += "  \"format\": \"gapalign-encoder-v1\",\n";
    s += "  \"d\": " + std::to_string(p.in_dim()) + ",\n";
    s += "  \"d_h\": " + std::to_string(p.hidden_dim()) + ",\n";
    s += "  \"d_out\": " + std::to_string(p.out_dim()) + ",\n";
    s += "  \"W1\": " + detail::matrix_json(p.W1) + ",\n";
    s += "  \"W2\": " + detail::matrix_json(p.W2) + ",\n";
    s += "  \"P\": " + detail::matrix_json(p.P) + "\n";
    return s + "}\n";
}

inline EncoderParams params_from_json(const std::string& content) {
    try {
        const auto j = nlohmann::json::parse(content);
        EncoderParams p;
        p.W1 = detail::matrix_from_json(j.at("W1"), "W1");
        p.W2 = detail::matrix_from_json(j.at("W2"), "W2");
        p.P = detail::matrix_from_json(j.at("P"), "P");
        require(j.at("d").get<Eigen::Index>() == p.in_dim() && j.at("d_h").get<Eigen::Index>() == p.hidden_dim() &&
                    j.at("d_out").get<Eigen::Index>() == p.out_dim(),
                "params.json: shape metadata disagrees with arrays", ErrorCode::data);
        validate(p);
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::data, std::string("params.json: ") + e.what());
    }
}

inline void save_params(const EncoderParams& p, const std::filesystem::path& path) {
    text::write_file(path, params_to_json(p));
}

inline EncoderParams load_params(const std::filesystem::path& path) {
    return params_from_json(text::read_file(path));
}

}  // namespace gapalign
