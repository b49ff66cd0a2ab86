#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hulk/cluster_graph.hpp"
#include "hulk/errors.hpp"
#include "hulk/rng.hpp"

namespace hulk {

// Edge-feature map: e_vu = ReLU(W [lat ; x_u ; x_v] + b), one output per
// connected ordered pair. Latency is scaled by the graph's max latency.
struct EdgeEmbed {
    Eigen::MatrixXd w;  // edge_dim x (1 + 2*feature_dim)
    Eigen::MatrixXd b;  // edge_dim x 1
};

// Per-node aggregation of neighbor + edge features:
// h_v = ReLU( sum_{u in N(v)} W [x_v ; x_u ; e_vu] + b ).
// The bias is applied once per node, outside the neighbor sum, so isolated
// nodes come out as ReLU(b).
struct EdgePool {
    Eigen::MatrixXd w;  // hidden_dim x (2*feature_dim + edge_dim)
    Eigen::MatrixXd b;  // hidden_dim x 1
};

// Symmetric-normalized graph convolution with self-loops:
// z_v = sum_{u in N(v) ∪ {v}} (1/sqrt(dhat_u dhat_v)) W h_u + b, dhat = deg+1.
// Hidden layers apply ReLU; the final layer emits raw logits.
struct GcnLayer {
    Eigen::MatrixXd w;  // out_dim x in_dim
    Eigen::MatrixXd b;  // out_dim x 1
};

struct GnnConfig {
    int edge_dim = 16;
    int hidden_dim = 410;
    int gcn_layers = 2;
    int num_classes = 4;
    std::uint64_t seed = 0;
};

// A small planning config; criteria that train one model per fleet do not
// need the full-size network.
inline GnnConfig fast_gnn_config(int num_classes, std::uint64_t seed) {
    GnnConfig cfg;
    cfg.edge_dim = 8;
    cfg.hidden_dim = 64;
    cfg.num_classes = num_classes;
    cfg.seed = seed;
    return cfg;
}

struct GnnModel {
    int feature_dim = 0;
    int edge_dim = 0;
    int hidden_dim = 0;
    int num_classes = 0;
    std::uint64_t seed = 0;

    EdgeEmbed edge_embed;
    EdgePool edge_pool;
    std::vector<GcnLayer> gcn;

    std::vector<Eigen::MatrixXd*> tensors() {
        std::vector<Eigen::MatrixXd*> out = {&edge_embed.w, &edge_embed.b, &edge_pool.w,
                                             &edge_pool.b};
        for (auto& l : gcn) {
            out.push_back(&l.w);
            out.push_back(&l.b);
        }
        return out;
    }
    std::vector<const Eigen::MatrixXd*> tensors() const {
        std::vector<const Eigen::MatrixXd*> out = {&edge_embed.w, &edge_embed.b,
                                                   &edge_pool.w, &edge_pool.b};
        for (const auto& l : gcn) {
            out.push_back(&l.w);
            out.push_back(&l.b);
        }
        return out;
    }
};

inline long param_count(const GnnModel& m) {
    long n = 0;
    for (const auto* t : m.tensors()) n += t->size();
    return n;
}

// Flat parameter access in declaration order, row-major within each tensor.
// Shared by the checkpoint format and finite-difference tests.
inline double get_param(const GnnModel& m, long idx) {
    for (const auto* t : m.tensors()) {
        if (idx < t->size()) return (*t)(idx / t->cols(), idx % t->cols());
        idx -= t->size();
    }
    throw DomainError("parameter index out of range");
}

inline void set_param(GnnModel& m, long idx, double value) {
    for (auto* t : m.tensors()) {
        if (idx < t->size()) {
            (*t)(idx / t->cols(), idx % t->cols()) = value;
            return;
        }
        idx -= t->size();
    }
    throw DomainError("parameter index out of range");
}

namespace detail {

inline void glorot_fill(Eigen::MatrixXd& w, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (long i = 0; i < w.rows(); ++i)
        for (long j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-limit, limit);
}

}  // namespace detail

inline GnnModel make_model(int feature_dim, const GnnConfig& cfg) {
    if (feature_dim <= 0 || cfg.edge_dim <= 0 || cfg.hidden_dim <= 0 ||
        cfg.gcn_layers <= 0 || cfg.num_classes <= 0)
        throw DomainError("non-positive model dimension");
    GnnModel m;
    m.feature_dim = feature_dim;
    m.edge_dim = cfg.edge_dim;
    m.hidden_dim = cfg.hidden_dim;
    m.num_classes = cfg.num_classes;
    m.seed = cfg.seed;
    m.edge_embed.w = Eigen::MatrixXd::Zero(cfg.edge_dim, 1 + 2 * feature_dim);
    m.edge_embed.b = Eigen::MatrixXd::Zero(cfg.edge_dim, 1);
    m.edge_pool.w = Eigen::MatrixXd::Zero(cfg.hidden_dim, 2 * feature_dim + cfg.edge_dim);
    m.edge_pool.b = Eigen::MatrixXd::Zero(cfg.hidden_dim, 1);
    for (int l = 0; l < cfg.gcn_layers; ++l) {
        const int out = (l == cfg.gcn_layers - 1) ? cfg.num_classes : cfg.hidden_dim;
        GcnLayer layer;
        layer.w = Eigen::MatrixXd::Zero(out, cfg.hidden_dim);
        layer.b = Eigen::MatrixXd::Zero(out, 1);
        m.gcn.push_back(std::move(layer));
    }
    Rng rng(cfg.seed);
    detail::glorot_fill(m.edge_embed.w, rng);
    detail::glorot_fill(m.edge_pool.w, rng);
    for (auto& l : m.gcn) detail::glorot_fill(l.w, rng);
    return m;
}

// ---------------------------------------------------------------------------
// Forward pass

struct ForwardTrace {
    std::vector<std::pair<int, int>> pairs;  // ordered connected (v, u)
    double max_latency = 0.0;
    Eigen::MatrixXd zeta;  // (1+2F) x P edge inputs
    Eigen::MatrixXd q;     // E x P edge pre-activations
    Eigen::MatrixXd e;     // E x P edge features
    Eigen::MatrixXd xi;    // (2F+E) x P pool inputs
    Eigen::MatrixXd s;     // n x H pool pre-activation
    Eigen::MatrixXd h0;    // n x H pooled node features
    Eigen::MatrixXd ahat;  // n x n normalized adjacency with self-loops
    std::vector<Eigen::MatrixXd> z;  // per GCN layer pre-activation
    std::vector<Eigen::MatrixXd> h;  // per GCN layer output

    const Eigen::MatrixXd& logits() const { return h.back(); }
};

inline Eigen::MatrixXd normalized_adjacency(const ClusterGraph& g) {
    const int n = g.size();
    Eigen::VectorXd dhat(n);
    for (int i = 0; i < n; ++i) dhat(i) = g.degree(i) + 1.0;
    Eigen::MatrixXd ahat = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        ahat(i, i) = 1.0 / dhat(i);
        for (int j = 0; j < n; ++j)
            if (g.connected(i, j)) ahat(i, j) = 1.0 / std::sqrt(dhat(i) * dhat(j));
    }
    return ahat;
}

inline ForwardTrace forward(const GnnModel& m, const ClusterGraph& g,
                            const Eigen::MatrixXd& x) {
    const int n = g.size();
    const int f = m.feature_dim;
    if (x.rows() != n || x.cols() != f)
        throw DomainError("feature matrix does not match model dimensions");
    ForwardTrace t;
    t.max_latency = g.max_latency();
    for (int v = 0; v < n; ++v)
        for (int u = 0; u < n; ++u)
            if (g.connected(v, u)) t.pairs.emplace_back(v, u);
    const long p = static_cast<long>(t.pairs.size());

    t.zeta.resize(1 + 2 * f, p);
    for (long k = 0; k < p; ++k) {
        const auto [v, u] = t.pairs[k];
        t.zeta(0, k) = g.adjacency()(v, u) / t.max_latency;
        t.zeta.col(k).segment(1, f) = x.row(u).transpose();
        t.zeta.col(k).segment(1 + f, f) = x.row(v).transpose();
    }
    t.q = (m.edge_embed.w * t.zeta).colwise() + m.edge_embed.b.col(0);
    t.e = t.q.cwiseMax(0.0);

    t.xi.resize(2 * f + m.edge_dim, p);
    for (long k = 0; k < p; ++k) {
        const auto [v, u] = t.pairs[k];
        t.xi.col(k).segment(0, f) = x.row(v).transpose();
        t.xi.col(k).segment(f, f) = x.row(u).transpose();
        t.xi.col(k).segment(2 * f, m.edge_dim) = t.e.col(k);
    }
    t.s = Eigen::MatrixXd::Zero(n, m.hidden_dim);
    if (p > 0) {
        const Eigen::MatrixXd pooled = m.edge_pool.w * t.xi;  // H x P
        for (long k = 0; k < p; ++k) t.s.row(t.pairs[k].first) += pooled.col(k).transpose();
    }
    t.s.rowwise() += m.edge_pool.b.col(0).transpose();
    t.h0 = t.s.cwiseMax(0.0);

    t.ahat = normalized_adjacency(g);
    const Eigen::MatrixXd* prev = &t.h0;
    for (size_t l = 0; l < m.gcn.size(); ++l) {
        Eigen::MatrixXd z = t.ahat * (*prev * m.gcn[l].w.transpose());
        z.rowwise() += m.gcn[l].b.col(0).transpose();
        t.z.push_back(z);
        t.h.push_back(l + 1 < m.gcn.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z);
        prev = &t.h.back();
    }
    return t;
}

inline Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd p(logits.rows(), logits.cols());
    for (long i = 0; i < logits.rows(); ++i) {
        const Eigen::RowVectorXd shifted =
            logits.row(i).array() - logits.row(i).maxCoeff();
        const Eigen::RowVectorXd exps = shifted.array().exp();
        p.row(i) = exps / exps.sum();
    }
    return p;
}

// Argmax with ties broken toward the lowest class index.
inline int argmax_row(const Eigen::MatrixXd& p, long row) {
    int best = 0;
    for (long c = 1; c < p.cols(); ++c)
        if (p(row, c) > p(row, best)) best = static_cast<int>(c);
    return best;
}

struct Prediction {
    Eigen::MatrixXd probs;    // n x classes, rows sum to 1
    std::vector<int> labels;  // argmax per node, node order
};

inline Prediction predict(const GnnModel& m, const ClusterGraph& g,
                          const Eigen::MatrixXd& x) {
    ForwardTrace t = forward(m, g, x);
    Prediction out;
    out.probs = softmax_rows(t.logits());
    out.labels.resize(g.size());
    for (int i = 0; i < g.size(); ++i) out.labels[i] = argmax_row(out.probs, i);
    return out;
}

// ---------------------------------------------------------------------------
// Loss and gradients
//
// labels[i] in [0, classes) for labeled nodes, -1 for unlabeled; the mask is
// the labeled set.

inline std::vector<int> labeled_indices(const std::vector<int>& labels) {
    std::vector<int> mask;
    for (size_t i = 0; i < labels.size(); ++i)
        if (labels[i] >= 0) mask.push_back(static_cast<int>(i));
    return mask;
}

inline double cross_entropy_loss(const Eigen::MatrixXd& probs,
                                 const std::vector<int>& labels,
                                 const std::vector<int>& mask) {
    if (mask.empty()) throw DomainError("empty label mask");
    double total = 0.0;
    for (int i : mask) {
        const int y = labels[i];
        if (y < 0 || y >= probs.cols())
            throw DomainError("label " + std::to_string(y) + " outside class range");
        total += -std::log(std::max(probs(i, y), 1e-12));
    }
    return total / static_cast<double>(mask.size());
}

inline double accuracy(const Eigen::MatrixXd& probs, const std::vector<int>& labels,
                       const std::vector<int>& mask) {
    if (mask.empty()) throw DomainError("empty label mask");
    int hit = 0;
    for (int i : mask)
        if (argmax_row(probs, i) == labels[i]) ++hit;
    return static_cast<double>(hit) / static_cast<double>(mask.size());
}

struct Gradients {
    EdgeEmbed edge_embed;
    EdgePool edge_pool;
    std::vector<GcnLayer> gcn;

    std::vector<Eigen::MatrixXd*> tensors() {
        std::vector<Eigen::MatrixXd*> out = {&edge_embed.w, &edge_embed.b, &edge_pool.w,
                                             &edge_pool.b};
        for (auto& l : gcn) {
            out.push_back(&l.w);
            out.push_back(&l.b);
        }
        return out;
    }
};

// Analytic gradients of the masked mean cross-entropy w.r.t. every trainable
// tensor. The 1e-12 clamp in the loss only binds when the true-class
// probability underflows; gradients are those of the unclamped loss.
inline Gradients backward(const GnnModel& m, const ClusterGraph& g,
                          const Eigen::MatrixXd& x, const ForwardTrace& t,
                          const std::vector<int>& labels, const std::vector<int>& mask) {
    const int n = g.size();
    const int f = m.feature_dim;
    if (mask.empty()) throw DomainError("empty label mask");

    Gradients grad;
    grad.edge_embed.w = Eigen::MatrixXd::Zero(m.edge_embed.w.rows(), m.edge_embed.w.cols());
    grad.edge_embed.b = Eigen::MatrixXd::Zero(m.edge_embed.b.rows(), 1);
    grad.edge_pool.w = Eigen::MatrixXd::Zero(m.edge_pool.w.rows(), m.edge_pool.w.cols());
    grad.edge_pool.b = Eigen::MatrixXd::Zero(m.edge_pool.b.rows(), 1);
    for (const auto& l : m.gcn) {
        GcnLayer gl;
        gl.w = Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols());
        gl.b = Eigen::MatrixXd::Zero(l.b.rows(), 1);
        grad.gcn.push_back(std::move(gl));
    }

    const Eigen::MatrixXd probs = softmax_rows(t.logits());
    Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(n, m.num_classes);
    const double inv = 1.0 / static_cast<double>(mask.size());
    for (int i : mask) {
        const int y = labels[i];
        if (y < 0 || y >= m.num_classes)
            throw DomainError("label " + std::to_string(y) + " outside class range");
        dz.row(i) = probs.row(i) * inv;
        dz(i, y) -= inv;
    }

    // GCN stack, top down.
    Eigen::MatrixXd dh_prev;
    for (int l = static_cast<int>(m.gcn.size()) - 1; l >= 0; --l) {
        const Eigen::MatrixXd& h_in = (l == 0) ? t.h0 : t.h[l - 1];
        grad.gcn[l].w = dz.transpose() * (t.ahat * h_in);
        grad.gcn[l].b = dz.colwise().sum().transpose();
        dh_prev = t.ahat * (dz * m.gcn[l].w);
        if (l > 0) dz = dh_prev.cwiseProduct((t.z[l - 1].array() > 0.0).cast<double>().matrix());
    }

    // Edge pool.
    const Eigen::MatrixXd ds =
        dh_prev.cwiseProduct((t.s.array() > 0.0).cast<double>().matrix());
    grad.edge_pool.b = ds.colwise().sum().transpose();
    const long p = static_cast<long>(t.pairs.size());
    if (p > 0) {
        Eigen::MatrixXd dpool(m.hidden_dim, p);  // col k = ds.row(v_k)^T
        for (long k = 0; k < p; ++k) dpool.col(k) = ds.row(t.pairs[k].first).transpose();
        grad.edge_pool.w = dpool * t.xi.transpose();
        // Edge features feed only their own pool term.
        const Eigen::MatrixXd de =
            m.edge_pool.w.middleCols(2 * f, m.edge_dim).transpose() * dpool;
        const Eigen::MatrixXd dq =
            de.cwiseProduct((t.q.array() > 0.0).cast<double>().matrix());
        grad.edge_embed.w = dq * t.zeta.transpose();
        grad.edge_embed.b = dq.rowwise().sum();
    }
    return grad;
}

inline void sgd_step(GnnModel& m, const Gradients& grad, double lr) {
    auto mt = m.tensors();
    auto gt = const_cast<Gradients&>(grad).tensors();
    for (size_t i = 0; i < mt.size(); ++i) *mt[i] -= lr * *gt[i];
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    double learning_rate = 0.01;
    int steps = 10;
    std::uint64_t seed = 0;
};

struct TraceRow {
    int step = 0;  // 1-based; metrics after this many updates
    double loss = 0.0;
    double accuracy = 0.0;
};

struct TrainResult {
    GnnModel model;
    std::vector<TraceRow> trace;
};

// Full-batch gradient descent. Deterministic given the model and inputs;
// each trace row holds post-update loss/accuracy.
inline TrainResult train(GnnModel model, const ClusterGraph& g, const Eigen::MatrixXd& x,
                         const std::vector<int>& labels, const TrainConfig& cfg) {
    if (!(cfg.learning_rate >= 0.0)) throw DomainError("negative learning rate");
    if (cfg.steps < 0) throw DomainError("negative step count");
    const std::vector<int> mask = labeled_indices(labels);
    if (mask.empty() && cfg.steps > 0) throw DomainError("empty label mask");
    TrainResult out;
    out.trace.reserve(cfg.steps);
    ForwardTrace t = forward(model, g, x);
    for (int step = 1; step <= cfg.steps; ++step) {
        const Gradients grad = backward(model, g, x, t, labels, mask);
        sgd_step(model, grad, cfg.learning_rate);
        t = forward(model, g, x);
        const Eigen::MatrixXd probs = softmax_rows(t.logits());
        out.trace.push_back(
            {step, cross_entropy_loss(probs, labels, mask), accuracy(probs, labels, mask)});
    }
    out.model = std::move(model);
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoint format: "HULKGNN\0", u32 version, u32 dims
// (feature/edge/hidden/layers/classes), u64 seed, then little-endian f64
// weights in declaration order, row-major within each tensor.

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32(const std::string& in, size_t& pos) {
    if (pos + 4 > in.size()) throw DomainError("truncated checkpoint");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += 4;
    return v;
}

inline std::uint64_t get_u64(const std::string& in, size_t& pos) {
    if (pos + 8 > in.size()) throw DomainError("truncated checkpoint");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += 8;
    return v;
}

}  // namespace detail

inline constexpr char kCheckpointMagic[8] = {'H', 'U', 'L', 'K', 'G', 'N', 'N', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::string save_model(const GnnModel& m) {
    std::string out(kCheckpointMagic, 8);
    detail::put_u32(out, kCheckpointVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(m.feature_dim));
    detail::put_u32(out, static_cast<std::uint32_t>(m.edge_dim));
    detail::put_u32(out, static_cast<std::uint32_t>(m.hidden_dim));
    detail::put_u32(out, static_cast<std::uint32_t>(m.gcn.size()));
    detail::put_u32(out, static_cast<std::uint32_t>(m.num_classes));
    detail::put_u64(out, m.seed);
    for (const auto* t : m.tensors())
        for (long i = 0; i < t->rows(); ++i)
            for (long j = 0; j < t->cols(); ++j)
                detail::put_u64(out, std::bit_cast<std::uint64_t>((*t)(i, j)));
    return out;
}

inline GnnModel load_model(const std::string& bytes) {
    if (bytes.size() < 8 || bytes.compare(0, 8, std::string(kCheckpointMagic, 8)) != 0)
        throw DomainError("not a checkpoint: bad magic");
    size_t pos = 8;
    const std::uint32_t version = detail::get_u32(bytes, pos);
    if (version != kCheckpointVersion)
        throw DomainError("unsupported checkpoint version " + std::to_string(version));
    GnnConfig cfg;
    const int feature_dim = static_cast<int>(detail::get_u32(bytes, pos));
    cfg.edge_dim = static_cast<int>(detail::get_u32(bytes, pos));
    cfg.hidden_dim = static_cast<int>(detail::get_u32(bytes, pos));
    cfg.gcn_layers = static_cast<int>(detail::get_u32(bytes, pos));
    cfg.num_classes = static_cast<int>(detail::get_u32(bytes, pos));
    cfg.seed = detail::get_u64(bytes, pos);
    GnnModel m = make_model(feature_dim, cfg);
    for (auto* t : m.tensors())
        for (long i = 0; i < t->rows(); ++i)
            for (long j = 0; j < t->cols(); ++j)
                (*t)(i, j) = std::bit_cast<double>(detail::get_u64(bytes, pos));
    if (pos != bytes.size()) throw DomainError("trailing bytes in checkpoint");
    return m;
}

}  // namespace hulk
