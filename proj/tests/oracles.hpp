#pragma once

// Independent reference implementations used only by the tests. Everything
// here is written as plain dense loops over std::vector so that agreement
// with the library is evidence, not circularity.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ecal/graph.hpp"
#include "ecal/layers.hpp"
#include "ecal/model.hpp"
#include "ecal/rng.hpp"
#include "ecal/synth.hpp"
#include "ecal/tensor.hpp"

namespace oracle {

struct Mat {
    std::size_t rows = 0, cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

inline Mat linear(const Mat& x, const ecal::Tensor& w, const ecal::Tensor* b) {
    Mat y(x.rows, w.cols());
    for (std::size_t r = 0; r < x.rows; ++r)
        for (std::size_t c = 0; c < w.cols(); ++c) {
            double acc = 0.0;
            for (std::size_t k = 0; k < x.cols; ++k) acc += x.at(r, k) * w.at(k, c);
            if (b) acc += b->values[c];
            y.at(r, c) = acc;
        }
    return y;
}

inline double lrelu1(double x, double slope) { return x >= 0.0 ? x : slope * x; }

inline Mat lrelu(Mat x, double slope) {
    for (double& e : x.v) e = lrelu1(e, slope);
    return x;
}

inline Mat mlp(const ecal::ParamSet& ps, const ecal::MlpH& h, const Mat& x) {
    const ecal::Tensor* b1 = h.l1.b == ecal::npos ? nullptr : &ps.tensors[h.l1.b];
    const ecal::Tensor* b2 = h.l2.b == ecal::npos ? nullptr : &ps.tensors[h.l2.b];
    Mat mid = lrelu(linear(x, ps.tensors[h.l1.w], b1), ecal::kLeakySlope);
    return linear(mid, ps.tensors[h.l2.w], b2);
}

struct DenseOut {
    Mat nodes;
    Mat edges;               // egatv1: last-layer projected rows; egatv2: updated rows
    std::vector<double> attn;  // last layer, per arc
};

// Closed-form attention-encoder evaluation, one Graph at a time, with
// per-neighborhood softmax computed directly as exp(s)/sum exp(s).
inline DenseOut dense_encoder(const ecal::ParamSet& ps, const ecal::EncoderStackH& enc,
                              const ecal::Graph& g) {
    const double slope = ecal::kLeakySlope;
    const std::size_t n = g.num_nodes;
    const std::size_t m = g.num_arcs();
    DenseOut out;

    Mat x(n, g.d_v);
    x.v = g.node_features;
    Mat e_raw(m, g.d_e);
    e_raw.v = g.edge_features;

    if (enc.kind == ecal::EncoderKind::gcn) {
        std::vector<double> deg(n, 1.0);
        for (std::size_t k = 0; k < m; ++k) deg[g.arc_src[k]] += 1.0;
        Mat norm(n, n);
        for (std::size_t i = 0; i < n; ++i) norm.at(i, i) = 1.0 / deg[i];
        for (std::size_t k = 0; k < m; ++k)
            norm.at(g.arc_src[k], g.arc_dst[k]) =
                1.0 / std::sqrt(deg[g.arc_src[k]] * deg[g.arc_dst[k]]);
        for (const ecal::GcnLayerH& layer : enc.gcn_layers) {
            Mat xw = linear(x, ps.tensors[layer.w.w], nullptr);
            Mat agg(n, xw.cols);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t c = 0; c < xw.cols; ++c) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) acc += norm.at(i, j) * xw.at(j, c);
                    agg.at(i, c) = acc;
                }
            x = lrelu(std::move(agg), slope);
        }
        out.nodes = x;
        return out;
    }

    Mat e_in = e_raw;
    for (const ecal::EgatLayerH& layer : enc.attn_layers) {
        Mat xs = linear(x, ps.tensors[layer.w_src.w], nullptr);
        Mat xd = linear(x, ps.tensors[layer.w_dst.w], nullptr);
        const ecal::Tensor& a = ps.tensors[layer.attn];
        const std::size_t dh = xs.cols;

        std::vector<double> score(m, 0.0);
        Mat e_next;
        if (enc.kind == ecal::EncoderKind::gat) {
            for (std::size_t k = 0; k < m; ++k) {
                double s = 0.0;
                for (std::size_t c = 0; c < dh; ++c) s += xs.at(g.arc_src[k], c) * a.values[c];
                for (std::size_t c = 0; c < dh; ++c)
                    s += xd.at(g.arc_dst[k], c) * a.values[dh + c];
                score[k] = lrelu1(s, slope);
            }
        } else if (enc.kind == ecal::EncoderKind::egatv1) {
            Mat ep = linear(e_raw, ps.tensors[layer.w_edge.w], nullptr);
            for (std::size_t k = 0; k < m; ++k) {
                double s = 0.0;
                for (std::size_t c = 0; c < dh; ++c) s += xs.at(g.arc_src[k], c) * a.values[c];
                for (std::size_t c = 0; c < dh; ++c)
                    s += xd.at(g.arc_dst[k], c) * a.values[dh + c];
                for (std::size_t c = 0; c < dh; ++c) s += ep.at(k, c) * a.values[2 * dh + c];
                score[k] = lrelu1(s, slope);
            }
            out.edges = ep;
        } else {
            Mat ep = linear(e_in, ps.tensors[layer.w_edge.w], nullptr);
            Mat f(m, 3 * dh);
            for (std::size_t k = 0; k < m; ++k)
                for (std::size_t c = 0; c < dh; ++c) {
                    f.at(k, c) = xs.at(g.arc_src[k], c);
                    f.at(k, dh + c) = ep.at(k, c);
                    f.at(k, 2 * dh + c) = xd.at(g.arc_dst[k], c);
                }
            e_next = lrelu(linear(f, ps.tensors[layer.w_edge_out.w], nullptr), slope);
            for (std::size_t k = 0; k < m; ++k) {
                double s = 0.0;
                for (std::size_t c = 0; c < dh; ++c) s += e_next.at(k, c) * a.values[c];
                score[k] = s;
            }
        }

        std::vector<double> attn(m, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double denom = 0.0;
            for (std::size_t k = 0; k < m; ++k)
                if (g.arc_src[k] == i) denom += std::exp(score[k]);
            if (denom == 0.0) continue;
            for (std::size_t k = 0; k < m; ++k)
                if (g.arc_src[k] == i) attn[k] = std::exp(score[k]) / denom;
        }

        Mat agg(n, dh);
        for (std::size_t k = 0; k < m; ++k)
            for (std::size_t c = 0; c < dh; ++c)
                agg.at(g.arc_src[k], c) += attn[k] * xd.at(g.arc_dst[k], c);
        x = mlp(ps, layer.mlp, agg);
        out.attn = attn;
        if (enc.kind == ecal::EncoderKind::egatv2) {
            e_in = e_next;
            out.edges = e_in;
        }
    }
    out.nodes = x;
    return out;
}

// Causality scores recomputed densely: encoder, head MLPs, 2-way softmax.
struct DenseScores {
    std::vector<double> alpha_node, alpha_edge;
};

inline DenseScores dense_scores(const ecal::ModelParams& mp, const ecal::Graph& g) {
    DenseOut enc = dense_encoder(mp.params, mp.estimator, g);
    DenseScores s;
    Mat zn = mlp(mp.params, mp.mlp_node, enc.nodes);
    for (std::size_t r = 0; r < zn.rows; ++r)
        s.alpha_node.push_back(1.0 / (1.0 + std::exp(zn.at(r, 1) - zn.at(r, 0))));
    if (mp.has_edge_head) {
        Mat ze = mlp(mp.params, mp.mlp_edge, enc.edges);
        for (std::size_t r = 0; r < ze.rows; ++r)
            s.alpha_edge.push_back(1.0 / (1.0 + std::exp(ze.at(r, 1) - ze.at(r, 0))));
    } else {
        s.alpha_edge.assign(g.num_arcs(), 0.5);
    }
    return s;
}

// Direct log-sum-exp cross entropy, no max shifting.
inline double ce_direct(const Mat& logits, const std::vector<int>& labels) {
    double acc = 0.0;
    for (std::size_t r = 0; r < logits.rows; ++r) {
        double denom = 0.0;
        for (std::size_t c = 0; c < logits.cols; ++c) denom += std::exp(logits.at(r, c));
        acc += std::log(denom) - logits.at(r, static_cast<std::size_t>(labels[r]));
    }
    return acc / static_cast<double>(logits.rows);
}

// ln C - H(p) per row, mean over rows.
inline double kl_uniform_direct(const Mat& logits) {
    double acc = 0.0;
    for (std::size_t r = 0; r < logits.rows; ++r) {
        double denom = 0.0;
        for (std::size_t c = 0; c < logits.cols; ++c) denom += std::exp(logits.at(r, c));
        double h = 0.0;
        for (std::size_t c = 0; c < logits.cols; ++c) {
            const double p = std::exp(logits.at(r, c)) / denom;
            if (p > 0.0) h -= p * std::log(p);
        }
        acc += std::log(static_cast<double>(logits.cols)) - h;
    }
    return acc / static_cast<double>(logits.rows);
}

// Pairwise comparison AUC, O(pos * neg), ties count one half.
inline double brute_auc(const std::vector<double>& scores,
                        const std::vector<std::uint8_t>& pos) {
    double wins = 0.0;
    std::size_t np = 0, nn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!pos[i]) continue;
        ++np;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (pos[j]) continue;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    for (std::uint8_t f : pos) nn += f ? 0 : 1;
    return wins / (static_cast<double>(np) * static_cast<double>(nn));
}

// Student-t density and a two-sided p-value by adaptive Simpson quadrature.
inline double t_density(double x, double df) {
    const double ln_c = std::lgamma((df + 1.0) / 2.0) - std::lgamma(df / 2.0) -
                        0.5 * std::log(df * 3.14159265358979323846);
    return std::exp(ln_c - (df + 1.0) / 2.0 * std::log1p(x * x / df));
}

inline double simpson_rec(double (*f)(double, double), double df, double a, double b,
                          double fa, double fm, double fb, double whole, double tol,
                          int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm, df), frm = f(rm, df);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson_rec(f, df, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
           simpson_rec(f, df, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

inline double quadrature_two_sided_p(double t, double df) {
    const double hi = std::fabs(t);
    if (hi == 0.0) return 1.0;
    const double fa = t_density(0.0, df), fb = t_density(hi, df);
    const double fm = t_density(hi / 2.0, df);
    const double whole = hi / 6.0 * (fa + 4.0 * fm + fb);
    const double inner = simpson_rec(&t_density, df, 0.0, hi, fa, fm, fb, whole, 1e-12, 40);
    return 1.0 - 2.0 * inner;
}

// Nearest-centroid classifier on per-graph mean motif-arc edge features;
// validates the generator's separability independent of any learned model.
inline double centroid_accuracy(const ecal::SynthBundle& bundle) {
    auto motif_mean = [](const ecal::Graph& g, const ecal::GraphTruth& t) {
        std::vector<double> mu(g.d_e, 0.0);
        for (std::size_t k : t.causal_arcs)
            for (std::size_t c = 0; c < g.d_e; ++c) mu[c] += g.edge_features[k * g.d_e + c];
        for (double& v : mu) v /= static_cast<double>(t.causal_arcs.size());
        return mu;
    };
    std::vector<double> cen[2];
    std::size_t cnt[2] = {0, 0};
    cen[0].assign(bundle.train.d_e, 0.0);
    cen[1].assign(bundle.train.d_e, 0.0);
    for (std::size_t i = 0; i < bundle.train.graphs.size(); ++i) {
        const ecal::Graph& g = bundle.train.graphs[i];
        std::vector<double> mu = motif_mean(g, bundle.train_truth.per_graph[i]);
        for (std::size_t c = 0; c < mu.size(); ++c) cen[g.label][c] += mu[c];
        ++cnt[g.label];
    }
    for (int y = 0; y < 2; ++y)
        for (double& v : cen[y]) v /= static_cast<double>(cnt[y]);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < bundle.test.graphs.size(); ++i) {
        const ecal::Graph& g = bundle.test.graphs[i];
        std::vector<double> mu = motif_mean(g, bundle.test_truth.per_graph[i]);
        double d2[2] = {0.0, 0.0};
        for (int y = 0; y < 2; ++y)
            for (std::size_t c = 0; c < mu.size(); ++c)
                d2[y] += (mu[c] - cen[y][c]) * (mu[c] - cen[y][c]);
        const int pred = d2[0] <= d2[1] ? 0 : 1;
        if (pred == g.label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(bundle.test.graphs.size());
}

// Random valid graph: no self loops, no duplicate arcs, occasionally an
// isolated extra node.
inline ecal::Graph random_graph(ecal::Rng& rng, std::size_t n_min, std::size_t n_max,
                                std::size_t d_v, std::size_t d_e) {
    ecal::Graph g;
    g.num_nodes = n_min + rng.below(n_max - n_min + 1);
    g.d_v = d_v;
    g.d_e = d_e;
    g.label = static_cast<int>(rng.below(2));
    std::vector<std::pair<std::size_t, std::size_t>> all;
    for (std::size_t i = 0; i < g.num_nodes; ++i)
        for (std::size_t j = 0; j < g.num_nodes; ++j)
            if (i != j) all.emplace_back(i, j);
    rng.shuffle(all);
    const std::size_t want = all.empty() ? 0 : 1 + rng.below(std::min(all.size(), 2 * g.num_nodes));
    for (std::size_t k = 0; k < want; ++k) {
        g.arc_src.push_back(all[k].first);
        g.arc_dst.push_back(all[k].second);
    }
    g.node_features.resize(g.num_nodes * d_v);
    for (double& v : g.node_features) v = rng.normal();
    g.edge_features.resize(g.num_arcs() * d_e);
    for (double& v : g.edge_features) v = rng.normal();
    return g;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("length mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

}  // namespace oracle
