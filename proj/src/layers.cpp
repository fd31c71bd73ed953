#include "ecal/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace ecal {

std::size_t ParamSet::add(const std::string& name, Tensor t) {
    if (find(name) != npos) throw std::invalid_argument("duplicate parameter name " + name);
    names.push_back(name);
    t.requires_grad = true;
    tensors.push_back(std::move(t));
    return tensors.size() - 1;
}

std::size_t ParamSet::find(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return i;
    return npos;
}

std::string encoder_name(EncoderKind k) {
    switch (k) {
        case EncoderKind::gcn: return "gcn";
        case EncoderKind::gat: return "gat";
        case EncoderKind::egatv1: return "egatv1";
        case EncoderKind::egatv2: return "egatv2";
    }
    return "?";
}

bool parse_encoder(const std::string& s, EncoderKind& out) {
    if (s == "gcn") out = EncoderKind::gcn;
    else if (s == "gat") out = EncoderKind::gat;
    else if (s == "egatv1") out = EncoderKind::egatv1;
    else if (s == "egatv2") out = EncoderKind::egatv2;
    else return false;
    return true;
}

bool encoder_uses_edges(EncoderKind k) {
    return k == EncoderKind::egatv1 || k == EncoderKind::egatv2;
}

namespace {
Tensor glorot(Rng& rng, std::size_t rows, std::size_t cols,
              std::size_t fan_in, std::size_t fan_out) {
    const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor t = Tensor::matrix(rows, cols);
    for (double& v : t.values) v = rng.uniform(-s, s);
    return t;
}
}  // namespace

LinearH init_linear(ParamSet& ps, Rng& rng, const std::string& name,
                    std::size_t fan_in, std::size_t fan_out, bool bias) {
    LinearH h;
    h.w = ps.add(name + ".w", glorot(rng, fan_in, fan_out, fan_in, fan_out));
    if (bias) h.b = ps.add(name + ".b", Tensor::vector(fan_out, 0.0));
    return h;
}

MlpH init_mlp(ParamSet& ps, Rng& rng, const std::string& name,
              std::size_t d_in, std::size_t d_hidden, std::size_t d_out) {
    MlpH h;
    h.l1 = init_linear(ps, rng, name + ".l1", d_in, d_hidden, true);
    h.l2 = init_linear(ps, rng, name + ".l2", d_hidden, d_out, true);
    return h;
}

EncoderStackH init_encoder(ParamSet& ps, Rng& rng, const std::string& name,
                           EncoderKind kind, std::size_t depth,
                           std::size_t d_v, std::size_t d_e, std::size_t d_h) {
    if (depth == 0) throw std::invalid_argument("encoder depth must be positive");
    EncoderStackH enc;
    enc.kind = kind;
    enc.d_h = d_h;
    for (std::size_t l = 0; l < depth; ++l) {
        const std::string p = name + ".layer" + std::to_string(l);
        const std::size_t node_in = l == 0 ? d_v : d_h;
        if (kind == EncoderKind::gcn) {
            GcnLayerH gl;
            gl.w = init_linear(ps, rng, p + ".w", node_in, d_h, false);
            enc.gcn_layers.push_back(gl);
            continue;
        }
        EgatLayerH al;
        al.w_src = init_linear(ps, rng, p + ".w_src", node_in, d_h, false);
        al.w_dst = init_linear(ps, rng, p + ".w_dst", node_in, d_h, false);
        if (kind == EncoderKind::egatv1) {
            // v1 never rewrites edges, so every layer projects the raw rows
            al.w_edge = init_linear(ps, rng, p + ".w_edge", d_e, d_h, false);
        } else if (kind == EncoderKind::egatv2) {
            const std::size_t edge_in = l == 0 ? d_e : d_h;
            al.w_edge = init_linear(ps, rng, p + ".w_edge", edge_in, d_h, false);
            al.w_edge_out = init_linear(ps, rng, p + ".w_edge_out", 3 * d_h, d_h, false);
        }
        const std::size_t attn_len = kind == EncoderKind::gat ? 2 * d_h
                                     : kind == EncoderKind::egatv1 ? 3 * d_h
                                                                   : d_h;
        al.attn = ps.add(p + ".attn", glorot(rng, attn_len, 1, attn_len, 1));
        al.mlp = init_mlp(ps, rng, p + ".mlp", d_h, d_h, d_h);
        enc.attn_layers.push_back(al);
    }
    return enc;
}

Var linear_forward(Tape& t, const std::vector<Var>& pv, const LinearH& h, Var x) {
    Var y = t.matmul(x, pv[h.w]);
    if (h.b != npos) y = t.add_rowvec(y, pv[h.b]);
    return y;
}

Var mlp_forward(Tape& t, const std::vector<Var>& pv, const MlpH& h, Var x) {
    Var y = t.leaky_relu(linear_forward(t, pv, h.l1, x), kLeakySlope);
    return linear_forward(t, pv, h.l2, y);
}

GcnPlan build_gcn_plan(const Batch& batch) {
    GcnPlan plan;
    std::vector<double> deg(batch.num_nodes, 1.0);  // self-loop counts once
    for (std::size_t s : batch.arc_src) deg[s] += 1.0;
    std::vector<std::size_t> aug_src;
    aug_src.reserve(batch.num_arcs + batch.num_nodes);
    plan.aug_dst.reserve(batch.num_arcs + batch.num_nodes);
    plan.coeff = Tensor::vector(batch.num_arcs + batch.num_nodes);
    for (std::size_t k = 0; k < batch.num_arcs; ++k) {
        aug_src.push_back(batch.arc_src[k]);
        plan.aug_dst.push_back(batch.arc_dst[k]);
        plan.coeff.values[k] = 1.0 / std::sqrt(deg[batch.arc_src[k]] * deg[batch.arc_dst[k]]);
    }
    for (std::size_t i = 0; i < batch.num_nodes; ++i) {
        aug_src.push_back(i);
        plan.aug_dst.push_back(i);
        plan.coeff.values[batch.num_arcs + i] = 1.0 / deg[i];
    }
    plan.aug_by_src = SegmentIndex::build(aug_src, batch.num_nodes);
    return plan;
}

namespace {
std::vector<std::uint8_t> isolated_flags(const Batch& batch) {
    std::vector<std::uint8_t> iso(batch.num_nodes, 0);
    for (std::size_t i = 0; i < batch.num_nodes; ++i)
        iso[i] = batch.arcs_by_src.count(i) == 0 ? 1 : 0;
    return iso;
}
}  // namespace

EncoderOut encoder_forward(Tape& t, const std::vector<Var>& pv, const EncoderStackH& enc,
                           const Batch& batch, Var node_feats, Var edge_feats,
                           const GcnPlan* gcn_plan) {
    EncoderOut out;
    out.isolated = isolated_flags(batch);

    if (enc.kind == EncoderKind::gcn) {
        if (!gcn_plan) throw std::invalid_argument("gcn forward needs a plan");
        Var x = node_feats;
        Var coeff = t.constant(gcn_plan->coeff);
        for (const GcnLayerH& layer : enc.gcn_layers) {
            Var xw = linear_forward(t, pv, layer.w, x);
            Var msg = t.gather_rows(xw, gcn_plan->aug_dst);
            Var scaled = t.row_scale(msg, coeff);
            Var agg = t.segment_sum_rows(scaled, gcn_plan->aug_by_src);
            x = t.leaky_relu(agg, kLeakySlope);
        }
        out.nodes = x;
        return out;
    }

    Var x = node_feats;
    Var e_in = edge_feats;  // raw rows for v1/gat layer 0; v2 rewrites per layer
    for (std::size_t l = 0; l < enc.attn_layers.size(); ++l) {
        const EgatLayerH& layer = enc.attn_layers[l];
        Var xs = linear_forward(t, pv, layer.w_src, x);
        Var xd = linear_forward(t, pv, layer.w_dst, x);
        Var hs = t.gather_rows(xs, batch.arc_src);
        Var hd = t.gather_rows(xd, batch.arc_dst);

        Var scores;
        if (enc.kind == EncoderKind::gat) {
            Var f = t.concat_cols({hs, hd});
            scores = t.leaky_relu(t.matmul(f, pv[layer.attn]), kLeakySlope);
        } else if (enc.kind == EncoderKind::egatv1) {
            Var ep = linear_forward(t, pv, layer.w_edge, edge_feats);
            Var f = t.concat_cols({hs, hd, ep});
            scores = t.leaky_relu(t.matmul(f, pv[layer.attn]), kLeakySlope);
            out.edges = ep;
        } else {
            Var ep = linear_forward(t, pv, layer.w_edge, e_in);
            Var f = t.concat_cols({hs, ep, hd});
            Var e_out = t.leaky_relu(linear_forward(t, pv, layer.w_edge_out, f), kLeakySlope);
            scores = t.matmul(e_out, pv[layer.attn]);
            e_in = e_out;
            out.edges = e_out;
        }

        Var a = t.segment_softmax(scores, batch.arcs_by_src);
        Var msg = t.row_scale(hd, a);
        Var agg = t.segment_sum_rows(msg, batch.arcs_by_src);
        x = mlp_forward(t, pv, layer.mlp, agg);
        out.attn = a;
        (void)l;
    }
    out.nodes = x;
    return out;
}

}  // namespace ecal
