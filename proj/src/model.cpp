#include "ecal/model.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ecal/format.hpp"

namespace ecal {

std::string causal_name(CausalMode m) {
    switch (m) {
        case CausalMode::none: return "none";
        case CausalMode::cal: return "cal";
        case CausalMode::ecal: return "ecal";
    }
    return "?";
}

bool parse_causal(const std::string& s, CausalMode& out) {
    if (s == "none") out = CausalMode::none;
    else if (s == "cal") out = CausalMode::cal;
    else if (s == "ecal") out = CausalMode::ecal;
    else return false;
    return true;
}

ModelParams init_model(const ModelConfig& cfg) {
    if (cfg.causal == CausalMode::ecal && !encoder_uses_edges(cfg.encoder))
        throw std::invalid_argument("causal mode ecal requires an edge-featured encoder");
    if (cfg.num_classes < 2) throw std::invalid_argument("need at least 2 classes");
    ModelParams mp;
    mp.cfg = cfg;
    Rng rng(seed_stream(cfg.seed, streams::kInit));
    if (cfg.causal != CausalMode::none) {
        mp.estimator = init_encoder(mp.params, rng, "estimator", cfg.encoder, cfg.depth,
                                    cfg.d_v, cfg.d_e, cfg.d_h);
        mp.mlp_node = init_mlp(mp.params, rng, "estimator.head_node", cfg.d_h, cfg.d_h, 2);
        if (cfg.causal == CausalMode::ecal) {
            mp.mlp_edge = init_mlp(mp.params, rng, "estimator.head_edge", cfg.d_h, cfg.d_h, 2);
            mp.has_edge_head = true;
        }
    }
    mp.causal_encoder = init_encoder(mp.params, rng, "causal_encoder", cfg.encoder, cfg.depth,
                                     cfg.d_v, cfg.d_e, cfg.d_h);
    if (cfg.causal != CausalMode::none)
        mp.trivial_encoder = init_encoder(mp.params, rng, "trivial_encoder", cfg.encoder,
                                          cfg.depth, cfg.d_v, cfg.d_e, cfg.d_h);
    mp.classifier_c = init_linear(mp.params, rng, "classifier_c", cfg.d_h,
                                  static_cast<std::size_t>(cfg.num_classes), true);
    if (cfg.causal != CausalMode::none) {
        mp.classifier_t = init_linear(mp.params, rng, "classifier_t", cfg.d_h,
                                      static_cast<std::size_t>(cfg.num_classes), true);
        mp.classifier_mix = init_linear(mp.params, rng, "classifier_mix", cfg.d_h,
                                        static_cast<std::size_t>(cfg.num_classes), true);
    }
    return mp;
}

std::vector<Var> push_params(Tape& t, const ParamSet& ps, bool requires_grad) {
    std::vector<Var> pv;
    pv.reserve(ps.size());
    for (const Tensor& p : ps.tensors) pv.push_back(t.input(p, requires_grad));
    return pv;
}

namespace {
Tensor batch_node_tensor(const Batch& b) {
    Tensor t = Tensor::matrix(b.num_nodes, b.d_v);
    t.values = b.node_features;
    return t;
}
Tensor batch_edge_tensor(const Batch& b) {
    Tensor t = Tensor::matrix(b.num_arcs, b.d_e);
    t.values = b.edge_features;
    return t;
}
}  // namespace

ModelForward model_forward(Tape& t, const std::vector<Var>& pv, const ModelParams& mp,
                           const Batch& batch) {
    if (batch.d_v != mp.cfg.d_v || batch.d_e != mp.cfg.d_e)
        throw std::invalid_argument("batch feature widths do not match model");
    ModelForward mf;
    Var x0 = t.constant(batch_node_tensor(batch));
    Var e0 = t.constant(batch_edge_tensor(batch));
    GcnPlan plan;
    const GcnPlan* planp = nullptr;
    if (mp.cfg.encoder == EncoderKind::gcn) {
        plan = build_gcn_plan(batch);
        planp = &plan;
    }

    if (mp.cfg.causal == CausalMode::none) {
        EncoderOut enc = encoder_forward(t, pv, mp.causal_encoder, batch, x0, e0, planp);
        mf.estimator_out = enc;
        mf.isolated = enc.isolated;
        mf.h_c = t.segment_mean_rows(enc.nodes, batch.nodes_by_graph);
        mf.logits_c = linear_forward(t, pv, mp.classifier_c, mf.h_c);
        return mf;
    }

    EncoderOut est = encoder_forward(t, pv, mp.estimator, batch, x0, e0, planp);
    mf.estimator_out = est;
    mf.isolated = est.isolated;
    Var zn = mlp_forward(t, pv, mp.mlp_node, est.nodes);
    mf.alpha_node = t.select_col(t.exp_elem(t.log_softmax_rows(zn)), 0);
    if (mp.has_edge_head) {
        Var ze = mlp_forward(t, pv, mp.mlp_edge, est.edges);
        mf.alpha_edge = t.select_col(t.exp_elem(t.log_softmax_rows(ze)), 0);
    } else {
        mf.alpha_edge = t.constant(Tensor::vector(batch.num_arcs, 0.5));
    }
    Var beta_node = t.affine(mf.alpha_node, -1.0, 1.0);
    Var beta_edge = t.affine(mf.alpha_edge, -1.0, 1.0);
    Var xc = t.row_scale(x0, mf.alpha_node);
    Var ec = t.row_scale(e0, mf.alpha_edge);
    Var xt = t.row_scale(x0, beta_node);
    Var et = t.row_scale(e0, beta_edge);

    EncoderOut cenc = encoder_forward(t, pv, mp.causal_encoder, batch, xc, ec, planp);
    EncoderOut tenc = encoder_forward(t, pv, mp.trivial_encoder, batch, xt, et, planp);
    mf.h_c = t.segment_mean_rows(cenc.nodes, batch.nodes_by_graph);
    mf.h_t = t.segment_mean_rows(tenc.nodes, batch.nodes_by_graph);
    mf.logits_c = linear_forward(t, pv, mp.classifier_c, mf.h_c);
    mf.logits_t = linear_forward(t, pv, mp.classifier_t, mf.h_t);
    return mf;
}

CausalScores estimate_causal_scores(const ModelParams& mp, const Batch& batch) {
    if (mp.cfg.causal == CausalMode::none)
        throw std::invalid_argument("model has no causality estimator");
    Tape t;
    std::vector<Var> pv = push_params(t, mp.params, false);
    ModelForward mf = model_forward(t, pv, mp, batch);
    CausalScores s;
    s.alpha_node = t.value(mf.alpha_node).values;
    s.alpha_edge = t.value(mf.alpha_edge).values;
    return s;
}

SubgraphPair split_subgraphs(const Batch& batch, const CausalScores& scores) {
    if (scores.alpha_node.size() != batch.num_nodes ||
        scores.alpha_edge.size() != batch.num_arcs)
        throw std::invalid_argument("scores misaligned with batch");
    SubgraphPair sp;
    sp.causal_nodes.resize(batch.node_features.size());
    sp.trivial_nodes.resize(batch.node_features.size());
    sp.causal_edges.resize(batch.edge_features.size());
    sp.trivial_edges.resize(batch.edge_features.size());
    for (std::size_t i = 0; i < batch.num_nodes; ++i) {
        const double a = scores.alpha_node[i];
        const double b = -1.0 * a + 1.0;
        for (std::size_t c = 0; c < batch.d_v; ++c) {
            const double x = batch.node_features[i * batch.d_v + c];
            sp.causal_nodes[i * batch.d_v + c] = a * x;
            sp.trivial_nodes[i * batch.d_v + c] = b * x;
        }
    }
    for (std::size_t k = 0; k < batch.num_arcs; ++k) {
        const double a = scores.alpha_edge[k];
        const double b = -1.0 * a + 1.0;
        for (std::size_t c = 0; c < batch.d_e; ++c) {
            const double x = batch.edge_features[k * batch.d_e + c];
            sp.causal_edges[k * batch.d_e + c] = a * x;
            sp.trivial_edges[k * batch.d_e + c] = b * x;
        }
    }
    return sp;
}

std::vector<double> predict_logits(const ModelParams& mp, const Batch& batch) {
    Tape t;
    std::vector<Var> pv = push_params(t, mp.params, false);
    ModelForward mf = model_forward(t, pv, mp, batch);
    return t.value(mf.logits_c).values;
}

void save_model(const ModelParams& mp, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "ECAL-MODEL v1 DV=" << mp.cfg.d_v << " DE=" << mp.cfg.d_e << " DH=" << mp.cfg.d_h
        << " C=" << mp.cfg.num_classes << " ENCODER=" << encoder_name(mp.cfg.encoder)
        << " CAUSAL=" << causal_name(mp.cfg.causal) << " DEPTH=" << mp.cfg.depth
        << " SEED=" << mp.cfg.seed << "\n";
    for (std::size_t i = 0; i < mp.params.size(); ++i) {
        const Tensor& p = mp.params.tensors[i];
        out << "T " << mp.params.names[i] << " " << p.rows() << " " << p.cols() << "\n";
        for (std::size_t r = 0; r < p.rows(); ++r) {
            for (std::size_t c = 0; c < p.cols(); ++c) {
                if (c) out << " ";
                out << format_double(p.at(r, c));
            }
            out << "\n";
        }
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

namespace {
struct TokenReader {
    std::istream& in;
    std::size_t line_no = 0;
    std::vector<std::string> tokens;
    explicit TokenReader(std::istream& in_) : in(in_) {}
    bool next() {
        std::string line;
        while (std::getline(in, line)) {
            ++line_no;
            tokens.clear();
            std::istringstream ss(line);
            std::string tok;
            while (ss >> tok) tokens.push_back(tok);
            if (tokens.empty() || tokens[0][0] == '#') continue;
            return true;
        }
        return false;
    }
};

std::uint64_t tagged_uint(const TokenReader& r, const std::string& tok, const char* tag) {
    const std::string prefix = std::string(tag) + "=";
    std::uint64_t v = 0;
    if (tok.rfind(prefix, 0) != 0 || !parse_uint(tok.substr(prefix.size()), v))
        throw ParseError(r.line_no, std::string("expected ") + prefix + "<int>");
    return v;
}

std::string tagged_str(const TokenReader& r, const std::string& tok, const char* tag) {
    const std::string prefix = std::string(tag) + "=";
    if (tok.rfind(prefix, 0) != 0)
        throw ParseError(r.line_no, std::string("expected ") + prefix + "<value>");
    return tok.substr(prefix.size());
}
}  // namespace

ModelParams load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    TokenReader r(in);
    if (!r.next() || r.tokens.size() != 10 || r.tokens[0] != "ECAL-MODEL" || r.tokens[1] != "v1")
        throw ParseError(r.line_no ? r.line_no : 1, "expected header 'ECAL-MODEL v1 ...'");
    ModelConfig cfg;
    cfg.d_v = tagged_uint(r, r.tokens[2], "DV");
    cfg.d_e = tagged_uint(r, r.tokens[3], "DE");
    cfg.d_h = tagged_uint(r, r.tokens[4], "DH");
    cfg.num_classes = static_cast<int>(tagged_uint(r, r.tokens[5], "C"));
    if (!parse_encoder(tagged_str(r, r.tokens[6], "ENCODER"), cfg.encoder))
        throw ParseError(r.line_no, "unknown encoder variant");
    if (!parse_causal(tagged_str(r, r.tokens[7], "CAUSAL"), cfg.causal))
        throw ParseError(r.line_no, "unknown causal mode");
    cfg.depth = tagged_uint(r, r.tokens[8], "DEPTH");
    cfg.seed = tagged_uint(r, r.tokens[9], "SEED");

    ModelParams mp = init_model(cfg);
    std::vector<bool> filled(mp.params.size(), false);
    while (r.next()) {
        if (r.tokens.size() != 4 || r.tokens[0] != "T")
            throw ParseError(r.line_no, "expected 'T <key> <rows> <cols>'");
        const std::size_t h = mp.params.find(r.tokens[1]);
        if (h == npos) throw ParseError(r.line_no, "unknown tensor key " + r.tokens[1]);
        Tensor& p = mp.params.tensors[h];
        std::uint64_t rows = 0, cols = 0;
        if (!parse_uint(r.tokens[2], rows) || !parse_uint(r.tokens[3], cols) ||
            rows != p.rows() || cols != p.cols())
            throw ParseError(r.line_no, "tensor shape mismatch for " + r.tokens[1]);
        for (std::size_t row = 0; row < rows; ++row) {
            if (!r.next()) throw ParseError(r.line_no + 1, "unexpected end of tensor values");
            if (r.tokens.size() != cols)
                throw ParseError(r.line_no, "expected " + std::to_string(cols) + " values");
            for (std::size_t c = 0; c < cols; ++c) {
                double v = 0.0;
                if (!parse_double(r.tokens[c], v))
                    throw ParseError(r.line_no, "bad value '" + r.tokens[c] + "'");
                p.values[row * cols + c] = v;
            }
        }
        filled[h] = true;
    }
    for (std::size_t i = 0; i < filled.size(); ++i)
        if (!filled[i]) throw std::runtime_error("missing tensor " + mp.params.names[i]);
    return mp;
}

}  // namespace ecal
