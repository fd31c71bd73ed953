#include "ecal/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ecal/format.hpp"
#include "ecal/rng.hpp"

namespace ecal {

std::string motif_name(MotifKind m) { return m == MotifKind::cycle5 ? "cycle5" : "house"; }

bool parse_motif(const std::string& s, MotifKind& out) {
    if (s == "cycle5") out = MotifKind::cycle5;
    else if (s == "house") out = MotifKind::house;
    else return false;
    return true;
}

namespace {

constexpr std::size_t kMotifNodes = 5;
constexpr double kEdgeNoiseStd = 0.5;

std::vector<std::pair<std::size_t, std::size_t>> motif_edges(MotifKind m) {
    if (m == MotifKind::cycle5)
        return {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}};
    // square with a roof apex
    return {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 4}, {1, 4}};
}

void check_config(const SynthConfig& cfg) {
    if (cfg.num_graphs == 0) throw std::invalid_argument("num_graphs must be positive");
    if (cfg.base_nodes_min > cfg.base_nodes_max)
        throw std::invalid_argument("base_nodes range is empty");
    if (cfg.base_nodes_min < kMotifNodes)
        throw std::invalid_argument("motif larger than smallest base graph");
    if (cfg.edge_signal_strength < 0.0 || cfg.edge_signal_strength > 1.0)
        throw std::invalid_argument("edge_signal_strength outside [0,1]");
    if (cfg.node_noise_std < 0.0) throw std::invalid_argument("negative node_noise_std");
    if (!(cfg.rho > 0.0 && cfg.rho <= 1.0)) throw std::invalid_argument("rho outside (0,1]");
}

// One labeled graph: uniform-attachment tree, motif glued on by one edge.
// The label decides only the distribution of motif arc features.
Graph make_graph(const SynthConfig& cfg, int label, Rng& rng, GraphTruth& truth) {
    Graph g;
    g.d_v = cfg.d_v;
    g.d_e = cfg.d_e;
    g.label = label;
    const std::size_t base_n =
        cfg.base_nodes_min +
        rng.below(cfg.base_nodes_max - cfg.base_nodes_min + 1);
    g.num_nodes = base_n + kMotifNodes;

    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::vector<bool> causal;
    for (std::size_t i = 1; i < base_n; ++i) {
        edges.emplace_back(i, rng.below(i));
        causal.push_back(false);
    }
    for (const auto& [u, v] : motif_edges(cfg.motif)) {
        edges.emplace_back(base_n + u, base_n + v);
        causal.push_back(true);
    }
    const std::size_t anchor_base = rng.below(base_n);
    const std::size_t anchor_motif = base_n + rng.below(kMotifNodes);
    edges.emplace_back(anchor_base, anchor_motif);
    causal.push_back(false);

    g.node_features.resize(g.num_nodes * cfg.d_v);
    for (double& v : g.node_features) v = rng.normal(0.0, cfg.node_noise_std);

    const double mu = label == 0 ? cfg.edge_signal_strength : -cfg.edge_signal_strength;
    for (std::size_t e = 0; e < edges.size(); ++e) {
        std::vector<double> row(cfg.d_e);
        for (double& v : row) v = rng.normal(causal[e] ? mu : 0.0, kEdgeNoiseStd);
        const auto& [u, w] = edges[e];
        for (int rep = 0; rep < 2; ++rep) {
            g.arc_src.push_back(rep == 0 ? u : w);
            g.arc_dst.push_back(rep == 0 ? w : u);
            g.edge_features.insert(g.edge_features.end(), row.begin(), row.end());
            if (causal[e]) truth.causal_arcs.push_back(g.arc_src.size() - 1);
        }
    }
    for (std::size_t i = 0; i < kMotifNodes; ++i) truth.causal_nodes.push_back(base_n + i);
    return g;
}

void fill_split(const SynthConfig& cfg, std::uint64_t split_id, std::size_t n_class0,
                std::size_t n_class1, Dataset& ds, GroundTruth& gt) {
    ds.num_classes = 2;
    ds.d_v = cfg.d_v;
    ds.d_e = cfg.d_e;
    const std::size_t total = n_class0 + n_class1;
    for (std::size_t i = 0; i < total; ++i) {
        const int label = i < n_class0 ? 0 : 1;
        Rng rng(seed_stream(cfg.seed, streams::kSynth, split_id, i));
        GraphTruth truth;
        ds.graphs.push_back(make_graph(cfg, label, rng, truth));
        gt.per_graph.push_back(std::move(truth));
    }
}

}  // namespace

SynthBundle generate_dataset(const SynthConfig& cfg) {
    check_config(cfg);
    SynthBundle out;
    const std::size_t n_train = cfg.num_graphs;
    const std::size_t n_major =
        static_cast<std::size_t>(std::llround(static_cast<double>(n_train) / (1.0 + cfg.rho)));
    const std::size_t n_minor = n_train - n_major;
    if (n_minor == 0) throw std::invalid_argument("rho yields zero minority graphs");
    const std::size_t n_valid = n_train / 4;
    const std::size_t n_test = n_train / 2;

    fill_split(cfg, 0, n_major, n_minor, out.train, out.train_truth);
    fill_split(cfg, 1, (n_valid + 1) / 2, n_valid / 2, out.valid, out.valid_truth);
    fill_split(cfg, 2, (n_test + 1) / 2, n_test / 2, out.test, out.test_truth);
    out.train.split_tag = "train";
    out.valid.split_tag = "valid";
    out.test.split_tag = "test";
    validate_dataset(out.train);
    validate_dataset(out.valid);
    validate_dataset(out.test);
    return out;
}

Dataset apply_imbalance(const Dataset& ds, double rho, std::uint64_t seed) {
    if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("rho outside (0,1]");
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
        const int y = ds.graphs[i].label;
        if (y < 0 || y > 1) throw std::invalid_argument("apply_imbalance expects 2 classes");
        by_class[y].push_back(i);
    }
    if (by_class[0].empty() || by_class[1].empty())
        throw std::invalid_argument("apply_imbalance needs both classes present");
    const int minority = by_class[1].size() <= by_class[0].size() ? 1 : 0;
    const std::size_t n_major = by_class[1 - minority].size();
    const std::size_t target =
        static_cast<std::size_t>(std::llround(rho * static_cast<double>(n_major)));
    if (target == 0) throw std::invalid_argument("rho yields zero minority graphs");
    std::vector<std::size_t> keep = by_class[1 - minority];
    if (target >= by_class[minority].size()) {
        keep.insert(keep.end(), by_class[minority].begin(), by_class[minority].end());
    } else {
        std::vector<std::size_t> pool = by_class[minority];
        Rng rng(seed_stream(seed, streams::kImbalance));
        rng.shuffle(pool);
        keep.insert(keep.end(), pool.begin(), pool.begin() + target);
    }
    std::sort(keep.begin(), keep.end());
    Dataset out;
    out.num_classes = ds.num_classes;
    out.d_v = ds.d_v;
    out.d_e = ds.d_e;
    out.split_tag = ds.split_tag;
    for (std::size_t i : keep) out.graphs.push_back(ds.graphs[i]);
    return out;
}

Dataset permute_edge_features(const Dataset& ds, double proportion, std::uint64_t seed) {
    if (proportion < 0.0 || proportion > 1.0)
        throw std::invalid_argument("proportion outside [0,1]");
    Dataset out = ds;
    std::vector<std::pair<std::size_t, std::size_t>> slots;  // (graph, arc)
    for (std::size_t gi = 0; gi < ds.graphs.size(); ++gi)
        for (std::size_t k = 0; k < ds.graphs[gi].num_arcs(); ++k) slots.emplace_back(gi, k);
    const std::size_t m =
        static_cast<std::size_t>(proportion * static_cast<double>(slots.size()));
    if (m == 0) return out;
    Rng rng(seed_stream(seed, streams::kNoise));
    rng.shuffle(slots);
    slots.resize(m);
    std::vector<std::uint32_t> pi = rng.permutation(m);
    const std::size_t d_e = ds.d_e;
    std::vector<double> rows(m * d_e);
    for (std::size_t i = 0; i < m; ++i) {
        const auto& [gi, k] = slots[pi[i]];
        const double* src = ds.graphs[gi].edge_features.data() + k * d_e;
        std::copy(src, src + d_e, rows.begin() + i * d_e);
    }
    for (std::size_t i = 0; i < m; ++i) {
        const auto& [gi, k] = slots[i];
        std::copy(rows.begin() + i * d_e, rows.begin() + (i + 1) * d_e,
                  out.graphs[gi].edge_features.begin() + k * d_e);
    }
    return out;
}

void save_truth(const GroundTruth& gt, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "ECAL-TRUTH v1 N=" << gt.per_graph.size() << "\n";
    for (const GraphTruth& t : gt.per_graph) {
        out << "G " << t.causal_nodes.size() << " " << t.causal_arcs.size() << "\n";
        if (!t.causal_nodes.empty()) {
            for (std::size_t i = 0; i < t.causal_nodes.size(); ++i)
                out << (i ? " " : "") << t.causal_nodes[i];
            out << "\n";
        }
        if (!t.causal_arcs.empty()) {
            for (std::size_t i = 0; i < t.causal_arcs.size(); ++i)
                out << (i ? " " : "") << t.causal_arcs[i];
            out << "\n";
        }
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

GroundTruth load_truth(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    std::size_t line_no = 0;
    auto next_tokens = [&](std::vector<std::string>& toks) {
        while (std::getline(in, line)) {
            ++line_no;
            toks.clear();
            std::istringstream ss(line);
            std::string tok;
            while (ss >> tok) toks.push_back(tok);
            if (toks.empty() || toks[0][0] == '#') continue;
            return true;
        }
        return false;
    };
    auto to_uint = [&](const std::string& s) {
        std::uint64_t v = 0;
        if (!parse_uint(s, v)) throw ParseError(line_no, "bad integer '" + s + "'");
        return v;
    };
    std::vector<std::string> toks;
    if (!next_tokens(toks) || toks.size() != 3 || toks[0] != "ECAL-TRUTH" || toks[1] != "v1" ||
        toks[2].rfind("N=", 0) != 0)
        throw ParseError(line_no ? line_no : 1, "expected header 'ECAL-TRUTH v1 N='");
    const std::uint64_t n = to_uint(toks[2].substr(2));
    GroundTruth gt;
    gt.per_graph.resize(n);
    for (std::uint64_t gi = 0; gi < n; ++gi) {
        if (!next_tokens(toks) || toks.size() != 3 || toks[0] != "G")
            throw ParseError(line_no, "expected 'G <nodes> <arcs>'");
        const std::uint64_t nn = to_uint(toks[1]);
        const std::uint64_t na = to_uint(toks[2]);
        if (nn > 0) {
            if (!next_tokens(toks) || toks.size() != nn)
                throw ParseError(line_no, "expected " + std::to_string(nn) + " node indices");
            for (const std::string& s : toks) gt.per_graph[gi].causal_nodes.push_back(to_uint(s));
        }
        if (na > 0) {
            if (!next_tokens(toks) || toks.size() != na)
                throw ParseError(line_no, "expected " + std::to_string(na) + " arc indices");
            for (const std::string& s : toks) gt.per_graph[gi].causal_arcs.push_back(to_uint(s));
        }
    }
    return gt;
}

}  // namespace ecal
