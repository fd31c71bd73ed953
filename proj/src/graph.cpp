#include "ecal/graph.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <utility>

#include "ecal/format.hpp"

namespace ecal {

namespace {
std::string rule_at(const std::string& rule, std::size_t graph_index) {
    return rule + ", graph " + std::to_string(graph_index);
}
}  // namespace

void validate_graph(const Graph& g, std::size_t graph_index, int num_classes) {
    if (g.num_nodes == 0) throw ValidationError(rule_at("empty graph", graph_index));
    if (g.label < 0 || g.label >= num_classes)
        throw ValidationError(rule_at("label out of range", graph_index));
    if (g.arc_src.size() != g.arc_dst.size())
        throw ValidationError(rule_at("arc endpoint count mismatch", graph_index));
    if (g.node_features.size() != g.num_nodes * g.d_v)
        throw ValidationError(rule_at("node feature rows mismatch", graph_index));
    if (g.edge_features.size() != g.num_arcs() * g.d_e)
        throw ValidationError(rule_at("edge feature rows mismatch", graph_index));
    for (std::size_t k = 0; k < g.num_arcs(); ++k) {
        if (g.arc_src[k] >= g.num_nodes || g.arc_dst[k] >= g.num_nodes)
            throw ValidationError(rule_at("node index out of range", graph_index));
        if (g.arc_src[k] == g.arc_dst[k])
            throw ValidationError(rule_at("self-loop arc", graph_index));
    }
    std::vector<std::pair<std::size_t, std::size_t>> arcs(g.num_arcs());
    for (std::size_t k = 0; k < g.num_arcs(); ++k) arcs[k] = {g.arc_src[k], g.arc_dst[k]};
    std::sort(arcs.begin(), arcs.end());
    if (std::adjacent_find(arcs.begin(), arcs.end()) != arcs.end())
        throw ValidationError(rule_at("duplicate arc", graph_index));
}

void validate_dataset(const Dataset& ds) {
    for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
        const Graph& g = ds.graphs[i];
        if (g.d_v != ds.d_v || g.d_e != ds.d_e)
            throw ValidationError(rule_at("feature width mismatch", i));
        validate_graph(g, i, ds.num_classes);
    }
}

namespace {

struct LineReader {
    std::istream& in;
    std::size_t line_no = 0;
    std::vector<std::string> tokens;

    explicit LineReader(std::istream& in_) : in(in_) {}

    // Advances to the next line carrying tokens; blank and # lines skipped.
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

std::uint64_t want_uint(const LineReader& r, const std::string& tok, const char* what) {
    std::uint64_t v = 0;
    if (!parse_uint(tok, v)) throw ParseError(r.line_no, std::string("bad ") + what + " '" + tok + "'");
    return v;
}

double want_real(const LineReader& r, const std::string& tok, const char* what) {
    double v = 0.0;
    if (!parse_double(tok, v)) throw ParseError(r.line_no, std::string("bad ") + what + " '" + tok + "'");
    return v;
}

std::uint64_t want_tagged(const LineReader& r, const std::string& tok, const char* tag) {
    const std::string prefix = std::string(tag) + "=";
    if (tok.rfind(prefix, 0) != 0)
        throw ParseError(r.line_no, std::string("expected ") + prefix + "<int>, got '" + tok + "'");
    return want_uint(r, tok.substr(prefix.size()), tag);
}

}  // namespace

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    LineReader r(in);

    if (!r.next()) throw ParseError(1, "missing header");
    if (r.tokens.size() != 6 || r.tokens[0] != "ECAL-GRAPHS" || r.tokens[1] != "v1")
        throw ParseError(r.line_no, "expected header 'ECAL-GRAPHS v1 C= DV= DE= N='");
    Dataset ds;
    ds.num_classes = static_cast<int>(want_tagged(r, r.tokens[2], "C"));
    ds.d_v = want_tagged(r, r.tokens[3], "DV");
    ds.d_e = want_tagged(r, r.tokens[4], "DE");
    const std::uint64_t n = want_tagged(r, r.tokens[5], "N");

    ds.graphs.reserve(n);
    for (std::uint64_t gi = 0; gi < n; ++gi) {
        if (!r.next()) throw ParseError(r.line_no + 1, "unexpected end of file, expected graph header");
        if (r.tokens.size() != 4 || r.tokens[0] != "G")
            throw ParseError(r.line_no, "expected 'G <num_nodes> <num_arcs> <label>'");
        Graph g;
        g.d_v = ds.d_v;
        g.d_e = ds.d_e;
        g.num_nodes = want_uint(r, r.tokens[1], "node count");
        const std::uint64_t arcs = want_uint(r, r.tokens[2], "arc count");
        g.label = static_cast<int>(want_uint(r, r.tokens[3], "label"));

        g.node_features.reserve(g.num_nodes * ds.d_v);
        for (std::size_t v = 0; v < g.num_nodes; ++v) {
            if (!r.next()) throw ParseError(r.line_no + 1, "unexpected end of file in node features");
            if (r.tokens.size() != ds.d_v)
                throw ParseError(r.line_no, "expected " + std::to_string(ds.d_v) + " node feature values");
            for (const std::string& t : r.tokens)
                g.node_features.push_back(want_real(r, t, "node feature"));
        }
        g.arc_src.reserve(arcs);
        g.arc_dst.reserve(arcs);
        g.edge_features.reserve(arcs * ds.d_e);
        for (std::uint64_t k = 0; k < arcs; ++k) {
            if (!r.next()) throw ParseError(r.line_no + 1, "unexpected end of file in arcs");
            if (r.tokens.size() != 2 + ds.d_e)
                throw ParseError(r.line_no, "expected '<src> <dst>' and " + std::to_string(ds.d_e) +
                                                " edge feature values");
            g.arc_src.push_back(want_uint(r, r.tokens[0], "arc src"));
            g.arc_dst.push_back(want_uint(r, r.tokens[1], "arc dst"));
            for (std::size_t c = 0; c < ds.d_e; ++c)
                g.edge_features.push_back(want_real(r, r.tokens[2 + c], "edge feature"));
        }
        ds.graphs.push_back(std::move(g));
    }
    if (r.next()) throw ParseError(r.line_no, "trailing content after last graph");
    validate_dataset(ds);
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "ECAL-GRAPHS v1 C=" << ds.num_classes << " DV=" << ds.d_v << " DE=" << ds.d_e
        << " N=" << ds.graphs.size() << "\n";
    for (const Graph& g : ds.graphs) {
        out << "\nG " << g.num_nodes << " " << g.num_arcs() << " " << g.label << "\n";
        for (std::size_t v = 0; v < g.num_nodes; ++v) {
            for (std::size_t c = 0; c < g.d_v; ++c) {
                if (c) out << " ";
                out << format_double(g.node_features[v * g.d_v + c]);
            }
            out << "\n";
        }
        for (std::size_t k = 0; k < g.num_arcs(); ++k) {
            out << g.arc_src[k] << " " << g.arc_dst[k];
            for (std::size_t c = 0; c < g.d_e; ++c)
                out << " " << format_double(g.edge_features[k * g.d_e + c]);
            out << "\n";
        }
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

Batch make_batch(const std::vector<Graph>& graphs) {
    if (graphs.empty()) throw std::invalid_argument("empty batch");
    Batch b;
    b.num_graphs = graphs.size();
    b.d_v = graphs[0].d_v;
    b.d_e = graphs[0].d_e;
    b.node_offset.push_back(0);
    b.arc_offset.push_back(0);
    for (const Graph& g : graphs) {
        if (g.d_v != b.d_v || g.d_e != b.d_e)
            throw std::invalid_argument("heterogeneous feature widths");
        b.num_nodes += g.num_nodes;
        b.num_arcs += g.num_arcs();
        b.node_offset.push_back(b.num_nodes);
        b.arc_offset.push_back(b.num_arcs);
    }
    b.node_features.reserve(b.num_nodes * b.d_v);
    b.edge_features.reserve(b.num_arcs * b.d_e);
    b.arc_src.reserve(b.num_arcs);
    b.arc_dst.reserve(b.num_arcs);
    b.node_graph.reserve(b.num_nodes);
    b.arc_graph.reserve(b.num_arcs);
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
        const Graph& g = graphs[gi];
        const std::size_t base = b.node_offset[gi];
        b.node_features.insert(b.node_features.end(), g.node_features.begin(),
                               g.node_features.end());
        b.edge_features.insert(b.edge_features.end(), g.edge_features.begin(),
                               g.edge_features.end());
        for (std::size_t k = 0; k < g.num_arcs(); ++k) {
            b.arc_src.push_back(base + g.arc_src[k]);
            b.arc_dst.push_back(base + g.arc_dst[k]);
            b.arc_graph.push_back(gi);
        }
        for (std::size_t v = 0; v < g.num_nodes; ++v) b.node_graph.push_back(gi);
        b.labels.push_back(g.label);
    }
    b.arcs_by_src = SegmentIndex::build(b.arc_src, b.num_nodes);
    b.nodes_by_graph = SegmentIndex::build(b.node_graph, b.num_graphs);
    b.arcs_by_graph = SegmentIndex::build(b.arc_graph, b.num_graphs);
    return b;
}

std::vector<Graph> unbatch_graphs(const Batch& batch) {
    std::vector<Graph> out(batch.num_graphs);
    for (std::size_t gi = 0; gi < batch.num_graphs; ++gi) {
        Graph& g = out[gi];
        g.d_v = batch.d_v;
        g.d_e = batch.d_e;
        g.label = batch.labels[gi];
        const std::size_t n0 = batch.node_offset[gi], n1 = batch.node_offset[gi + 1];
        const std::size_t a0 = batch.arc_offset[gi], a1 = batch.arc_offset[gi + 1];
        g.num_nodes = n1 - n0;
        g.node_features.assign(batch.node_features.begin() + n0 * batch.d_v,
                               batch.node_features.begin() + n1 * batch.d_v);
        g.edge_features.assign(batch.edge_features.begin() + a0 * batch.d_e,
                               batch.edge_features.begin() + a1 * batch.d_e);
        for (std::size_t k = a0; k < a1; ++k) {
            g.arc_src.push_back(batch.arc_src[k] - n0);
            g.arc_dst.push_back(batch.arc_dst[k] - n0);
        }
    }
    return out;
}

Graph permute_nodes(const Graph& g, const std::vector<std::size_t>& perm) {
    if (perm.size() != g.num_nodes) throw std::invalid_argument("permutation is not a bijection");
    std::vector<bool> seen(g.num_nodes, false);
    for (std::size_t p : perm) {
        if (p >= g.num_nodes || seen[p])
            throw std::invalid_argument("permutation is not a bijection");
        seen[p] = true;
    }
    Graph out;
    out.num_nodes = g.num_nodes;
    out.d_v = g.d_v;
    out.d_e = g.d_e;
    out.label = g.label;
    out.node_features.resize(g.node_features.size());
    for (std::size_t i = 0; i < g.num_nodes; ++i)
        std::copy(g.node_features.begin() + i * g.d_v, g.node_features.begin() + (i + 1) * g.d_v,
                  out.node_features.begin() + perm[i] * g.d_v);
    out.arc_src.resize(g.num_arcs());
    out.arc_dst.resize(g.num_arcs());
    for (std::size_t k = 0; k < g.num_arcs(); ++k) {
        out.arc_src[k] = perm[g.arc_src[k]];
        out.arc_dst[k] = perm[g.arc_dst[k]];
    }
    out.edge_features = g.edge_features;
    return out;
}

bool graphs_equal(const Graph& a, const Graph& b) {
    return a.num_nodes == b.num_nodes && a.d_v == b.d_v && a.d_e == b.d_e &&
           a.label == b.label && a.arc_src == b.arc_src && a.arc_dst == b.arc_dst &&
           a.node_features == b.node_features && a.edge_features == b.edge_features;
}

}  // namespace ecal
