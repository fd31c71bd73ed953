#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecal/kernels.hpp"

namespace ecal {

struct ParseError : std::runtime_error {
    std::size_t line;
    ParseError(std::size_t line_, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line_) + ": " + msg), line(line_) {}
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Attributed directed graph. Arc k runs (arc_src[k], arc_dst[k]) and owns
/// edge feature row k. Undirected inputs are stored as both arcs with the
/// feature row duplicated. Immutable once constructed and validated.
struct Graph {
    std::size_t num_nodes = 0;
    std::size_t d_v = 0;
    std::size_t d_e = 0;
    int label = 0;
    std::vector<std::size_t> arc_src;
    std::vector<std::size_t> arc_dst;
    std::vector<double> node_features;  // num_nodes x d_v
    std::vector<double> edge_features;  // num_arcs x d_e

    std::size_t num_arcs() const { return arc_src.size(); }
};

struct Dataset {
    std::vector<Graph> graphs;
    int num_classes = 2;
    std::size_t d_v = 0;
    std::size_t d_e = 0;
    std::string split_tag = "train";
};

/// Several graphs packed into one disjoint union with global node ids.
struct Batch {
    std::size_t num_graphs = 0;
    std::size_t num_nodes = 0;
    std::size_t num_arcs = 0;
    std::size_t d_v = 0;
    std::size_t d_e = 0;
    std::vector<double> node_features;
    std::vector<double> edge_features;
    std::vector<std::size_t> arc_src;
    std::vector<std::size_t> arc_dst;
    std::vector<std::size_t> node_graph;
    std::vector<std::size_t> arc_graph;
    std::vector<int> labels;
    std::vector<std::size_t> node_offset;  // num_graphs + 1
    std::vector<std::size_t> arc_offset;   // num_graphs + 1
    SegmentIndex arcs_by_src;              // attention segments, one per node
    SegmentIndex nodes_by_graph;
    SegmentIndex arcs_by_graph;
};

void validate_graph(const Graph& g, std::size_t graph_index, int num_classes);
void validate_dataset(const Dataset& ds);

Dataset load_dataset(const std::string& path);
void save_dataset(const Dataset& ds, const std::string& path);

Batch make_batch(const std::vector<Graph>& graphs);
std::vector<Graph> unbatch_graphs(const Batch& batch);

Graph permute_nodes(const Graph& g, const std::vector<std::size_t>& perm);

bool graphs_equal(const Graph& a, const Graph& b);

}  // namespace ecal
