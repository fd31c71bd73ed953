#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ecal/graph.hpp"

namespace ecal {

enum class MotifKind { cycle5, house };

std::string motif_name(MotifKind m);
bool parse_motif(const std::string& s, MotifKind& out);

/// num_graphs is the TRAIN split size; the validation and test splits are
/// sized at roughly a quarter and a half of it and stay class-balanced,
/// while the train histogram follows rho (minority/majority).
struct SynthConfig {
    std::size_t num_graphs = 600;
    std::size_t base_nodes_min = 6;
    std::size_t base_nodes_max = 10;
    MotifKind motif = MotifKind::cycle5;
    double edge_signal_strength = 0.8;
    double node_noise_std = 1.0;
    double rho = 1.0;
    std::size_t d_v = 4;
    std::size_t d_e = 4;
    std::uint64_t seed = 0;
};

struct GraphTruth {
    std::vector<std::size_t> causal_nodes;
    std::vector<std::size_t> causal_arcs;
};

struct GroundTruth {
    std::vector<GraphTruth> per_graph;
};

struct SynthBundle {
    Dataset train, valid, test;
    GroundTruth train_truth, valid_truth, test_truth;
};

SynthBundle generate_dataset(const SynthConfig& cfg);

Dataset apply_imbalance(const Dataset& ds, double rho, std::uint64_t seed);

Dataset permute_edge_features(const Dataset& ds, double proportion, std::uint64_t seed);

void save_truth(const GroundTruth& gt, const std::string& path);
GroundTruth load_truth(const std::string& path);

}  // namespace ecal
