#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ecal/graph.hpp"
#include "ecal/layers.hpp"
#include "ecal/tape.hpp"

namespace ecal {

enum class CausalMode { none, cal, ecal };

std::string causal_name(CausalMode m);
bool parse_causal(const std::string& s, CausalMode& out);

struct ModelConfig {
    EncoderKind encoder = EncoderKind::egatv2;
    CausalMode causal = CausalMode::ecal;
    std::size_t d_v = 4;
    std::size_t d_e = 4;
    std::size_t d_h = 32;
    int num_classes = 2;
    std::size_t depth = 2;
    std::uint64_t seed = 0;
};

/// Full parameter bundle. In causal modes the estimator produces the
/// causality scores, and two further encoders embed the soft subgraphs;
/// mode none keeps only causal_encoder + classifier_c.
struct ModelParams {
    ModelConfig cfg;
    ParamSet params;
    EncoderStackH estimator;
    MlpH mlp_node;
    MlpH mlp_edge;
    bool has_edge_head = false;
    EncoderStackH causal_encoder;
    EncoderStackH trivial_encoder;
    LinearH classifier_c;
    LinearH classifier_t;
    LinearH classifier_mix;
};

ModelParams init_model(const ModelConfig& cfg);

/// Pushes every parameter tensor onto the tape in ParamSet order.
std::vector<Var> push_params(Tape& t, const ParamSet& ps, bool requires_grad);

struct ModelForward {
    Var logits_c;    // [B x C]
    Var logits_t;    // causal modes only
    Var h_c;         // [B x d_h]
    Var h_t;
    Var alpha_node;  // [num_nodes], causal modes only
    Var alpha_edge;  // [num_arcs]
    EncoderOut estimator_out;
    std::vector<std::uint8_t> isolated;
};

ModelForward model_forward(Tape& t, const std::vector<Var>& pv, const ModelParams& mp,
                           const Batch& batch);

struct CausalScores {
    std::vector<double> alpha_node;
    std::vector<double> alpha_edge;
};

CausalScores estimate_causal_scores(const ModelParams& mp, const Batch& batch);

/// Plain-value subgraph split used by structural tests; training uses the
/// equivalent tape ops inside model_forward.
struct SubgraphPair {
    std::vector<double> causal_nodes, causal_edges;
    std::vector<double> trivial_nodes, trivial_edges;
};
SubgraphPair split_subgraphs(const Batch& batch, const CausalScores& scores);

std::vector<double> predict_logits(const ModelParams& mp, const Batch& batch);

void save_model(const ModelParams& mp, const std::string& path);
ModelParams load_model(const std::string& path);

}  // namespace ecal
