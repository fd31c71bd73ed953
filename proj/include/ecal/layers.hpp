#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ecal/graph.hpp"
#include "ecal/rng.hpp"
#include "ecal/tape.hpp"
#include "ecal/tensor.hpp"

namespace ecal {

constexpr std::size_t npos = static_cast<std::size_t>(-1);
constexpr double kLeakySlope = 0.2;

/// Ordered, named parameter store. Handles are indices into `tensors`; the
/// order fixes both RNG consumption at init and Var layout on a tape.
struct ParamSet {
    std::vector<std::string> names;
    std::vector<Tensor> tensors;

    std::size_t add(const std::string& name, Tensor t);
    std::size_t find(const std::string& name) const;  // npos when absent
    std::size_t size() const { return tensors.size(); }
};

struct LinearH {
    std::size_t w = npos;
    std::size_t b = npos;  // npos means bias-free
};

struct MlpH {
    LinearH l1, l2;
};

enum class EncoderKind { gcn, gat, egatv1, egatv2 };

std::string encoder_name(EncoderKind k);
bool parse_encoder(const std::string& s, EncoderKind& out);
bool encoder_uses_edges(EncoderKind k);

struct EgatLayerH {
    LinearH w_src, w_dst, w_edge;  // projections, bias-free
    LinearH w_edge_out;            // egatv2 only
    std::size_t attn = npos;       // attention vector, stored [len x 1]
    MlpH mlp;                      // d_h -> d_h after aggregation
};

struct GcnLayerH {
    LinearH w;
};

struct EncoderStackH {
    EncoderKind kind = EncoderKind::egatv2;
    std::size_t d_h = 0;
    std::vector<EgatLayerH> attn_layers;
    std::vector<GcnLayerH> gcn_layers;
    std::size_t depth() const {
        return kind == EncoderKind::gcn ? gcn_layers.size() : attn_layers.size();
    }
};

LinearH init_linear(ParamSet& ps, Rng& rng, const std::string& name,
                    std::size_t fan_in, std::size_t fan_out, bool bias);
MlpH init_mlp(ParamSet& ps, Rng& rng, const std::string& name,
              std::size_t d_in, std::size_t d_hidden, std::size_t d_out);
EncoderStackH init_encoder(ParamSet& ps, Rng& rng, const std::string& name,
                           EncoderKind kind, std::size_t depth,
                           std::size_t d_v, std::size_t d_e, std::size_t d_h);

Var linear_forward(Tape& t, const std::vector<Var>& pv, const LinearH& h, Var x);
Var mlp_forward(Tape& t, const std::vector<Var>& pv, const MlpH& h, Var x);

/// Self-loop-augmented arc list with symmetric degree normalization,
/// shared by every layer of a GCN stack over one batch.
struct GcnPlan {
    std::vector<std::size_t> aug_dst;
    SegmentIndex aug_by_src;
    Tensor coeff;  // per augmented arc
};
GcnPlan build_gcn_plan(const Batch& batch);

struct EncoderOut {
    Var nodes;                        // [num_nodes x d_h]
    Var edges;                        // projected or updated edge rows; invalid for gcn/gat
    Var attn;                         // per-arc weights [num_arcs x 1]; invalid for gcn
    std::vector<std::uint8_t> isolated;  // per node, empty neighborhood
};

EncoderOut encoder_forward(Tape& t, const std::vector<Var>& pv, const EncoderStackH& enc,
                           const Batch& batch, Var node_feats, Var edge_feats,
                           const GcnPlan* gcn_plan);

}  // namespace ecal
