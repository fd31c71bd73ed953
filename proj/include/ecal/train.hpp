#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ecal/losses.hpp"
#include "ecal/model.hpp"
#include "ecal/synth.hpp"

namespace ecal {

struct TrainConfig {
    EncoderKind encoder = EncoderKind::egatv2;
    CausalMode causal = CausalMode::ecal;
    double lambda1 = 0.5;
    double lambda2 = 0.5;
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    double lr = 0.005;
    std::uint64_t seed = 0;
    PairingMode pairing = PairingMode::perm;
    bool exclude_self_pairs = false;
    std::size_t d_h = 32;
    std::size_t depth = 2;
};

struct EpochRecord {
    LossBreakdown loss;  // mean over the epoch's steps
    double valid_acc = 0.0;
};

struct RunRecord {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;  // 1-based, earliest among ties
    double best_valid_acc = 0.0;
    double test_acc = 0.0;
    std::vector<double> per_class_acc;
    std::optional<double> auc;
    double wall_seconds = 0.0;  // stdout only, never serialized
};

struct TrainResult {
    ModelParams model;
    RunRecord record;
};

/// Minibatch training with adaptive-moment updates on the weighted
/// objective; returns the parameters of the best validation epoch.
/// Deterministic given (cfg, datasets): shuffling, pairing and init draw
/// from disjoint seed streams.
TrainResult train(const TrainConfig& cfg, const Dataset& train_ds, const Dataset& valid_ds);

struct EvalResult {
    double accuracy = 0.0;
    std::vector<double> per_class;
};

EvalResult evaluate(const ModelParams& mp, const Dataset& ds);

/// Mean over the batch's graphs of the per-graph rank AUC of alpha_edge
/// against the generator's causal arc sets. Graphs whose truth is
/// degenerate (all arcs causal, or none) contribute nothing.
std::optional<double> attention_recovery_auc(const CausalScores& scores, const Batch& batch,
                                             const GroundTruth& truth);
std::optional<double> mean_attention_auc(const ModelParams& mp, const Dataset& ds,
                                         const GroundTruth& truth);

std::string config_hash(const TrainConfig& cfg);

void write_run_csv(const RunRecord& rec, const std::string& path);
void write_summary_csv(const TrainConfig& cfg, const RunRecord& rec, const std::string& path);

struct LossAblationResult {
    std::vector<std::string> variants;            // full, no_kl, no_ba, no_cd
    std::vector<std::uint64_t> seeds;
    std::vector<std::vector<double>> acc;         // [variant][seed index]
    std::vector<double> mean, stddev;             // per variant
};

LossAblationResult run_loss_ablation(const TrainConfig& base, const SynthConfig& data_cfg,
                                     const std::vector<std::uint64_t>& seeds);
void write_loss_ablation_csv(const LossAblationResult& r, const std::string& path);

struct NoiseAblationResult {
    std::vector<double> proportions;
    std::vector<double> accuracy;
};

NoiseAblationResult run_noise_ablation(const TrainConfig& base, const SynthConfig& data_cfg,
                                       const std::vector<double>& proportions);
void write_noise_ablation_csv(const NoiseAblationResult& r, const std::string& path);

}  // namespace ecal
