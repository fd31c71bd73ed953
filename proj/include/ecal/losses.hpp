#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "ecal/layers.hpp"
#include "ecal/rng.hpp"
#include "ecal/tape.hpp"

namespace ecal {

Var ce_loss(Tape& t, Var logits, const std::vector<int>& labels);

/// Mean over rows of KL(softmax(logits) || uniform). Written as
/// sum p*(log p + ln C) so a row-constant logit vector cancels to 0.0 with
/// no residual.
Var kl_uniform_loss(Tape& t, Var logits);

enum class PairingMode { perm, full };

struct PairingPlan {
    PairingMode mode = PairingMode::perm;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (causal k, trivial k')
};

PairingPlan plan_pairing(std::size_t batch_size, PairingMode mode, Rng& rng,
                         bool exclude_self_pairs);

Var backdoor_loss(Tape& t, const std::vector<Var>& pv, Var h_c, Var h_t,
                  const std::vector<int>& labels, const LinearH& classifier_mix,
                  const PairingPlan& plan);

struct LossBreakdown {
    double ce = 0.0;
    double kl = 0.0;
    double ba = 0.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double total = 0.0;
};

/// Assembles ce + λ1·kl + λ2·ba on the tape. Zero-λ terms are left out of
/// the graph entirely, so their forward nodes never enter the backward walk
/// and a λ1=λ2=0 run differentiates exactly the plain ce objective.
Var total_loss(Tape& t, Var ce, Var kl, Var ba, double lambda1, double lambda2,
               LossBreakdown& out);

}  // namespace ecal
