#include "ecal/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace ecal {

Var ce_loss(Tape& t, Var logits, const std::vector<int>& labels) {
    return t.nll_mean(t.log_softmax_rows(logits), labels);
}

Var kl_uniform_loss(Tape& t, Var logits) {
    const Tensor& v = t.value(logits);
    const std::size_t rows = v.rows();
    const std::size_t cols = v.cols();
    check_shape(rows > 0 && cols > 0, "kl_uniform_loss logits");
    Var lsm = t.log_softmax_rows(logits);
    Var p = t.exp_elem(lsm);
    Var shifted = t.affine(lsm, 1.0, std::log(static_cast<double>(cols)));
    Var per_entry = t.mul(p, shifted);
    return t.scale(t.sum_all(per_entry), 1.0 / static_cast<double>(rows));
}

PairingPlan plan_pairing(std::size_t batch_size, PairingMode mode, Rng& rng,
                         bool exclude_self_pairs) {
    if (batch_size == 0) throw std::invalid_argument("pairing needs a nonempty batch");
    PairingPlan plan;
    plan.mode = mode;
    if (mode == PairingMode::full) {
        plan.pairs.reserve(batch_size * batch_size);
        for (std::size_t k = 0; k < batch_size; ++k)
            for (std::size_t kp = 0; kp < batch_size; ++kp) {
                if (exclude_self_pairs && k == kp && batch_size > 1) continue;
                plan.pairs.emplace_back(k, kp);
            }
        return plan;
    }
    std::vector<std::uint32_t> pi = rng.permutation(batch_size);
    if (exclude_self_pairs && batch_size > 1) {
        // Resample until fixed-point free; expected ~e tries.
        bool ok = false;
        while (!ok) {
            ok = true;
            for (std::size_t k = 0; k < batch_size; ++k)
                if (pi[k] == k) { ok = false; break; }
            if (!ok) pi = rng.permutation(batch_size);
        }
    }
    plan.pairs.reserve(batch_size);
    for (std::size_t k = 0; k < batch_size; ++k) plan.pairs.emplace_back(k, pi[k]);
    return plan;
}

Var backdoor_loss(Tape& t, const std::vector<Var>& pv, Var h_c, Var h_t,
                  const std::vector<int>& labels, const LinearH& classifier_mix,
                  const PairingPlan& plan) {
    if (plan.pairs.empty()) throw std::invalid_argument("empty pairing plan");
    std::vector<std::size_t> ks, kps;
    std::vector<int> pair_labels;
    ks.reserve(plan.pairs.size());
    kps.reserve(plan.pairs.size());
    pair_labels.reserve(plan.pairs.size());
    for (const auto& [k, kp] : plan.pairs) {
        ks.push_back(k);
        kps.push_back(kp);
        pair_labels.push_back(labels[k]);
    }
    Var hc = t.gather_rows(h_c, ks);
    Var ht = t.gather_rows(h_t, kps);
    Var logits = linear_forward(t, pv, classifier_mix, t.add(hc, ht));
    return ce_loss(t, logits, pair_labels);
}

Var total_loss(Tape& t, Var ce, Var kl, Var ba, double lambda1, double lambda2,
               LossBreakdown& out) {
    if (lambda1 < 0.0 || lambda2 < 0.0) throw std::invalid_argument("negative lambda");
    out.lambda1 = lambda1;
    out.lambda2 = lambda2;
    out.ce = t.value(ce).values[0];
    out.kl = kl.valid() ? t.value(kl).values[0] : 0.0;
    out.ba = ba.valid() ? t.value(ba).values[0] : 0.0;
    Var total = ce;
    if (lambda1 > 0.0) {
        check_shape(kl.valid(), "total_loss kl term");
        total = t.add(total, t.scale(kl, lambda1));
    }
    if (lambda2 > 0.0) {
        check_shape(ba.valid(), "total_loss ba term");
        total = t.add(total, t.scale(ba, lambda2));
    }
    out.total = t.value(total).values[0];
    return total;
}

}  // namespace ecal
