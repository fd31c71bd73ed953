#include "ecal/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "ecal/format.hpp"
#include "ecal/rng.hpp"
#include "ecal/stats.hpp"
#include "ecal/tape.hpp"

namespace ecal {

namespace {

constexpr std::size_t kEvalChunk = 128;

struct AdamState {
    std::vector<Tensor> m, v;
    std::uint64_t t = 0;
};

AdamState make_adam(const ParamSet& ps) {
    AdamState st;
    st.m.reserve(ps.size());
    st.v.reserve(ps.size());
    for (const Tensor& p : ps.tensors) {
        st.m.push_back(Tensor::zeros_like(p));
        st.v.push_back(Tensor::zeros_like(p));
    }
    return st;
}

void adam_step(AdamState& st, ParamSet& ps, const std::vector<Tensor>& grads, double lr) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++st.t;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(st.t));
    for (std::size_t i = 0; i < ps.size(); ++i) {
        double* p = ps.tensors[i].values.data();
        double* m = st.m[i].values.data();
        double* v = st.v[i].values.data();
        const double* g = grads[i].values.data();
        const std::size_t n = ps.tensors[i].numel();
        for (std::size_t j = 0; j < n; ++j) {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            p[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps);
        }
    }
}

Batch batch_from_indices(const Dataset& ds, const std::size_t* idx, std::size_t n) {
    std::vector<Graph> sub;
    sub.reserve(n);
    for (std::size_t i = 0; i < n; ++i) sub.push_back(ds.graphs[idx[i]]);
    return make_batch(sub);
}

/// One optimization step on a batch. Loss terms are taped in the fixed
/// order ce, kl, ba so that a zero-weight run never records the skipped
/// term's nodes into the gradient walk.
LossBreakdown train_step(const TrainConfig& cfg, ModelParams& mp, AdamState& adam,
                         const Batch& batch, Rng& pair_rng) {
    Tape tape;
    std::vector<Var> pv = push_params(tape, mp.params, true);
    ModelForward mf = model_forward(tape, pv, mp, batch);

    Var ce = ce_loss(tape, mf.logits_c, batch.labels);
    Var kl, ba;
    double l1 = 0.0, l2 = 0.0;
    if (mp.cfg.causal != CausalMode::none) {
        kl = kl_uniform_loss(tape, mf.logits_t);
        PairingPlan plan =
            plan_pairing(batch.num_graphs, cfg.pairing, pair_rng, cfg.exclude_self_pairs);
        ba = backdoor_loss(tape, pv, mf.h_c, mf.h_t, batch.labels, mp.classifier_mix, plan);
        l1 = cfg.lambda1;
        l2 = cfg.lambda2;
    }
    LossBreakdown bd;
    Var total = total_loss(tape, ce, kl, ba, l1, l2, bd);
    tape.backward(total);

    std::vector<Tensor> grads;
    grads.reserve(pv.size());
    for (Var v : pv) grads.push_back(tape.grad(v));
    adam_step(adam, mp.params, grads, cfg.lr);
    return bd;
}

std::size_t argmax_row(const std::vector<double>& logits, std::size_t row, std::size_t cols) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < cols; ++j)
        if (logits[row * cols + j] > logits[row * cols + best]) best = j;
    return best;
}

}  // namespace

EvalResult evaluate(const ModelParams& mp, const Dataset& ds) {
    if (ds.graphs.empty()) throw std::invalid_argument("evaluate: empty dataset");
    const std::size_t nc = static_cast<std::size_t>(mp.cfg.num_classes);
    std::vector<std::size_t> correct(nc, 0), count(nc, 0);
    std::vector<std::size_t> idx(ds.graphs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::size_t hits = 0;
    for (std::size_t start = 0; start < idx.size(); start += kEvalChunk) {
        const std::size_t n = std::min(kEvalChunk, idx.size() - start);
        Batch b = batch_from_indices(ds, idx.data() + start, n);
        std::vector<double> logits = predict_logits(mp, b);
        for (std::size_t g = 0; g < b.num_graphs; ++g) {
            const std::size_t pred = argmax_row(logits, g, nc);
            const std::size_t lab = static_cast<std::size_t>(b.labels[g]);
            ++count[lab];
            if (pred == lab) {
                ++hits;
                ++correct[lab];
            }
        }
    }
    EvalResult r;
    r.accuracy = static_cast<double>(hits) / static_cast<double>(ds.graphs.size());
    r.per_class.resize(nc, 0.0);
    for (std::size_t c = 0; c < nc; ++c)
        if (count[c] > 0)
            r.per_class[c] = static_cast<double>(correct[c]) / static_cast<double>(count[c]);
    return r;
}

TrainResult train(const TrainConfig& cfg, const Dataset& train_ds, const Dataset& valid_ds) {
    if (train_ds.graphs.empty()) throw std::invalid_argument("train dataset is empty");
    if (valid_ds.graphs.empty()) throw std::invalid_argument("validation dataset is empty");
    if (cfg.batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    if (cfg.epochs == 0) throw std::invalid_argument("epochs must be positive");

    const auto t0 = std::chrono::steady_clock::now();

    ModelConfig mc;
    mc.encoder = cfg.encoder;
    mc.causal = cfg.causal;
    mc.d_v = train_ds.d_v;
    mc.d_e = train_ds.d_e;
    mc.d_h = cfg.d_h;
    mc.num_classes = train_ds.num_classes;
    mc.depth = cfg.depth;
    mc.seed = cfg.seed;

    TrainResult out;
    out.model = init_model(mc);
    AdamState adam = make_adam(out.model.params);

    std::vector<std::size_t> order(train_ds.graphs.size());
    std::vector<Tensor> best_tensors;
    double best_acc = -1.0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng shuffle_rng(seed_stream(cfg.seed, streams::kShuffle, epoch));
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        shuffle_rng.shuffle(order);

        LossBreakdown epoch_loss;
        epoch_loss.lambda1 = cfg.lambda1;
        epoch_loss.lambda2 = cfg.lambda2;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t n = std::min(cfg.batch_size, order.size() - start);
            const std::size_t step = start / cfg.batch_size;
            Batch batch = batch_from_indices(train_ds, order.data() + start, n);
            Rng pair_rng(seed_stream(cfg.seed, streams::kPairing, epoch, step));
            LossBreakdown bd;
            try {
                bd = train_step(cfg, out.model, adam, batch, pair_rng);
            } catch (const std::runtime_error& e) {
                throw std::runtime_error("epoch " + std::to_string(epoch) + " batch " +
                                         std::to_string(step) + ": " + e.what());
            }
            if (!std::isfinite(bd.total))
                throw std::runtime_error("epoch " + std::to_string(epoch) + " batch " +
                                         std::to_string(step) + ": non-finite loss");
            epoch_loss.ce += bd.ce;
            epoch_loss.kl += bd.kl;
            epoch_loss.ba += bd.ba;
            epoch_loss.total += bd.total;
            ++steps;
        }
        const double inv = 1.0 / static_cast<double>(steps);
        epoch_loss.ce *= inv;
        epoch_loss.kl *= inv;
        epoch_loss.ba *= inv;
        epoch_loss.total *= inv;

        EpochRecord rec;
        rec.loss = epoch_loss;
        rec.valid_acc = evaluate(out.model, valid_ds).accuracy;
        out.record.epochs.push_back(rec);

        if (rec.valid_acc > best_acc) {
            best_acc = rec.valid_acc;
            out.record.best_epoch = epoch;
            best_tensors = out.model.params.tensors;
        }
    }
    out.model.params.tensors = std::move(best_tensors);
    out.record.best_valid_acc = best_acc;
    out.record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

std::optional<double> attention_recovery_auc(const CausalScores& scores, const Batch& batch,
                                             const GroundTruth& truth) {
    if (truth.per_graph.size() != batch.num_graphs)
        throw std::invalid_argument("truth misaligned with batch");
    if (scores.alpha_edge.size() != batch.num_arcs)
        throw std::invalid_argument("scores misaligned with batch");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t g = 0; g < batch.num_graphs; ++g) {
        const std::size_t a0 = batch.arc_offset[g];
        const std::size_t a1 = batch.arc_offset[g + 1];
        std::vector<double> vals(scores.alpha_edge.begin() + a0, scores.alpha_edge.begin() + a1);
        std::vector<std::uint8_t> pos(a1 - a0, 0);
        for (std::size_t k : truth.per_graph[g].causal_arcs) {
            if (k >= pos.size()) throw std::invalid_argument("truth arc index out of range");
            pos[k] = 1;
        }
        std::optional<double> auc = rank_auc(vals, pos);
        if (auc) {
            sum += *auc;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

std::optional<double> mean_attention_auc(const ModelParams& mp, const Dataset& ds,
                                         const GroundTruth& truth) {
    if (truth.per_graph.size() != ds.graphs.size())
        throw std::invalid_argument("truth misaligned with dataset");
    std::vector<std::size_t> idx(ds.graphs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t start = 0; start < idx.size(); start += kEvalChunk) {
        const std::size_t cn = std::min(kEvalChunk, idx.size() - start);
        Batch b = batch_from_indices(ds, idx.data() + start, cn);
        CausalScores sc = estimate_causal_scores(mp, b);
        // Mean over graphs, not chunks: accumulate per-graph AUCs directly.
        for (std::size_t g = 0; g < b.num_graphs; ++g) {
            const std::size_t a0 = b.arc_offset[g];
            const std::size_t a1 = b.arc_offset[g + 1];
            std::vector<double> vals(sc.alpha_edge.begin() + a0, sc.alpha_edge.begin() + a1);
            std::vector<std::uint8_t> pos(a1 - a0, 0);
            for (std::size_t k : truth.per_graph[start + g].causal_arcs) {
                if (k >= pos.size()) throw std::invalid_argument("truth arc index out of range");
                pos[k] = 1;
            }
            std::optional<double> auc = rank_auc(vals, pos);
            if (auc) {
                sum += *auc;
                ++n;
            }
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

std::string config_hash(const TrainConfig& cfg) {
    std::string s;
    s += "encoder=" + std::string(encoder_name(cfg.encoder));
    s += " causal=" + std::string(causal_name(cfg.causal));
    s += " l1=" + format_double(cfg.lambda1);
    s += " l2=" + format_double(cfg.lambda2);
    s += " epochs=" + std::to_string(cfg.epochs);
    s += " batch=" + std::to_string(cfg.batch_size);
    s += " lr=" + format_double(cfg.lr);
    s += " pairing=" + std::string(cfg.pairing == PairingMode::full ? "full" : "perm");
    s += " excl=" + std::string(cfg.exclude_self_pairs ? "1" : "0");
    s += " dh=" + std::to_string(cfg.d_h);
    s += " depth=" + std::to_string(cfg.depth);
    std::uint64_t h = 1469598103934665603ull;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = hex[h & 0xf];
        h >>= 4;
    }
    return out;
}

namespace {

std::ofstream open_csv(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    return f;
}

}  // namespace

void write_run_csv(const RunRecord& rec, const std::string& path) {
    std::ofstream f = open_csv(path);
    f << "epoch,ce,kl,ba,total,valid_acc\n";
    for (std::size_t i = 0; i < rec.epochs.size(); ++i) {
        const EpochRecord& e = rec.epochs[i];
        f << (i + 1) << ',' << format_double(e.loss.ce) << ',' << format_double(e.loss.kl) << ','
          << format_double(e.loss.ba) << ',' << format_double(e.loss.total) << ','
          << format_double(e.valid_acc) << '\n';
    }
}

void write_summary_csv(const TrainConfig& cfg, const RunRecord& rec, const std::string& path) {
    std::ofstream f = open_csv(path);
    f << "config_hash,seed,best_epoch,test_acc,auc\n";
    f << config_hash(cfg) << ',' << cfg.seed << ',' << rec.best_epoch << ','
      << format_double(rec.test_acc) << ',';
    if (rec.auc) f << format_double(*rec.auc);
    f << '\n';
}

LossAblationResult run_loss_ablation(const TrainConfig& base, const SynthConfig& data_cfg,
                                     const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw std::invalid_argument("loss ablation needs at least one seed");
    LossAblationResult r;
    r.variants = {"full", "no_kl", "no_ba", "no_cd"};
    r.seeds = seeds;
    r.acc.assign(r.variants.size(), std::vector<double>(seeds.size(), 0.0));
    for (std::size_t v = 0; v < r.variants.size(); ++v) {
        TrainConfig cfg = base;
        if (v == 1 || v == 3) cfg.lambda1 = 0.0;
        if (v == 2 || v == 3) cfg.lambda2 = 0.0;
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            SynthConfig dc = data_cfg;
            dc.seed = seeds[s];
            cfg.seed = seeds[s];
            SynthBundle bundle = generate_dataset(dc);
            TrainResult tr = train(cfg, bundle.train, bundle.valid);
            r.acc[v][s] = evaluate(tr.model, bundle.test).accuracy;
        }
        r.mean.push_back(mean_of(r.acc[v]));
        r.stddev.push_back(seeds.size() > 1 ? sample_stddev(r.acc[v]) : 0.0);
    }
    return r;
}

void write_loss_ablation_csv(const LossAblationResult& r, const std::string& path) {
    std::ofstream f = open_csv(path);
    f << "variant,seed,test_acc,mean,std\n";
    for (std::size_t v = 0; v < r.variants.size(); ++v)
        for (std::size_t s = 0; s < r.seeds.size(); ++s)
            f << r.variants[v] << ',' << r.seeds[s] << ',' << format_double(r.acc[v][s]) << ','
              << format_double(r.mean[v]) << ',' << format_double(r.stddev[v]) << '\n';
}

NoiseAblationResult run_noise_ablation(const TrainConfig& base, const SynthConfig& data_cfg,
                                       const std::vector<double>& proportions) {
    if (proportions.empty()) throw std::invalid_argument("noise ablation needs proportions");
    SynthBundle bundle = generate_dataset(data_cfg);
    TrainResult tr = train(base, bundle.train, bundle.valid);
    NoiseAblationResult r;
    r.proportions = proportions;
    for (double p : proportions) {
        Dataset noisy = permute_edge_features(bundle.test, p, base.seed);
        r.accuracy.push_back(evaluate(tr.model, noisy).accuracy);
    }
    return r;
}

void write_noise_ablation_csv(const NoiseAblationResult& r, const std::string& path) {
    std::ofstream f = open_csv(path);
    f << "proportion,test_acc\n";
    for (std::size_t i = 0; i < r.proportions.size(); ++i)
        f << format_double(r.proportions[i]) << ',' << format_double(r.accuracy[i]) << '\n';
}

}  // namespace ecal
