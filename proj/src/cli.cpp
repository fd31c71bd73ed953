#include "ecal/cli.hpp"

#include <filesystem>
#include <iostream>
#include <stdexcept>

#include "CLI11.hpp"
#include "ecal/format.hpp"
#include "ecal/graph.hpp"
#include "ecal/stats.hpp"
#include "ecal/synth.hpp"
#include "ecal/train.hpp"

namespace ecal {

namespace {

struct DataFlags {
    SynthConfig cfg;
    std::string motif = "cycle5";
};

void add_data_flags(CLI::App* sc, DataFlags& df) {
    sc->add_option("--num-graphs", df.cfg.num_graphs, "training graphs before the splits");
    sc->add_option("--signal", df.cfg.edge_signal_strength, "motif edge signal strength");
    sc->add_option("--node-noise", df.cfg.node_noise_std, "node feature noise stddev");
    sc->add_option("--rho", df.cfg.rho, "train minority/majority ratio in (0,1]");
    sc->add_option("--motif", df.motif)->check(CLI::IsMember({"cycle5", "house"}));
    sc->add_option("--dv", df.cfg.d_v, "node feature width");
    sc->add_option("--de", df.cfg.d_e, "edge feature width");
    sc->add_option("--base-min", df.cfg.base_nodes_min);
    sc->add_option("--base-max", df.cfg.base_nodes_max);
}

SynthConfig resolve_data(const DataFlags& df) {
    SynthConfig cfg = df.cfg;
    MotifKind mk;
    if (!parse_motif(df.motif, mk)) throw CLI::ValidationError("--motif", "unknown motif");
    cfg.motif = mk;
    return cfg;
}

struct TrainFlags {
    TrainConfig cfg;
    std::string model = "egatv2";
    std::string causal = "ecal";
    std::string pairing = "perm";
};

void add_train_flags(CLI::App* sc, TrainFlags& tf) {
    sc->add_option("--model", tf.model)->check(CLI::IsMember({"gcn", "gat", "egatv1", "egatv2"}));
    sc->add_option("--causal", tf.causal)->check(CLI::IsMember({"none", "cal", "ecal"}));
    sc->add_option("--lambda1", tf.cfg.lambda1, "uniformity weight")
        ->check(CLI::NonNegativeNumber);
    sc->add_option("--lambda2", tf.cfg.lambda2, "backdoor weight")->check(CLI::NonNegativeNumber);
    sc->add_option("--epochs", tf.cfg.epochs);
    sc->add_option("--batch-size", tf.cfg.batch_size);
    sc->add_option("--lr", tf.cfg.lr, "learning rate");
    sc->add_option("--seed", tf.cfg.seed);
    sc->add_option("--pairing", tf.pairing)->check(CLI::IsMember({"perm", "full"}));
    sc->add_flag("--exclude-self-pairs", tf.cfg.exclude_self_pairs);
    sc->add_option("--d-h", tf.cfg.d_h, "hidden width");
    sc->add_option("--depth", tf.cfg.depth, "encoder layers");
}

TrainConfig resolve_train(const TrainFlags& tf) {
    TrainConfig cfg = tf.cfg;
    EncoderKind ek;
    CausalMode cm;
    if (!parse_encoder(tf.model, ek)) throw CLI::ValidationError("--model", "unknown encoder");
    if (!parse_causal(tf.causal, cm)) throw CLI::ValidationError("--causal", "unknown mode");
    cfg.encoder = ek;
    cfg.causal = cm;
    cfg.pairing = tf.pairing == "full" ? PairingMode::full : PairingMode::perm;
    return cfg;
}

std::string join_path(const std::string& dir, const char* name) {
    return (std::filesystem::path(dir) / name).string();
}

void print_split(const char* tag, const Dataset& ds) {
    std::size_t c0 = 0;
    for (const Graph& g : ds.graphs)
        if (g.label == 0) ++c0;
    std::cout << tag << ": " << ds.graphs.size() << " graphs (" << c0 << " class 0, "
              << ds.graphs.size() - c0 << " class 1)\n";
}

int run_gen_data(const DataFlags& df, const std::string& out) {
    SynthConfig cfg = resolve_data(df);
    SynthBundle b = generate_dataset(cfg);
    std::filesystem::create_directories(out);
    save_dataset(b.train, join_path(out, "train.graphs"));
    save_dataset(b.valid, join_path(out, "valid.graphs"));
    save_dataset(b.test, join_path(out, "test.graphs"));
    save_truth(b.train_truth, join_path(out, "train.truth"));
    save_truth(b.valid_truth, join_path(out, "valid.truth"));
    save_truth(b.test_truth, join_path(out, "test.truth"));
    print_split("train", b.train);
    print_split("valid", b.valid);
    print_split("test", b.test);
    return 0;
}

int run_train(const TrainFlags& tf, const std::string& data, const std::string& out) {
    TrainConfig cfg = resolve_train(tf);
    Dataset train_ds = load_dataset(join_path(data, "train.graphs"));
    Dataset valid_ds = load_dataset(join_path(data, "valid.graphs"));
    Dataset test_ds = load_dataset(join_path(data, "test.graphs"));

    TrainResult tr = train(cfg, train_ds, valid_ds);
    EvalResult ev = evaluate(tr.model, test_ds);
    tr.record.test_acc = ev.accuracy;
    tr.record.per_class_acc = ev.per_class;
    const std::string truth_path = join_path(data, "test.truth");
    if (cfg.causal != CausalMode::none && std::filesystem::exists(truth_path)) {
        GroundTruth gt = load_truth(truth_path);
        tr.record.auc = mean_attention_auc(tr.model, test_ds, gt);
    }

    std::filesystem::create_directories(out);
    write_run_csv(tr.record, join_path(out, "run.csv"));
    write_summary_csv(cfg, tr.record, join_path(out, "summary.csv"));
    save_model(tr.model, join_path(out, "model.ckpt"));

    std::cout << "best epoch " << tr.record.best_epoch << " (valid acc "
              << format_double_pretty(tr.record.best_valid_acc) << ")\n";
    std::cout << "test acc " << format_double_pretty(ev.accuracy);
    for (std::size_t c = 0; c < ev.per_class.size(); ++c)
        std::cout << "  class" << c << " " << format_double_pretty(ev.per_class[c]);
    std::cout << "\n";
    if (tr.record.auc)
        std::cout << "attention recovery auc " << format_double_pretty(*tr.record.auc) << "\n";
    std::cout << "wall " << format_double_pretty(tr.record.wall_seconds) << "s\n";
    return 0;
}

int run_eval(const std::string& ckpt, const std::string& data, const std::string& truth) {
    ModelParams mp = load_model(ckpt);
    Dataset ds = load_dataset(data);
    EvalResult ev = evaluate(mp, ds);
    std::cout << "accuracy " << format_double_pretty(ev.accuracy);
    for (std::size_t c = 0; c < ev.per_class.size(); ++c)
        std::cout << "  class" << c << " " << format_double_pretty(ev.per_class[c]);
    std::cout << "\n";
    if (!truth.empty() && mp.cfg.causal != CausalMode::none) {
        GroundTruth gt = load_truth(truth);
        std::optional<double> auc = mean_attention_auc(mp, ds, gt);
        if (auc) std::cout << "attention recovery auc " << format_double_pretty(*auc) << "\n";
    }
    return 0;
}

int run_gradcheck(const TrainFlags& tf, std::size_t graphs, double epsilon) {
    TrainConfig cfg = resolve_train(tf);
    SynthConfig dc;
    dc.num_graphs = 2 * graphs;
    dc.base_nodes_min = 6;
    dc.base_nodes_max = 8;
    dc.d_v = 3;
    dc.d_e = 3;
    dc.rho = 1.0;
    dc.seed = cfg.seed;
    SynthBundle bundle = generate_dataset(dc);

    double worst = 0.0;
    for (std::size_t trial = 0; trial < graphs; ++trial) {
        std::vector<Graph> pair = {bundle.train.graphs[2 * trial],
                                   bundle.train.graphs[2 * trial + 1]};
        Batch batch = make_batch(pair);

        GradCheckReport rep;
        for (std::uint64_t attempt = 0;; ++attempt) {
            if (attempt == 16) throw std::runtime_error("no kink-free seed found");
            ModelConfig mc;
            mc.encoder = cfg.encoder;
            mc.causal = cfg.causal;
            mc.d_v = dc.d_v;
            mc.d_e = dc.d_e;
            mc.d_h = cfg.d_h;
            mc.num_classes = 2;
            mc.depth = cfg.depth;
            mc.seed = seed_stream(cfg.seed, streams::kGradCheck, trial, attempt);
            ModelParams mp = init_model(mc);
            Rng pair_rng(mc.seed);
            PairingPlan plan =
                plan_pairing(batch.num_graphs, cfg.pairing, pair_rng, cfg.exclude_self_pairs);
            TapeFn f = [&](Tape& t, const std::vector<Var>& vars) -> Var {
                ModelForward mf = model_forward(t, vars, mp, batch);
                Var ce = ce_loss(t, mf.logits_c, batch.labels);
                Var kl, ba;
                double l1 = 0.0, l2 = 0.0;
                if (cfg.causal != CausalMode::none) {
                    kl = kl_uniform_loss(t, mf.logits_t);
                    ba = backdoor_loss(t, vars, mf.h_c, mf.h_t, batch.labels, mp.classifier_mix,
                                       plan);
                    l1 = cfg.lambda1;
                    l2 = cfg.lambda2;
                }
                LossBreakdown bd;
                return total_loss(t, ce, kl, ba, l1, l2, bd);
            };
            rep = grad_check(f, mp.params.tensors, epsilon);
            if (rep.min_kink_distance >= 1e-6) break;
        }
        worst = std::max(worst, rep.max_rel_error);
        std::cout << "graph pair " << trial << ": max rel error "
                  << format_double_pretty(rep.max_rel_error) << "\n";
    }
    std::cout << "worst " << format_double_pretty(worst) << "\n";
    if (worst >= 1e-4) {
        std::cerr << "error: gradient check failed\n";
        return 2;
    }
    return 0;
}

int run_ablate_loss(const TrainFlags& tf, const DataFlags& df,
                    const std::vector<std::uint64_t>& seeds, const std::string& out) {
    TrainConfig cfg = resolve_train(tf);
    SynthConfig dc = resolve_data(df);
    LossAblationResult r = run_loss_ablation(cfg, dc, seeds);
    std::filesystem::create_directories(out);
    write_loss_ablation_csv(r, join_path(out, "ablation_loss.csv"));
    for (std::size_t v = 0; v < r.variants.size(); ++v)
        std::cout << r.variants[v] << ": mean " << format_double_pretty(r.mean[v]) << " std "
                  << format_double_pretty(r.stddev[v]) << "\n";
    return 0;
}

int run_ablate_noise(const TrainFlags& tf, const DataFlags& df,
                     const std::vector<double>& proportions, const std::string& out) {
    TrainConfig cfg = resolve_train(tf);
    SynthConfig dc = resolve_data(df);
    for (double p : proportions)
        if (!(p >= 0.0 && p <= 1.0))
            throw CLI::ValidationError("--noise-proportion", "must lie in [0,1]");
    NoiseAblationResult r = run_noise_ablation(cfg, dc, proportions);
    std::filesystem::create_directories(out);
    write_noise_ablation_csv(r, join_path(out, "ablation_noise.csv"));
    for (std::size_t i = 0; i < r.proportions.size(); ++i)
        std::cout << "p=" << format_double_pretty(r.proportions[i]) << " acc "
                  << format_double_pretty(r.accuracy[i]) << "\n";
    return 0;
}

int run_ttest(const std::vector<double>& a, const std::vector<double>& b) {
    WelchResult w = welch_t_test(a, b);
    std::cout << "t " << format_double_pretty(w.t) << "\n";
    std::cout << "df " << format_double_pretty(w.df) << "\n";
    std::cout << "p " << format_double_pretty(w.p) << "\n";
    return 0;
}

}  // namespace

int dispatch(std::vector<std::string> args) {
    CLI::App app{"edge-aware causal attention laboratory"};
    app.require_subcommand(1);

    DataFlags gen_df;
    std::string gen_out;
    CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic benchmark");
    add_data_flags(gen, gen_df);
    gen->add_option("--seed", gen_df.cfg.seed);
    gen->add_option("--out", gen_out, "output directory")->required();

    TrainFlags tr_tf;
    std::string tr_data, tr_out;
    CLI::App* tr = app.add_subcommand("train", "train a model on a generated benchmark");
    add_train_flags(tr, tr_tf);
    tr->add_option("--data", tr_data, "directory with train/valid/test.graphs")->required();
    tr->add_option("--out", tr_out, "output directory")->required();

    std::string ev_ckpt, ev_data, ev_truth;
    CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    ev->add_option("--checkpoint", ev_ckpt)->required();
    ev->add_option("--data", ev_data, "a .graphs file")->required();
    ev->add_option("--truth", ev_truth, "optional .truth sidecar");

    TrainFlags gc_tf;
    gc_tf.cfg.d_h = 5;
    std::size_t gc_graphs = 20;
    double gc_eps = 1e-5;
    CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    add_train_flags(gc, gc_tf);
    gc->add_option("--graphs", gc_graphs, "graph pairs to audit");
    gc->add_option("--epsilon", gc_eps);

    TrainFlags al_tf;
    DataFlags al_df;
    std::vector<std::uint64_t> al_seeds = {1, 2, 3, 4, 5};
    std::string al_out;
    CLI::App* al = app.add_subcommand("ablate-loss", "loss term ablation table");
    add_train_flags(al, al_tf);
    add_data_flags(al, al_df);
    al->add_option("--seeds", al_seeds)->delimiter(',');
    al->add_option("--out", al_out, "output directory")->required();

    TrainFlags an_tf;
    DataFlags an_df;
    std::vector<double> an_props = {0.0, 0.25, 0.5, 0.75, 1.0};
    std::string an_out;
    CLI::App* an = app.add_subcommand("ablate-noise", "edge noise sensitivity sweep");
    add_train_flags(an, an_tf);
    add_data_flags(an, an_df);
    an->add_option("--noise-proportion", an_props)->delimiter(',');
    an->add_option("--out", an_out, "output directory")->required();

    std::vector<double> tt_a, tt_b;
    CLI::App* tt = app.add_subcommand("ttest", "two-sided unequal-variance t-test");
    tt->add_option("--a", tt_a)->delimiter(',')->required();
    tt->add_option("--b", tt_b)->delimiter(',')->required();

    std::vector<const char*> argv;
    argv.push_back("ecal");
    for (const std::string& s : args) argv.push_back(s.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        app.exit(e);
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e);
        return 0;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (gen->parsed()) return run_gen_data(gen_df, gen_out);
        if (tr->parsed()) return run_train(tr_tf, tr_data, tr_out);
        if (ev->parsed()) return run_eval(ev_ckpt, ev_data, ev_truth);
        if (gc->parsed()) return run_gradcheck(gc_tf, gc_graphs, gc_eps);
        if (al->parsed()) return run_ablate_loss(al_tf, al_df, al_seeds, al_out);
        if (an->parsed()) return run_ablate_noise(an_tf, an_df, an_props, an_out);
        if (tt->parsed()) return run_ttest(tt_a, tt_b);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace ecal
