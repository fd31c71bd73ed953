#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "doctest.h"
#include "ecal/graph.hpp"
#include "ecal/model.hpp"
#include "ecal/rng.hpp"
#include "oracles.hpp"
#include "util.hpp"

using namespace ecal;

namespace {

Graph small_graph(std::uint64_t seed, double feature_scale = 1.0) {
    Rng rng(seed);
    Graph g = oracle::random_graph(rng, 3, 6, 4, 4);
    for (double& v : g.node_features) v *= feature_scale;
    for (double& v : g.edge_features) v *= feature_scale;
    return g;
}

ModelConfig small_config(EncoderKind enc, CausalMode mode, std::uint64_t seed) {
    ModelConfig cfg;
    cfg.encoder = enc;
    cfg.causal = mode;
    cfg.d_v = 4;
    cfg.d_e = 4;
    cfg.d_h = 5;
    cfg.depth = 2;
    cfg.seed = seed;
    return cfg;
}

// Forces the causality heads to emit fixed logits (z0, z1) for every row.
void pin_heads(ModelParams& mp, double z0, double z1) {
    auto pin = [&](const MlpH& h) {
        Tensor& w1 = mp.params.tensors[h.l1.w];
        Tensor& b1 = mp.params.tensors[h.l1.b];
        Tensor& w2 = mp.params.tensors[h.l2.w];
        Tensor& b2 = mp.params.tensors[h.l2.b];
        w1.values.assign(w1.values.size(), 0.0);
        b1.values.assign(b1.values.size(), 0.0);
        w2.values.assign(w2.values.size(), 0.0);
        b2.values = {z0, z1};
    };
    pin(mp.mlp_node);
    if (mp.has_edge_head) pin(mp.mlp_edge);
}

}  // namespace

TEST_CASE("causal mode names round-trip and invalid configs are rejected") {
    for (CausalMode m : {CausalMode::none, CausalMode::cal, CausalMode::ecal}) {
        CausalMode back;
        REQUIRE(parse_causal(causal_name(m), back));
        CHECK(back == m);
    }
    CausalMode m;
    CHECK_FALSE(parse_causal("half", m));
    CHECK_THROWS_AS(init_model(small_config(EncoderKind::gcn, CausalMode::ecal, 0)),
                    std::invalid_argument);
    CHECK_THROWS_AS(init_model(small_config(EncoderKind::gat, CausalMode::ecal, 0)),
                    std::invalid_argument);
    ModelConfig bad = small_config(EncoderKind::gcn, CausalMode::none, 0);
    bad.num_classes = 1;
    CHECK_THROWS_AS(init_model(bad), std::invalid_argument);
}

TEST_CASE("soft subgraphs recombine to the original features") {
    Rng arng(404);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Graph g = small_graph(seed, 0.5);
        Batch batch = make_batch({g});
        CausalScores sc;
        for (std::size_t i = 0; i < batch.num_nodes; ++i)
            sc.alpha_node.push_back(arng.uniform());
        for (std::size_t k = 0; k < batch.num_arcs; ++k)
            sc.alpha_edge.push_back(arng.uniform());
        SubgraphPair sp = split_subgraphs(batch, sc);
        for (std::size_t i = 0; i < sp.causal_nodes.size(); ++i)
            CHECK(std::abs(sp.causal_nodes[i] + sp.trivial_nodes[i] -
                           batch.node_features[i]) <= 1e-15);
        for (std::size_t i = 0; i < sp.causal_edges.size(); ++i)
            CHECK(std::abs(sp.causal_edges[i] + sp.trivial_edges[i] -
                           batch.edge_features[i]) <= 1e-15);
    }
}

TEST_CASE("learned scores also recombine to the original features") {
    ModelParams mp = init_model(small_config(EncoderKind::egatv2, CausalMode::ecal, 5));
    Graph g = small_graph(12, 0.5);
    Batch batch = make_batch({g});
    CausalScores sc = estimate_causal_scores(mp, batch);
    SubgraphPair sp = split_subgraphs(batch, sc);
    for (std::size_t i = 0; i < sp.causal_nodes.size(); ++i)
        CHECK(std::abs(sp.causal_nodes[i] + sp.trivial_nodes[i] - batch.node_features[i]) <=
              1e-15);
    for (std::size_t i = 0; i < sp.causal_edges.size(); ++i)
        CHECK(std::abs(sp.causal_edges[i] + sp.trivial_edges[i] - batch.edge_features[i]) <=
              1e-15);
}

TEST_CASE("degenerate scores split exactly") {
    Graph g = small_graph(3);
    Batch batch = make_batch({g});
    CausalScores ones;
    ones.alpha_node.assign(batch.num_nodes, 1.0);
    ones.alpha_edge.assign(batch.num_arcs, 1.0);
    SubgraphPair sp = split_subgraphs(batch, ones);
    CHECK(sp.causal_nodes == batch.node_features);
    CHECK(sp.causal_edges == batch.edge_features);
    for (double v : sp.trivial_nodes) CHECK(v == 0.0);
    for (double v : sp.trivial_edges) CHECK(v == 0.0);

    CausalScores half;
    half.alpha_node.assign(batch.num_nodes, 0.5);
    half.alpha_edge.assign(batch.num_arcs, 0.5);
    SubgraphPair hp = split_subgraphs(batch, half);
    CHECK(hp.causal_nodes == hp.trivial_nodes);
    CHECK(hp.causal_edges == hp.trivial_edges);

    CausalScores bad = ones;
    bad.alpha_node.pop_back();
    CHECK_THROWS_AS(split_subgraphs(batch, bad), std::invalid_argument);
}

TEST_CASE("the forward pass never touches the arc structure") {
    ModelParams mp = init_model(small_config(EncoderKind::egatv2, CausalMode::ecal, 8));
    Graph g = small_graph(21);
    Batch batch = make_batch({g});
    const std::vector<std::size_t> src = batch.arc_src, dst = batch.arc_dst;
    const std::vector<double> nf = batch.node_features, ef = batch.edge_features;
    (void)predict_logits(mp, batch);
    CausalScores sc = estimate_causal_scores(mp, batch);
    (void)split_subgraphs(batch, sc);
    CHECK(batch.arc_src == src);
    CHECK(batch.arc_dst == dst);
    CHECK(batch.node_features == nf);
    CHECK(batch.edge_features == ef);
}

TEST_CASE("causality scores are probabilities over the full logit range") {
    ModelParams mp = init_model(small_config(EncoderKind::egatv2, CausalMode::ecal, 2));
    Graph g = small_graph(9);
    Batch batch = make_batch({g});

    // Margin 30: both sides stay strictly inside (0, 1).
    pin_heads(mp, 15.0, -15.0);
    CausalScores hi = estimate_causal_scores(mp, batch);
    const double a30 = 1.0 / (1.0 + std::exp(-30.0));
    for (double a : hi.alpha_node) {
        CHECK(a > 0.0);
        CHECK(a < 1.0);
        CHECK(std::abs(a - a30) < 1e-15);
    }
    for (double a : hi.alpha_edge) {
        CHECK(a > 0.0);
        CHECK(a < 1.0);
    }
    pin_heads(mp, -15.0, 15.0);
    CausalScores lo = estimate_causal_scores(mp, batch);
    for (double a : lo.alpha_node) {
        CHECK(a > 0.0);
        CHECK(a < 1.0);
        CHECK(std::abs(a - (1.0 - a30)) < 1e-15);
    }

    // Margin 50 saturates the winning side to exactly 1; the losing side
    // stays a strictly positive subnormal-free double.
    pin_heads(mp, 25.0, -25.0);
    CausalScores sat = estimate_causal_scores(mp, batch);
    for (double a : sat.alpha_node) CHECK(a == 1.0);
    pin_heads(mp, -25.0, 25.0);
    CausalScores anti = estimate_causal_scores(mp, batch);
    for (double a : anti.alpha_node) {
        CHECK(a > 0.0);
        CHECK(a < 1e-20);
    }
}

TEST_CASE("plain attention mode fixes every edge score at one half") {
    ModelParams mp = init_model(small_config(EncoderKind::gat, CausalMode::cal, 4));
    Graph g = small_graph(14);
    Batch batch = make_batch({g});
    CausalScores sc = estimate_causal_scores(mp, batch);
    CHECK(sc.alpha_edge.size() == batch.num_arcs);
    for (double a : sc.alpha_edge) CHECK(a == 0.5);
    for (double a : sc.alpha_node) {
        CHECK(a > 0.0);
        CHECK(a < 1.0);
    }
}

TEST_CASE("a causality-free model has no estimator to query") {
    ModelParams mp = init_model(small_config(EncoderKind::gcn, CausalMode::none, 1));
    Graph g = small_graph(2);
    Batch batch = make_batch({g});
    CHECK_THROWS_AS(estimate_causal_scores(mp, batch), std::invalid_argument);
    CHECK(predict_logits(mp, batch).size() == 2);
}

TEST_CASE("estimated scores match the dense reference") {
    for (EncoderKind enc : {EncoderKind::egatv1, EncoderKind::egatv2}) {
        ModelParams mp = init_model(small_config(enc, CausalMode::ecal, 7));
        for (std::uint64_t s = 1; s <= 8; ++s) {
            Graph g = small_graph(s * 13);
            if (g.num_arcs() == 0) continue;
            Batch batch = make_batch({g});
            CausalScores got = estimate_causal_scores(mp, batch);
            oracle::DenseScores ref = oracle::dense_scores(mp, g);
            CHECK(oracle::max_abs_diff(got.alpha_node, ref.alpha_node) < 1e-12);
            CHECK(oracle::max_abs_diff(got.alpha_edge, ref.alpha_edge) < 1e-12);
        }
    }
}

TEST_CASE("graph logits are invariant under node relabeling") {
    struct Combo {
        EncoderKind enc;
        CausalMode mode;
    };
    const Combo combos[] = {{EncoderKind::gcn, CausalMode::none},
                            {EncoderKind::gcn, CausalMode::cal},
                            {EncoderKind::gat, CausalMode::cal},
                            {EncoderKind::egatv1, CausalMode::ecal},
                            {EncoderKind::egatv2, CausalMode::ecal}};
    Rng prng(66);
    for (const Combo& c : combos) {
        ModelParams mp = init_model(small_config(c.enc, c.mode, 11));
        for (int trial = 0; trial < 5; ++trial) {
            Graph g = small_graph(100 + trial);
            std::vector<std::uint32_t> p32 = prng.permutation(g.num_nodes);
            std::vector<std::size_t> perm(p32.begin(), p32.end());
            Graph pg = permute_nodes(g, perm);
            std::vector<double> l1 = predict_logits(mp, make_batch({g}));
            std::vector<double> l2 = predict_logits(mp, make_batch({pg}));
            CHECK(oracle::max_abs_diff(l1, l2) < 1e-9);
        }
    }
}

TEST_CASE("mean readout ignores disjoint duplication") {
    ModelParams mp = init_model(small_config(EncoderKind::egatv2, CausalMode::ecal, 15));
    Graph g = small_graph(31);
    Graph doubled = g;
    doubled.num_nodes = 2 * g.num_nodes;
    doubled.node_features.insert(doubled.node_features.end(), g.node_features.begin(),
                                 g.node_features.end());
    for (std::size_t k = 0; k < g.num_arcs(); ++k) {
        doubled.arc_src.push_back(g.arc_src[k] + g.num_nodes);
        doubled.arc_dst.push_back(g.arc_dst[k] + g.num_nodes);
    }
    doubled.edge_features.insert(doubled.edge_features.end(), g.edge_features.begin(),
                                 g.edge_features.end());
    std::vector<double> l1 = predict_logits(mp, make_batch({g}));
    std::vector<double> l2 = predict_logits(mp, make_batch({doubled}));
    CHECK(oracle::max_abs_diff(l1, l2) < 1e-12);

    CausalScores sc = estimate_causal_scores(mp, make_batch({doubled}));
    for (std::size_t i = 0; i < g.num_nodes; ++i)
        CHECK(std::abs(sc.alpha_node[i] - sc.alpha_node[i + g.num_nodes]) < 1e-12);
}

TEST_CASE("checkpoints round-trip bitwise") {
    for (CausalMode mode : {CausalMode::none, CausalMode::cal, CausalMode::ecal}) {
        EncoderKind enc = mode == CausalMode::ecal ? EncoderKind::egatv2 : EncoderKind::gcn;
        ModelParams mp = init_model(small_config(enc, mode, 23));
        // Perturb away from init so the round trip is not vacuous.
        Rng prng(77);
        for (Tensor& t : mp.params.tensors)
            for (double& v : t.values) v += 0.01 * prng.normal();

        const std::string path =
            testutil::scratch_file("model_" + causal_name(mode) + ".ckpt");
        save_model(mp, path);
        ModelParams back = load_model(path);
        REQUIRE(back.params.size() == mp.params.size());
        for (std::size_t i = 0; i < mp.params.size(); ++i) {
            CHECK(back.params.names[i] == mp.params.names[i]);
            CHECK(back.params.tensors[i].values == mp.params.tensors[i].values);
        }
        save_model(back, path + ".2");
        CHECK(testutil::slurp(path) == testutil::slurp(path + ".2"));

        Graph g = small_graph(55);
        Batch batch = make_batch({g});
        CHECK(predict_logits(mp, batch) == predict_logits(back, batch));
    }
}

TEST_CASE("corrupted checkpoints are rejected with the offending key") {
    ModelParams mp = init_model(small_config(EncoderKind::gat, CausalMode::cal, 3));
    const std::string path = testutil::scratch_file("corrupt.ckpt");
    save_model(mp, path);
    std::string text = testutil::slurp(path);

    SUBCASE("unknown tensor name") {
        std::string renamed = text;
        const std::string k = "T classifier_c.w ";
        renamed.replace(renamed.find(k), k.size(), "T classifier_x.w ");
        testutil::write_text(path, renamed);
        CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("unknown tensor key"),
                             ParseError);
    }
    SUBCASE("missing tensor") {
        const std::string header = text.substr(0, text.find('\n') + 1);
        testutil::write_text(path, header);
        CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("missing tensor"),
                             std::runtime_error);
    }
    SUBCASE("shape mismatch") {
        std::string resized = text;
        const std::string k = "T classifier_c.b 2 1";
        resized.replace(resized.find(k), k.size(), "T classifier_c.b 3 1");
        testutil::write_text(path, resized);
        CHECK_THROWS_WITH_AS(load_model(path),
                             doctest::Contains("tensor shape mismatch"), ParseError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_model(path + ".nope"), std::runtime_error);
    }
}
