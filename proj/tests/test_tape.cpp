#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "doctest.h"
#include "ecal/kernels.hpp"
#include "ecal/rng.hpp"
#include "ecal/tape.hpp"
#include "ecal/tensor.hpp"

using namespace ecal;

namespace {

Tensor randn_mat(Rng& rng, std::size_t r, std::size_t c) {
    Tensor t = Tensor::matrix(r, c);
    for (double& v : t.values) v = rng.normal();
    return t;
}

Tensor randn_vec(Rng& rng, std::size_t n) {
    Tensor t = Tensor::vector(n);
    for (double& v : t.values) v = rng.normal();
    return t;
}

// Keeps row_scale factors away from zero so grad checks stay well scaled.
Tensor positive_vec(Rng& rng, std::size_t n) {
    Tensor t = Tensor::vector(n);
    for (double& v : t.values) v = 0.5 + rng.uniform();
    return t;
}

double check_op(const TapeFn& f, const std::vector<Tensor>& params) {
    GradCheckReport rep = grad_check(f, params, 1e-5);
    REQUIRE(rep.min_kink_distance > 1e-6);
    return rep.max_rel_error;
}

}  // namespace

TEST_CASE("square function has value 9 and gradient 6 at w=3") {
    Tape t;
    Var w = t.input(Tensor::scalar(3.0), true);
    Var y = t.mul(w, w);
    t.backward(y);
    CHECK(t.value(y).values[0] == 9.0);
    CHECK(t.grad(w).values[0] == 6.0);
}

TEST_CASE("leaky_relu forward and gradient at slope 0.2") {
    Tape t;
    Tensor x = Tensor::vector(2);
    x.values = {-1.0, 2.0};
    Var v = t.input(x, true);
    Var y = t.sum_all(t.leaky_relu(v, 0.2));
    t.backward(y);
    CHECK(t.value(y).values[0] == doctest::Approx(1.8).epsilon(1e-15));
    CHECK(t.grad(v).values[0] == 0.2);
    CHECK(t.grad(v).values[1] == 1.0);
    CHECK(t.min_kink_distance() == 1.0);
}

TEST_CASE("constants receive no gradient") {
    Tape t;
    Var c = t.constant(Tensor::scalar(2.0));
    Var w = t.input(Tensor::scalar(5.0), true);
    Var y = t.mul(c, w);
    t.backward(y);
    CHECK_FALSE(t.requires_grad(c));
    CHECK(t.grad(w).values[0] == 2.0);
}

TEST_CASE("grad_check validates w*w analytically") {
    TapeFn f = [](Tape& t, const std::vector<Var>& p) { return t.mul(p[0], p[0]); };
    GradCheckReport rep = grad_check(f, {Tensor::scalar(1.5)}, 1e-5);
    CHECK(rep.max_rel_error < 1e-8);
}

TEST_CASE("segment_softmax gradient is conserved under uniform upstream") {
    // d(sum of softmax)/dscores = 0 because each segment sums to one.
    Rng rng(3);
    SegmentIndex seg = SegmentIndex::build({0, 0, 1, 1, 1, 2}, 3);
    Tape t;
    Var s = t.input(randn_vec(rng, 6), true);
    Var p = t.segment_softmax(s, seg);
    Var y = t.sum_all(p);
    t.backward(y);
    CHECK(t.value(y).values[0] == doctest::Approx(3.0).epsilon(1e-12));
    for (double g : t.grad(s).values) CHECK(std::abs(g) < 1e-10);
}

TEST_CASE("every differentiable op passes a gradient check") {
    Rng rng(1234);
    const double tol = 1e-7;

    SUBCASE("matmul, all transpose combinations") {
        for (int ta = 0; ta < 2; ++ta)
            for (int tb = 0; tb < 2; ++tb) {
                Tensor a = ta ? randn_mat(rng, 3, 4) : randn_mat(rng, 4, 3);
                Tensor b = tb ? randn_mat(rng, 5, 3) : randn_mat(rng, 3, 5);
                TapeFn f = [=](Tape& t, const std::vector<Var>& p) {
                    return t.sum_all(t.mul(t.matmul(p[0], p[1], ta != 0, tb != 0),
                                           t.matmul(p[0], p[1], ta != 0, tb != 0)));
                };
                CHECK(check_op(f, {a, b}) < tol);
            }
    }
    SUBCASE("add_rowvec") {
        TapeFn f = [](Tape& t, const std::vector<Var>& p) {
            Var y = t.add_rowvec(p[0], p[1]);
            return t.sum_all(t.mul(y, y));
        };
        CHECK(check_op(f, {randn_mat(rng, 4, 3), randn_vec(rng, 3)}) < tol);
    }
    SUBCASE("concat_cols") {
        TapeFn f = [](Tape& t, const std::vector<Var>& p) {
            Var y = t.concat_cols({p[0], p[1], p[2]});
            return t.sum_all(t.mul(y, y));
        };
        CHECK(check_op(f, {randn_mat(rng, 3, 2), randn_mat(rng, 3, 4),
                           randn_mat(rng, 3, 1)}) < tol);
    }
    SUBCASE("gather_rows with repeated indices") {
        std::vector<std::size_t> idx = {2, 0, 2, 1, 2};
        TapeFn f = [idx](Tape& t, const std::vector<Var>& p) {
            Var y = t.gather_rows(p[0], idx);
            return t.sum_all(t.mul(y, y));
        };
        CHECK(check_op(f, {randn_mat(rng, 3, 4)}) < tol);
    }
    SUBCASE("row_scale") {
        TapeFn f = [](Tape& t, const std::vector<Var>& p) {
            Var y = t.row_scale(p[0], p[1]);
            return t.sum_all(t.mul(y, y));
        };
        CHECK(check_op(f, {randn_mat(rng, 4, 3), positive_vec(rng, 4)}) < tol);
    }
    SUBCASE("leaky_relu") {
        TapeFn f = [](Tape& t, const std::vector<Var>& p) {
            Var y = t.leaky_relu(p[0], 0.2);
            return t.sum_all(t.mul(y, y));
        };
        CHECK(check_op(f, {randn_mat(rng, 5, 3)}) < tol);
    }
    SUBCASE("segment_softmax against a quadratic readout") {
        SegmentIndex seg = SegmentIndex::build({0, 1, 0, 1, 2, 2, 2}, 3);
        Tensor w = randn_vec(rng, 7);
        TapeFn f = [seg, w](Tape& t, const std::vector<Var>& p) {
            Var probs = t.segment_softmax(p[0], seg);
            Var y = t.mul(probs, t.constant(w));
            return t.sum_all(t.mul(y, y));
        };
        CHECK(check_op(f, {randn_vec(rng, 7)}) < tol);
    }
    SUBCASE("segment sums and means including an empty segment") {
        SegmentIndex seg = SegmentIndex::build({0, 0, 2, 2, 2}, 3);
        TapeFn fs = [seg](Tape& t, const std::vector<Var>& p) {
            Var y = t.segment_sum_rows(p[0], seg);
            return t.sum_all(t.mul(y, y));
        };
        TapeFn fm = [seg](Tape& t, const std::vector<Var>& p) {
            Var y = t.segment_mean_rows(p[0], seg);
            return t.sum_all(t.mul(y, y));
        };
        CHECK(check_op(fs, {randn_mat(rng, 5, 3)}) < tol);
        CHECK(check_op(fm, {randn_mat(rng, 5, 3)}) < tol);
    }
    SUBCASE("log_softmax_rows and nll_mean") {
        std::vector<int> labels = {2, 0, 1, 1};
        TapeFn f = [labels](Tape& t, const std::vector<Var>& p) {
            return t.nll_mean(t.log_softmax_rows(p[0]), labels);
        };
        CHECK(check_op(f, {randn_mat(rng, 4, 3)}) < tol);
    }
    SUBCASE("add, mul, exp_elem, affine, select_col, reshape") {
        TapeFn f = [](Tape& t, const std::vector<Var>& p) {
            Var a = t.add(p[0], p[1]);
            Var m = t.mul(a, p[0]);
            Var e = t.exp_elem(t.affine(m, 0.3, -0.1));
            Var col = t.select_col(t.reshape(e, {2, 6}), 4);
            return t.sum_all(t.mul(col, col));
        };
        CHECK(check_op(f, {randn_mat(rng, 3, 4), randn_mat(rng, 3, 4)}) < tol);
    }
}

TEST_CASE("value_and_grad returns the loss and per-parameter gradients") {
    TapeFn f = [](Tape& t, const std::vector<Var>& p) {
        return t.sum_all(t.mul(p[0], p[1]));
    };
    Tensor a = Tensor::vector(2), b = Tensor::vector(2);
    a.values = {2.0, 3.0};
    b.values = {5.0, 7.0};
    auto [loss, grads] = value_and_grad(f, {a, b});
    CHECK(loss == 31.0);
    REQUIRE(grads.size() == 2);
    CHECK(grads[0].values == std::vector<double>{5.0, 7.0});
    CHECK(grads[1].values == std::vector<double>{2.0, 3.0});
}

TEST_CASE("non-finite forward values abort with the op named") {
    Tape t;
    Var x = t.input(Tensor::scalar(1000.0), true);
    CHECK_THROWS_WITH_AS(t.exp_elem(x),
                         doctest::Contains("non-finite"), std::runtime_error);
}

TEST_CASE("shape mismatches are rejected before any kernel runs") {
    Tape t;
    Var a = t.input(Tensor::matrix(2, 3), true);
    Var b = t.input(Tensor::matrix(2, 3), true);
    CHECK_THROWS_AS(t.matmul(a, b), std::invalid_argument);
    CHECK_THROWS_AS(t.add_rowvec(a, t.input(Tensor::vector(2), true)),
                    std::invalid_argument);
    CHECK_THROWS_AS(t.backward(a), std::invalid_argument);
}
