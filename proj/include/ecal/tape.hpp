#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ecal/kernels.hpp"
#include "ecal/tensor.hpp"

namespace ecal {

struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
    bool valid() const { return id != static_cast<std::size_t>(-1); }
};

/// Eager reverse-mode tape. Forward runs immediately; each op records a
/// closure that accumulates into input gradients. One tape per scalar loss,
/// confined to a single thread; kernels may still fan out via OpenMP.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var input(const Tensor& t, bool requires_grad);
    Var constant(const Tensor& t) { return input(t, false); }

    // out = opA(a) * opB(b); rank-1 operands are treated as single columns
    Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
    Var add_rowvec(Var x, Var bias);
    Var concat_cols(const std::vector<Var>& parts);
    Var gather_rows(Var x, const std::vector<std::size_t>& idx);
    Var row_scale(Var x, Var s);  // s is rank-1 of length rows(x)
    Var leaky_relu(Var x, double slope);
    Var segment_softmax(Var scores, const SegmentIndex& seg);
    Var segment_sum_rows(Var x, const SegmentIndex& seg);
    Var segment_mean_rows(Var x, const SegmentIndex& seg);
    Var log_softmax_rows(Var x);
    Var nll_mean(Var log_probs, const std::vector<int>& labels);
    Var add(Var a, Var b);
    Var mul(Var a, Var b);
    Var exp_elem(Var x);
    Var affine(Var x, double a, double b);  // a*x + b elementwise
    Var scale(Var x, double a) { return affine(x, a, 0.0); }
    Var sum_all(Var x);
    Var select_col(Var x, std::size_t c);
    Var reshape(Var x, std::vector<std::size_t> shape);

    const Tensor& value(Var v) const { return nodes_[v.id].value; }
    const Tensor& grad(Var v) const { return nodes_[v.id].grad; }
    bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
    std::size_t num_nodes() const { return nodes_.size(); }

    void backward(Var scalar_loss);

    // Smallest |x| ever fed to leaky_relu on this tape. Gradient checks
    // resample when this is within 1e-6 of the kink.
    double min_kink_distance() const { return min_kink_; }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        const char* op = "input";
        std::function<void()> backward;
    };

    Var push(Tensor value, bool requires_grad, const char* op,
             std::function<void()> backward_fn);
    void check_finite(const Tensor& t, const char* op, const char* pass) const;
    Tensor& grad_ref(std::size_t id) { return nodes_[id].grad; }

    std::vector<Node> nodes_;
    double min_kink_ = std::numeric_limits<double>::infinity();
};

/// Builds the computation on a fresh tape. Receives the parameter Vars in
/// the same order as the tensors passed to value_and_grad / grad_check and
/// must return a scalar Var.
using TapeFn = std::function<Var(Tape&, const std::vector<Var>&)>;

std::pair<double, std::vector<Tensor>> value_and_grad(const TapeFn& f,
                                                      const std::vector<Tensor>& params);

struct GradCheckReport {
    double max_rel_error = 0.0;
    // Smallest kink distance seen over the center and all perturbed
    // evaluations; callers reject seeds below 1e-6.
    double min_kink_distance = std::numeric_limits<double>::infinity();
};

GradCheckReport grad_check(const TapeFn& f, const std::vector<Tensor>& params,
                           double epsilon);

}  // namespace ecal
