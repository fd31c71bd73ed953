#include "ecal/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ecal {

namespace {
std::size_t rows_eff(const Tensor& t) { return t.shape.empty() ? 0 : t.shape[0]; }
std::size_t cols_eff(const Tensor& t) { return t.rank() == 2 ? t.shape[1] : 1; }

void axpy(const std::vector<double>& src, std::vector<double>& dst) {
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}
}  // namespace

void Tape::check_finite(const Tensor& t, const char* op, const char* pass) const {
    for (double v : t.values)
        if (!std::isfinite(v))
            throw std::runtime_error(std::string("non-finite ") + pass + " in " + op);
}

Var Tape::push(Tensor value, bool requires_grad, const char* op,
               std::function<void()> backward_fn) {
    check_finite(value, op, "value");
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.op = op;
    if (requires_grad) n.backward = std::move(backward_fn);
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

Var Tape::input(const Tensor& t, bool requires_grad) {
    return push(t, requires_grad, "input", nullptr);
}

Var Tape::matmul(Var a, Var b, bool trans_a, bool trans_b) {
    const std::size_t self = nodes_.size();
    const Tensor& ta = nodes_[a.id].value;
    const Tensor& tb = nodes_[b.id].value;
    const std::size_t a_rows = rows_eff(ta), a_cols = cols_eff(ta);
    const std::size_t b_rows = rows_eff(tb), b_cols = cols_eff(tb);
    const std::size_t m = trans_a ? a_cols : a_rows;
    const std::size_t k = trans_a ? a_rows : a_cols;
    const std::size_t kb = trans_b ? b_cols : b_rows;
    const std::size_t n = trans_b ? b_rows : b_cols;
    check_shape(k == kb, "matmul inner dimensions");
    Tensor out = Tensor::matrix(m, n);
    gemm(ta.values.data(), a_rows, a_cols, trans_a,
         tb.values.data(), b_rows, b_cols, trans_b, out.values.data());
    const bool rg = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
    auto back = [this, self, a, b, trans_a, trans_b, a_rows, a_cols, b_rows, b_cols, m, n]() {
        const Tensor& g = nodes_[self].grad;
        const Tensor& va = nodes_[a.id].value;
        const Tensor& vb = nodes_[b.id].value;
        if (nodes_[a.id].requires_grad) {
            std::vector<double> tmp(a_rows * a_cols);
            if (!trans_a)
                gemm(g.values.data(), m, n, false, vb.values.data(), b_rows, b_cols, !trans_b,
                     tmp.data());
            else
                gemm(vb.values.data(), b_rows, b_cols, trans_b, g.values.data(), m, n, true,
                     tmp.data());
            axpy(tmp, grad_ref(a.id).values);
        }
        if (nodes_[b.id].requires_grad) {
            std::vector<double> tmp(b_rows * b_cols);
            if (!trans_b)
                gemm(va.values.data(), a_rows, a_cols, !trans_a, g.values.data(), m, n, false,
                     tmp.data());
            else
                gemm(g.values.data(), m, n, true, va.values.data(), a_rows, a_cols, trans_a,
                     tmp.data());
            axpy(tmp, grad_ref(b.id).values);
        }
    };
    return push(std::move(out), rg, "matmul", std::move(back));
}

Var Tape::add_rowvec(Var x, Var bias) {
    const std::size_t self = nodes_.size();
    const Tensor& tx = nodes_[x.id].value;
    const Tensor& tb = nodes_[bias.id].value;
    const std::size_t rows = rows_eff(tx), cols = cols_eff(tx);
    check_shape(tb.numel() == cols, "add_rowvec bias length");
    Tensor out = tx;
    ecal::add_rowvec(tx.values.data(), rows, cols, tb.values.data(), out.values.data());
    const bool rg = nodes_[x.id].requires_grad || nodes_[bias.id].requires_grad;
    auto back = [this, self, x, bias, rows, cols]() {
        const Tensor& g = nodes_[self].grad;
        if (nodes_[x.id].requires_grad) axpy(g.values, grad_ref(x.id).values);
        if (nodes_[bias.id].requires_grad) {
            std::vector<double> tmp(cols);
            col_sums(g.values.data(), rows, cols, tmp.data());
            axpy(tmp, grad_ref(bias.id).values);
        }
    };
    return push(std::move(out), rg, "add_rowvec", std::move(back));
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    const std::size_t self = nodes_.size();
    check_shape(!parts.empty(), "concat_cols needs parts");
    const std::size_t rows = rows_eff(nodes_[parts[0].id].value);
    std::size_t total = 0;
    bool rg = false;
    std::vector<std::size_t> widths;
    for (Var p : parts) {
        const Tensor& t = nodes_[p.id].value;
        check_shape(rows_eff(t) == rows, "concat_cols row counts");
        widths.push_back(cols_eff(t));
        total += widths.back();
        rg = rg || nodes_[p.id].requires_grad;
    }
    Tensor out = Tensor::matrix(rows, total);
    std::size_t off = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        const Tensor& t = nodes_[parts[pi].id].value;
        for (std::size_t r = 0; r < rows; ++r)
            std::copy(t.values.begin() + r * widths[pi], t.values.begin() + (r + 1) * widths[pi],
                      out.values.begin() + r * total + off);
        off += widths[pi];
    }
    auto back = [this, self, parts, widths, rows, total]() {
        const Tensor& g = nodes_[self].grad;
        std::size_t off2 = 0;
        for (std::size_t pi = 0; pi < parts.size(); ++pi) {
            if (nodes_[parts[pi].id].requires_grad) {
                Tensor& gp = grad_ref(parts[pi].id);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < widths[pi]; ++c)
                        gp.values[r * widths[pi] + c] += g.values[r * total + off2 + c];
            }
            off2 += widths[pi];
        }
    };
    return push(std::move(out), rg, "concat_cols", std::move(back));
}

Var Tape::gather_rows(Var x, const std::vector<std::size_t>& idx) {
    const std::size_t self = nodes_.size();
    const Tensor& tx = nodes_[x.id].value;
    const std::size_t src_rows = rows_eff(tx), cols = cols_eff(tx);
    for (std::size_t i : idx) check_shape(i < src_rows, "gather_rows index range");
    Tensor out = Tensor::matrix(idx.size(), cols);
    ecal::gather_rows(tx.values.data(), cols, idx.data(), idx.size(), out.values.data());
    const bool rg = nodes_[x.id].requires_grad;
    SegmentIndex by_target = SegmentIndex::build(idx, src_rows);
    auto back = [this, self, x, cols, by_target = std::move(by_target)]() {
        const Tensor& g = nodes_[self].grad;
        if (nodes_[x.id].requires_grad)
            scatter_rows_add(g.values.data(), cols, by_target, grad_ref(x.id).values.data());
    };
    return push(std::move(out), rg, "gather_rows", std::move(back));
}

Var Tape::row_scale(Var x, Var s) {
    const std::size_t self = nodes_.size();
    const Tensor& tx = nodes_[x.id].value;
    const Tensor& ts = nodes_[s.id].value;
    const std::size_t rows = rows_eff(tx), cols = cols_eff(tx);
    check_shape(ts.numel() == rows, "row_scale scale length");
    Tensor out = tx;
    ecal::row_scale(tx.values.data(), rows, cols, ts.values.data(), out.values.data());
    const bool rg = nodes_[x.id].requires_grad || nodes_[s.id].requires_grad;
    auto back = [this, self, x, s, rows, cols]() {
        const Tensor& g = nodes_[self].grad;
        if (nodes_[x.id].requires_grad) {
            std::vector<double> tmp(rows * cols);
            ecal::row_scale(g.values.data(), rows, cols, nodes_[s.id].value.values.data(),
                            tmp.data());
            axpy(tmp, grad_ref(x.id).values);
        }
        if (nodes_[s.id].requires_grad) {
            std::vector<double> tmp(rows);
            row_dot(g.values.data(), nodes_[x.id].value.values.data(), rows, cols, tmp.data());
            axpy(tmp, grad_ref(s.id).values);
        }
    };
    return push(std::move(out), rg, "row_scale", std::move(back));
}

Var Tape::leaky_relu(Var x, double slope) {
    const std::size_t self = nodes_.size();
    const Tensor& tx = nodes_[x.id].value;
    for (double v : tx.values) min_kink_ = std::min(min_kink_, std::fabs(v));
    Tensor out = tx;
    ecal::leaky_relu(tx.values.data(), tx.numel(), slope, out.values.data());
    const bool rg = nodes_[x.id].requires_grad;
    auto back = [this, self, x, slope]() {
        const Tensor& g = nodes_[self].grad;
        if (!nodes_[x.id].requires_grad) return;
        const Tensor& vx = nodes_[x.id].value;
        std::vector<double> tmp(vx.numel());
        leaky_relu_backward(g.values.data(), vx.values.data(), vx.numel(), slope, tmp.data());
        axpy(tmp, grad_ref(x.id).values);
    };
    return push(std::move(out), rg, "leaky_relu", std::move(back));
}

Var Tape::segment_softmax(Var scores, const SegmentIndex& seg) {
    const std::size_t self = nodes_.size();
    const Tensor& tv = nodes_[scores.id].value;
    check_shape(tv.numel() == seg.size(), "segment_softmax element count");
    Tensor out = tv;
    ecal::segment_softmax(tv.values.data(), seg, out.values.data());
    const bool rg = nodes_[scores.id].requires_grad;
    auto back = [this, self, scores, seg]() {
        const Tensor& g = nodes_[self].grad;
        if (!nodes_[scores.id].requires_grad) return;
        const Tensor& p = nodes_[self].value;
        std::vector<double> tmp(p.numel(), 0.0);
        segment_softmax_backward(g.values.data(), p.values.data(), seg, tmp.data());
        axpy(tmp, grad_ref(scores.id).values);
    };
    return push(std::move(out), rg, "segment_softmax", std::move(back));
}

namespace {
std::vector<std::size_t> invert_segments(const SegmentIndex& seg) {
    std::vector<std::size_t> seg_of(seg.size());
    for (std::size_t s = 0; s < seg.num_segments; ++s)
        for (std::size_t p = seg.offsets[s]; p < seg.offsets[s + 1]; ++p)
            seg_of[seg.items[p]] = s;
    return seg_of;
}
}  // namespace

Var Tape::segment_sum_rows(Var x, const SegmentIndex& seg) {
    const std::size_t self = nodes_.size();
    const Tensor& tx = nodes_[x.id].value;
    const std::size_t cols = cols_eff(tx);
    check_shape(rows_eff(tx) == seg.size(), "segment_sum_rows element count");
    Tensor out = Tensor::matrix(seg.num_segments, cols);
    ecal::segment_sum_rows(tx.values.data(), cols, seg, out.values.data());
    const bool rg = nodes_[x.id].requires_grad;
    auto back = [this, self, x, cols, seg_of = invert_segments(seg)]() {
        const Tensor& g = nodes_[self].grad;
        if (!nodes_[x.id].requires_grad) return;
        std::vector<double> tmp(seg_of.size() * cols);
        ecal::gather_rows(g.values.data(), cols, seg_of.data(), seg_of.size(), tmp.data());
        axpy(tmp, grad_ref(x.id).values);
    };
    return push(std::move(out), rg, "segment_sum_rows", std::move(back));
}

Var Tape::segment_mean_rows(Var x, const SegmentIndex& seg) {
    const std::size_t self = nodes_.size();
    const Tensor& tx = nodes_[x.id].value;
    const std::size_t cols = cols_eff(tx);
    check_shape(rows_eff(tx) == seg.size(), "segment_mean_rows element count");
    Tensor out = Tensor::matrix(seg.num_segments, cols);
    ecal::segment_mean_rows(tx.values.data(), cols, seg, out.values.data());
    const bool rg = nodes_[x.id].requires_grad;
    std::vector<std::size_t> seg_of = invert_segments(seg);
    std::vector<double> inv_count(seg.size());
    for (std::size_t e = 0; e < seg_of.size(); ++e)
        inv_count[e] = 1.0 / static_cast<double>(seg.count(seg_of[e]));
    auto back = [this, self, x, cols, seg_of = std::move(seg_of),
                 inv_count = std::move(inv_count)]() {
        const Tensor& g = nodes_[self].grad;
        if (!nodes_[x.id].requires_grad) return;
        std::vector<double> tmp(seg_of.size() * cols);
        ecal::gather_rows(g.values.data(), cols, seg_of.data(), seg_of.size(), tmp.data());
        std::vector<double> tmp2(tmp.size());
        ecal::row_scale(tmp.data(), seg_of.size(), cols, inv_count.data(), tmp2.data());
        axpy(tmp2, grad_ref(x.id).values);
    };
    return push(std::move(out), rg, "segment_mean_rows", std::move(back));
}

Var Tape::log_softmax_rows(Var x) {
    const std::size_t self = nodes_.size();
    const Tensor& tx = nodes_[x.id].value;
    const std::size_t rows = rows_eff(tx), cols = cols_eff(tx);
    Tensor out = tx;
    ecal::log_softmax_rows(tx.values.data(), rows, cols, out.values.data());
    const bool rg = nodes_[x.id].requires_grad;
    auto back = [this, self, x, rows, cols]() {
        const Tensor& g = nodes_[self].grad;
        if (!nodes_[x.id].requires_grad) return;
        const Tensor& lsm = nodes_[self].value;
        std::vector<double> tmp(rows * cols);
        log_softmax_rows_backward(g.values.data(), lsm.values.data(), rows, cols, tmp.data());
        axpy(tmp, grad_ref(x.id).values);
    };
    return push(std::move(out), rg, "log_softmax_rows", std::move(back));
}

Var Tape::nll_mean(Var log_probs, const std::vector<int>& labels) {
    const std::size_t self = nodes_.size();
    const Tensor& lp = nodes_[log_probs.id].value;
    const std::size_t rows = rows_eff(lp), cols = cols_eff(lp);
    check_shape(rows == labels.size(), "nll_mean label count");
    for (int y : labels)
        check_shape(y >= 0 && static_cast<std::size_t>(y) < cols, "nll_mean label range");
    double acc = 0.0;
    for (std::size_t r = 0; r < rows; ++r) acc += lp.values[r * cols + labels[r]];
    Tensor out = Tensor::scalar(-acc / static_cast<double>(rows));
    const bool rg = nodes_[log_probs.id].requires_grad;
    auto back = [this, self, log_probs, labels, rows, cols]() {
        const double g = nodes_[self].grad.values[0];
        if (!nodes_[log_probs.id].requires_grad) return;
        Tensor& gp = grad_ref(log_probs.id);
        const double w = -g / static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r) gp.values[r * cols + labels[r]] += w;
    };
    return push(std::move(out), rg, "nll_mean", std::move(back));
}

Var Tape::add(Var a, Var b) {
    const std::size_t self = nodes_.size();
    const Tensor& ta = nodes_[a.id].value;
    const Tensor& tb = nodes_[b.id].value;
    check_shape(ta.numel() == tb.numel(), "add operand sizes");
    Tensor out = ta;
    for (std::size_t i = 0; i < out.numel(); ++i) out.values[i] += tb.values[i];
    const bool rg = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
    auto back = [this, self, a, b]() {
        const Tensor& g = nodes_[self].grad;
        if (nodes_[a.id].requires_grad) axpy(g.values, grad_ref(a.id).values);
        if (nodes_[b.id].requires_grad) axpy(g.values, grad_ref(b.id).values);
    };
    return push(std::move(out), rg, "add", std::move(back));
}

Var Tape::mul(Var a, Var b) {
    const std::size_t self = nodes_.size();
    const Tensor& ta = nodes_[a.id].value;
    const Tensor& tb = nodes_[b.id].value;
    check_shape(ta.numel() == tb.numel(), "mul operand sizes");
    Tensor out = ta;
    for (std::size_t i = 0; i < out.numel(); ++i) out.values[i] *= tb.values[i];
    const bool rg = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
    auto back = [this, self, a, b]() {
        const Tensor& g = nodes_[self].grad;
        if (nodes_[a.id].requires_grad) {
            Tensor& ga = grad_ref(a.id);
            const Tensor& vb = nodes_[b.id].value;
            for (std::size_t i = 0; i < g.numel(); ++i) ga.values[i] += g.values[i] * vb.values[i];
        }
        if (nodes_[b.id].requires_grad) {
            Tensor& gb = grad_ref(b.id);
            const Tensor& va = nodes_[a.id].value;
            for (std::size_t i = 0; i < g.numel(); ++i) gb.values[i] += g.values[i] * va.values[i];
        }
    };
    return push(std::move(out), rg, "mul", std::move(back));
}

Var Tape::exp_elem(Var x) {
    const std::size_t self = nodes_.size();
    const Tensor& tx = nodes_[x.id].value;
    Tensor out = tx;
    for (double& v : out.values) v = std::exp(v);
    const bool rg = nodes_[x.id].requires_grad;
    auto back = [this, self, x]() {
        const Tensor& g = nodes_[self].grad;
        if (!nodes_[x.id].requires_grad) return;
        const Tensor& y = nodes_[self].value;
        Tensor& gx = grad_ref(x.id);
        for (std::size_t i = 0; i < g.numel(); ++i) gx.values[i] += g.values[i] * y.values[i];
    };
    return push(std::move(out), rg, "exp", std::move(back));
}

Var Tape::affine(Var x, double a, double b) {
    const std::size_t self = nodes_.size();
    const Tensor& tx = nodes_[x.id].value;
    Tensor out = tx;
    for (double& v : out.values) v = a * v + b;
    const bool rg = nodes_[x.id].requires_grad;
    auto back = [this, self, x, a]() {
        const Tensor& g = nodes_[self].grad;
        if (!nodes_[x.id].requires_grad) return;
        Tensor& gx = grad_ref(x.id);
        for (std::size_t i = 0; i < g.numel(); ++i) gx.values[i] += a * g.values[i];
    };
    return push(std::move(out), rg, "affine", std::move(back));
}

Var Tape::sum_all(Var x) {
    const std::size_t self = nodes_.size();
    const Tensor& tx = nodes_[x.id].value;
    double acc = 0.0;
    for (double v : tx.values) acc += v;
    Tensor out = Tensor::scalar(acc);
    const bool rg = nodes_[x.id].requires_grad;
    auto back = [this, self, x]() {
        const double g = nodes_[self].grad.values[0];
        if (!nodes_[x.id].requires_grad) return;
        Tensor& gx = grad_ref(x.id);
        for (double& v : gx.values) v += g;
    };
    return push(std::move(out), rg, "sum_all", std::move(back));
}

Var Tape::select_col(Var x, std::size_t c) {
    const std::size_t self = nodes_.size();
    const Tensor& tx = nodes_[x.id].value;
    const std::size_t rows = rows_eff(tx), cols = cols_eff(tx);
    check_shape(c < cols, "select_col column range");
    Tensor out = Tensor::vector(rows);
    for (std::size_t r = 0; r < rows; ++r) out.values[r] = tx.values[r * cols + c];
    const bool rg = nodes_[x.id].requires_grad;
    auto back = [this, self, x, c, rows, cols]() {
        const Tensor& g = nodes_[self].grad;
        if (!nodes_[x.id].requires_grad) return;
        Tensor& gx = grad_ref(x.id);
        for (std::size_t r = 0; r < rows; ++r) gx.values[r * cols + c] += g.values[r];
    };
    return push(std::move(out), rg, "select_col", std::move(back));
}

Var Tape::reshape(Var x, std::vector<std::size_t> shape) {
    const std::size_t self = nodes_.size();
    const Tensor& tx = nodes_[x.id].value;
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    check_shape(n == tx.numel() && !shape.empty() && shape.size() <= 2, "reshape size");
    Tensor out = tx;
    out.shape = std::move(shape);
    const bool rg = nodes_[x.id].requires_grad;
    auto back = [this, self, x]() {
        const Tensor& g = nodes_[self].grad;
        if (nodes_[x.id].requires_grad) axpy(g.values, grad_ref(x.id).values);
    };
    return push(std::move(out), rg, "reshape", std::move(back));
}

void Tape::backward(Var scalar_loss) {
    if (!scalar_loss.valid() || scalar_loss.id >= nodes_.size())
        throw std::invalid_argument("backward target is not on this tape");
    if (nodes_[scalar_loss.id].value.numel() != 1)
        throw std::invalid_argument("backward requires a scalar");
    for (std::size_t i = 0; i <= scalar_loss.id; ++i)
        nodes_[i].grad = Tensor::zeros_like(nodes_[i].value);
    nodes_[scalar_loss.id].grad.values[0] = 1.0;
    for (std::size_t i = scalar_loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || !n.backward) continue;
        check_finite(n.grad, n.op, "gradient");
        n.backward();
    }
}

std::pair<double, std::vector<Tensor>> value_and_grad(const TapeFn& f,
                                                      const std::vector<Tensor>& params) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (const Tensor& p : params) vars.push_back(tape.input(p, true));
    Var out = f(tape, vars);
    if (tape.value(out).numel() != 1)
        throw std::invalid_argument("computation must return a scalar");
    tape.backward(out);
    std::vector<Tensor> grads;
    grads.reserve(params.size());
    for (Var v : vars) grads.push_back(tape.grad(v));
    return {tape.value(out).values[0], std::move(grads)};
}

GradCheckReport grad_check(const TapeFn& f, const std::vector<Tensor>& params,
                           double epsilon) {
    GradCheckReport rep;
    std::vector<Tensor> grads;
    {
        Tape tape;
        std::vector<Var> vars;
        for (const Tensor& p : params) vars.push_back(tape.input(p, true));
        Var out = f(tape, vars);
        if (tape.value(out).numel() != 1)
            throw std::invalid_argument("computation must return a scalar");
        tape.backward(out);
        for (Var v : vars) grads.push_back(tape.grad(v));
        rep.min_kink_distance = std::min(rep.min_kink_distance, tape.min_kink_distance());
    }
    auto eval = [&](const std::vector<Tensor>& pts) {
        Tape tape;
        std::vector<Var> vars;
        for (const Tensor& p : pts) vars.push_back(tape.input(p, false));
        Var out = f(tape, vars);
        rep.min_kink_distance = std::min(rep.min_kink_distance, tape.min_kink_distance());
        return tape.value(out).values[0];
    };
    std::vector<Tensor> work = params;
    for (std::size_t k = 0; k < params.size(); ++k) {
        for (std::size_t i = 0; i < params[k].numel(); ++i) {
            const double orig = work[k].values[i];
            work[k].values[i] = orig + epsilon;
            const double vp = eval(work);
            work[k].values[i] = orig - epsilon;
            const double vm = eval(work);
            work[k].values[i] = orig;
            const double numeric = (vp - vm) / (2.0 * epsilon);
            const double analytic = grads[k].values[i];
            const double err = std::fabs(analytic - numeric) /
                               std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
            rep.max_rel_error = std::max(rep.max_rel_error, err);
        }
    }
    return rep;
}

}  // namespace ecal
