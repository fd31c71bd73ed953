#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace ecal {

/// Dense row-major value container, rank 1 (vector) or rank 2 (matrix).
/// Scalars are represented as a rank-1 tensor of length 1.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;
    bool requires_grad = false;

    Tensor() = default;

    static Tensor vector(std::size_t n, double fill = 0.0) {
        Tensor t;
        t.shape = {n};
        t.values.assign(n, fill);
        return t;
    }

    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
        Tensor t;
        t.shape = {rows, cols};
        t.values.assign(rows * cols, fill);
        return t;
    }

    static Tensor scalar(double v) {
        Tensor t = vector(1, v);
        return t;
    }

    static Tensor zeros_like(const Tensor& other) {
        Tensor t;
        t.shape = other.shape;
        t.values.assign(other.values.size(), 0.0);
        return t;
    }

    std::size_t rank() const { return shape.size(); }
    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return rank() == 2 ? shape[1] : 1; }
    std::size_t numel() const { return values.size(); }
    bool is_scalar() const { return rank() == 1 && shape[0] == 1; }

    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

inline void check_shape(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("shape mismatch: ") + what);
}

}  // namespace ecal
