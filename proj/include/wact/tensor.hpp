#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "wact/error.hpp"
#include "wact/rng.hpp"

namespace wact {

// Dense row-major f64 tensor. Shapes are explicit everywhere: there is no
// broadcasting, callers reshape. All math lives in free functions below so
// the autodiff tape and the forward-only paths share one set of kernels.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);
    Tensor(std::initializer_list<std::initializer_list<double>> rows); // 2-D literal

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor full(std::vector<std::size_t> shape, double value);
    static Tensor scalar(double value); // shape {1}
    static Tensor identity(std::size_t n);
    static Tensor randn(std::vector<std::size_t> shape, Rng& rng, double stddev = 1.0);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    // 2-D accessors; throw on rank mismatch.
    std::size_t rows() const;
    std::size_t cols() const;
    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    std::string shape_str() const;

    // View of the same data under a different shape (sizes must agree).
    Tensor reshaped(std::vector<std::size_t> shape) const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::string shape_to_string(const std::vector<std::size_t>& shape);

// ---- kernels -----------------------------------------------------------

// Standard matrix product, a: [m x k], b: [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);

// Row-wise softmax over the last dimension with max-subtraction.
Tensor softmax_lastdim(const Tensor& x);

// softmax(q k^T / sqrt(d)) v, q: [Lq x d], k,v: [Lk x d] -> [Lq x d].
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b); // elementwise
Tensor scale(const Tensor& a, double s);
Tensor transpose(const Tensor& a); // 2-D

// Per-row RMS normalization: x / sqrt(mean(x^2) + eps). 2-D input.
inline constexpr double kRmsEps = 1e-8;
Tensor rms_norm_rows(const Tensor& x);

Tensor concat_rows(const std::vector<Tensor>& parts);          // 2-D
Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t n);
Tensor concat_cols(const std::vector<Tensor>& parts);          // 2-D
Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t n);

Tensor sum_all(const Tensor& a);   // -> shape {1}
Tensor mean_all(const Tensor& a);  // -> shape {1}

// a: [L x d] plus a single row [1 x d] added to every row.
Tensor add_row_broadcast(const Tensor& a, const Tensor& row);

// Gathers rows of `table` at the given indices.
Tensor take_rows(const Tensor& table, const std::vector<std::size_t>& ids);

double max_abs_diff(const Tensor& a, const Tensor& b);
bool bit_equal(const Tensor& a, const Tensor& b);

} // namespace wact
