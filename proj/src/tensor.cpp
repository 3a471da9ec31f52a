#include "wact/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace wact {

namespace {

std::size_t checked_product(const std::vector<std::size_t>& shape) {
    if (shape.empty()) throw DimensionError("tensor shape must not be empty");
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw DimensionError("tensor dims must be positive, got " + shape_to_string(shape));
        n *= d;
    }
    return n;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
}

} // namespace

std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(checked_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_product(shape_) != data_.size()) {
        throw DimensionError("data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str());
    }
}

Tensor::Tensor(std::initializer_list<std::initializer_list<double>> rows) {
    std::size_t r = rows.size();
    std::size_t c = r ? rows.begin()->size() : 0;
    if (r == 0 || c == 0) throw DimensionError("2-D literal must be non-empty");
    shape_ = {r, c};
    data_.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("ragged 2-D literal");
        data_.insert(data_.end(), row.begin(), row.end());
    }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

Tensor Tensor::randn(std::vector<std::size_t> shape, Rng& rng, double stddev) {
    Tensor t(std::move(shape));
    for (double& v : t.data_) v = stddev * rng.normal();
    return t;
}

std::size_t Tensor::rows() const {
    if (ndim() != 2) throw DimensionError("rows(): tensor is not 2-D: " + shape_str());
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (ndim() != 2) throw DimensionError("cols(): tensor is not 2-D: " + shape_str());
    return shape_[1];
}

double& Tensor::at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
double Tensor::at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
    std::size_t n = checked_product(shape);
    if (n != size()) {
        throw DimensionError("reshape " + shape_str() + " -> " + shape_to_string(shape) + ": size mismatch");
    }
    return Tensor(std::move(shape), data_);
}

// ---- kernels -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows()) {
        throw DimensionError("matmul: incompatible shapes " + a.shape_str() + " x " + b.shape_str());
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out({m, n});
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* po = out.data().data();
    // ikj order keeps the b walk contiguous
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = pa + i * k;
        double* orow = po + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            const double* brow = pb + kk * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Tensor softmax_lastdim(const Tensor& x) {
    if (x.empty()) throw DomainError("softmax_lastdim: empty tensor");
    const std::size_t d = x.shape().back();
    const std::size_t rows = x.size() / d;
    Tensor out(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = x.data().data() + r * d;
        double* o = out.data().data() + r * d;
        double mx = in[0];
        for (std::size_t j = 1; j < d; ++j) mx = std::max(mx, in[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            o[j] = std::exp(in[j] - mx);
            sum += o[j];
        }
        for (std::size_t j = 0; j < d; ++j) o[j] /= sum;
    }
    return out;
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
    if (q.ndim() != 2 || k.ndim() != 2 || v.ndim() != 2 || q.cols() != k.cols() || k.rows() != v.rows()) {
        throw DimensionError("scaled_dot_attention: incompatible shapes q=" + q.shape_str() +
                             " k=" + k.shape_str() + " v=" + v.shape_str());
    }
    Tensor logits = matmul(q, transpose(k));
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    for (double& x : logits.data()) x *= inv_sqrt_d;
    return matmul(softmax_lastdim(logits), v);
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out = a;
    for (double& v : out.data()) v *= s;
    return out;
}

Tensor transpose(const Tensor& a) {
    const std::size_t m = a.rows(), n = a.cols();
    Tensor out({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
    return out;
}

Tensor rms_norm_rows(const Tensor& x) {
    const std::size_t m = x.rows(), d = x.cols();
    Tensor out({m, d});
    for (std::size_t i = 0; i < m; ++i) {
        double ss = 0.0;
        for (std::size_t j = 0; j < d; ++j) ss += x.at(i, j) * x.at(i, j);
        const double inv = 1.0 / std::sqrt(ss / static_cast<double>(d) + kRmsEps);
        for (std::size_t j = 0; j < d; ++j) out.at(i, j) = x.at(i, j) * inv;
    }
    return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DimensionError("concat_rows: no parts");
    const std::size_t d = parts[0].cols();
    std::size_t m = 0;
    for (const Tensor& p : parts) {
        if (p.cols() != d) throw DimensionError("concat_rows: column mismatch " + p.shape_str());
        m += p.rows();
    }
    Tensor out({m, d});
    std::size_t r = 0;
    for (const Tensor& p : parts) {
        std::memcpy(out.data().data() + r * d, p.data().data(), p.size() * sizeof(double));
        r += p.rows();
    }
    return out;
}

Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t n) {
    if (r0 + n > a.rows() || n == 0) {
        throw DimensionError("slice_rows: range [" + std::to_string(r0) + "," + std::to_string(r0 + n) +
                             ") out of " + a.shape_str());
    }
    Tensor out({n, a.cols()});
    std::memcpy(out.data().data(), a.data().data() + r0 * a.cols(), n * a.cols() * sizeof(double));
    return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no parts");
    const std::size_t m = parts[0].rows();
    std::size_t d = 0;
    for (const Tensor& p : parts) {
        if (p.rows() != m) throw DimensionError("concat_cols: row mismatch " + p.shape_str());
        d += p.cols();
    }
    Tensor out({m, d});
    std::size_t c = 0;
    for (const Tensor& p : parts) {
        for (std::size_t i = 0; i < m; ++i)
            std::memcpy(out.data().data() + i * d + c, p.data().data() + i * p.cols(),
                        p.cols() * sizeof(double));
        c += p.cols();
    }
    return out;
}

Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t n) {
    if (c0 + n > a.cols() || n == 0) {
        throw DimensionError("slice_cols: range [" + std::to_string(c0) + "," + std::to_string(c0 + n) +
                             ") out of " + a.shape_str());
    }
    Tensor out({a.rows(), n});
    for (std::size_t i = 0; i < a.rows(); ++i)
        std::memcpy(out.data().data() + i * n, a.data().data() + i * a.cols() + c0, n * sizeof(double));
    return out;
}

Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    return Tensor::scalar(s);
}

Tensor mean_all(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    return Tensor::scalar(s / static_cast<double>(a.size()));
}

Tensor add_row_broadcast(const Tensor& a, const Tensor& row) {
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw DimensionError("add_row_broadcast: row " + row.shape_str() + " vs " + a.shape_str());
    }
    Tensor out = a;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out.at(i, j) += row.at(0, j);
    return out;
}

Tensor take_rows(const Tensor& table, const std::vector<std::size_t>& ids) {
    if (ids.empty()) throw DimensionError("take_rows: no indices");
    Tensor out({ids.size(), table.cols()});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= table.rows()) {
            throw DimensionError("take_rows: index " + std::to_string(ids[i]) + " out of " + table.shape_str());
        }
        std::memcpy(out.data().data() + i * table.cols(), table.data().data() + ids[i] * table.cols(),
                    table.cols() * sizeof(double));
    }
    return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    return std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

} // namespace wact
