#include "wact/tape.hpp"

#include <cmath>

namespace wact {

GradTape::Var GradTape::push(Tensor value, std::vector<std::size_t> inputs,
                             std::function<void(GradTape&, std::size_t)> backprop) {
    Node n;
    n.value = std::move(value);
    n.inputs = std::move(inputs);
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

Tensor& GradTape::grad_slot(std::size_t id) {
    if (!grad_set_[id]) {
        grads_[id] = Tensor::zeros(nodes_[id].value.shape());
        grad_set_[id] = true;
    }
    return grads_[id];
}

GradTape::Var GradTape::leaf(Tensor value, bool trainable) {
    Var v = push(std::move(value), {}, nullptr);
    nodes_[v.id].trainable = trainable;
    return v;
}

GradTape::Var GradTape::matmul(Var a, Var b) {
    Tensor out = wact::matmul(value(a), value(b));
    return push(std::move(out), {a.id, b.id}, [a, b](GradTape& t, std::size_t self) {
        const Tensor& g = t.grads_[self];
        const Tensor& av = t.value(a);
        const Tensor& bv = t.value(b);
        Tensor ga = wact::matmul(g, wact::transpose(bv));
        Tensor gb = wact::matmul(wact::transpose(av), g);
        Tensor& sa = t.grad_slot(a.id);
        for (std::size_t i = 0; i < sa.size(); ++i) sa[i] += ga[i];
        Tensor& sb = t.grad_slot(b.id);
        for (std::size_t i = 0; i < sb.size(); ++i) sb[i] += gb[i];
    });
}

GradTape::Var GradTape::add(Var a, Var b) {
    Tensor out = wact::add(value(a), value(b));
    return push(std::move(out), {a.id, b.id}, [a, b](GradTape& t, std::size_t self) {
        const Tensor& g = t.grads_[self];
        Tensor& sa = t.grad_slot(a.id);
        for (std::size_t i = 0; i < sa.size(); ++i) sa[i] += g[i];
        Tensor& sb = t.grad_slot(b.id);
        for (std::size_t i = 0; i < sb.size(); ++i) sb[i] += g[i];
    });
}

GradTape::Var GradTape::sub(Var a, Var b) {
    Tensor out = wact::sub(value(a), value(b));
    return push(std::move(out), {a.id, b.id}, [a, b](GradTape& t, std::size_t self) {
        const Tensor& g = t.grads_[self];
        Tensor& sa = t.grad_slot(a.id);
        for (std::size_t i = 0; i < sa.size(); ++i) sa[i] += g[i];
        Tensor& sb = t.grad_slot(b.id);
        for (std::size_t i = 0; i < sb.size(); ++i) sb[i] -= g[i];
    });
}

GradTape::Var GradTape::mul(Var a, Var b) {
    Tensor out = wact::mul(value(a), value(b));
    return push(std::move(out), {a.id, b.id}, [a, b](GradTape& t, std::size_t self) {
        const Tensor& g = t.grads_[self];
        const Tensor& av = t.value(a);
        const Tensor& bv = t.value(b);
        Tensor& sa = t.grad_slot(a.id);
        for (std::size_t i = 0; i < sa.size(); ++i) sa[i] += g[i] * bv[i];
        Tensor& sb = t.grad_slot(b.id);
        for (std::size_t i = 0; i < sb.size(); ++i) sb[i] += g[i] * av[i];
    });
}

GradTape::Var GradTape::scale(Var a, double s) {
    Tensor out = wact::scale(value(a), s);
    return push(std::move(out), {a.id}, [a, s](GradTape& t, std::size_t self) {
        const Tensor& g = t.grads_[self];
        Tensor& sa = t.grad_slot(a.id);
        for (std::size_t i = 0; i < sa.size(); ++i) sa[i] += s * g[i];
    });
}

GradTape::Var GradTape::transpose(Var a) {
    Tensor out = wact::transpose(value(a));
    return push(std::move(out), {a.id}, [a](GradTape& t, std::size_t self) {
        Tensor g = wact::transpose(t.grads_[self]);
        Tensor& sa = t.grad_slot(a.id);
        for (std::size_t i = 0; i < sa.size(); ++i) sa[i] += g[i];
    });
}

GradTape::Var GradTape::softmax_lastdim(Var a) {
    Tensor out = wact::softmax_lastdim(value(a));
    return push(std::move(out), {a.id}, [a](GradTape& t, std::size_t self) {
        const Tensor& g = t.grads_[self];
        const Tensor& y = t.nodes_[self].value;
        const std::size_t d = y.shape().back();
        const std::size_t rows = y.size() / d;
        Tensor& sa = t.grad_slot(a.id);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* yr = y.data().data() + r * d;
            const double* gr = g.data().data() + r * d;
            double dot = 0.0;
            for (std::size_t j = 0; j < d; ++j) dot += gr[j] * yr[j];
            double* sr = sa.data().data() + r * d;
            for (std::size_t j = 0; j < d; ++j) sr[j] += yr[j] * (gr[j] - dot);
        }
    });
}

GradTape::Var GradTape::rms_norm_rows(Var a) {
    Tensor out = wact::rms_norm_rows(value(a));
    return push(std::move(out), {a.id}, [a](GradTape& t, std::size_t self) {
        const Tensor& g = t.grads_[self];
        const Tensor& x = t.value(a);
        const std::size_t m = x.rows(), d = x.cols();
        Tensor& sa = t.grad_slot(a.id);
        for (std::size_t i = 0; i < m; ++i) {
            const double* xr = x.data().data() + i * d;
            const double* gr = g.data().data() + i * d;
            double ss = 0.0, dot = 0.0;
            for (std::size_t j = 0; j < d; ++j) ss += xr[j] * xr[j];
            const double inv = 1.0 / std::sqrt(ss / static_cast<double>(d) + kRmsEps);
            for (std::size_t j = 0; j < d; ++j) dot += gr[j] * xr[j];
            const double c = inv * inv * inv * dot / static_cast<double>(d);
            double* sr = sa.data().data() + i * d;
            for (std::size_t j = 0; j < d; ++j) sr[j] += inv * gr[j] - c * xr[j];
        }
    });
}

GradTape::Var GradTape::concat_rows(const std::vector<Var>& parts) {
    std::vector<Tensor> vals;
    std::vector<std::size_t> ids;
    for (Var p : parts) {
        vals.push_back(value(p));
        ids.push_back(p.id);
    }
    Tensor out = wact::concat_rows(vals);
    auto parts_copy = parts;
    return push(std::move(out), ids, [parts_copy](GradTape& t, std::size_t self) {
        const Tensor& g = t.grads_[self];
        std::size_t r = 0;
        for (Var p : parts_copy) {
            const Tensor& pv = t.value(p);
            Tensor& sp = t.grad_slot(p.id);
            const std::size_t n = pv.size();
            const double* src = g.data().data() + r * pv.cols();
            for (std::size_t i = 0; i < n; ++i) sp[i] += src[i];
            r += pv.rows();
        }
    });
}

GradTape::Var GradTape::slice_rows(Var a, std::size_t r0, std::size_t n) {
    Tensor out = wact::slice_rows(value(a), r0, n);
    return push(std::move(out), {a.id}, [a, r0](GradTape& t, std::size_t self) {
        const Tensor& g = t.grads_[self];
        Tensor& sa = t.grad_slot(a.id);
        const std::size_t cols = g.cols();
        double* dst = sa.data().data() + r0 * cols;
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    });
}

GradTape::Var GradTape::concat_cols(const std::vector<Var>& parts) {
    std::vector<Tensor> vals;
    std::vector<std::size_t> ids;
    for (Var p : parts) {
        vals.push_back(value(p));
        ids.push_back(p.id);
    }
    Tensor out = wact::concat_cols(vals);
    auto parts_copy = parts;
    return push(std::move(out), ids, [parts_copy](GradTape& t, std::size_t self) {
        const Tensor& g = t.grads_[self];
        std::size_t c = 0;
        for (Var p : parts_copy) {
            const Tensor& pv = t.value(p);
            Tensor& sp = t.grad_slot(p.id);
            for (std::size_t i = 0; i < pv.rows(); ++i)
                for (std::size_t j = 0; j < pv.cols(); ++j)
                    sp[i * pv.cols() + j] += g.at(i, c + j);
            c += pv.cols();
        }
    });
}

GradTape::Var GradTape::slice_cols(Var a, std::size_t c0, std::size_t n) {
    Tensor out = wact::slice_cols(value(a), c0, n);
    return push(std::move(out), {a.id}, [a, c0, n](GradTape& t, std::size_t self) {
        const Tensor& g = t.grads_[self];
        Tensor& sa = t.grad_slot(a.id);
        const std::size_t cols = sa.cols();
        for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < n; ++j) sa[i * cols + c0 + j] += g.at(i, j);
    });
}

GradTape::Var GradTape::sum_all(Var a) {
    Tensor out = wact::sum_all(value(a));
    return push(std::move(out), {a.id}, [a](GradTape& t, std::size_t self) {
        const double g = t.grads_[self][0];
        Tensor& sa = t.grad_slot(a.id);
        for (std::size_t i = 0; i < sa.size(); ++i) sa[i] += g;
    });
}

GradTape::Var GradTape::mean_all(Var a) {
    Tensor out = wact::mean_all(value(a));
    return push(std::move(out), {a.id}, [a](GradTape& t, std::size_t self) {
        const Tensor& sa_val = t.value(a);
        const double g = t.grads_[self][0] / static_cast<double>(sa_val.size());
        Tensor& sa = t.grad_slot(a.id);
        for (std::size_t i = 0; i < sa.size(); ++i) sa[i] += g;
    });
}

GradTape::Var GradTape::add_row_broadcast(Var a, Var row) {
    Tensor out = wact::add_row_broadcast(value(a), value(row));
    return push(std::move(out), {a.id, row.id}, [a, row](GradTape& t, std::size_t self) {
        const Tensor& g = t.grads_[self];
        Tensor& sa = t.grad_slot(a.id);
        for (std::size_t i = 0; i < sa.size(); ++i) sa[i] += g[i];
        Tensor& sr = t.grad_slot(row.id);
        const std::size_t d = g.cols();
        for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < d; ++j) sr[j] += g.at(i, j);
    });
}

GradTape::Var GradTape::take_rows(Var table, std::vector<std::size_t> ids) {
    Tensor out = wact::take_rows(value(table), ids);
    return push(std::move(out), {table.id}, [table, ids = std::move(ids)](GradTape& t, std::size_t self) {
        const Tensor& g = t.grads_[self];
        Tensor& st = t.grad_slot(table.id);
        const std::size_t d = g.cols();
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (std::size_t j = 0; j < d; ++j) st[ids[i] * d + j] += g.at(i, j);
    });
}

GradTape::Var GradTape::reshape(Var a, std::vector<std::size_t> shape) {
    Tensor out = value(a).reshaped(shape);
    return push(std::move(out), {a.id}, [a](GradTape& t, std::size_t self) {
        const Tensor& g = t.grads_[self];
        Tensor& sa = t.grad_slot(a.id);
        for (std::size_t i = 0; i < sa.size(); ++i) sa[i] += g[i];
    });
}

GradTape::Var GradTape::gather_flat(Var a, std::vector<std::size_t> idx,
                                    std::vector<std::size_t> out_shape) {
    const Tensor& av = value(a);
    Tensor out(std::move(out_shape));
    if (out.size() != idx.size()) throw DimensionError("gather_flat: index count does not match shape");
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= av.size()) throw DimensionError("gather_flat: index out of range");
        out[i] = av[idx[i]];
    }
    return push(std::move(out), {a.id}, [a, idx = std::move(idx)](GradTape& t, std::size_t self) {
        const Tensor& g = t.grads_[self];
        Tensor& sa = t.grad_slot(a.id);
        for (std::size_t i = 0; i < idx.size(); ++i) sa[idx[i]] += g[i];
    });
}

GradTape::Var GradTape::custom_unary(Var a, Tensor value, std::function<Tensor(const Tensor&)> backward_fn) {
    return push(std::move(value), {a.id},
                [a, backward_fn = std::move(backward_fn)](GradTape& t, std::size_t self) {
                    Tensor gin = backward_fn(t.grads_[self]);
                    Tensor& sa = t.grad_slot(a.id);
                    if (!gin.same_shape(sa)) {
                        throw DimensionError("custom_unary backward: gradient shape " + gin.shape_str() +
                                             " does not match input " + sa.shape_str());
                    }
                    for (std::size_t i = 0; i < sa.size(); ++i) sa[i] += gin[i];
                });
}

void GradTape::backward(Var loss) {
    if (!loss.valid() || loss.id >= nodes_.size()) throw ContractError("backward: invalid loss var");
    if (nodes_[loss.id].value.size() != 1) {
        throw ContractError("backward: loss must be scalar, got shape " + nodes_[loss.id].value.shape_str());
    }
    grads_.assign(nodes_.size(), Tensor());
    grad_set_.assign(nodes_.size(), false);
    grad_slot(loss.id)[0] = 1.0;
    for (std::size_t id = loss.id + 1; id-- > 0;) {
        if (grad_set_[id] && nodes_[id].backprop) nodes_[id].backprop(*this, id);
    }
    // untouched leaves report exact zeros
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
        if (nodes_[id].inputs.empty() && !grad_set_[id]) grad_slot(id);
    }
}

const Tensor& GradTape::grad(Var v) const {
    if (grads_.empty()) throw ContractError("grad: backward() has not been called");
    if (!grad_set_[v.id]) throw ContractError("grad: no gradient recorded for this var");
    return grads_[v.id];
}

std::vector<GradTape::Var> GradTape::trainable_leaves() const {
    std::vector<Var> out;
    for (std::size_t id = 0; id < nodes_.size(); ++id)
        if (nodes_[id].trainable) out.push_back(Var{id});
    return out;
}

} // namespace wact
