#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "wact/tensor.hpp"

namespace wact {

// Reverse-mode tape over the tensor kernels. One tape per training step:
// register leaves (parameters and constants), build the forward graph through
// the op methods, then call backward() on a scalar loss. Gradients of leaves
// the loss never touches stay exactly zero.
class GradTape {
public:
    struct Var {
        std::size_t id = std::numeric_limits<std::size_t>::max();
        bool valid() const { return id != std::numeric_limits<std::size_t>::max(); }
    };

    Var leaf(Tensor value, bool trainable = false);

    const Tensor& value(Var v) const { return nodes_[v.id].value; }
    std::size_t num_nodes() const { return nodes_.size(); }

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double s);
    Var transpose(Var a);
    Var softmax_lastdim(Var a);
    Var rms_norm_rows(Var a);
    Var concat_rows(const std::vector<Var>& parts);
    Var slice_rows(Var a, std::size_t r0, std::size_t n);
    Var concat_cols(const std::vector<Var>& parts);
    Var slice_cols(Var a, std::size_t c0, std::size_t n);
    Var sum_all(Var a);
    Var mean_all(Var a);
    Var add_row_broadcast(Var a, Var row);
    Var take_rows(Var table, std::vector<std::size_t> ids);
    Var reshape(Var a, std::vector<std::size_t> shape);

    // out flat element i = a flat element idx[i]; idx entries must be in range.
    Var gather_flat(Var a, std::vector<std::size_t> idx, std::vector<std::size_t> out_shape);

    // Escape hatch for ops defined outside this header (rotary application).
    // backward_fn maps the output gradient to the input gradient contribution.
    Var custom_unary(Var a, Tensor value, std::function<Tensor(const Tensor&)> backward_fn);

    // Reverse sweep from a scalar loss; fills per-node gradients.
    void backward(Var loss);

    // Gradient of the last backward() loss w.r.t. v. Zero tensor if untouched.
    const Tensor& grad(Var v) const;

    std::vector<Var> trainable_leaves() const;

private:
    struct Node {
        Tensor value;
        std::vector<std::size_t> inputs;
        bool trainable = false;
        // accumulate into grads of inputs given grad of this node
        std::function<void(GradTape&, std::size_t)> backprop;
    };

    Var push(Tensor value, std::vector<std::size_t> inputs,
             std::function<void(GradTape&, std::size_t)> backprop);
    Tensor& grad_slot(std::size_t id);

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    std::vector<bool> grad_set_;
};

} // namespace wact
