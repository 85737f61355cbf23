#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "cotic/array.hpp"

namespace cotic {

namespace detail {

struct Node {
    std::uint64_t id = 0;
    Array value;
    Array grad;
    bool requires_grad = false;
    bool grad_ready = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates contributions into parents.
    std::function<void(Node&)> backprop;
};

}  // namespace detail

// Handle to one node of a define-by-run differentiation graph. The graph is
// rebuilt on every forward pass; a graph is confined to a single thread but
// distinct graphs may live on distinct threads.
class Tensor {
public:
    Tensor() = default;

    // Leaf that does not require a gradient.
    static Tensor constant(Array value);

    // Leaf parameter; backward() fills its grad().
    static Tensor param(Array value);

    bool defined() const { return node_ != nullptr; }
    const Array& value() const;

    // Gradient of the last backward() root with respect to this tensor.
    // Zero-shaped until backward has touched the node.
    const Array& grad() const;
    bool has_grad() const;

    bool requires_grad() const;
    const std::vector<std::size_t>& shape() const { return value().shape(); }

    detail::Node* node() const { return node_.get(); }

private:
    friend Tensor make_op(Array value, std::vector<Tensor> parents,
                          std::function<void(detail::Node&)> backprop);
    std::shared_ptr<detail::Node> node_;
};

// --- graph construction ----------------------------------------------------

Tensor make_op(Array value, std::vector<Tensor> parents,
               std::function<void(detail::Node&)> backprop);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor leaky_relu(const Tensor& x, double slope);
Tensor softplus(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sine(const Tensor& x);
Tensor exp(const Tensor& x);
// Throws DomainError when any element is non-positive.
Tensor log(const Tensor& x);
// log(max(x, floor)); flat (zero-gradient) below the floor.
Tensor log_floored(const Tensor& x, double floor);
// Elementwise x + log(1 + e^{-2x}), the return-time loss kernel.
Tensor logcosh_shift(const Tensor& x);

Tensor scale(const Tensor& x, double c);
Tensor div_scalar(const Tensor& x, double c);
Tensor sum_all(const Tensor& x);

// Same data, new shape; element counts must agree.
Tensor reshape(const Tensor& x, std::vector<std::size_t> shape);

// out[i, :] = x[rows[i], :]
Tensor gather_rows(const Tensor& x, std::vector<std::size_t> rows);
// out[i] = x[i, cols[i]]
Tensor pick_per_row(const Tensor& x, std::vector<std::size_t> cols);
// out[p, :] = reshape(w_flat[p, :], d_out x d_in) * feats[p, :]
Tensor block_matvec(const Tensor& w_flat, const Tensor& feats, std::size_t d_out);
// Regroups a (t x d_out*d_in) kernel weight so features can be projected
// through it by a plain matmul: out[i, t*d_out + o] = w[t, o*d_in + i].
Tensor kernel_weight_regroup(const Tensor& w, std::size_t d_out, std::size_t d_in);
// out[p, o] = sum_t vec[p, t] * table[rows[p], t*m + o]
Tensor indexed_block_vecmat(const Tensor& vec, const Tensor& table,
                            std::vector<std::size_t> rows, std::size_t m);
// out[segments[p], :] += rows[p, :]; output has n_segments rows.
Tensor segment_sum(const Tensor& rows, std::vector<std::size_t> segments,
                   std::size_t n_segments);
// out[i] = logsumexp(scores[i, :]) - scores[i, targets[i]]
Tensor cross_entropy_rows(const Tensor& scores, std::vector<std::size_t> targets);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

// Reverse-mode sweep from a scalar root. Gradients of a previous backward on
// the same graph are discarded, so repeated calls are idempotent.
void backward(const Tensor& root);

}  // namespace cotic
