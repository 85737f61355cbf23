#include "cotic/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>
#include <utility>

#include "cotic/errors.hpp"

namespace cotic {

namespace {

std::atomic<std::uint64_t> g_next_id{1};

using detail::Node;

std::shared_ptr<Node> make_node(Array value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return n;
}

void ensure_grad(Node& n) {
    if (!n.grad_ready) {
        n.grad = Array(n.value.shape());
        n.grad_ready = true;
    }
}

// Strides of `shape` aligned to the right of a broadcast result of rank
// `out_rank`; broadcast dimensions get stride 0.
std::vector<std::size_t> aligned_strides(const std::vector<std::size_t>& shape,
                                         const std::vector<std::size_t>& out_shape) {
    const std::size_t out_rank = out_shape.size();
    std::vector<std::size_t> strides(out_rank, 0);
    std::size_t acc = 1;
    for (std::size_t i = shape.size(); i-- > 0;) {
        const std::size_t out_dim = out_rank - shape.size() + i;
        strides[out_dim] = (shape[i] == 1 && out_shape[out_dim] != 1) ? 0 : acc;
        acc *= shape[i];
    }
    return strides;
}

// Walks every element of the broadcast output shape, handing the callback the
// linear offsets into a, b, and the output.
template <typename Fn>
void for_each_broadcast(const std::vector<std::size_t>& out_shape,
                        const std::vector<std::size_t>& a_shape,
                        const std::vector<std::size_t>& b_shape, Fn&& fn) {
    const std::size_t rank = out_shape.size();
    std::size_t total = 1;
    for (std::size_t e : out_shape) total *= e;
    if (total == 0) return;

    const auto sa = aligned_strides(a_shape, out_shape);
    const auto sb = aligned_strides(b_shape, out_shape);

    std::vector<std::size_t> idx(rank, 0);
    std::size_t oa = 0, ob = 0;
    for (std::size_t flat = 0;; ++flat) {
        fn(flat, oa, ob);
        if (flat + 1 == total) break;
        for (std::size_t d = rank; d-- > 0;) {
            ++idx[d];
            oa += sa[d];
            ob += sb[d];
            if (idx[d] < out_shape[d]) break;
            oa -= sa[d] * out_shape[d];
            ob -= sb[d] * out_shape[d];
            idx[d] = 0;
        }
    }
}

enum class BinOp { Add, Sub, Mul };

Array binary_forward(BinOp op, const Array& a, const Array& b,
                     const std::vector<std::size_t>& out_shape) {
    Array out(out_shape);
    double* o = out.data();
    const double* pa = a.data();
    const double* pb = b.data();
    if (a.shape() == b.shape()) {
        const std::size_t n = out.size();
        switch (op) {
            case BinOp::Add:
                for (std::size_t i = 0; i < n; ++i) o[i] = pa[i] + pb[i];
                break;
            case BinOp::Sub:
                for (std::size_t i = 0; i < n; ++i) o[i] = pa[i] - pb[i];
                break;
            case BinOp::Mul:
                for (std::size_t i = 0; i < n; ++i) o[i] = pa[i] * pb[i];
                break;
        }
        return out;
    }
    for_each_broadcast(out_shape, a.shape(), b.shape(),
                       [&](std::size_t flat, std::size_t oa, std::size_t ob) {
                           switch (op) {
                               case BinOp::Add: o[flat] = pa[oa] + pb[ob]; break;
                               case BinOp::Sub: o[flat] = pa[oa] - pb[ob]; break;
                               case BinOp::Mul: o[flat] = pa[oa] * pb[ob]; break;
                           }
                       });
    return out;
}

Tensor binary_op(BinOp op, const Tensor& a, const Tensor& b) {
    const auto out_shape = broadcast_shape(a.shape(), b.shape());
    Array value = binary_forward(op, a.value(), b.value(), out_shape);
    return make_op(std::move(value), {a, b}, [op, out_shape](Node& n) {
        Node& pa = *n.parents[0];
        Node& pb = *n.parents[1];
        const double* up = n.grad.data();
        if (pa.requires_grad) {
            ensure_grad(pa);
            double* ga = pa.grad.data();
            const double* vb = pb.value.data();
            for_each_broadcast(out_shape, pa.value.shape(), pb.value.shape(),
                               [&](std::size_t flat, std::size_t oa, std::size_t ob) {
                                   switch (op) {
                                       case BinOp::Add:
                                       case BinOp::Sub: ga[oa] += up[flat]; break;
                                       case BinOp::Mul: ga[oa] += up[flat] * vb[ob]; break;
                                   }
                               });
        }
        if (pb.requires_grad) {
            ensure_grad(pb);
            double* gb = pb.grad.data();
            const double* va = pa.value.data();
            for_each_broadcast(out_shape, pa.value.shape(), pb.value.shape(),
                               [&](std::size_t flat, std::size_t oa, std::size_t ob) {
                                   switch (op) {
                                       case BinOp::Add: gb[ob] += up[flat]; break;
                                       case BinOp::Sub: gb[ob] -= up[flat]; break;
                                       case BinOp::Mul: gb[ob] += up[flat] * va[oa]; break;
                                   }
                               });
        }
    });
}

template <typename FwdFn, typename GradFn>
Tensor unary_op(const Tensor& x, FwdFn fwd, GradFn grad_from_input) {
    const Array& xv = x.value();
    Array value(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) value[i] = fwd(xv[i]);
    return make_op(std::move(value), {x}, [grad_from_input](Node& n) {
        Node& p = *n.parents[0];
        if (!p.requires_grad) return;
        ensure_grad(p);
        const double* up = n.grad.data();
        const double* xd = p.value.data();
        double* g = p.grad.data();
        for (std::size_t i = 0; i < p.value.size(); ++i) g[i] += up[i] * grad_from_input(xd[i]);
    });
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Tensor make_op(Array value, std::vector<Tensor> parents,
               std::function<void(detail::Node&)> backprop) {
    bool needs_grad = false;
    std::vector<std::shared_ptr<Node>> parent_nodes;
    parent_nodes.reserve(parents.size());
    for (const Tensor& p : parents) {
        if (!p.defined()) throw ContractError("operation on an undefined tensor");
        needs_grad = needs_grad || p.requires_grad();
        parent_nodes.push_back(p.node_);
    }
    Tensor t;
    t.node_ = make_node(std::move(value), needs_grad);
    if (needs_grad) {
        t.node_->parents = std::move(parent_nodes);
        t.node_->backprop = std::move(backprop);
    }
    return t;
}

Tensor Tensor::constant(Array value) {
    Tensor t;
    t.node_ = make_node(std::move(value), false);
    return t;
}

Tensor Tensor::param(Array value) {
    Tensor t;
    t.node_ = make_node(std::move(value), true);
    return t;
}

const Array& Tensor::value() const {
    if (!node_) throw ContractError("value() on an undefined tensor");
    return node_->value;
}

const Array& Tensor::grad() const {
    if (!node_) throw ContractError("grad() on an undefined tensor");
    if (!node_->grad_ready) throw ContractError("grad() before backward reached this tensor");
    return node_->grad;
}

bool Tensor::has_grad() const { return node_ && node_->grad_ready; }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(BinOp::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(BinOp::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(BinOp::Mul, a, b); }

Tensor matmul(const Tensor& a, const Tensor& b) {
    Array value = matmul(a.value(), b.value());
    return make_op(std::move(value), {a, b}, [](Node& n) {
        Node& pa = *n.parents[0];
        Node& pb = *n.parents[1];
        if (pa.requires_grad) {
            ensure_grad(pa);
            Array da = matmul(n.grad, transpose(pb.value));
            for (std::size_t i = 0; i < da.size(); ++i) pa.grad[i] += da[i];
        }
        if (pb.requires_grad) {
            ensure_grad(pb);
            Array db = matmul(transpose(pa.value), n.grad);
            for (std::size_t i = 0; i < db.size(); ++i) pb.grad[i] += db[i];
        }
    });
}

Tensor leaky_relu(const Tensor& x, double slope) {
    return unary_op(
        x, [slope](double v) { return v >= 0.0 ? v : slope * v; },
        [slope](double v) { return v >= 0.0 ? 1.0 : slope; });
}

Tensor softplus(const Tensor& x) {
    return unary_op(x, [](double v) { return softplus_stable(v); },
                    [](double v) { return sigmoid(v); });
}

Tensor tanh(const Tensor& x) {
    return unary_op(x, [](double v) { return std::tanh(v); },
                    [](double v) {
                        const double t = std::tanh(v);
                        return 1.0 - t * t;
                    });
}

Tensor sine(const Tensor& x) {
    return unary_op(x, [](double v) { return std::sin(v); },
                    [](double v) { return std::cos(v); });
}

Tensor exp(const Tensor& x) {
    return unary_op(x, [](double v) { return std::exp(v); },
                    [](double v) { return std::exp(v); });
}

Tensor log(const Tensor& x) {
    for (std::size_t i = 0; i < x.value().size(); ++i) {
        if (!(x.value()[i] > 0.0)) {
            throw DomainError("log of non-positive input");
        }
    }
    return unary_op(x, [](double v) { return std::log(v); },
                    [](double v) { return 1.0 / v; });
}

Tensor log_floored(const Tensor& x, double floor) {
    if (!(floor > 0.0)) throw DomainError("log floor must be positive");
    return unary_op(
        x, [floor](double v) { return std::log(v > floor ? v : floor); },
        [floor](double v) { return v > floor ? 1.0 / v : 0.0; });
}

Tensor logcosh_shift(const Tensor& x) {
    return unary_op(x, [](double v) { return logcosh_shifted(v); },
                    [](double v) { return std::tanh(v); });
}

Tensor scale(const Tensor& x, double c) {
    return unary_op(x, [c](double v) { return v * c; }, [c](double) { return c; });
}

Tensor div_scalar(const Tensor& x, double c) {
    if (c == 0.0) throw DomainError("division by zero");
    return unary_op(x, [c](double v) { return v / c; }, [c](double) { return 1.0 / c; });
}

Tensor sum_all(const Tensor& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.value().size(); ++i) s += x.value()[i];
    return make_op(Array::scalar(s), {x}, [](Node& n) {
        Node& p = *n.parents[0];
        if (!p.requires_grad) return;
        ensure_grad(p);
        const double up = n.grad[0];
        for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += up;
    });
}

Tensor reshape(const Tensor& x, std::vector<std::size_t> shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    if (n != x.value().size()) {
        throw DimensionError("reshape cannot change the element count");
    }
    Array value(std::move(shape));
    for (std::size_t i = 0; i < value.size(); ++i) value[i] = x.value()[i];
    return make_op(std::move(value), {x}, [](Node& nd) {
        Node& p = *nd.parents[0];
        if (!p.requires_grad) return;
        ensure_grad(p);
        for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += nd.grad[i];
    });
}

Tensor gather_rows(const Tensor& x, std::vector<std::size_t> rows) {
    const Array& xv = x.value();
    if (xv.rank() != 2) throw DimensionError("gather_rows requires a rank-2 tensor");
    const std::size_t cols = xv.extent(1);
    for (std::size_t r : rows) {
        if (r >= xv.extent(0)) throw DomainError("gather_rows index out of range");
    }
    Array value({rows.size(), cols});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double* src = xv.data() + rows[i] * cols;
        double* dst = value.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) dst[j] = src[j];
    }
    return make_op(std::move(value), {x}, [rows = std::move(rows), cols](Node& n) {
        Node& p = *n.parents[0];
        if (!p.requires_grad) return;
        ensure_grad(p);
        const double* up = n.grad.data();
        for (std::size_t i = 0; i < rows.size(); ++i) {
            double* dst = p.grad.data() + rows[i] * cols;
            const double* src = up + i * cols;
            for (std::size_t j = 0; j < cols; ++j) dst[j] += src[j];
        }
    });
}

Tensor pick_per_row(const Tensor& x, std::vector<std::size_t> cols) {
    const Array& xv = x.value();
    if (xv.rank() != 2) throw DimensionError("pick_per_row requires a rank-2 tensor");
    if (cols.size() != xv.extent(0)) {
        throw DimensionError("pick_per_row needs one column index per row");
    }
    const std::size_t width = xv.extent(1);
    for (std::size_t c : cols) {
        if (c >= width) throw DomainError("pick_per_row column out of range");
    }
    Array value({cols.size()});
    for (std::size_t i = 0; i < cols.size(); ++i) value[i] = xv.data()[i * width + cols[i]];
    return make_op(std::move(value), {x}, [cols = std::move(cols), width](Node& n) {
        Node& p = *n.parents[0];
        if (!p.requires_grad) return;
        ensure_grad(p);
        for (std::size_t i = 0; i < cols.size(); ++i) {
            p.grad[i * width + cols[i]] += n.grad[i];
        }
    });
}

Tensor block_matvec(const Tensor& w_flat, const Tensor& feats, std::size_t d_out) {
    const Array& wv = w_flat.value();
    const Array& fv = feats.value();
    if (wv.rank() != 2 || fv.rank() != 2) {
        throw DimensionError("block_matvec requires rank-2 tensors");
    }
    const std::size_t n = wv.extent(0);
    const std::size_t d_in = fv.extent(1);
    if (fv.extent(0) != n) throw DimensionError("block_matvec row counts disagree");
    if (wv.extent(1) != d_out * d_in) {
        throw DimensionError("block_matvec weight width must equal d_out*d_in");
    }
    Array value({n, d_out});
    for (std::size_t p = 0; p < n; ++p) {
        const double* w = wv.data() + p * d_out * d_in;
        const double* f = fv.data() + p * d_in;
        double* o = value.data() + p * d_out;
        for (std::size_t r = 0; r < d_out; ++r) {
            double acc = 0.0;
            const double* wr = w + r * d_in;
            for (std::size_t c = 0; c < d_in; ++c) acc += wr[c] * f[c];
            o[r] = acc;
        }
    }
    return make_op(std::move(value), {w_flat, feats}, [d_out, d_in, n](Node& nd) {
        Node& pw = *nd.parents[0];
        Node& pf = *nd.parents[1];
        const double* up = nd.grad.data();
        if (pw.requires_grad) {
            ensure_grad(pw);
            const double* f = pf.value.data();
            double* gw = pw.grad.data();
            for (std::size_t p = 0; p < n; ++p) {
                const double* u = up + p * d_out;
                const double* fp = f + p * d_in;
                double* g = gw + p * d_out * d_in;
                for (std::size_t r = 0; r < d_out; ++r) {
                    const double ur = u[r];
                    double* gr = g + r * d_in;
                    for (std::size_t c = 0; c < d_in; ++c) gr[c] += ur * fp[c];
                }
            }
        }
        if (pf.requires_grad) {
            ensure_grad(pf);
            const double* w = pw.value.data();
            double* gf = pf.grad.data();
            for (std::size_t p = 0; p < n; ++p) {
                const double* u = up + p * d_out;
                const double* wp = w + p * d_out * d_in;
                double* g = gf + p * d_in;
                for (std::size_t r = 0; r < d_out; ++r) {
                    const double ur = u[r];
                    const double* wr = wp + r * d_in;
                    for (std::size_t c = 0; c < d_in; ++c) g[c] += ur * wr[c];
                }
            }
        }
    });
}

Tensor kernel_weight_regroup(const Tensor& w, std::size_t d_out, std::size_t d_in) {
    const Array& wv = w.value();
    if (wv.rank() != 2 || wv.extent(1) != d_out * d_in) {
        throw DimensionError("kernel_weight_regroup needs a (t x d_out*d_in) tensor");
    }
    const std::size_t t = wv.extent(0);
    Array value({d_in, t * d_out});
    for (std::size_t tt = 0; tt < t; ++tt) {
        for (std::size_t o = 0; o < d_out; ++o) {
            for (std::size_t i = 0; i < d_in; ++i) {
                value.data()[i * t * d_out + tt * d_out + o] =
                    wv.data()[tt * d_out * d_in + o * d_in + i];
            }
        }
    }
    return make_op(std::move(value), {w}, [t, d_out, d_in](Node& nd) {
        Node& p = *nd.parents[0];
        if (!p.requires_grad) return;
        ensure_grad(p);
        for (std::size_t tt = 0; tt < t; ++tt) {
            for (std::size_t o = 0; o < d_out; ++o) {
                for (std::size_t i = 0; i < d_in; ++i) {
                    p.grad.data()[tt * d_out * d_in + o * d_in + i] +=
                        nd.grad.data()[i * t * d_out + tt * d_out + o];
                }
            }
        }
    });
}

Tensor indexed_block_vecmat(const Tensor& vec, const Tensor& table,
                            std::vector<std::size_t> rows, std::size_t m) {
    const Array& vv = vec.value();
    const Array& tv = table.value();
    if (vv.rank() != 2 || tv.rank() != 2) {
        throw DimensionError("indexed_block_vecmat requires rank-2 tensors");
    }
    const std::size_t n = vv.extent(0);
    const std::size_t t = vv.extent(1);
    if (rows.size() != n) throw DimensionError("indexed_block_vecmat needs one row id per pair");
    if (tv.extent(1) != t * m) {
        throw DimensionError("indexed_block_vecmat table width must be t*m");
    }
    for (std::size_t r : rows) {
        if (r >= tv.extent(0)) throw DomainError("indexed_block_vecmat row out of range");
    }
    Array value({n, m});
    for (std::size_t p = 0; p < n; ++p) {
        const double* v = vv.data() + p * t;
        const double* tab = tv.data() + rows[p] * t * m;
        double* o = value.data() + p * m;
        for (std::size_t tt = 0; tt < t; ++tt) {
            const double vt = v[tt];
            const double* row = tab + tt * m;
            for (std::size_t c = 0; c < m; ++c) o[c] += vt * row[c];
        }
    }
    return make_op(std::move(value), {vec, table}, [rows = std::move(rows), t, m](Node& nd) {
        Node& pv = *nd.parents[0];
        Node& pt = *nd.parents[1];
        const double* up = nd.grad.data();
        const std::size_t n = pv.value.extent(0);
        if (pv.requires_grad) {
            ensure_grad(pv);
            const double* tab_all = pt.value.data();
            double* gv = pv.grad.data();
            for (std::size_t p = 0; p < n; ++p) {
                const double* u = up + p * m;
                const double* tab = tab_all + rows[p] * t * m;
                double* g = gv + p * t;
                for (std::size_t tt = 0; tt < t; ++tt) {
                    double acc = 0.0;
                    const double* row = tab + tt * m;
                    for (std::size_t c = 0; c < m; ++c) acc += u[c] * row[c];
                    g[tt] += acc;
                }
            }
        }
        if (pt.requires_grad) {
            ensure_grad(pt);
            const double* v_all = pv.value.data();
            double* gt = pt.grad.data();
            for (std::size_t p = 0; p < n; ++p) {
                const double* u = up + p * m;
                const double* v = v_all + p * t;
                double* g = gt + rows[p] * t * m;
                for (std::size_t tt = 0; tt < t; ++tt) {
                    const double vt = v[tt];
                    double* row = g + tt * m;
                    for (std::size_t c = 0; c < m; ++c) row[c] += vt * u[c];
                }
            }
        }
    });
}

Tensor segment_sum(const Tensor& rows, std::vector<std::size_t> segments,
                   std::size_t n_segments) {
    const Array& rv = rows.value();
    if (rv.rank() != 2) throw DimensionError("segment_sum requires a rank-2 tensor");
    if (segments.size() != rv.extent(0)) {
        throw DimensionError("segment_sum needs one segment id per row");
    }
    for (std::size_t s : segments) {
        if (s >= n_segments) throw DomainError("segment id out of range");
    }
    const std::size_t cols = rv.extent(1);
    Array value({n_segments, cols});
    for (std::size_t p = 0; p < segments.size(); ++p) {
        double* dst = value.data() + segments[p] * cols;
        const double* src = rv.data() + p * cols;
        for (std::size_t j = 0; j < cols; ++j) dst[j] += src[j];
    }
    return make_op(std::move(value), {rows}, [segments = std::move(segments), cols](Node& n) {
        Node& p = *n.parents[0];
        if (!p.requires_grad) return;
        ensure_grad(p);
        const double* up = n.grad.data();
        for (std::size_t i = 0; i < segments.size(); ++i) {
            const double* src = up + segments[i] * cols;
            double* dst = p.grad.data() + i * cols;
            for (std::size_t j = 0; j < cols; ++j) dst[j] += src[j];
        }
    });
}

Tensor cross_entropy_rows(const Tensor& scores, std::vector<std::size_t> targets) {
    const Array& sv = scores.value();
    if (sv.rank() != 2) throw DimensionError("cross_entropy_rows requires a rank-2 tensor");
    const std::size_t n = sv.extent(0);
    const std::size_t k = sv.extent(1);
    if (targets.size() != n) throw DimensionError("cross_entropy_rows needs one target per row");
    for (std::size_t t : targets) {
        if (t >= k) throw DomainError("cross_entropy target out of range");
    }
    Array value({n});
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = sv.data() + i * k;
        double mx = row[0];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) sum += std::exp(row[j] - mx);
        value[i] = mx + std::log(sum) - row[targets[i]];
    }
    return make_op(std::move(value), {scores}, [targets = std::move(targets), k](Node& n) {
        Node& p = *n.parents[0];
        if (!p.requires_grad) return;
        ensure_grad(p);
        const std::size_t rows = p.value.extent(0);
        for (std::size_t i = 0; i < rows; ++i) {
            const double* row = p.value.data() + i * k;
            double mx = row[0];
            for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
            double sum = 0.0;
            for (std::size_t j = 0; j < k; ++j) sum += std::exp(row[j] - mx);
            const double up = n.grad[i];
            double* g = p.grad.data() + i * k;
            for (std::size_t j = 0; j < k; ++j) {
                double soft = std::exp(row[j] - mx) / sum;
                g[j] += up * (soft - (j == targets[i] ? 1.0 : 0.0));
            }
        }
    });
}

void backward(const Tensor& root) {
    if (!root.defined()) throw ContractError("backward on an undefined tensor");
    Node* root_node = root.node();
    if (root_node->value.size() != 1) {
        throw ContractError("backward requires a scalar-shaped root, got shape " +
                            root_node->value.shape_str());
    }

    // Collect the differentiable subgraph.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{root_node};
    seen.insert(root_node);
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (const auto& p : n->parents) {
            if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
        }
    }

    // Ids increase monotonically along construction, so descending-id order
    // is a reverse topological order. Reset grads first so repeated backward
    // calls on one graph stay bit-identical.
    std::sort(order.begin(), order.end(), [](Node* a, Node* b) { return a->id > b->id; });
    for (Node* n : order) n->grad_ready = false;

    ensure_grad(*root_node);
    for (std::size_t i = 0; i < root_node->grad.size(); ++i) root_node->grad[i] = 1.0;
    for (Node* n : order) {
        if (n->backprop && n->grad_ready) n->backprop(*n);
    }
}

}  // namespace cotic
