#pragma once

// Minimal reverse-mode differentiation over dense (channels, height, width)
// tensors. The graph is built eagerly (define-by-run): every builder call
// computes its output value immediately and records the node on the tape, so
// one recording supports exactly one backward() sweep. Primitive set: 2-D
// convolution (stride 1, same-size zero padding), PReLU with a trainable
// scalar slope, channel concatenation/slicing, addition, multiplication by a
// trainable scalar, generic linear operators supplied as forward/adjoint
// closures, and the scalar reductions sum, 0.5*sum-of-squares, and MSE.
//
// Gradient conventions: backward(loss) requires a scalar loss node, allocates
// zero gradients for every requires_grad leaf (so unused parameters report
// exact zeros), and accumulates with += so nodes feeding several consumers
// are handled correctly. Gradients propagate only along paths that reach a
// requires_grad leaf.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sktomo/conv.hpp"

namespace sktomo {

struct TensorShape {
    int c = 0;
    int h = 0;
    int w = 0;

    std::size_t size() const { return std::size_t(c) * h * w; }
    bool operator==(const TensorShape& o) const { return c == o.c && h == o.h && w == o.w; }
    bool operator!=(const TensorShape& o) const { return !(*this == o); }
};

inline TensorShape scalar_shape() { return TensorShape{1, 1, 1}; }

// Layout convention for convolution kernels stored as rank-3 tensors:
// (out_channels, in_channels * ksize, ksize), contiguous in the usual
// [out][in][krow][kcol] order.
inline TensorShape kernel_shape(int cout, int cin, int ksize) {
    return TensorShape{cout, cin * ksize, ksize};
}

template <typename Real>
class Tape {
  public:
    using NodeId = std::int32_t;

    // ---- graph builders -------------------------------------------------

    NodeId leaf(const TensorShape& s, std::vector<Real> values, bool requires_grad) {
        if (s.c <= 0 || s.h <= 0 || s.w <= 0)
            throw std::invalid_argument("tape leaf: shape entries must be positive");
        if (values.size() != s.size())
            throw std::invalid_argument("tape leaf: value count does not match shape");
        Node n;
        n.kind = OpKind::leaf;
        n.shape = s;
        n.value = std::move(values);
        n.requires_grad_leaf = requires_grad;
        n.needs = requires_grad;
        return push(std::move(n));
    }

    NodeId zeros(const TensorShape& s) {
        return leaf(s, std::vector<Real>(s.size(), Real(0)), false);
    }

    // Cross-correlation with stride 1 and zero padding (ksize-1)/2, so the
    // spatial size is preserved. kernel: kernel_shape(cout, cin, ksize);
    // bias: (cout, 1, 1).
    NodeId conv2d(NodeId x, NodeId kernel, NodeId bias, int ksize) {
        const Node& nx = at(x);
        const Node& nk = at(kernel);
        const Node& nb = at(bias);
        if (ksize < 1 || ksize % 2 == 0)
            throw std::invalid_argument("conv2d: kernel size must be odd and positive");
        const int cin = nx.shape.c;
        const int cout = nk.shape.c;
        if (nk.shape.h != cin * ksize || nk.shape.w != ksize)
            throw std::invalid_argument(
                "conv2d: channel mismatch between input and kernel shapes");
        if (nb.shape != TensorShape{cout, 1, 1})
            throw std::invalid_argument("conv2d: bias shape must be (out_channels, 1, 1)");
        Node n;
        n.kind = OpKind::conv;
        n.shape = TensorShape{cout, nx.shape.h, nx.shape.w};
        n.in0 = x;
        n.in1 = kernel;
        n.in2 = bias;
        n.i0 = ksize;
        n.needs = nx.needs || nk.needs || nb.needs;
        n.value.resize(n.shape.size());
        conv2d_forward(nx.value.data(), cin, nk.value.data(), nb.value.data(), n.value.data(),
                       cout, nx.shape.h, nx.shape.w, ksize, (ksize - 1) / 2);
        return push(std::move(n));
    }

    // PReLU with one trainable slope: max(x, 0) + slope * min(x, 0).
    NodeId prelu(NodeId x, NodeId slope) {
        const Node& nx = at(x);
        const Node& ns = at(slope);
        if (ns.shape.size() != 1)
            throw std::invalid_argument("prelu: slope must be a scalar node");
        Node n;
        n.kind = OpKind::prelu;
        n.shape = nx.shape;
        n.in0 = x;
        n.in1 = slope;
        n.needs = nx.needs || ns.needs;
        n.value.resize(nx.value.size());
        const Real a = ns.value[0];
        for (std::size_t i = 0; i < nx.value.size(); ++i) {
            const Real v = nx.value[i];
            n.value[i] = v > Real(0) ? v : a * v;
        }
        return push(std::move(n));
    }

    NodeId concat(const std::vector<NodeId>& parts) {
        if (parts.empty()) throw std::invalid_argument("concat: needs at least one input");
        const Node& first = at(parts[0]);
        int c_total = 0;
        for (NodeId id : parts) {
            const Node& p = at(id);
            if (p.shape.h != first.shape.h || p.shape.w != first.shape.w)
                throw std::invalid_argument("concat: spatial mismatch between inputs");
            c_total += p.shape.c;
        }
        Node n;
        n.kind = OpKind::concat;
        n.shape = TensorShape{c_total, first.shape.h, first.shape.w};
        n.ins = parts;
        n.value.reserve(n.shape.size());
        for (NodeId id : parts) {
            const Node& p = at(id);
            n.needs = n.needs || p.needs;
            n.value.insert(n.value.end(), p.value.begin(), p.value.end());
        }
        return push(std::move(n));
    }

    NodeId add(NodeId a, NodeId b) {
        const Node& na = at(a);
        const Node& nb = at(b);
        if (na.shape != nb.shape) throw std::invalid_argument("add: shape mismatch");
        Node n;
        n.kind = OpKind::add;
        n.shape = na.shape;
        n.in0 = a;
        n.in1 = b;
        n.needs = na.needs || nb.needs;
        n.value.resize(na.value.size());
        for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = na.value[i] + nb.value[i];
        return push(std::move(n));
    }

    NodeId slice_channels(NodeId x, int first, int count) {
        const Node& nx = at(x);
        if (first < 0 || count < 1 || first + count > nx.shape.c)
            throw std::invalid_argument("slice_channels: channel range out of bounds");
        Node n;
        n.kind = OpKind::slice;
        n.shape = TensorShape{count, nx.shape.h, nx.shape.w};
        n.in0 = x;
        n.i0 = first;
        n.i1 = count;
        n.needs = nx.needs;
        const std::size_t plane = std::size_t(nx.shape.h) * nx.shape.w;
        n.value.assign(nx.value.begin() + std::ptrdiff_t(first * plane),
                       nx.value.begin() + std::ptrdiff_t((first + count) * plane));
        return push(std::move(n));
    }

    // Elementwise multiplication by a (possibly trainable) scalar node.
    NodeId scale(NodeId x, NodeId scalar) {
        const Node& nx = at(x);
        const Node& ns = at(scalar);
        if (ns.shape.size() != 1)
            throw std::invalid_argument("scale: scale factor must be a scalar node");
        Node n;
        n.kind = OpKind::scale;
        n.shape = nx.shape;
        n.in0 = x;
        n.in1 = scalar;
        n.needs = nx.needs || ns.needs;
        n.value.resize(nx.value.size());
        const Real s = ns.value[0];
        for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = s * nx.value[i];
        return push(std::move(n));
    }

    // Generic linear map: forward writes out_shape.size() values from the
    // input buffer; adjoint maps a range-sized buffer back to a domain-sized
    // one. The supplied adjoint must be the exact transpose of the forward
    // closure for gradients to be correct.
    NodeId linear_op(NodeId x, const TensorShape& out_shape,
                     std::function<void(const Real*, Real*)> forward,
                     std::function<void(const Real*, Real*)> adjoint) {
        const Node& nx = at(x);
        if (!forward || !adjoint)
            throw std::invalid_argument("linear_op: forward and adjoint closures are required");
        if (out_shape.c <= 0 || out_shape.h <= 0 || out_shape.w <= 0)
            throw std::invalid_argument("linear_op: output shape entries must be positive");
        Node n;
        n.kind = OpKind::linop;
        n.shape = out_shape;
        n.in0 = x;
        n.needs = nx.needs;
        n.adj_fn = std::move(adjoint);
        n.value.assign(out_shape.size(), Real(0));
        forward(nx.value.data(), n.value.data());
        return push(std::move(n));
    }

    // Scalar reductions.
    NodeId sum(NodeId x) {
        const Node& nx = at(x);
        Real acc = Real(0);
        for (Real v : nx.value) acc += v;
        Node n;
        n.kind = OpKind::sumall;
        n.shape = scalar_shape();
        n.in0 = x;
        n.needs = nx.needs;
        n.value = {acc};
        return push(std::move(n));
    }

    NodeId half_sumsq(NodeId x) {
        const Node& nx = at(x);
        Real acc = Real(0);
        for (Real v : nx.value) acc += v * v;
        Node n;
        n.kind = OpKind::halfsq;
        n.shape = scalar_shape();
        n.in0 = x;
        n.needs = nx.needs;
        n.value = {Real(0.5) * acc};
        return push(std::move(n));
    }

    NodeId mse(NodeId x, std::vector<Real> target) {
        const Node& nx = at(x);
        if (target.size() != nx.value.size())
            throw std::invalid_argument("mse: target size does not match input");
        Real acc = Real(0);
        for (std::size_t i = 0; i < target.size(); ++i) {
            const Real d = nx.value[i] - target[i];
            acc += d * d;
        }
        Node n;
        n.kind = OpKind::mseloss;
        n.shape = scalar_shape();
        n.in0 = x;
        n.needs = nx.needs;
        n.aux = std::move(target);
        n.value = {acc / Real(nx.value.size())};
        return push(std::move(n));
    }

    // ---- inspection ------------------------------------------------------

    std::size_t node_count() const { return nodes_.size(); }
    const TensorShape& shape(NodeId id) const { return at(id).shape; }
    const std::vector<Real>& value(NodeId id) const { return at(id).value; }
    bool needs_grad(NodeId id) const { return at(id).needs; }

    const std::vector<Real>& grad(NodeId id) const {
        const Node& n = at(id);
        if (!backward_done_) throw std::logic_error("grad: backward has not run on this tape");
        if (n.grad.empty())
            throw std::logic_error("grad: no gradient recorded for this node");
        return n.grad;
    }

    // ---- backward --------------------------------------------------------

    void backward(NodeId loss) {
        at(loss);
        if (backward_done_)
            throw std::logic_error("backward: tape already differentiated once");
        if (nodes_[std::size_t(loss)].shape.size() != 1)
            throw std::invalid_argument("backward: loss must be a scalar node");
        backward_done_ = true;
        for (Node& n : nodes_)
            if (n.kind == OpKind::leaf && n.requires_grad_leaf)
                n.grad.assign(n.value.size(), Real(0));
        if (!nodes_[std::size_t(loss)].needs) return;
        touch(loss);
        nodes_[std::size_t(loss)].grad[0] = Real(1);
        for (NodeId id = loss; id >= 0; --id) {
            Node& n = nodes_[std::size_t(id)];
            if (!n.needs || n.grad.empty()) continue;
            propagate(n);
        }
    }

    void clear() {
        nodes_.clear();
        backward_done_ = false;
    }

  private:
    enum class OpKind { leaf, conv, prelu, concat, add, slice, scale, linop, sumall, halfsq, mseloss };

    struct Node {
        OpKind kind = OpKind::leaf;
        TensorShape shape;
        std::vector<Real> value;
        std::vector<Real> grad;
        bool needs = false;
        bool requires_grad_leaf = false;
        NodeId in0 = -1, in1 = -1, in2 = -1;
        std::vector<NodeId> ins;
        int i0 = 0, i1 = 0;
        std::function<void(const Real*, Real*)> adj_fn;
        std::vector<Real> aux;
    };

    std::vector<Node> nodes_;
    bool backward_done_ = false;

    NodeId push(Node&& n) {
        nodes_.push_back(std::move(n));
        return NodeId(nodes_.size() - 1);
    }

    const Node& at(NodeId id) const {
        if (id < 0 || std::size_t(id) >= nodes_.size())
            throw std::invalid_argument("tape: node id out of range");
        return nodes_[std::size_t(id)];
    }

    void touch(NodeId id) {
        Node& n = nodes_[std::size_t(id)];
        if (n.grad.empty()) n.grad.assign(n.value.size(), Real(0));
    }

    // Accumulates df/dinput into the input nodes of n given n.grad.
    void propagate(Node& n) {
        switch (n.kind) {
            case OpKind::leaf:
                break;
            case OpKind::conv: {
                Node& nx = nodes_[std::size_t(n.in0)];
                Node& nk = nodes_[std::size_t(n.in1)];
                Node& nb = nodes_[std::size_t(n.in2)];
                const int cin = nx.shape.c, cout = n.shape.c;
                const int h = n.shape.h, w = n.shape.w;
                const int k = n.i0, pad = (n.i0 - 1) / 2;
                if (nx.needs) {
                    scratch_.assign(nx.value.size(), Real(0));
                    conv2d_backward_input(scratch_.data(), cin, nk.value.data(), n.grad.data(),
                                          cout, h, w, k, pad);
                    touch(n.in0);
                    axpy(nx.grad, scratch_);
                }
                if (nk.needs || nb.needs) {
                    scratch_.assign(nk.value.size(), Real(0));
                    scratch_b_.assign(std::size_t(cout), Real(0));
                    conv2d_backward_weights(nx.value.data(), cin, n.grad.data(), cout,
                                            scratch_.data(), scratch_b_.data(), h, w, k, pad);
                    if (nk.needs) {
                        touch(n.in1);
                        axpy(nk.grad, scratch_);
                    }
                    if (nb.needs) {
                        touch(n.in2);
                        axpy(nb.grad, scratch_b_);
                    }
                }
                break;
            }
            case OpKind::prelu: {
                Node& nx = nodes_[std::size_t(n.in0)];
                Node& ns = nodes_[std::size_t(n.in1)];
                const Real a = ns.value[0];
                if (nx.needs) {
                    touch(n.in0);
                    for (std::size_t i = 0; i < n.grad.size(); ++i)
                        nx.grad[i] += n.grad[i] * (nx.value[i] > Real(0) ? Real(1) : a);
                }
                if (ns.needs) {
                    touch(n.in1);
                    Real acc = Real(0);
                    for (std::size_t i = 0; i < n.grad.size(); ++i)
                        if (!(nx.value[i] > Real(0))) acc += n.grad[i] * nx.value[i];
                    ns.grad[0] += acc;
                }
                break;
            }
            case OpKind::concat: {
                std::size_t offset = 0;
                for (NodeId in : n.ins) {
                    Node& p = nodes_[std::size_t(in)];
                    const std::size_t len = p.value.size();
                    if (p.needs) {
                        touch(in);
                        for (std::size_t i = 0; i < len; ++i) p.grad[i] += n.grad[offset + i];
                    }
                    offset += len;
                }
                break;
            }
            case OpKind::add: {
                for (NodeId in : {n.in0, n.in1}) {
                    Node& p = nodes_[std::size_t(in)];
                    if (!p.needs) continue;
                    touch(in);
                    axpy(p.grad, n.grad);
                }
                break;
            }
            case OpKind::slice: {
                Node& nx = nodes_[std::size_t(n.in0)];
                if (!nx.needs) break;
                touch(n.in0);
                const std::size_t plane = std::size_t(n.shape.h) * n.shape.w;
                const std::size_t base = std::size_t(n.i0) * plane;
                for (std::size_t i = 0; i < n.grad.size(); ++i) nx.grad[base + i] += n.grad[i];
                break;
            }
            case OpKind::scale: {
                Node& nx = nodes_[std::size_t(n.in0)];
                Node& ns = nodes_[std::size_t(n.in1)];
                const Real s = ns.value[0];
                if (nx.needs) {
                    touch(n.in0);
                    for (std::size_t i = 0; i < n.grad.size(); ++i) nx.grad[i] += s * n.grad[i];
                }
                if (ns.needs) {
                    touch(n.in1);
                    Real acc = Real(0);
                    for (std::size_t i = 0; i < n.grad.size(); ++i) acc += n.grad[i] * nx.value[i];
                    ns.grad[0] += acc;
                }
                break;
            }
            case OpKind::linop: {
                Node& nx = nodes_[std::size_t(n.in0)];
                if (!nx.needs) break;
                scratch_.assign(nx.value.size(), Real(0));
                n.adj_fn(n.grad.data(), scratch_.data());
                touch(n.in0);
                axpy(nx.grad, scratch_);
                break;
            }
            case OpKind::sumall: {
                Node& nx = nodes_[std::size_t(n.in0)];
                if (!nx.needs) break;
                touch(n.in0);
                const Real g = n.grad[0];
                for (Real& v : nx.grad) v += g;
                break;
            }
            case OpKind::halfsq: {
                Node& nx = nodes_[std::size_t(n.in0)];
                if (!nx.needs) break;
                touch(n.in0);
                const Real g = n.grad[0];
                for (std::size_t i = 0; i < nx.grad.size(); ++i) nx.grad[i] += g * nx.value[i];
                break;
            }
            case OpKind::mseloss: {
                Node& nx = nodes_[std::size_t(n.in0)];
                if (!nx.needs) break;
                touch(n.in0);
                const Real g = n.grad[0] * Real(2) / Real(nx.value.size());
                for (std::size_t i = 0; i < nx.grad.size(); ++i)
                    nx.grad[i] += g * (nx.value[i] - n.aux[i]);
                break;
            }
        }
    }

    static void axpy(std::vector<Real>& dst, const std::vector<Real>& src) {
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }

    std::vector<Real> scratch_;
    std::vector<Real> scratch_b_;
};

}  // namespace sktomo
