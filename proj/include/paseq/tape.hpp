#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "paseq/param_store.hpp"
#include "paseq/value_array.hpp"

namespace paseq::num {

using NodeId = int;

// Reverse-mode gradient tape. Forward values are computed eagerly at node
// creation (training control flow, e.g. feeding the decoder its own argmax,
// reads them), and each node records a closure that pushes its output
// gradient to its inputs. The tape is rebuilt per sequence; node order is a
// topological order by construction, so backward() is a single reverse scan.
class Tape {
public:
    struct Node {
        ValueArray val;
        ValueArray grad;
        std::function<void(Tape&)> back;  // empty for leaves
    };

    const ValueArray& val(NodeId id) const { return nodes_[id].val; }
    ValueArray& grad(NodeId id) { return nodes_[id].grad; }
    std::size_t size() const { return nodes_.size(); }

    void clear() { nodes_.clear(); }

    NodeId constant(ValueArray v) { return push(std::move(v), nullptr); }

    // Leaf bound to a stored parameter; backward accumulates into the
    // store's gradient slot. Binding the same path twice is legal (both
    // nodes accumulate), model code binds once per tape for speed.
    NodeId param(ParameterStore& store, const std::string& path) {
        NodeId id = push(store.value(path), nullptr);
        nodes_[id].back = [&store, path, id](Tape& t) {
            ValueArray& g = store.grad(path);
            const ValueArray& dy = t.nodes_[id].grad;
            for (std::size_t i = 0; i < g.size(); ++i) g.v[i] += dy.v[i];
        };
        return id;
    }

    // y = W x, W rank-2 [m x n], x rank-1 [n].
    NodeId matvec(NodeId w, NodeId x, const std::string& what = "matvec") {
        const ValueArray& W = val(w);
        const ValueArray& X = val(x);
        if (W.rank() != 2 || X.size() != W.cols())
            throw ShapeError(what + ": " + shape_str(W) + " * " + shape_str(X));
        ValueArray y = ValueArray::zeros({W.rows()});
        for (std::size_t i = 0; i < W.rows(); ++i) {
            double acc = 0.0;
            const double* wrow = &W.v[i * W.cols()];
            for (std::size_t j = 0; j < W.cols(); ++j) acc += wrow[j] * X.v[j];
            y.v[i] = acc;
        }
        NodeId id = push(std::move(y), nullptr);
        nodes_[id].back = [w, x, id](Tape& t) {
            const ValueArray& dy = t.nodes_[id].grad;
            const ValueArray& W = t.nodes_[w].val;
            const ValueArray& X = t.nodes_[x].val;
            ValueArray& dW = t.nodes_[w].grad;
            ValueArray& dX = t.nodes_[x].grad;
            const std::size_t m = W.rows(), n = W.cols();
            for (std::size_t i = 0; i < m; ++i) {
                const double d = dy.v[i];
                if (d == 0.0) continue;
                double* dwrow = &dW.v[i * n];
                const double* wrow = &W.v[i * n];
                for (std::size_t j = 0; j < n; ++j) {
                    dwrow[j] += d * X.v[j];
                    dX.v[j] += d * wrow[j];
                }
            }
        };
        return id;
    }

    NodeId add(NodeId a, NodeId b) {
        require_same(a, b, "add");
        ValueArray y = val(a);
        for (std::size_t i = 0; i < y.size(); ++i) y.v[i] += val(b).v[i];
        NodeId id = push(std::move(y), nullptr);
        nodes_[id].back = [a, b, id](Tape& t) {
            const ValueArray& dy = t.nodes_[id].grad;
            for (std::size_t i = 0; i < dy.size(); ++i) {
                t.nodes_[a].grad.v[i] += dy.v[i];
                t.nodes_[b].grad.v[i] += dy.v[i];
            }
        };
        return id;
    }

    NodeId mul(NodeId a, NodeId b) {
        require_same(a, b, "mul");
        ValueArray y = val(a);
        for (std::size_t i = 0; i < y.size(); ++i) y.v[i] *= val(b).v[i];
        NodeId id = push(std::move(y), nullptr);
        nodes_[id].back = [a, b, id](Tape& t) {
            const ValueArray& dy = t.nodes_[id].grad;
            const ValueArray& va = t.nodes_[a].val;
            const ValueArray& vb = t.nodes_[b].val;
            for (std::size_t i = 0; i < dy.size(); ++i) {
                t.nodes_[a].grad.v[i] += dy.v[i] * vb.v[i];
                t.nodes_[b].grad.v[i] += dy.v[i] * va.v[i];
            }
        };
        return id;
    }

    // Elementwise product with a constant vector (zoneout masks, Gaussian
    // attention factors).
    NodeId cmul(NodeId a, ValueArray c) {
        if (val(a).size() != c.size()) throw ShapeError("cmul: size mismatch");
        ValueArray y = val(a);
        for (std::size_t i = 0; i < y.size(); ++i) y.v[i] *= c.v[i];
        NodeId cid = constant(std::move(c));
        NodeId id = push(std::move(y), nullptr);
        nodes_[id].back = [a, cid, id](Tape& t) {
            const ValueArray& dy = t.nodes_[id].grad;
            const ValueArray& c = t.nodes_[cid].val;
            for (std::size_t i = 0; i < dy.size(); ++i)
                t.nodes_[a].grad.v[i] += dy.v[i] * c.v[i];
        };
        return id;
    }

    NodeId scale(NodeId a, double c) {
        ValueArray y = val(a);
        for (double& x : y.v) x *= c;
        NodeId id = push(std::move(y), nullptr);
        nodes_[id].back = [a, c, id](Tape& t) {
            const ValueArray& dy = t.nodes_[id].grad;
            for (std::size_t i = 0; i < dy.size(); ++i)
                t.nodes_[a].grad.v[i] += c * dy.v[i];
        };
        return id;
    }

    // vec * scalar node (shape {1}).
    NodeId scale_by(NodeId vec, NodeId scalar) {
        if (val(scalar).size() != 1) throw ShapeError("scale_by: scalar must be {1}");
        const double s = val(scalar).v[0];
        ValueArray y = val(vec);
        for (double& x : y.v) x *= s;
        NodeId id = push(std::move(y), nullptr);
        nodes_[id].back = [vec, scalar, id](Tape& t) {
            const ValueArray& dy = t.nodes_[id].grad;
            const ValueArray& vv = t.nodes_[vec].val;
            const double s = t.nodes_[scalar].val.v[0];
            double ds = 0.0;
            for (std::size_t i = 0; i < dy.size(); ++i) {
                t.nodes_[vec].grad.v[i] += s * dy.v[i];
                ds += vv.v[i] * dy.v[i];
            }
            t.nodes_[scalar].grad.v[0] += ds;
        };
        return id;
    }

    NodeId sigmoid(NodeId a) {
        ValueArray y = val(a);
        for (double& x : y.v) x = 1.0 / (1.0 + std::exp(-x));
        NodeId id = push(std::move(y), nullptr);
        nodes_[id].back = [a, id](Tape& t) {
            const ValueArray& dy = t.nodes_[id].grad;
            const ValueArray& y = t.nodes_[id].val;
            for (std::size_t i = 0; i < dy.size(); ++i)
                t.nodes_[a].grad.v[i] += dy.v[i] * y.v[i] * (1.0 - y.v[i]);
        };
        return id;
    }

    NodeId tanh_(NodeId a) {
        ValueArray y = val(a);
        for (double& x : y.v) x = std::tanh(x);
        NodeId id = push(std::move(y), nullptr);
        nodes_[id].back = [a, id](Tape& t) {
            const ValueArray& dy = t.nodes_[id].grad;
            const ValueArray& y = t.nodes_[id].val;
            for (std::size_t i = 0; i < dy.size(); ++i)
                t.nodes_[a].grad.v[i] += dy.v[i] * (1.0 - y.v[i] * y.v[i]);
        };
        return id;
    }

    NodeId concat(NodeId a, NodeId b) {
        ValueArray y = ValueArray::zeros({val(a).size() + val(b).size()});
        std::copy(val(a).v.begin(), val(a).v.end(), y.v.begin());
        std::copy(val(b).v.begin(), val(b).v.end(), y.v.begin() + val(a).size());
        NodeId id = push(std::move(y), nullptr);
        const std::size_t na = val(a).size();
        nodes_[id].back = [a, b, na, id](Tape& t) {
            const ValueArray& dy = t.nodes_[id].grad;
            for (std::size_t i = 0; i < na; ++i) t.nodes_[a].grad.v[i] += dy.v[i];
            for (std::size_t i = na; i < dy.size(); ++i)
                t.nodes_[b].grad.v[i - na] += dy.v[i];
        };
        return id;
    }

    NodeId slice(NodeId a, std::size_t offset, std::size_t len) {
        if (offset + len > val(a).size()) throw ShapeError("slice: out of range");
        ValueArray y = ValueArray::zeros({len});
        std::copy(val(a).v.begin() + offset, val(a).v.begin() + offset + len,
                  y.v.begin());
        NodeId id = push(std::move(y), nullptr);
        nodes_[id].back = [a, offset, len, id](Tape& t) {
            const ValueArray& dy = t.nodes_[id].grad;
            for (std::size_t i = 0; i < len; ++i)
                t.nodes_[a].grad.v[offset + i] += dy.v[i];
        };
        return id;
    }

    // Row r of a rank-2 table (embedding lookup).
    NodeId row(NodeId table, std::size_t r) {
        const ValueArray& tb = val(table);
        if (tb.rank() != 2 || r >= tb.rows())
            throw ContractError("row: index " + std::to_string(r) + " out of " +
                                shape_str(tb));
        return slice(table, r * tb.cols(), tb.cols());
    }

    NodeId dot(NodeId a, NodeId b) {
        require_same(a, b, "dot");
        double acc = 0.0;
        for (std::size_t i = 0; i < val(a).size(); ++i) acc += val(a).v[i] * val(b).v[i];
        NodeId id = push(ValueArray::scalar(acc), nullptr);
        nodes_[id].back = [a, b, id](Tape& t) {
            const double d = t.nodes_[id].grad.v[0];
            const ValueArray& va = t.nodes_[a].val;
            const ValueArray& vb = t.nodes_[b].val;
            for (std::size_t i = 0; i < va.size(); ++i) {
                t.nodes_[a].grad.v[i] += d * vb.v[i];
                t.nodes_[b].grad.v[i] += d * va.v[i];
            }
        };
        return id;
    }

    // Gathers scalar {1} nodes into one rank-1 vector.
    NodeId stack(std::vector<NodeId> scalars) {
        ValueArray y = ValueArray::zeros({scalars.size()});
        for (std::size_t i = 0; i < scalars.size(); ++i) {
            if (val(scalars[i]).size() != 1) throw ShapeError("stack: inputs must be {1}");
            y.v[i] = val(scalars[i]).v[0];
        }
        NodeId id = push(std::move(y), nullptr);
        nodes_[id].back = [ins = std::move(scalars), id](Tape& t) {
            const ValueArray& dy = t.nodes_[id].grad;
            for (std::size_t i = 0; i < ins.size(); ++i)
                t.nodes_[ins[i]].grad.v[0] += dy.v[i];
        };
        return id;
    }

    // Max-subtracted softmax over a rank-1 node.
    NodeId softmax(NodeId a) {
        NodeId id = push(softmax_value(val(a)), nullptr);
        nodes_[id].back = [a, id](Tape& t) {
            const ValueArray& dy = t.nodes_[id].grad;
            const ValueArray& y = t.nodes_[id].val;
            double dotv = 0.0;
            for (std::size_t i = 0; i < dy.size(); ++i) dotv += dy.v[i] * y.v[i];
            for (std::size_t i = 0; i < dy.size(); ++i)
                t.nodes_[a].grad.v[i] += y.v[i] * (dy.v[i] - dotv);
        };
        return id;
    }

    // y = a / sum(a); entries must be positive (softmax output times a
    // positive factor always is).
    NodeId normalize(NodeId a) {
        const ValueArray& va = val(a);
        if (va.size() == 0) throw ContractError("normalize: empty input");
        double s = 0.0;
        for (double x : va.v) s += x;
        if (!(s > 0.0)) throw NumericError("normalize: non-positive mass");
        ValueArray y = va;
        for (double& x : y.v) x /= s;
        NodeId id = push(std::move(y), nullptr);
        nodes_[id].back = [a, s, id](Tape& t) {
            const ValueArray& dy = t.nodes_[id].grad;
            const ValueArray& y = t.nodes_[id].val;
            double dotv = 0.0;
            for (std::size_t i = 0; i < dy.size(); ++i) dotv += dy.v[i] * y.v[i];
            for (std::size_t i = 0; i < dy.size(); ++i)
                t.nodes_[a].grad.v[i] += (dy.v[i] - dotv) / s;
        };
        return id;
    }

    // -log softmax(logits)[target], fused for numerical stability.
    NodeId nll(NodeId logits, std::size_t target) {
        const ValueArray& z = val(logits);
        if (target >= z.size()) throw ContractError("nll: target out of range");
        double mx = z.v[0];
        for (double x : z.v) mx = std::max(mx, x);
        double lse = 0.0;
        for (double x : z.v) lse += std::exp(x - mx);
        lse = mx + std::log(lse);
        NodeId id = push(ValueArray::scalar(lse - z.v[target]), nullptr);
        nodes_[id].back = [logits, target, id](Tape& t) {
            const double d = t.nodes_[id].grad.v[0];
            ValueArray p = softmax_value(t.nodes_[logits].val);
            for (std::size_t i = 0; i < p.size(); ++i)
                t.nodes_[logits].grad.v[i] += d * p.v[i];
            t.nodes_[logits].grad.v[target] -= d;
        };
        return id;
    }

    // Mean of scalar {1} nodes.
    NodeId mean(std::vector<NodeId> scalars) {
        if (scalars.empty()) throw ContractError("mean: empty input");
        double acc = 0.0;
        for (NodeId s : scalars) acc += val(s).v[0];
        const double inv = 1.0 / static_cast<double>(scalars.size());
        NodeId id = push(ValueArray::scalar(acc * inv), nullptr);
        nodes_[id].back = [ins = std::move(scalars), inv, id](Tape& t) {
            const double d = t.nodes_[id].grad.v[0] * inv;
            for (NodeId s : ins) t.nodes_[s].grad.v[0] += d;
        };
        return id;
    }

    // Seeds d(target) = 1 and runs the reverse scan. Parameter gradients
    // accumulate into their stores; call ParameterStore::zero_grads() first
    // unless accumulation over a batch is intended.
    void backward(NodeId target) {
        if (val(target).size() != 1)
            throw ContractError("backward: target must be a scalar node");
        nodes_[target].grad.v[0] = 1.0;
        for (NodeId id = target; id >= 0; --id)
            if (nodes_[id].back) nodes_[id].back(*this);
    }

    // Stable softmax on plain values (shared by the tape op and callers that
    // need distributions outside the tape).
    static ValueArray softmax_value(const ValueArray& logits) {
        if (logits.size() == 0)
            throw ContractError("softmax: empty input");
        logits.ensure_finite("softmax input");
        ValueArray y = logits;
        double mx = y.v[0];
        for (double x : y.v) mx = std::max(mx, x);
        double sum = 0.0;
        for (double& x : y.v) {
            x = std::exp(x - mx);
            sum += x;
        }
        for (double& x : y.v) x /= sum;
        return y;
    }

private:
    NodeId push(ValueArray val, std::nullptr_t) {
        Node n;
        n.grad = ValueArray::zeros(val.shape);
        n.val = std::move(val);
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size()) - 1;
    }

    void require_same(NodeId a, NodeId b, const char* what) const {
        if (!val(a).same_shape(val(b)))
            throw ShapeError(std::string(what) + ": " + shape_str(val(a)) + " vs " +
                             shape_str(val(b)));
    }

    std::vector<Node> nodes_;
};

// softmax as a standalone operation on values.
inline ValueArray softmax(const ValueArray& logits) {
    return Tape::softmax_value(logits);
}

}  // namespace paseq::num
