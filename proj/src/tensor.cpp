#include "crformer/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "crformer/errors.hpp"

namespace crformer {

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

std::vector<double>& TensorNode::grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
}

// ---- Tensor handle --------------------------------------------------------

static std::shared_ptr<TensorNode> require_node(const std::shared_ptr<TensorNode>& n) {
    if (!n) throw ContractError("tensor: empty handle");
    return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
    for (int d : shape) {
        if (d <= 0) throw DimensionError("tensor: non-positive dimension in " + shape_str(shape));
    }
    auto node = std::make_shared<TensorNode>();
    node->value.assign(static_cast<size_t>(shape_numel(shape)), v);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor(node);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
        throw DimensionError("tensor: shape " + shape_str(shape) + " does not match data length " +
                             std::to_string(data.size()));
    }
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->value = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(node);
}

Tensor Tensor::scalar(double v) { return from_data({1}, {v}); }

const Shape& Tensor::shape() const { return require_node(node_)->shape; }
std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(require_node(node_)->value.size()); }
int Tensor::dim(int i) const { return require_node(node_)->shape.at(static_cast<size_t>(i)); }

std::vector<double>& Tensor::data() { return require_node(node_)->value; }
const std::vector<double>& Tensor::data() const { return require_node(node_)->value; }

double Tensor::item() const {
    if (numel() != 1) throw ContractError("item: tensor has " + std::to_string(numel()) + " elements");
    return node_->value[0];
}

bool Tensor::requires_grad() const { return require_node(node_)->requires_grad; }

void Tensor::set_requires_grad(bool on) {
    auto n = require_node(node_);
    if (on && n->backprop) throw ContractError("requires_grad can only be toggled on leaf tensors");
    n->requires_grad = on;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::vector<double>& Tensor::grad() { return require_node(node_)->grad_buffer(); }

const std::vector<double>& Tensor::grad() const {
    auto n = require_node(node_);
    if (n->grad.empty()) throw ContractError("grad: no gradient has been accumulated");
    return n->grad;
}

void Tensor::zero_grad() {
    auto n = require_node(node_);
    std::fill(n->grad.begin(), n->grad.end(), 0.0);
}

void Tensor::backward() const {
    auto root = require_node(node_);
    if (root->value.size() != 1) {
        throw ContractError("backward: loss must be scalar, got " + shape_str(root->shape));
    }
    if (!root->requires_grad) return;  // constant graph, nothing to populate

    // Reverse post-order DFS over requires_grad ancestors.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    struct Frame {
        TensorNode* n;
        size_t next;
    };
    std::vector<Frame> stack;
    stack.push_back({root.get(), 0});
    seen.insert(root.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < f.n->parents.size()) {
            TensorNode* p = f.n->parents[f.next++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.n);
            stack.pop_back();
        }
    }

    // Intermediate gradients are per-pass scratch; only leaf gradients
    // persist and accumulate across backward calls.
    for (TensorNode* n : order) {
        if (n->backprop) std::fill(n->grad.begin(), n->grad.end(), 0.0);
    }
    root->grad_buffer()[0] += 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* n = *it;
        if (n->backprop && !n->grad.empty()) n->backprop(*n);
    }
}

// ---- op construction ------------------------------------------------------

namespace {

Tensor make_op(Shape shape, std::vector<double> value,
               std::vector<std::shared_ptr<TensorNode>> parents,
               std::function<void(TensorNode&)> backprop) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    bool rg = false;
    for (const auto& p : parents) rg = rg || p->requires_grad;
    node->requires_grad = rg;
    if (rg) {
        node->parents = std::move(parents);
        node->backprop = std::move(backprop);
    }
    return Tensor(node);
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
}

inline double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void axpy(std::vector<double>& dst, const std::vector<double>& src, double c) {
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += c * src[i];
}

}  // namespace

// ---- elementwise ----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape("add", a, b);
    std::vector<double> out(a.data());
    const auto& bv = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return make_op(a.shape(), std::move(out), {a.node(), b.node()}, [](TensorNode& n) {
        if (n.parents[0]->requires_grad) axpy(n.parents[0]->grad_buffer(), n.grad, 1.0);
        if (n.parents[1]->requires_grad) axpy(n.parents[1]->grad_buffer(), n.grad, 1.0);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape("sub", a, b);
    std::vector<double> out(a.data());
    const auto& bv = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    return make_op(a.shape(), std::move(out), {a.node(), b.node()}, [](TensorNode& n) {
        if (n.parents[0]->requires_grad) axpy(n.parents[0]->grad_buffer(), n.grad, 1.0);
        if (n.parents[1]->requires_grad) axpy(n.parents[1]->grad_buffer(), n.grad, -1.0);
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape("mul", a, b);
    const auto& av = a.data();
    const auto& bv = b.data();
    std::vector<double> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    return make_op(a.shape(), std::move(out), {a.node(), b.node()}, [](TensorNode& n) {
        const auto& av = n.parents[0]->value;
        const auto& bv = n.parents[1]->value;
        if (n.parents[0]->requires_grad) {
            auto& da = n.parents[0]->grad_buffer();
            for (size_t i = 0; i < da.size(); ++i) da[i] += n.grad[i] * bv[i];
        }
        if (n.parents[1]->requires_grad) {
            auto& db = n.parents[1]->grad_buffer();
            for (size_t i = 0; i < db.size(); ++i) db[i] += n.grad[i] * av[i];
        }
    });
}

Tensor scale(const Tensor& a, double c) {
    std::vector<double> out(a.data());
    for (double& v : out) v *= c;
    return make_op(a.shape(), std::move(out), {a.node()}, [c](TensorNode& n) {
        if (n.parents[0]->requires_grad) axpy(n.parents[0]->grad_buffer(), n.grad, c);
    });
}

Tensor relu(const Tensor& a) {
    std::vector<double> out(a.data());
    for (double& v : out) v = v > 0.0 ? v : 0.0;
    return make_op(a.shape(), std::move(out), {a.node()}, [](TensorNode& n) {
        if (!n.parents[0]->requires_grad) return;
        const auto& x = n.parents[0]->value;
        auto& dx = n.parents[0]->grad_buffer();
        for (size_t i = 0; i < dx.size(); ++i) {
            if (x[i] > 0.0) dx[i] += n.grad[i];
        }
    });
}

Tensor sigmoid(const Tensor& a) {
    std::vector<double> out(a.data());
    for (double& v : out) v = 1.0 / (1.0 + std::exp(-v));
    return make_op(a.shape(), std::move(out), {a.node()}, [](TensorNode& n) {
        if (!n.parents[0]->requires_grad) return;
        auto& dx = n.parents[0]->grad_buffer();
        for (size_t i = 0; i < dx.size(); ++i) {
            const double y = n.value[i];
            dx[i] += n.grad[i] * y * (1.0 - y);
        }
    });
}

Tensor abs_val(const Tensor& a) {
    std::vector<double> out(a.data());
    for (double& v : out) v = std::fabs(v);
    return make_op(a.shape(), std::move(out), {a.node()}, [](TensorNode& n) {
        if (!n.parents[0]->requires_grad) return;
        const auto& x = n.parents[0]->value;
        auto& dx = n.parents[0]->grad_buffer();
        for (size_t i = 0; i < dx.size(); ++i) dx[i] += n.grad[i] * sign_of(x[i]);
    });
}

Tensor sum(const Tensor& a) {
    double total = 0.0;
    for (double v : a.data()) total += v;
    return make_op({1}, {total}, {a.node()}, [](TensorNode& n) {
        if (n.parents[0]->requires_grad) {
            auto& dx = n.parents[0]->grad_buffer();
            for (double& g : dx) g += n.grad[0];
        }
    });
}

Tensor mean_abs_diff(const Tensor& a, const Tensor& b) {
    check_same_shape("mean_abs_diff", a, b);
    const auto& av = a.data();
    const auto& bv = b.data();
    const double inv_n = 1.0 / static_cast<double>(av.size());
    double total = 0.0;
    for (size_t i = 0; i < av.size(); ++i) total += std::fabs(av[i] - bv[i]);
    return make_op({1}, {total * inv_n}, {a.node(), b.node()}, [inv_n](TensorNode& n) {
        const auto& av = n.parents[0]->value;
        const auto& bv = n.parents[1]->value;
        const double g = n.grad[0] * inv_n;
        if (n.parents[0]->requires_grad) {
            auto& da = n.parents[0]->grad_buffer();
            for (size_t i = 0; i < da.size(); ++i) da[i] += g * sign_of(av[i] - bv[i]);
        }
        if (n.parents[1]->requires_grad) {
            auto& db = n.parents[1]->grad_buffer();
            for (size_t i = 0; i < db.size(); ++i) db[i] -= g * sign_of(av[i] - bv[i]);
        }
    });
}

// ---- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2) {
        throw DimensionError("matmul: expects 2-D operands, got " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    }
    const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), nn = b.dim(1);
    if (k != k2) {
        throw DimensionError("matmul: inner dimensions disagree " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    }
    const auto& av = a.data();
    const auto& bv = b.data();
    std::vector<double> out(static_cast<size_t>(m) * nn, 0.0);
    for (int i = 0; i < m; ++i) {
        for (int l = 0; l < k; ++l) {
            const double ail = av[static_cast<size_t>(i) * k + l];
            if (ail == 0.0) continue;
            const double* brow = &bv[static_cast<size_t>(l) * nn];
            double* orow = &out[static_cast<size_t>(i) * nn];
            for (int j = 0; j < nn; ++j) orow[j] += ail * brow[j];
        }
    }
    return make_op({m, nn}, std::move(out), {a.node(), b.node()}, [m, k, nn](TensorNode& n) {
        const auto& av = n.parents[0]->value;
        const auto& bv = n.parents[1]->value;
        if (n.parents[0]->requires_grad) {
            auto& da = n.parents[0]->grad_buffer();
            for (int i = 0; i < m; ++i) {
                for (int l = 0; l < k; ++l) {
                    double acc = 0.0;
                    const double* grow = &n.grad[static_cast<size_t>(i) * nn];
                    const double* brow = &bv[static_cast<size_t>(l) * nn];
                    for (int j = 0; j < nn; ++j) acc += grow[j] * brow[j];
                    da[static_cast<size_t>(i) * k + l] += acc;
                }
            }
        }
        if (n.parents[1]->requires_grad) {
            auto& db = n.parents[1]->grad_buffer();
            for (int i = 0; i < m; ++i) {
                const double* grow = &n.grad[static_cast<size_t>(i) * nn];
                for (int l = 0; l < k; ++l) {
                    const double ail = av[static_cast<size_t>(i) * k + l];
                    if (ail == 0.0) continue;
                    double* drow = &db[static_cast<size_t>(l) * nn];
                    for (int j = 0; j < nn; ++j) drow[j] += ail * grow[j];
                }
            }
        }
    });
}

Tensor transpose(const Tensor& a) {
    if (a.shape().size() != 2) {
        throw DimensionError("transpose: expects a 2-D tensor, got " + shape_str(a.shape()));
    }
    const int r = a.dim(0), c = a.dim(1);
    const auto& av = a.data();
    std::vector<double> out(av.size());
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) {
            out[static_cast<size_t>(j) * r + i] = av[static_cast<size_t>(i) * c + j];
        }
    }
    return make_op({c, r}, std::move(out), {a.node()}, [r, c](TensorNode& n) {
        if (!n.parents[0]->requires_grad) return;
        auto& dx = n.parents[0]->grad_buffer();
        for (int j = 0; j < c; ++j) {
            for (int i = 0; i < r; ++i) {
                dx[static_cast<size_t>(i) * c + j] += n.grad[static_cast<size_t>(j) * r + i];
            }
        }
    });
}

// ---- softmax and layer norm ----------------------------------------------

Tensor softmax_lastdim(const Tensor& a) {
    if (a.shape().empty()) throw DimensionError("softmax_lastdim: rank-0 tensor");
    const int n = a.shape().back();
    const size_t rows = a.data().size() / static_cast<size_t>(n);
    const auto& av = a.data();
    std::vector<double> out(av.size(), 0.0);
    const double neg_inf = -std::numeric_limits<double>::infinity();
    for (size_t r = 0; r < rows; ++r) {
        const double* x = &av[r * n];
        double* y = &out[r * n];
        double mx = neg_inf;
        for (int i = 0; i < n; ++i) {
            if (std::isfinite(x[i]) && x[i] > mx) mx = x[i];
        }
        if (mx == neg_inf) continue;  // fully masked row stays all-zero
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            y[i] = (x[i] == neg_inf) ? 0.0 : std::exp(x[i] - mx);
            total += y[i];
        }
        const double inv = 1.0 / total;
        for (int i = 0; i < n; ++i) y[i] *= inv;
    }
    return make_op(a.shape(), std::move(out), {a.node()}, [n, rows](TensorNode& node) {
        if (!node.parents[0]->requires_grad) return;
        auto& dx = node.parents[0]->grad_buffer();
        for (size_t r = 0; r < rows; ++r) {
            const double* y = &node.value[r * n];
            const double* g = &node.grad[r * n];
            double dot = 0.0;
            for (int i = 0; i < n; ++i) dot += y[i] * g[i];
            for (int i = 0; i < n; ++i) dx[r * n + i] += y[i] * (g[i] - dot);
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    if (x.shape().size() != 2) {
        throw DimensionError("layer_norm: expects [tokens,C], got " + shape_str(x.shape()));
    }
    const int t = x.dim(0), c = x.dim(1);
    if (gain.shape() != Shape{c} || bias.shape() != Shape{c}) {
        throw DimensionError("layer_norm: gain/bias must be [C]=" + std::to_string(c));
    }
    const auto& xv = x.data();
    const auto& gv = gain.data();
    const auto& bv = bias.data();
    std::vector<double> out(xv.size());
    for (int r = 0; r < t; ++r) {
        const double* row = &xv[static_cast<size_t>(r) * c];
        double mu = 0.0;
        for (int i = 0; i < c; ++i) mu += row[i];
        mu /= c;
        double var = 0.0;
        for (int i = 0; i < c; ++i) var += (row[i] - mu) * (row[i] - mu);
        var /= c;
        const double inv_std = 1.0 / std::sqrt(var + eps);
        double* orow = &out[static_cast<size_t>(r) * c];
        for (int i = 0; i < c; ++i) orow[i] = gv[i] * (row[i] - mu) * inv_std + bv[i];
    }
    return make_op(x.shape(), std::move(out), {x.node(), gain.node(), bias.node()},
                   [t, c, eps](TensorNode& n) {
                       const auto& xv = n.parents[0]->value;
                       const auto& gv = n.parents[1]->value;
                       const bool need_x = n.parents[0]->requires_grad;
                       const bool need_g = n.parents[1]->requires_grad;
                       const bool need_b = n.parents[2]->requires_grad;
                       std::vector<double> xhat(static_cast<size_t>(c));
                       for (int r = 0; r < t; ++r) {
                           const double* row = &xv[static_cast<size_t>(r) * c];
                           const double* g = &n.grad[static_cast<size_t>(r) * c];
                           double mu = 0.0;
                           for (int i = 0; i < c; ++i) mu += row[i];
                           mu /= c;
                           double var = 0.0;
                           for (int i = 0; i < c; ++i) var += (row[i] - mu) * (row[i] - mu);
                           var /= c;
                           const double inv_std = 1.0 / std::sqrt(var + eps);
                           for (int i = 0; i < c; ++i) xhat[i] = (row[i] - mu) * inv_std;
                           if (need_g) {
                               auto& dg = n.parents[1]->grad_buffer();
                               for (int i = 0; i < c; ++i) dg[i] += g[i] * xhat[i];
                           }
                           if (need_b) {
                               auto& db = n.parents[2]->grad_buffer();
                               for (int i = 0; i < c; ++i) db[i] += g[i];
                           }
                           if (need_x) {
                               auto& dx = n.parents[0]->grad_buffer();
                               double mean_gy = 0.0, mean_gyx = 0.0;
                               for (int i = 0; i < c; ++i) {
                                   const double gy = g[i] * gv[i];
                                   mean_gy += gy;
                                   mean_gyx += gy * xhat[i];
                               }
                               mean_gy /= c;
                               mean_gyx /= c;
                               for (int i = 0; i < c; ++i) {
                                   const double gy = g[i] * gv[i];
                                   dx[static_cast<size_t>(r) * c + i] +=
                                       inv_std * (gy - mean_gy - xhat[i] * mean_gyx);
                               }
                           }
                       }
                   });
}

// ---- finite differences ---------------------------------------------------

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h) {
    std::vector<double> out(x.data().size());
    std::vector<double> probe(x.data());
    for (size_t i = 0; i < probe.size(); ++i) {
        const double keep = probe[i];
        probe[i] = keep + h;
        const double fp = f(Tensor::from_data(x.shape(), probe));
        probe[i] = keep - h;
        const double fm = f(Tensor::from_data(x.shape(), probe));
        probe[i] = keep;
        out[i] = (fp - fm) / (2.0 * h);
    }
    return Tensor::from_data(x.shape(), std::move(out));
}

}  // namespace crformer
