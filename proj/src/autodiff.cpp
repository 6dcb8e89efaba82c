#include "rfsf/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "rfsf/errors.hpp"

namespace rfsf {

namespace mac_counter {

namespace {
thread_local bool g_enabled = false;
thread_local uint64_t g_count = 0;
}  // namespace

void reset() { g_count = 0; }
void enable(bool on) { g_enabled = on; }
bool enabled() { return g_enabled; }
uint64_t count() { return g_count; }
void add(uint64_t n) {
    if (g_enabled) g_count += n;
}

}  // namespace mac_counter

namespace {

NodePtr make_node(Tensor value, std::vector<NodePtr> parents) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents) {
        if (p->requires_grad) {
            n->requires_grad = true;
            break;
        }
    }
    return n;
}

void accumulate(Node& target, const Tensor& contribution) {
    Tensor& g = target.ensure_grad();
    const double* src = contribution.data();
    double* dst = g.data();
    for (int64_t i = 0, n = g.size(); i < n; ++i) dst[i] += src[i];
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
}

double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); }

}  // namespace

Var Var::constant(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    return Var(n);
}

Var Var::input(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    return Var(n);
}

namespace {
thread_local LeafScope* g_leaf_scope = nullptr;
}  // namespace

LeafScope::LeafScope() : previous_(g_leaf_scope) { g_leaf_scope = this; }

LeafScope::~LeafScope() { g_leaf_scope = previous_; }

LeafScope* LeafScope::active() { return g_leaf_scope; }

NodePtr LeafScope::lookup(Param& p) {
    for (auto& [param, node] : leaves_) {
        if (param == &p) return node;
    }
    auto n = std::make_shared<Node>();
    n->value = p.value;
    n->requires_grad = p.trainable;
    n->param = &p;
    leaves_.emplace_back(&p, n);
    return n;
}

void LeafScope::harvest(const GradSink& sink) {
    for (auto& [param, node] : leaves_) {
        if (node->has_grad && param->trainable) {
            sink(param, node->grad);
            node->grad.fill(0.0);
            node->has_grad = false;
        }
    }
}

Var Var::leaf(Param& p) {
    if (LeafScope* scope = g_leaf_scope) return Var(scope->lookup(p));
    auto n = std::make_shared<Node>();
    n->value = p.value;
    n->requires_grad = p.trainable;
    n->param = &p;
    return Var(n);
}

const Tensor& Var::grad() const {
    if (!node->has_grad) throw ContractError("gradient not populated; run backward() first");
    return node->grad;
}

// ---- backward sweep --------------------------------------------------------

namespace {

std::vector<Node*> topo_order(Node* root) {
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    // Iterative post-order DFS restricted to the differentiable subgraph.
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && !visited.count(parent)) {
                visited.insert(parent);
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;
}

void run_backward(const Var& loss, const GradSink& sink) {
    if (loss.node->value.size() != 1) {
        throw ContractError("backward() requires a scalar loss, got " + shape_str(loss.shape()));
    }
    if (!loss.node->requires_grad) return;

    std::vector<Node*> order = topo_order(loss.node.get());
    loss.node->ensure_grad()[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && n->has_grad) n->backprop(*n);
    }
    for (Node* n : order) {
        if (n->param && n->param->trainable && n->has_grad) sink(n->param, n->grad);
    }
}

}  // namespace

void backward(const Var& loss) {
    run_backward(loss, [](Param* p, const Tensor& g) {
        double* dst = p->grad.data();
        const double* src = g.data();
        for (int64_t i = 0, n = p->grad.size(); i < n; ++i) dst[i] += src[i];
    });
}

void backward(const Var& loss, const GradSink& sink) { run_backward(loss, sink); }

void backward_graph_only(const Var& loss) {
    run_backward(loss, [](Param*, const Tensor&) {});
}

// ---- elementwise -----------------------------------------------------------

Var add(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    const double* bp = b.value().data();
    double* op = out.data();
    for (int64_t i = 0, n = out.size(); i < n; ++i) op[i] += bp[i];
    auto node = make_node(std::move(out), {a.node, b.node});
    if (node->requires_grad) {
        node->backprop = [](Node& n) {
            if (n.parents[0]->requires_grad) accumulate(*n.parents[0], n.grad);
            if (n.parents[1]->requires_grad) accumulate(*n.parents[1], n.grad);
        };
    }
    return Var(node);
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "sub");
    Tensor out = a.value();
    const double* bp = b.value().data();
    double* op = out.data();
    for (int64_t i = 0, n = out.size(); i < n; ++i) op[i] -= bp[i];
    auto node = make_node(std::move(out), {a.node, b.node});
    if (node->requires_grad) {
        node->backprop = [](Node& n) {
            if (n.parents[0]->requires_grad) accumulate(*n.parents[0], n.grad);
            if (n.parents[1]->requires_grad) {
                Tensor& g = n.parents[1]->ensure_grad();
                for (int64_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
            }
        };
    }
    return Var(node);
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "mul");
    Tensor out = a.value();
    const double* bp = b.value().data();
    double* op = out.data();
    for (int64_t i = 0, n = out.size(); i < n; ++i) op[i] *= bp[i];
    auto node = make_node(std::move(out), {a.node, b.node});
    if (node->requires_grad) {
        node->backprop = [](Node& n) {
            const Tensor& av = n.parents[0]->value;
            const Tensor& bv = n.parents[1]->value;
            if (n.parents[0]->requires_grad) {
                Tensor& g = n.parents[0]->ensure_grad();
                for (int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * bv[i];
            }
            if (n.parents[1]->requires_grad) {
                Tensor& g = n.parents[1]->ensure_grad();
                for (int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * av[i];
            }
        };
    }
    return Var(node);
}

Var scale(const Var& a, double c) {
    Tensor out = a.value();
    double* op = out.data();
    for (int64_t i = 0, n = out.size(); i < n; ++i) op[i] *= c;
    auto node = make_node(std::move(out), {a.node});
    if (node->requires_grad) {
        node->backprop = [c](Node& n) {
            Tensor& g = n.parents[0]->ensure_grad();
            for (int64_t i = 0; i < g.size(); ++i) g[i] += c * n.grad[i];
        };
    }
    return Var(node);
}

Var add_rowvec(const Var& x, const Var& v) {
    const Tensor& xv = x.value();
    const Tensor& vv = v.value();
    if (xv.rank() != 2 || vv.rank() != 1 || xv.dim(1) != vv.dim(0)) {
        throw DimensionError("add_rowvec: incompatible shapes " + shape_str(xv.shape()) + " and " +
                             shape_str(vv.shape()));
    }
    Tensor out = xv;
    int m = xv.dim(0), n = xv.dim(1);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at(i, j) += vv[j];
    auto node = make_node(std::move(out), {x.node, v.node});
    if (node->requires_grad) {
        node->backprop = [m, n](Node& nd) {
            if (nd.parents[0]->requires_grad) accumulate(*nd.parents[0], nd.grad);
            if (nd.parents[1]->requires_grad) {
                Tensor& g = nd.parents[1]->ensure_grad();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) g[j] += nd.grad.at(i, j);
            }
        };
    }
    return Var(node);
}

// ---- matrix products ---------------------------------------------------------

namespace {

// C (m×n) += A (m×k) · B (k×n)
void gemm_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<int64_t>(i) * k;
        double* ci = c + static_cast<int64_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            double av = ai[p];
            if (av == 0.0) continue;
            const double* bp = b + static_cast<int64_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

// C (m×n) += A (m×k) · B(n×k)ᵀ
void gemm_nt_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<int64_t>(i) * k;
        double* ci = c + static_cast<int64_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* bj = b + static_cast<int64_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] += acc;
        }
    }
}

// C (m×n) += A(k×m)ᵀ · B (k×n)
void gemm_tn_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int p = 0; p < k; ++p) {
        const double* ap = a + static_cast<int64_t>(p) * m;
        const double* bp = b + static_cast<int64_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            double av = ap[i];
            if (av == 0.0) continue;
            double* ci = c + static_cast<int64_t>(i) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
        throw DimensionError("matmul: incompatible shapes " + shape_str(av.shape()) + " and " +
                             shape_str(bv.shape()));
    }
    int m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    Tensor out({m, n});
    gemm_acc(av.data(), bv.data(), out.data(), m, k, n);
    mac_counter::add(static_cast<uint64_t>(m) * k * n);
    auto node = make_node(std::move(out), {a.node, b.node});
    if (node->requires_grad) {
        node->backprop = [m, k, n](Node& nd) {
            const Tensor& A = nd.parents[0]->value;
            const Tensor& B = nd.parents[1]->value;
            if (nd.parents[0]->requires_grad) {
                // dA += G · Bᵀ
                gemm_nt_acc(nd.grad.data(), B.data(), nd.parents[0]->ensure_grad().data(), m, n, k);
            }
            if (nd.parents[1]->requires_grad) {
                // dB += Aᵀ · G
                gemm_tn_acc(A.data(), nd.grad.data(), nd.parents[1]->ensure_grad().data(), k, m, n);
            }
        };
    }
    return Var(node);
}

Var matmul_nt(const Var& a, const Var& b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(1)) {
        throw DimensionError("matmul_nt: incompatible shapes " + shape_str(av.shape()) + " and " +
                             shape_str(bv.shape()));
    }
    int m = av.dim(0), k = av.dim(1), n = bv.dim(0);
    Tensor out({m, n});
    gemm_nt_acc(av.data(), bv.data(), out.data(), m, k, n);
    mac_counter::add(static_cast<uint64_t>(m) * k * n);
    auto node = make_node(std::move(out), {a.node, b.node});
    if (node->requires_grad) {
        node->backprop = [m, k, n](Node& nd) {
            const Tensor& A = nd.parents[0]->value;
            const Tensor& B = nd.parents[1]->value;
            if (nd.parents[0]->requires_grad) {
                // dA += G · B
                gemm_acc(nd.grad.data(), B.data(), nd.parents[0]->ensure_grad().data(), m, n, k);
            }
            if (nd.parents[1]->requires_grad) {
                // dB += Gᵀ · A
                gemm_tn_acc(nd.grad.data(), A.data(), nd.parents[1]->ensure_grad().data(), n, m, k);
            }
        };
    }
    return Var(node);
}

// ---- activations -------------------------------------------------------------

Var relu(const Var& x) {
    Tensor out = x.value();
    double* op = out.data();
    for (int64_t i = 0, n = out.size(); i < n; ++i) op[i] = op[i] > 0.0 ? op[i] : 0.0;
    auto node = make_node(std::move(out), {x.node});
    if (node->requires_grad) {
        node->backprop = [](Node& nd) {
            const Tensor& xv = nd.parents[0]->value;
            Tensor& g = nd.parents[0]->ensure_grad();
            for (int64_t i = 0; i < g.size(); ++i)
                if (xv[i] > 0.0) g[i] += nd.grad[i];
        };
    }
    return Var(node);
}

Var sigmoid(const Var& x) {
    Tensor out = x.value();
    double* op = out.data();
    for (int64_t i = 0, n = out.size(); i < n; ++i) op[i] = 1.0 / (1.0 + std::exp(-op[i]));
    auto node = make_node(std::move(out), {x.node});
    if (node->requires_grad) {
        node->backprop = [](Node& nd) {
            const Tensor& s = nd.value;
            Tensor& g = nd.parents[0]->ensure_grad();
            for (int64_t i = 0; i < g.size(); ++i) g[i] += nd.grad[i] * s[i] * (1.0 - s[i]);
        };
    }
    return Var(node);
}

Var tanh_act(const Var& x) {
    Tensor out = x.value();
    double* op = out.data();
    for (int64_t i = 0, n = out.size(); i < n; ++i) op[i] = std::tanh(op[i]);
    auto node = make_node(std::move(out), {x.node});
    if (node->requires_grad) {
        node->backprop = [](Node& nd) {
            const Tensor& t = nd.value;
            Tensor& g = nd.parents[0]->ensure_grad();
            for (int64_t i = 0; i < g.size(); ++i) g[i] += nd.grad[i] * (1.0 - t[i] * t[i]);
        };
    }
    return Var(node);
}

// ---- layer norm ----------------------------------------------------------------

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
    const Tensor& xv = x.value();
    int rows = xv.rank() == 2 ? xv.dim(0) : 1;
    int n = xv.rank() == 2 ? xv.dim(1) : xv.dim(0);
    if (gain.value().size() != n || bias.value().size() != n) {
        throw DimensionError("layer_norm: gain/bias length must match row length " + std::to_string(n));
    }
    Tensor out = xv;
    Tensor xhat(xv.shape());  // saved for backward
    Tensor inv_std({rows});
    const double* gp = gain.value().data();
    const double* bp = bias.value().data();
    for (int r = 0; r < rows; ++r) {
        const double* xr = xv.data() + static_cast<int64_t>(r) * n;
        double* or_ = out.data() + static_cast<int64_t>(r) * n;
        double* hr = xhat.data() + static_cast<int64_t>(r) * n;
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += xr[j];
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) var += (xr[j] - mean) * (xr[j] - mean);
        var /= n;
        double is = 1.0 / std::sqrt(var + eps);
        inv_std[r] = is;
        for (int j = 0; j < n; ++j) {
            hr[j] = (xr[j] - mean) * is;
            or_[j] = gp[j] * hr[j] + bp[j];
        }
    }
    auto node = make_node(std::move(out), {x.node, gain.node, bias.node});
    if (node->requires_grad) {
        node->backprop = [rows, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& nd) {
            const double* gp = nd.parents[1]->value.data();
            for (int r = 0; r < rows; ++r) {
                const double* dy = nd.grad.data() + static_cast<int64_t>(r) * n;
                const double* hr = xhat.data() + static_cast<int64_t>(r) * n;
                if (nd.parents[1]->requires_grad) {
                    Tensor& dg = nd.parents[1]->ensure_grad();
                    for (int j = 0; j < n; ++j) dg[j] += dy[j] * hr[j];
                }
                if (nd.parents[2]->requires_grad) {
                    Tensor& db = nd.parents[2]->ensure_grad();
                    for (int j = 0; j < n; ++j) db[j] += dy[j];
                }
                if (nd.parents[0]->requires_grad) {
                    double mean_dxh = 0.0, mean_dxh_h = 0.0;
                    for (int j = 0; j < n; ++j) {
                        double dxh = dy[j] * gp[j];
                        mean_dxh += dxh;
                        mean_dxh_h += dxh * hr[j];
                    }
                    mean_dxh /= n;
                    mean_dxh_h /= n;
                    double* dx = nd.parents[0]->ensure_grad().data() + static_cast<int64_t>(r) * n;
                    for (int j = 0; j < n; ++j) {
                        double dxh = dy[j] * gp[j];
                        dx[j] += (dxh - mean_dxh - hr[j] * mean_dxh_h) * inv_std[r];
                    }
                }
            }
        };
    }
    return Var(node);
}

// ---- 1-D convolution --------------------------------------------------------

namespace {
Var conv1d_impl(const Var& x, const Var& w, const Var& b, int stride, int padding,
                bool fused_relu) {
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    const Tensor& bv = b.value();
    if (xv.rank() != 2 || wv.rank() != 3) {
        throw DimensionError("conv1d: expected input C_in×L and weight C_out×C_in×K, got " +
                             shape_str(xv.shape()) + " and " + shape_str(wv.shape()));
    }
    int c_in = xv.dim(0), l_in = xv.dim(1);
    int c_out = wv.dim(0), k = wv.dim(2);
    if (wv.dim(1) != c_in) {
        throw DimensionError("conv1d: weight expects " + std::to_string(wv.dim(1)) +
                             " input channels, input has " + std::to_string(c_in));
    }
    if (bv.size() != c_out) throw DimensionError("conv1d: bias length must equal C_out");
    if (stride < 1) throw ContractError("conv1d: stride must be >= 1");
    int l_out = (l_in + 2 * padding - k) / stride + 1;
    if (l_out < 1) {
        throw DimensionError("conv1d: input length " + std::to_string(l_in) +
                             " too short for kernel " + std::to_string(k));
    }

    // Interior outputs read x[base .. base+K-1] entirely in bounds, so the
    // (ci-major) kernels below run branch-free over contiguous memory.
    int interior0 = padding > 0 ? (padding + stride - 1) / stride : 0;
    int interior1 = (l_in - k + padding) / stride;  // inclusive
    if (interior1 > l_out - 1) interior1 = l_out - 1;

    Tensor out({c_out, l_out});
    for (int co = 0; co < c_out; ++co) {
        double* yco = out.data() + static_cast<int64_t>(co) * l_out;
        double bco = bv[co];
        for (int lo = 0; lo < l_out; ++lo) yco[lo] = bco;
        for (int ci = 0; ci < c_in; ++ci) {
            const double* xci = xv.data() + static_cast<int64_t>(ci) * l_in;
            const double* wk = wv.data() + (static_cast<int64_t>(co) * c_in + ci) * k;
            auto edge = [&](int lo) {
                int base = lo * stride - padding;
                double acc = 0.0;
                for (int kk = 0; kk < k; ++kk) {
                    int xi = base + kk;
                    if (xi >= 0 && xi < l_in) acc += wk[kk] * xci[xi];
                }
                yco[lo] += acc;
            };
            for (int lo = 0; lo < interior0 && lo < l_out; ++lo) edge(lo);
            if (k == 3) {
                double w0 = wk[0], w1 = wk[1], w2 = wk[2];
                for (int lo = interior0; lo <= interior1; ++lo) {
                    const double* xb = xci + lo * stride - padding;
                    yco[lo] += w0 * xb[0] + w1 * xb[1] + w2 * xb[2];
                }
            } else {
                for (int lo = interior0; lo <= interior1; ++lo) {
                    const double* xb = xci + lo * stride - padding;
                    double acc = 0.0;
                    for (int kk = 0; kk < k; ++kk) acc += wk[kk] * xb[kk];
                    yco[lo] += acc;
                }
            }
            for (int lo = std::max(interior1 + 1, interior0); lo < l_out; ++lo) edge(lo);
        }
        if (fused_relu) {
            for (int lo = 0; lo < l_out; ++lo) yco[lo] = yco[lo] > 0.0 ? yco[lo] : 0.0;
        }
    }
    mac_counter::add(static_cast<uint64_t>(c_in) * c_out * k * l_out);

    auto node = make_node(std::move(out), {x.node, w.node, b.node});
    if (node->requires_grad) {
        node->backprop = [c_in, l_in, c_out, k, l_out, stride, padding, interior0, interior1,
                          fused_relu](Node& nd) {
            const Tensor& xv2 = nd.parents[0]->value;
            const Tensor& wv2 = nd.parents[1]->value;
            bool need_dx = nd.parents[0]->requires_grad;
            bool need_dw = nd.parents[1]->requires_grad;
            double* dx_base = need_dx ? nd.parents[0]->ensure_grad().data() : nullptr;
            double* dw_base = need_dw ? nd.parents[1]->ensure_grad().data() : nullptr;
            std::vector<double> masked(fused_relu ? static_cast<size_t>(l_out) : 0);
            for (int co = 0; co < c_out; ++co) {
                const double* gco = nd.grad.data() + static_cast<int64_t>(co) * l_out;
                if (fused_relu) {
                    const double* yco = nd.value.data() + static_cast<int64_t>(co) * l_out;
                    for (int lo = 0; lo < l_out; ++lo) {
                        masked[static_cast<size_t>(lo)] = yco[lo] > 0.0 ? gco[lo] : 0.0;
                    }
                    gco = masked.data();
                }
                if (nd.parents[2]->requires_grad) {
                    Tensor& db = nd.parents[2]->ensure_grad();
                    double acc = 0.0;
                    for (int lo = 0; lo < l_out; ++lo) acc += gco[lo];
                    db[co] += acc;
                }
                if (!need_dx && !need_dw) continue;
                for (int ci = 0; ci < c_in; ++ci) {
                    const double* xci = xv2.data() + static_cast<int64_t>(ci) * l_in;
                    const double* wk = wv2.data() + (static_cast<int64_t>(co) * c_in + ci) * k;
                    double* dx = need_dx ? dx_base + static_cast<int64_t>(ci) * l_in : nullptr;
                    double* dw = need_dw ? dw_base + (static_cast<int64_t>(co) * c_in + ci) * k
                                         : nullptr;
                    auto edge = [&](int lo) {
                        int base = lo * stride - padding;
                        double g = gco[lo];
                        for (int kk = 0; kk < k; ++kk) {
                            int xi = base + kk;
                            if (xi < 0 || xi >= l_in) continue;
                            if (dx) dx[xi] += wk[kk] * g;
                            if (dw) dw[kk] += g * xci[xi];
                        }
                    };
                    for (int lo = 0; lo < interior0 && lo < l_out; ++lo) edge(lo);
                    if (k == 3) {
                        double w0 = wk[0], w1 = wk[1], w2 = wk[2];
                        double a0 = 0.0, a1 = 0.0, a2 = 0.0;
                        if (dx) {
                            for (int lo = interior0; lo <= interior1; ++lo) {
                                int base = lo * stride - padding;
                                double g = gco[lo];
                                dx[base] += w0 * g;
                                dx[base + 1] += w1 * g;
                                dx[base + 2] += w2 * g;
                                const double* xb = xci + base;
                                a0 += g * xb[0];
                                a1 += g * xb[1];
                                a2 += g * xb[2];
                            }
                        } else {
                            for (int lo = interior0; lo <= interior1; ++lo) {
                                const double* xb = xci + lo * stride - padding;
                                double g = gco[lo];
                                a0 += g * xb[0];
                                a1 += g * xb[1];
                                a2 += g * xb[2];
                            }
                        }
                        if (dw) {
                            dw[0] += a0;
                            dw[1] += a1;
                            dw[2] += a2;
                        }
                    } else {
                        for (int lo = interior0; lo <= interior1; ++lo) {
                            int base = lo * stride - padding;
                            double g = gco[lo];
                            for (int kk = 0; kk < k; ++kk) {
                                if (dx) dx[base + kk] += wk[kk] * g;
                                if (dw) dw[kk] += g * xci[base + kk];
                            }
                        }
                    }
                    for (int lo = std::max(interior1 + 1, interior0); lo < l_out; ++lo) edge(lo);
                }
            }
        };
    }
    return Var(node);
}
}  // namespace

Var conv1d(const Var& x, const Var& w, const Var& b, int stride, int padding) {
    return conv1d_impl(x, w, b, stride, padding, false);
}

Var conv1d_relu(const Var& x, const Var& w, const Var& b, int stride, int padding) {
    return conv1d_impl(x, w, b, stride, padding, true);
}

Var conv_transpose1d(const Var& x, const Var& w, const Var& b, int stride, int padding) {
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    const Tensor& bv = b.value();
    if (xv.rank() != 2 || wv.rank() != 3) {
        throw DimensionError("conv_transpose1d: expected input C_in×L and weight C_out×C_in×K");
    }
    int c_in = xv.dim(0), l_in = xv.dim(1);
    int c_out = wv.dim(0), k = wv.dim(2);
    if (wv.dim(1) != c_in) throw DimensionError("conv_transpose1d: channel mismatch");
    if (bv.size() != c_out) throw DimensionError("conv_transpose1d: bias length must equal C_out");
    int l_out = (l_in - 1) * stride + k - 2 * padding;
    if (l_out < 1) throw DimensionError("conv_transpose1d: output length < 1");

    Tensor out({c_out, l_out});
    for (int co = 0; co < c_out; ++co) {
        double* yco = out.data() + static_cast<int64_t>(co) * l_out;
        for (int lo = 0; lo < l_out; ++lo) yco[lo] = bv[co];
        for (int ci = 0; ci < c_in; ++ci) {
            const double* xci = xv.data() + static_cast<int64_t>(ci) * l_in;
            const double* wk = wv.data() + (static_cast<int64_t>(co) * c_in + ci) * k;
            for (int li = 0; li < l_in; ++li) {
                double xval = xci[li];
                int base = li * stride - padding;
                for (int kk = 0; kk < k; ++kk) {
                    int lo = base + kk;
                    if (lo >= 0 && lo < l_out) yco[lo] += xval * wk[kk];
                }
            }
        }
    }
    mac_counter::add(static_cast<uint64_t>(c_in) * c_out * k * l_in);

    auto node = make_node(std::move(out), {x.node, w.node, b.node});
    if (node->requires_grad) {
        node->backprop = [c_in, l_in, c_out, k, l_out, stride, padding](Node& nd) {
            const Tensor& xv2 = nd.parents[0]->value;
            const Tensor& wv2 = nd.parents[1]->value;
            for (int co = 0; co < c_out; ++co) {
                const double* gco = nd.grad.data() + static_cast<int64_t>(co) * l_out;
                if (nd.parents[2]->requires_grad) {
                    double acc = 0.0;
                    for (int lo = 0; lo < l_out; ++lo) acc += gco[lo];
                    nd.parents[2]->ensure_grad()[co] += acc;
                }
                for (int ci = 0; ci < c_in; ++ci) {
                    const double* xci = xv2.data() + static_cast<int64_t>(ci) * l_in;
                    const double* wk = wv2.data() + (static_cast<int64_t>(co) * c_in + ci) * k;
                    for (int li = 0; li < l_in; ++li) {
                        int base = li * stride - padding;
                        double dx_acc = 0.0;
                        for (int kk = 0; kk < k; ++kk) {
                            int lo = base + kk;
                            if (lo < 0 || lo >= l_out) continue;
                            dx_acc += gco[lo] * wk[kk];
                            if (nd.parents[1]->requires_grad) {
                                nd.parents[1]->ensure_grad()[(static_cast<int64_t>(co) * c_in + ci) * k +
                                                             kk] += gco[lo] * xci[li];
                            }
                        }
                        if (nd.parents[0]->requires_grad) {
                            nd.parents[0]->ensure_grad().data()[static_cast<int64_t>(ci) * l_in + li] +=
                                dx_acc;
                        }
                    }
                }
            }
        };
    }
    return Var(node);
}

// ---- reductions ---------------------------------------------------------------

Var reduce_mean_axis(const Var& x, int axis) {
    const Tensor& xv = x.value();
    if (xv.rank() != 2 || axis < 0 || axis > 1) {
        throw ContractError("reduce_mean_axis: rank-2 tensor and axis in {0,1} required");
    }
    int m = xv.dim(0), n = xv.dim(1);
    int out_len = axis == 0 ? n : m;
    int red_len = axis == 0 ? m : n;
    Tensor out({out_len});
    if (axis == 0) {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) out[j] += xv.at(i, j);
    } else {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) out[i] += xv.at(i, j);
    }
    for (int i = 0; i < out_len; ++i) out[i] /= red_len;
    auto node = make_node(std::move(out), {x.node});
    if (node->requires_grad) {
        node->backprop = [m, n, axis, red_len](Node& nd) {
            Tensor& g = nd.parents[0]->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    g.at(i, j) += nd.grad[axis == 0 ? j : i] / red_len;
        };
    }
    return Var(node);
}

Var reduce_max_axis(const Var& x, int axis) {
    const Tensor& xv = x.value();
    if (xv.rank() != 2 || axis < 0 || axis > 1) {
        throw ContractError("reduce_max_axis: rank-2 tensor and axis in {0,1} required");
    }
    int m = xv.dim(0), n = xv.dim(1);
    int out_len = axis == 0 ? n : m;
    Tensor out({out_len});
    std::vector<int> argmax(static_cast<size_t>(out_len));
    if (axis == 0) {
        for (int j = 0; j < n; ++j) {
            int best = 0;
            for (int i = 1; i < m; ++i)
                if (xv.at(i, j) > xv.at(best, j)) best = i;
            out[j] = xv.at(best, j);
            argmax[static_cast<size_t>(j)] = best;
        }
    } else {
        for (int i = 0; i < m; ++i) {
            int best = 0;
            for (int j = 1; j < n; ++j)
                if (xv.at(i, j) > xv.at(i, best)) best = j;
            out[i] = xv.at(i, best);
            argmax[static_cast<size_t>(i)] = best;
        }
    }
    auto node = make_node(std::move(out), {x.node});
    if (node->requires_grad) {
        node->backprop = [axis, out_len, argmax = std::move(argmax)](Node& nd) {
            Tensor& g = nd.parents[0]->ensure_grad();
            for (int i = 0; i < out_len; ++i) {
                int r = axis == 0 ? argmax[static_cast<size_t>(i)] : i;
                int c = axis == 0 ? i : argmax[static_cast<size_t>(i)];
                g.at(r, c) += nd.grad[i];
            }
        };
    }
    return Var(node);
}

Var reduce_sum_all(const Var& x) {
    const Tensor& xv = x.value();
    double acc = 0.0;
    for (int64_t i = 0; i < xv.size(); ++i) acc += xv[i];
    auto node = make_node(Tensor::scalar(acc), {x.node});
    if (node->requires_grad) {
        node->backprop = [](Node& nd) {
            Tensor& g = nd.parents[0]->ensure_grad();
            for (int64_t i = 0; i < g.size(); ++i) g[i] += nd.grad[0];
        };
    }
    return Var(node);
}

// ---- shape ops ----------------------------------------------------------------

Var concat(const std::vector<Var>& parts, int axis) {
    if (parts.empty()) throw ContractError("concat: needs at least one part");
    int rank = parts[0].value().rank();
    if (rank == 1) {
        if (axis != 0) throw ContractError("concat: rank-1 tensors concatenate along axis 0");
        int total = 0;
        for (const auto& p : parts) total += static_cast<int>(p.value().size());
        Tensor out({total});
        int off = 0;
        std::vector<NodePtr> parents;
        for (const auto& p : parts) {
            for (int64_t i = 0; i < p.value().size(); ++i) out[off + i] = p.value()[i];
            off += static_cast<int>(p.value().size());
            parents.push_back(p.node);
        }
        auto node = make_node(std::move(out), std::move(parents));
        if (node->requires_grad) {
            node->backprop = [](Node& nd) {
                int off2 = 0;
                for (auto& parent : nd.parents) {
                    int len = static_cast<int>(parent->value.size());
                    if (parent->requires_grad) {
                        Tensor& g = parent->ensure_grad();
                        for (int i = 0; i < len; ++i) g[i] += nd.grad[off2 + i];
                    }
                    off2 += len;
                }
            };
        }
        return Var(node);
    }
    if (rank != 2 || axis < 0 || axis > 1) throw ContractError("concat: supports rank-1/2, axis 0/1");
    if (axis == 1) {
        int m = parts[0].value().dim(0);
        int total = 0;
        for (const auto& p : parts) {
            if (p.value().dim(0) != m) throw DimensionError("concat: row counts disagree");
            total += p.value().dim(1);
        }
        Tensor out({m, total});
        int coff = 0;
        std::vector<NodePtr> parents;
        for (const auto& p : parts) {
            int n = p.value().dim(1);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) out.at(i, coff + j) = p.value().at(i, j);
            coff += n;
            parents.push_back(p.node);
        }
        auto node = make_node(std::move(out), std::move(parents));
        if (node->requires_grad) {
            node->backprop = [m](Node& nd) {
                int coff2 = 0;
                for (auto& parent : nd.parents) {
                    int n = parent->value.dim(1);
                    if (parent->requires_grad) {
                        Tensor& g = parent->ensure_grad();
                        for (int i = 0; i < m; ++i)
                            for (int j = 0; j < n; ++j) g.at(i, j) += nd.grad.at(i, coff2 + j);
                    }
                    coff2 += n;
                }
            };
        }
        return Var(node);
    }
    // axis == 0: stack rows
    int n = parts[0].value().dim(1);
    int total = 0;
    for (const auto& p : parts) {
        if (p.value().dim(1) != n) throw DimensionError("concat: column counts disagree");
        total += p.value().dim(0);
    }
    Tensor out({total, n});
    int roff = 0;
    std::vector<NodePtr> parents;
    for (const auto& p : parts) {
        int m = p.value().dim(0);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) out.at(roff + i, j) = p.value().at(i, j);
        roff += m;
        parents.push_back(p.node);
    }
    auto node = make_node(std::move(out), std::move(parents));
    if (node->requires_grad) {
        node->backprop = [n](Node& nd) {
            int roff2 = 0;
            for (auto& parent : nd.parents) {
                int m = parent->value.dim(0);
                if (parent->requires_grad) {
                    Tensor& g = parent->ensure_grad();
                    for (int i = 0; i < m; ++i)
                        for (int j = 0; j < n; ++j) g.at(i, j) += nd.grad.at(roff2 + i, j);
                }
                roff2 += m;
            }
        };
    }
    return Var(node);
}

Var col_slice(const Var& x, int c0, int c1) {
    const Tensor& xv = x.value();
    if (xv.rank() != 2 || c0 < 0 || c1 > xv.dim(1) || c0 >= c1) {
        throw ContractError("col_slice: invalid column range");
    }
    int m = xv.dim(0), w = c1 - c0;
    Tensor out({m, w});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < w; ++j) out.at(i, j) = xv.at(i, c0 + j);
    auto node = make_node(std::move(out), {x.node});
    if (node->requires_grad) {
        node->backprop = [m, w, c0](Node& nd) {
            Tensor& g = nd.parents[0]->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < w; ++j) g.at(i, c0 + j) += nd.grad.at(i, j);
        };
    }
    return Var(node);
}

Var row(const Var& x, int r) {
    const Tensor& xv = x.value();
    if (xv.rank() != 2 || r < 0 || r >= xv.dim(0)) throw ContractError("row: index out of range");
    int n = xv.dim(1);
    Tensor out({n});
    for (int j = 0; j < n; ++j) out[j] = xv.at(r, j);
    auto node = make_node(std::move(out), {x.node});
    if (node->requires_grad) {
        node->backprop = [r, n](Node& nd) {
            Tensor& g = nd.parents[0]->ensure_grad();
            for (int j = 0; j < n; ++j) g.at(r, j) += nd.grad[j];
        };
    }
    return Var(node);
}

Var embedding_row(const Var& table, int index) {
    const Tensor& tv = table.value();
    if (tv.rank() != 2) throw ContractError("embedding_row: table must be rank-2");
    if (index < 0 || index >= tv.dim(0)) {
        throw IndexError("embedding_row: index " + std::to_string(index) + " out of range [0," +
                         std::to_string(tv.dim(0)) + ")");
    }
    return row(table, index);
}

Var reshape(const Var& x, std::vector<int> new_shape) {
    const Tensor& xv = x.value();
    if (shape_size(new_shape) != xv.size()) {
        throw DimensionError("reshape: size mismatch " + shape_str(xv.shape()) + " -> " +
                             shape_str(new_shape));
    }
    Tensor out(new_shape, std::vector<double>(xv.data(), xv.data() + xv.size()));
    auto node = make_node(std::move(out), {x.node});
    if (node->requires_grad) {
        node->backprop = [](Node& nd) {
            Tensor& g = nd.parents[0]->ensure_grad();
            for (int64_t i = 0; i < g.size(); ++i) g[i] += nd.grad[i];
        };
    }
    return Var(node);
}

// ---- softmax / losses ----------------------------------------------------------

namespace {

// Applies fn(base_offset, stride, count) to every 1-D slice along `axis`.
template <typename F>
void for_each_slice(const Tensor& t, int axis, F&& fn) {
    if (t.rank() == 1) {
        fn(0, 1, static_cast<int>(t.size()));
        return;
    }
    int m = t.dim(0), n = t.dim(1);
    if (axis == 0) {
        for (int j = 0; j < n; ++j) fn(j, n, m);
    } else {
        for (int i = 0; i < m; ++i) fn(static_cast<int64_t>(i) * n, 1, n);
    }
}

}  // namespace

Var softmax_stable(const Var& x, int axis) {
    const Tensor& xv = x.value();
    if (axis < 0 || axis >= xv.rank()) {
        throw ContractError("softmax_stable: axis " + std::to_string(axis) + " out of range for rank " +
                            std::to_string(xv.rank()));
    }
    if (xv.rank() > 2) throw ContractError("softmax_stable: supports rank-1/2 tensors");
    Tensor out = xv;
    for_each_slice(xv, axis, [&](int64_t base, int64_t stride, int count) {
        double mx = xv[base];
        for (int i = 1; i < count; ++i) mx = std::max(mx, xv[base + i * stride]);
        double denom = 0.0;
        for (int i = 0; i < count; ++i) {
            double e = std::exp(xv[base + i * stride] - mx);
            out[base + i * stride] = e;
            denom += e;
        }
        for (int i = 0; i < count; ++i) out[base + i * stride] /= denom;
    });
    auto node = make_node(std::move(out), {x.node});
    if (node->requires_grad) {
        node->backprop = [axis](Node& nd) {
            const Tensor& s = nd.value;
            Tensor& g = nd.parents[0]->ensure_grad();
            for_each_slice(s, axis, [&](int64_t base, int64_t stride, int count) {
                double dot = 0.0;
                for (int i = 0; i < count; ++i) dot += nd.grad[base + i * stride] * s[base + i * stride];
                for (int i = 0; i < count; ++i) {
                    int64_t p = base + i * stride;
                    g[p] += s[p] * (nd.grad[p] - dot);
                }
            });
        };
    }
    return Var(node);
}

Var cross_entropy(const Var& logits, const std::vector<int>& labels) {
    const Tensor& lv = logits.value();
    if (lv.rank() != 2) throw ContractError("cross_entropy: logits must be B×K");
    int b = lv.dim(0), k = lv.dim(1);
    if (static_cast<int>(labels.size()) != b) {
        throw ContractError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
                            std::to_string(b));
    }
    for (int i = 0; i < b; ++i) {
        if (labels[static_cast<size_t>(i)] < 0 || labels[static_cast<size_t>(i)] >= k) {
            throw IndexError("cross_entropy: label " + std::to_string(labels[static_cast<size_t>(i)]) +
                             " out of range [0," + std::to_string(k) + ")");
        }
    }
    double loss = 0.0;
    for (int i = 0; i < b; ++i) {
        const double* xr = lv.data() + static_cast<int64_t>(i) * k;
        double mx = xr[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, xr[j]);
        double lse = 0.0;
        for (int j = 0; j < k; ++j) lse += std::exp(xr[j] - mx);
        lse = mx + std::log(lse);
        loss += lse - xr[labels[static_cast<size_t>(i)]];
    }
    loss /= b;
    auto node = make_node(Tensor::scalar(loss), {logits.node});
    if (node->requires_grad) {
        node->backprop = [b, k, labels](Node& nd) {
            const Tensor& lv2 = nd.parents[0]->value;
            Tensor& g = nd.parents[0]->ensure_grad();
            double gscale = nd.grad[0] / b;
            for (int i = 0; i < b; ++i) {
                const double* xr = lv2.data() + static_cast<int64_t>(i) * k;
                double mx = xr[0];
                for (int j = 1; j < k; ++j) mx = std::max(mx, xr[j]);
                double denom = 0.0;
                for (int j = 0; j < k; ++j) denom += std::exp(xr[j] - mx);
                for (int j = 0; j < k; ++j) {
                    double p = std::exp(xr[j] - mx) / denom;
                    double ind = j == labels[static_cast<size_t>(i)] ? 1.0 : 0.0;
                    g.at(i, j) += gscale * (p - ind);
                }
            }
        };
    }
    return Var(node);
}

Var bce_with_logits(const Var& logits, const std::vector<double>& targets) {
    const Tensor& lv = logits.value();
    if (lv.size() != static_cast<int64_t>(targets.size())) {
        throw ContractError("bce_with_logits: " + std::to_string(targets.size()) + " targets for " +
                            std::to_string(lv.size()) + " logits");
    }
    int64_t n = lv.size();
    double loss = 0.0;
    for (int64_t i = 0; i < n; ++i) loss += stable_softplus(lv[i]) - targets[static_cast<size_t>(i)] * lv[i];
    loss /= static_cast<double>(n);
    auto node = make_node(Tensor::scalar(loss), {logits.node});
    if (node->requires_grad) {
        node->backprop = [n, targets](Node& nd) {
            const Tensor& lv2 = nd.parents[0]->value;
            Tensor& g = nd.parents[0]->ensure_grad();
            double gscale = nd.grad[0] / static_cast<double>(n);
            for (int64_t i = 0; i < n; ++i) {
                double s = 1.0 / (1.0 + std::exp(-lv2[i]));
                g[i] += gscale * (s - targets[static_cast<size_t>(i)]);
            }
        };
    }
    return Var(node);
}

Var nll_probs(const Var& p, int label, double floor) {
    const Tensor& pv = p.value();
    if (pv.rank() != 1) throw ContractError("nll_probs: probabilities must be rank-1");
    if (label < 0 || label >= pv.dim(0)) {
        throw IndexError("nll_probs: label " + std::to_string(label) + " out of range [0," +
                         std::to_string(pv.dim(0)) + ")");
    }
    double q = pv[label] + floor;
    auto node = make_node(Tensor::scalar(-std::log(q)), {p.node});
    if (node->requires_grad) {
        node->backprop = [label, q](Node& nd) {
            Tensor& g = nd.parents[0]->ensure_grad();
            g[label] += nd.grad[0] * (-1.0 / q);
        };
    }
    return Var(node);
}

Var nll_normalized_probs(const Var& p, int label, double floor) {
    const Tensor& pv = p.value();
    if (pv.rank() != 1) throw ContractError("nll_normalized_probs: probabilities must be rank-1");
    if (label < 0 || label >= pv.dim(0)) {
        throw IndexError("nll_normalized_probs: label " + std::to_string(label) +
                         " out of range [0," + std::to_string(pv.dim(0)) + ")");
    }
    double q = pv[label] + floor;
    double s = 0.0;
    for (int64_t i = 0; i < pv.size(); ++i) s += pv[i] + floor;
    auto node = make_node(Tensor::scalar(std::log(s) - std::log(q)), {p.node});
    if (node->requires_grad) {
        node->backprop = [label, q, s](Node& nd) {
            Tensor& g = nd.parents[0]->ensure_grad();
            for (int64_t i = 0; i < g.size(); ++i) {
                double d = 1.0 / s - (i == label ? 1.0 / q : 0.0);
                g[i] += nd.grad[0] * d;
            }
        };
    }
    return Var(node);
}

Var row_scale(const Var& x, const Var& s) {
    const Tensor& xv = x.value();
    const Tensor& sv = s.value();
    if (xv.rank() != 2 || sv.rank() != 1 || sv.dim(0) != xv.dim(0)) {
        throw DimensionError("row_scale: incompatible shapes " + shape_str(xv.shape()) + " and " +
                             shape_str(sv.shape()));
    }
    int m = xv.dim(0), n = xv.dim(1);
    Tensor out = xv;
    for (int i = 0; i < m; ++i) {
        double sc = sv[i];
        for (int j = 0; j < n; ++j) out.at(i, j) *= sc;
    }
    auto node = make_node(std::move(out), {x.node, s.node});
    if (node->requires_grad) {
        node->backprop = [m, n](Node& nd) {
            const Tensor& xv2 = nd.parents[0]->value;
            const Tensor& sv2 = nd.parents[1]->value;
            if (nd.parents[0]->requires_grad) {
                Tensor& g = nd.parents[0]->ensure_grad();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) g.at(i, j) += nd.grad.at(i, j) * sv2[i];
            }
            if (nd.parents[1]->requires_grad) {
                Tensor& g = nd.parents[1]->ensure_grad();
                for (int i = 0; i < m; ++i) {
                    double acc = 0.0;
                    for (int j = 0; j < n; ++j) acc += nd.grad.at(i, j) * xv2.at(i, j);
                    g[i] += acc;
                }
            }
        };
    }
    return Var(node);
}

// ---- gradient check -------------------------------------------------------------

double grad_check(const std::function<Var(const Var&)>& f, const Tensor& x, double h) {
    Var xin = Var::input(x);
    Var loss = f(xin);
    if (loss.value().size() != 1) throw ContractError("grad_check: f must be scalar-valued");
    backward(loss);
    Tensor analytic = xin.node->has_grad ? xin.node->grad : Tensor::zeros(x.shape());

    double max_err = 0.0;
    for (int64_t i = 0; i < x.size(); ++i) {
        Tensor xp = x;
        xp[i] += h;
        double fp = f(Var::input(xp)).value().item();
        Tensor xm = x;
        xm[i] -= h;
        double fm = f(Var::input(xm)).value().item();
        double numeric = (fp - fm) / (2.0 * h);
        double err = std::fabs(analytic[i] - numeric) / std::max(1.0, std::fabs(analytic[i]));
        max_err = std::max(max_err, err);
    }
    return max_err;
}

}  // namespace rfsf
