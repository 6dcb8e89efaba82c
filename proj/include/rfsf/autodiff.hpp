#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rfsf/tensor.hpp"

namespace rfsf {

// Trainable parameter. Gradients accumulate across backward() calls until
// zero_grad(). A Param is single-writer: one training step owns it.
struct Param {
    Tensor value;
    Tensor grad;
    bool trainable = true;
    std::string name;

    Param() = default;
    Param(Tensor v, std::string n)
        : value(std::move(v)), grad(Tensor::zeros(value.shape())), name(std::move(n)) {}

    void zero_grad() { grad.fill(0.0); }
};

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the dynamic tape. Graphs are rebuilt per forward pass and
// confined to a single thread.
struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily
    bool requires_grad = false;
    bool has_grad = false;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backprop;  // reads this->grad, accumulates into parents
    Param* param = nullptr;

    Tensor& ensure_grad() {
        if (!has_grad) {
            grad = Tensor::zeros(value.shape());
            has_grad = true;
        }
        return grad;
    }
};

// Lightweight handle to a node.
class Var {
public:
    Var() = default;
    explicit Var(NodePtr n) : node(std::move(n)) {}

    // Non-differentiable input.
    static Var constant(Tensor value);
    // Differentiable free input (for gradient checks and tests).
    static Var input(Tensor value);
    // Leaf bound to a parameter; backward() routes gradients into p.grad.
    static Var leaf(Param& p);

    const Tensor& value() const { return node->value; }
    const Tensor& grad() const;  // throws if backward has not reached this node
    const std::vector<int>& shape() const { return node->value.shape(); }

    NodePtr node;
};

// Receives (param, gradient contribution) pairs at the end of backward().
using GradSink = std::function<void(Param*, const Tensor&)>;

// Reverse-mode sweep from a scalar loss. Accumulates into Param::grad.
void backward(const Var& loss);
// Same sweep, but parameter gradients go to `sink` instead of Param::grad.
void backward(const Var& loss, const GradSink& sink);
// Sweep that leaves gradients on the nodes only (used with LeafScope).
void backward_graph_only(const Var& loss);

// Thread-local cache that makes Var::leaf(p) return one shared node per
// parameter while in scope. Successive backward_graph_only() sweeps then
// accumulate into the same node gradients, which harvest() hands over in
// insertion order. Avoids re-copying parameter tensors for every sample
// graph in a training batch.
class LeafScope {
public:
    LeafScope();
    ~LeafScope();
    LeafScope(const LeafScope&) = delete;
    LeafScope& operator=(const LeafScope&) = delete;

    void harvest(const GradSink& sink);  // also clears cached gradients

    static LeafScope* active();
    NodePtr lookup(Param& p);

private:
    std::vector<std::pair<Param*, NodePtr>> leaves_;
    LeafScope* previous_ = nullptr;
};

// ---- Tracked primitives --------------------------------------------------

Var add(const Var& a, const Var& b);       // elementwise, same shape
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);       // elementwise, same shape
Var scale(const Var& a, double c);
Var add_rowvec(const Var& x, const Var& v);  // x: m×n, v: n; adds v to every row
Var matmul(const Var& a, const Var& b);      // m×k · k×n
Var matmul_nt(const Var& a, const Var& b);   // m×k · (n×k)ᵀ -> m×n
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var tanh_act(const Var& x);
// Per-row layer norm with learnable gain/bias (rank-1 input is one row).
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);
// x: C_in×L, w: {C_out, C_in, K}, b: C_out. Zero padding.
Var conv1d(const Var& x, const Var& w, const Var& b, int stride, int padding);
// conv1d followed by max(0, .) in one node; counts the same MACs.
Var conv1d_relu(const Var& x, const Var& w, const Var& b, int stride, int padding);
// Transposed counterpart: L_out = (L_in-1)*stride + K - 2*padding.
Var conv_transpose1d(const Var& x, const Var& w, const Var& b, int stride, int padding);
Var reduce_mean_axis(const Var& x, int axis);  // rank-2 -> rank-1
Var reduce_max_axis(const Var& x, int axis);   // rank-2 -> rank-1, grad to first argmax
Var reduce_sum_all(const Var& x);              // -> scalar
Var concat(const std::vector<Var>& parts, int axis);  // rank-1 (axis 0) or rank-2
Var col_slice(const Var& x, int c0, int c1);   // columns [c0, c1)
Var row(const Var& x, int r);                  // one row of a rank-2 tensor -> rank-1
Var embedding_row(const Var& table, int index);  // table: K×d -> rank-1 d
Var softmax_stable(const Var& x, int axis);
// Mean over batch of -log softmax(logits)[label]; log-sum-exp internally.
Var cross_entropy(const Var& logits, const std::vector<int>& labels);
// Mean over entries of softplus(x) - target*x  (= BCE against sigmoid(x)).
Var bce_with_logits(const Var& logits, const std::vector<double>& targets);
// -log(p[label] + floor); p is a rank-1 (sub)probability vector.
Var nll_probs(const Var& p, int label, double floor = 1e-12);
// Cross-entropy against the normalized vector: -log((p[label]+floor) / sum(p+floor)).
Var nll_normalized_probs(const Var& p, int label, double floor = 1e-12);
Var row_scale(const Var& x, const Var& s);  // x: m×n, s: m; scales row i by s[i]
Var reshape(const Var& x, std::vector<int> new_shape);

// ---- Gradient check -------------------------------------------------------

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
double grad_check(const std::function<Var(const Var&)>& f, const Tensor& x, double h = 1e-5);

// ---- MAC accounting -------------------------------------------------------

// Thread-local multiply-accumulate counter. Only dot-product style primitives
// (matmul, matmul_nt, conv1d) count; elementwise math, activations and norms
// do not.
namespace mac_counter {
void reset();
void enable(bool on);
bool enabled();
uint64_t count();
void add(uint64_t n);
}  // namespace mac_counter

}  // namespace rfsf
