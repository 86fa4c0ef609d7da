#pragma once

#include "wmforge/tensor.hpp"

#include <string>
#include <vector>

namespace wmforge::nd {

// Reverse-mode autodiff over a static graph. Nodes are appended in
// topological order (operands always precede consumers); the graph is
// built once and reused by rebinding leaf values between passes.
//
// Forward values are float32 with float64 accumulation inside every
// reduction (conv inner products, norms, pools), so results do not
// depend on how work would be scheduled.

enum class Op {
    Input,
    Conv2d,
    Add,
    Sub,
    Mul,
    Scale,
    SiLU,
    ChanAffine,
    LayerNormCh,
    MeanPool,
    Affine,
    Sum,
    Sigmoid,
    Log,
    Relu,
    LogSigmoid,
};

struct Node {
    Op op = Op::Input;
    std::vector<int> args;
    Tensor val;
    Tensor grad;
    bool requires_grad = false;
    std::string name; // leaves only

    // conv / layernorm parameters
    int stride = 1;
    int pad = 0;
    int groups = 1;
    float scalar = 0.0f;
    float eps = 1e-6f;
};

class Graph {
public:
    // leaves
    int input(const std::string& name, Tensor v, bool requires_grad);
    int constant(Tensor v) { return input("", std::move(v), false); }

    // primitives
    int conv2d(int x, int w, int b, int stride, int pad, int groups);
    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);
    int scale(int x, float s);
    int silu(int x);
    int chan_affine(int x, int gamma, int beta);
    int layernorm_ch(int x, float eps = 1e-6f);
    int mean_pool(int x);
    int affine(int x, int w, int b);
    int sum(int x);
    int sigmoid(int x);
    int log(int x);
    int relu(int x);
    int logsigmoid(int x);

    void set_value(int id, const Tensor& v);
    void set_value(const std::string& name, const Tensor& v);
    int find(const std::string& name) const; // -1 when absent

    // Recomputes every non-leaf node. Returns the value of `out`.
    const Tensor& forward(int out);

    // Scalar-output reverse pass; grads of tracked nodes are replaced.
    void backward(int out);

    const Tensor& value(int id) const { return nodes_[std::size_t(id)].val; }
    const Tensor& grad(int id) const { return nodes_[std::size_t(id)].grad; }
    const Node& node(int id) const { return nodes_[std::size_t(id)]; }
    int size() const { return int(nodes_.size()); }

private:
    int push(Node n);
    void check_id(int id) const;
    void eval(Node& n, int id);
    void propagate(Node& n, int id);

    std::vector<Node> nodes_;
    // values are eagerly evaluated at build time, but a rebind invalidates
    // them; backward demands a forward pass after the latest rebind
    bool forward_current_ = false;
};

} // namespace wmforge::nd
