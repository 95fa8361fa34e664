#include "haug/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace haug {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

static int shape_numel(const std::vector<int>& shape) {
    int n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor extent must be positive, got " + shape_str(shape));
        n *= d;
    }
    return n;
}

Tensor Tensor::zeros(const std::vector<int>& shape, bool requires_grad) {
    return full(shape, scalar(0), requires_grad);
}

Tensor Tensor::full(const std::vector<int>& shape, scalar v, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->shape = shape;
    n->value.assign(static_cast<size_t>(shape_numel(shape)), v);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::from_data(const std::vector<int>& shape, std::vector<scalar> data, bool requires_grad) {
    const int n = shape_numel(shape);
    if (static_cast<size_t>(n) != data.size()) {
        throw std::invalid_argument("data length " + std::to_string(data.size()) +
                                    " does not match shape " + shape_str(shape));
    }
    auto node = std::make_shared<Node>();
    node->shape = shape;
    node->value = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

scalar Tensor::item() const {
    if (numel() != 1) throw std::logic_error("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
}

std::vector<scalar> Tensor::grad_or_zeros() const {
    if (!node_->grad.empty()) return node_->grad;
    return std::vector<scalar>(node_->value.size(), scalar(0));
}

Tensor Tensor::detached_copy() const {
    auto n = std::make_shared<Node>();
    n->shape = node_->shape;
    n->value = node_->value;
    n->requires_grad = false;
    return Tensor(std::move(n));
}

ComputeGraph ComputeGraph::from_root(Node* root) {
    ComputeGraph g;
    std::unordered_set<Node*> done;
    // iterative post-order DFS; inputs precede consumers in g.topo
    struct Frame {
        Node* n;
        size_t next_input;
    };
    std::vector<Frame> stack{{root, 0}};
    std::unordered_set<Node*> on_stack{root};
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_input < f.n->inputs.size()) {
            Node* in = f.n->inputs[f.next_input++].get();
            if (!done.count(in) && !on_stack.count(in)) {
                stack.push_back({in, 0});
                on_stack.insert(in);
            }
        } else {
            done.insert(f.n);
            g.topo.push_back(f.n);
            on_stack.erase(f.n);
            stack.pop_back();
        }
    }
    return g;
}

void backward(const Tensor& loss) {
    if (loss.numel() != 1) {
        throw std::invalid_argument("backward() requires a scalar loss, got shape " +
                                    shape_str(loss.shape()));
    }
    Node* root = loss.node();
    ComputeGraph g = ComputeGraph::from_root(root);
    // non-leaf grads are per-pass scratch; only leaves accumulate across calls
    for (Node* n : g.topo) {
        if (n->backward_fn) n->grad.clear();
    }
    root->ensure_grad();
    root->grad[0] += scalar(1);
    // reverse topological order: a node's grad is complete before its
    // backward_fn distributes it to inputs
    for (auto it = g.topo.rbegin(); it != g.topo.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
}

void check_finite(const Tensor& t, const char* where) {
    for (scalar v : t.data()) {
        if (!std::isfinite(static_cast<double>(v))) {
            throw std::runtime_error(std::string("non-finite value produced by ") + where);
        }
    }
}

}  // namespace haug
