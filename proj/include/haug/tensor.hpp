#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace haug {

#ifdef HAUG_SCALAR_F64
using scalar = double;
#else
using scalar = float;
#endif

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One record in the compute graph: forward value plus everything the
// backward sweep needs (input edges and the grad closure).
struct Node {
    std::vector<int> shape;
    std::vector<scalar> value;
    std::vector<scalar> grad;  // sized lazily; empty means "all zeros"
    bool requires_grad = false;
    std::vector<NodePtr> inputs;
    std::function<void(Node&)> backward_fn;  // accumulates into inputs' grads
    const char* op = "leaf";

    int numel() const {
        int n = 1;
        for (int d : shape) n *= d;
        return n;
    }
    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), scalar(0));
    }
};

// Value-semantic handle over a graph node. Copies share storage; ops on
// tensors append nodes to the implicit graph when grad recording is enabled.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(NodePtr n) : node_(std::move(n)) {}

    static Tensor zeros(const std::vector<int>& shape, bool requires_grad = false);
    static Tensor full(const std::vector<int>& shape, scalar v, bool requires_grad = false);
    static Tensor from_data(const std::vector<int>& shape, std::vector<scalar> data,
                            bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    int numel() const { return node_->numel(); }
    int dim(int i) const { return node_->shape[i]; }
    int rank() const { return static_cast<int>(node_->shape.size()); }

    std::span<const scalar> data() const { return node_->value; }
    std::span<scalar> data() { return node_->value; }
    scalar item() const;

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool b) { node_->requires_grad = b; }

    // grad view; empty buffer reads as zeros
    std::span<const scalar> grad() const { return node_->grad; }
    std::vector<scalar> grad_or_zeros() const;
    void zero_grad() { node_->grad.clear(); }

    Node* node() const { return node_.get(); }
    NodePtr node_ptr() const { return node_; }

    // deep value copy detached from the graph
    Tensor detached_copy() const;

  private:
    NodePtr node_;
};

// Backward schedule: nodes reachable from one root, topologically ordered
// (inputs before consumers). Built once per backward call.
struct ComputeGraph {
    std::vector<Node*> topo;
    static ComputeGraph from_root(Node* root);
};

// Populates .grad on every reachable node that requires grad. Grads
// accumulate additively across calls; callers zero them between steps.
void backward(const Tensor& loss);

// RAII switch that turns off graph recording (frozen-model inference).
class NoGradGuard {
  public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

bool grad_enabled();

std::string shape_str(const std::vector<int>& s);

// debug invariant: throws if any element is NaN/Inf
void check_finite(const Tensor& t, const char* where);

}  // namespace haug
