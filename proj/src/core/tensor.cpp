#include "core/tensor.h"

#include <cmath>
#include <unordered_set>

namespace t3m::nn {

static int64_t numel_of(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
}

Tensor Tensor::zeros(std::vector<int64_t> shape, bool requires_grad) {
    for (int64_t d : shape) {
        if (d <= 0) throw DataError("tensor dims must be positive");
    }
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::make_shared<std::vector<double>>(static_cast<size_t>(numel_of(t.shape)), 0.0);
    t.set_requires_grad(requires_grad);
    return t;
}

Tensor Tensor::full(std::vector<int64_t> shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (double& v : *t.data) v = value;
    return t;
}

Tensor Tensor::from(std::vector<int64_t> shape, std::vector<double> values, bool requires_grad) {
    if (numel_of(shape) != static_cast<int64_t>(values.size()))
        throw DataError("tensor init: value count does not match shape");
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::make_shared<std::vector<double>>(std::move(values));
    t.set_requires_grad(requires_grad);
    return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from({}, {value}, requires_grad);
}

int64_t Tensor::numel() const { return numel_of(shape); }

double Tensor::item() const {
    if (numel() != 1) throw UsageError("item() on tensor with " + std::to_string(numel()) + " elements");
    return (*data)[0];
}

void Tensor::set_requires_grad(bool on) {
    requires_grad = on;
    if (on && !grad) {
        grad = std::make_shared<std::vector<double>>(data->size(), 0.0);
    }
}

void Tensor::zero_grad() {
    if (grad) std::fill(grad->begin(), grad->end(), 0.0);
}

bool Tensor::all_finite() const {
    for (double v : *data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

static thread_local bool g_grad_enabled = true;

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }

void backward(const Tensor& loss) {
    if (loss.numel() != 1) throw UsageError("backward requires a scalar loss, got shape " + loss.shape_str());
    if (!loss.node) {
        // loss does not depend on any recorded op; nothing to propagate
        return;
    }
    (*loss.grad)[0] += 1.0;

    // reverse post-order DFS = topological order (consumers before producers)
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(loss.node.get(), 0);
    visited.insert(loss.node.get());
    while (!stack.empty()) {
        auto& [n, idx] = stack.back();
        if (idx < n->parents.size()) {
            Node* p = n->parents[idx].get();
            ++idx;
            if (p && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward) (*it)->backward();
    }
}

}  // namespace t3m::nn
