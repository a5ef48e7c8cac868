#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "core/error.h"

namespace t3m::nn {

struct Node;

// Dense row-major f64 tensor, rank <= 3. Data and grad buffers are shared so
// copies alias; the autodiff graph hangs off `node` and is rebuilt every step.
// Invariant: requires_grad == true implies grad is allocated (same numel).
class Tensor {
public:
    std::vector<int64_t> shape;
    std::shared_ptr<std::vector<double>> data;
    std::shared_ptr<std::vector<double>> grad;
    bool requires_grad = false;
    std::shared_ptr<Node> node;

    Tensor() = default;

    static Tensor zeros(std::vector<int64_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<int64_t> shape, double value, bool requires_grad = false);
    static Tensor from(std::vector<int64_t> shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    int rank() const { return static_cast<int>(shape.size()); }
    int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }
    int64_t numel() const;
    bool defined() const { return data != nullptr; }

    double* ptr() { return data->data(); }
    const double* ptr() const { return data->data(); }
    double* grad_ptr() { return grad->data(); }
    const double* grad_ptr() const { return grad->data(); }

    double item() const;

    void set_requires_grad(bool on);
    void zero_grad();
    bool all_finite() const;

    std::string shape_str() const;
};

struct Node {
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backward;
};

// Thread-local recording switch; frozen inference also works without it
// because ops only record when an input requires grad.
bool grad_enabled();
void set_grad_enabled(bool on);

struct NoGradGuard {
    NoGradGuard() : prev_(grad_enabled()) { set_grad_enabled(false); }
    ~NoGradGuard() { set_grad_enabled(prev_); }

private:
    bool prev_;
};

// Reverse-mode accumulation from a scalar loss. Gradients are *added* to the
// grad buffers of every tensor on the recorded path; callers zero parameter
// grads beforehand (optimizers do this), so off-path parameters read as zero.
void backward(const Tensor& loss);

// Named handle used by optimizers and checkpoints.
struct NamedParam {
    std::string name;
    Tensor* tensor;
};

}  // namespace t3m::nn
