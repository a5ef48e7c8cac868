#pragma once

#include <cstdint>
#include <vector>

#include "core/tensor.h"

namespace t3m::nn {

struct AdamState {
    std::vector<double> m, v;
    int64_t step_count = 0;
    double beta1 = 0.9, beta2 = 0.999, lr = 1e-4, eps = 1e-8;
};

// One bias-corrected Adam update for a single parameter; eps sits inside the
// square root of the denominator.
void adam_step(Tensor& param, const std::vector<double>& grad, AdamState& state);

// Optimizers operate on the requires_grad subset of a state list.
class Adam {
public:
    Adam(const std::vector<NamedParam>& params, double lr,
         double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void set_lr(double lr);
    double lr() const { return lr_; }
    void zero_grad();
    void step();

private:
    std::vector<Tensor*> params_;
    std::vector<AdamState> states_;
    double lr_, beta1_, beta2_, eps_;
};

class SgdMomentum {
public:
    SgdMomentum(const std::vector<NamedParam>& params, double lr, double momentum = 0.9);
    void zero_grad();
    void step();

private:
    std::vector<Tensor*> params_;
    std::vector<std::vector<double>> velocity_;
    double lr_, momentum_;
};

// Linear warmup over the first warmup_frac of steps, then cosine decay to 0.
double cosine_warmup_lr(double base_lr, int64_t step, int64_t total_steps, double warmup_frac);

}  // namespace t3m::nn
