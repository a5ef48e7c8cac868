#include "core/optim.h"

#include <cmath>

namespace t3m::nn {

void adam_step(Tensor& param, const std::vector<double>& grad, AdamState& state) {
    const size_t n = param.data->size();
    if (grad.size() != n) throw DataError("adam_step: grad size does not match parameter");
    if (state.m.empty()) {
        state.m.assign(n, 0.0);
        state.v.assign(n, 0.0);
    }
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (size_t i = 0; i < n; ++i) {
        const double g = grad[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        (*param.data)[i] -= state.lr * mhat / std::sqrt(vhat + state.eps);
    }
}

Adam::Adam(const std::vector<NamedParam>& params, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const NamedParam& p : params) {
        if (!p.tensor->requires_grad) continue;
        params_.push_back(p.tensor);
        AdamState st;
        st.beta1 = beta1;
        st.beta2 = beta2;
        st.eps = eps;
        st.lr = lr;
        states_.push_back(std::move(st));
    }
}

void Adam::set_lr(double lr) {
    lr_ = lr;
    for (AdamState& st : states_) st.lr = lr;
}

void Adam::zero_grad() {
    for (Tensor* p : params_) p->zero_grad();
}

void Adam::step() {
    for (size_t i = 0; i < params_.size(); ++i) adam_step(*params_[i], *params_[i]->grad, states_[i]);
}

SgdMomentum::SgdMomentum(const std::vector<NamedParam>& params, double lr, double momentum)
    : lr_(lr), momentum_(momentum) {
    for (const NamedParam& p : params) {
        if (!p.tensor->requires_grad) continue;
        params_.push_back(p.tensor);
        velocity_.emplace_back(p.tensor->data->size(), 0.0);
    }
}

void SgdMomentum::zero_grad() {
    for (Tensor* p : params_) p->zero_grad();
}

void SgdMomentum::step() {
    for (size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = *params_[i];
        std::vector<double>& vel = velocity_[i];
        for (size_t j = 0; j < vel.size(); ++j) {
            vel[j] = momentum_ * vel[j] + (*p.grad)[j];
            (*p.data)[j] -= lr_ * vel[j];
        }
    }
}

double cosine_warmup_lr(double base_lr, int64_t step, int64_t total_steps, double warmup_frac) {
    if (total_steps <= 0) return base_lr;
    const int64_t warmup = std::max<int64_t>(1, static_cast<int64_t>(std::ceil(warmup_frac * static_cast<double>(total_steps))));
    if (step < warmup) return base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
    const double progress = static_cast<double>(step - warmup) / static_cast<double>(std::max<int64_t>(1, total_steps - warmup));
    return base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

}  // namespace t3m::nn
