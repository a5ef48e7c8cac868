#include "core/modules.h"

#include <cmath>

namespace t3m::nn {

static Tensor init_normal(Rng& rng, std::vector<int64_t> shape, double stddev) {
    Tensor t = Tensor::zeros(std::move(shape), true);
    for (double& v : *t.data) v = rng.normal(0.0, stddev);
    return t;
}

void Linear::init(Rng& rng, int64_t in_dim, int64_t out_dim, bool bias, double w_scale) {
    const double stddev = w_scale > 0.0 ? w_scale : std::sqrt(2.0 / static_cast<double>(in_dim + out_dim));
    w = init_normal(rng, {out_dim, in_dim}, stddev);
    if (bias) b = Tensor::zeros({out_dim}, true);
}

void Linear::state(const std::string& prefix, std::vector<NamedParam>& out) {
    out.push_back({prefix + ".w", &w});
    if (b.defined()) out.push_back({prefix + ".b", &b});
}

void Conv1d::init(Rng& rng, int64_t in_ch, int64_t out_ch, int64_t kernel,
                  int64_t stride_, int64_t pad_, int64_t dilation_, bool bias) {
    stride = stride_;
    pad = pad_;
    dilation = dilation_;
    const double stddev = std::sqrt(2.0 / static_cast<double>(in_ch * kernel));
    w = init_normal(rng, {out_ch, in_ch, kernel}, stddev);
    if (bias) b = Tensor::zeros({out_ch}, true);
}

void Conv1d::state(const std::string& prefix, std::vector<NamedParam>& out) {
    out.push_back({prefix + ".w", &w});
    if (b.defined()) out.push_back({prefix + ".b", &b});
}

void ConvTranspose1d::init(Rng& rng, int64_t in_ch, int64_t out_ch, int64_t kernel,
                           int64_t stride_, int64_t pad_) {
    stride = stride_;
    pad = pad_;
    const double stddev = std::sqrt(2.0 / static_cast<double>(in_ch * kernel));
    w = init_normal(rng, {in_ch, out_ch, kernel}, stddev);
    b = Tensor::zeros({out_ch}, true);
}

void ConvTranspose1d::state(const std::string& prefix, std::vector<NamedParam>& out) {
    out.push_back({prefix + ".w", &w});
    out.push_back({prefix + ".b", &b});
}

void BatchNorm1d::init(int64_t channels) {
    gamma = Tensor::full({channels}, 1.0, true);
    beta = Tensor::zeros({channels}, true);
    running_mean = Tensor::zeros({channels});
    running_var = Tensor::full({channels}, 1.0);
}

void BatchNorm1d::state(const std::string& prefix, std::vector<NamedParam>& out) {
    out.push_back({prefix + ".gamma", &gamma});
    out.push_back({prefix + ".beta", &beta});
    out.push_back({prefix + ".running_mean", &running_mean});
    out.push_back({prefix + ".running_var", &running_var});
}

void LayerNorm::init(int64_t dim) {
    gamma = Tensor::full({dim}, 1.0, true);
    beta = Tensor::zeros({dim}, true);
}

void LayerNorm::state(const std::string& prefix, std::vector<NamedParam>& out) {
    out.push_back({prefix + ".gamma", &gamma});
    out.push_back({prefix + ".beta", &beta});
}

void Mha::init(Rng& rng, int64_t dim, int64_t kv_dim, int64_t n_heads) {
    heads = n_heads;
    wq.init(rng, dim, dim);
    wk.init(rng, kv_dim, dim);
    wv.init(rng, kv_dim, dim);
    wo.init(rng, dim, dim);
}

void Mha::state(const std::string& prefix, std::vector<NamedParam>& out) {
    wq.state(prefix + ".wq", out);
    wk.state(prefix + ".wk", out);
    wv.state(prefix + ".wv", out);
    wo.state(prefix + ".wo", out);
}

void set_requires_grad(std::vector<NamedParam>& ps, bool on) {
    for (NamedParam& p : ps) p.tensor->set_requires_grad(on);
}

int64_t param_count(const std::vector<NamedParam>& ps) {
    int64_t n = 0;
    for (const NamedParam& p : ps) n += p.tensor->numel();
    return n;
}

}  // namespace t3m::nn
