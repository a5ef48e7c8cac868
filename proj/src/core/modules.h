#pragma once

#include <string>
#include <vector>

#include "core/ops.h"
#include "core/rng.h"
#include "core/tensor.h"

namespace t3m::nn {

// Parameter-owning layers. state() lists everything a checkpoint must carry
// (trainable params plus buffers like batchnorm running stats).

struct Linear {
    Tensor w, b;

    void init(Rng& rng, int64_t in_dim, int64_t out_dim, bool bias = true, double w_scale = -1.0);
    Tensor forward(const Tensor& x) const { return linear(x, w, b); }
    void state(const std::string& prefix, std::vector<NamedParam>& out);
};

struct Conv1d {
    Tensor w, b;
    int64_t stride = 1, pad = 0, dilation = 1;

    void init(Rng& rng, int64_t in_ch, int64_t out_ch, int64_t kernel,
              int64_t stride, int64_t pad, int64_t dilation = 1, bool bias = true);
    Tensor forward(const Tensor& x) const { return conv1d(x, w, b, stride, pad, dilation); }
    void state(const std::string& prefix, std::vector<NamedParam>& out);
};

struct ConvTranspose1d {
    Tensor w, b;
    int64_t stride = 1, pad = 0;

    void init(Rng& rng, int64_t in_ch, int64_t out_ch, int64_t kernel, int64_t stride, int64_t pad);
    Tensor forward(const Tensor& x) const { return conv1d_transpose(x, w, b, stride, pad); }
    void state(const std::string& prefix, std::vector<NamedParam>& out);
};

struct BatchNorm1d {
    Tensor gamma, beta;
    Tensor running_mean, running_var;  // buffers, not trained
    double momentum = 0.1, eps = 1e-5;
    bool training = true;

    void init(int64_t channels);
    Tensor forward(const Tensor& x) {
        return batchnorm1d(x, gamma, beta, running_mean, running_var, training, momentum, eps);
    }
    void state(const std::string& prefix, std::vector<NamedParam>& out);
};

struct LayerNorm {
    Tensor gamma, beta;
    double eps = 1e-5;

    void init(int64_t dim);
    Tensor forward(const Tensor& x) const { return layernorm(x, gamma, beta, eps); }
    void state(const std::string& prefix, std::vector<NamedParam>& out);
};

// Multi-head attention with projections; kv may have a different width than
// the query stream (512-wide context vs 768-wide speech).
struct Mha {
    Linear wq, wk, wv, wo;
    int64_t heads = 1;

    void init(Rng& rng, int64_t dim, int64_t kv_dim, int64_t n_heads);
    Tensor forward(const Tensor& x, const Tensor& kv, bool causal) const {
        return wo.forward(attention(wq.forward(x), wk.forward(kv), wv.forward(kv), heads, causal));
    }
    void state(const std::string& prefix, std::vector<NamedParam>& out);
};

// Helpers over a collected state list.
void set_requires_grad(std::vector<NamedParam>& ps, bool on);
int64_t param_count(const std::vector<NamedParam>& ps);

}  // namespace t3m::nn
