#pragma once

#include <vector>

#include "core/tensor.h"

namespace t3m::nn {

// elementwise
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor scale(const Tensor& a, double c);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope = 0.01);
Tensor sigmoid(const Tensor& x);
// shares the data buffer, drops the autodiff edge
Tensor detach(const Tensor& x);

// layout
Tensor transpose2d(const Tensor& x);
Tensor slice_cols(const Tensor& x, int64_t c0, int64_t len);
Tensor concat_cols(const std::vector<Tensor>& xs);
Tensor pad_cols_left(const Tensor& x, int64_t p);
// linear interpolation along time: [C,T] -> [C,t_out], endpoints aligned
Tensor interp_cols(const Tensor& x, int64_t t_out);
Tensor mean_pool_rows(const Tensor& x, int64_t window);
Tensor gather_rows(const Tensor& table, const std::vector<int64_t>& idx);
// [N,C,T] -> [(N*T),C] and back; rank-2 [C,T] is treated as N=1
Tensor nct_to_rows(const Tensor& x);
Tensor rows_to_nct(const Tensor& x, int64_t n, int64_t t);

// dense (Eigen-backed)
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// temporal convolution; x is [C,T] or [N,C,T], w is [C_out,C_in,K]
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b,
              int64_t stride, int64_t pad, int64_t dilation = 1);
// transposed counterpart; w is [C_in,C_out,K], T_out = (T-1)*stride - 2*pad + K
Tensor conv1d_transpose(const Tensor& x, const Tensor& w, const Tensor& b,
                        int64_t stride, int64_t pad);

// normalization
Tensor batchnorm1d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   Tensor& running_mean, Tensor& running_var,
                   bool training, double momentum = 0.1, double eps = 1e-5);
Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
Tensor softmax_rows(const Tensor& x);

// multi-head scaled dot-product attention with identity projections;
// q [Tq,D], k/v [Tk,D], D divisible by heads
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int64_t heads, bool causal);

// reductions and losses
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor mse(const Tensor& a, const Tensor& b);
Tensor cross_entropy(const Tensor& logits, const std::vector<int64_t>& targets);
Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets);

}  // namespace t3m::nn
