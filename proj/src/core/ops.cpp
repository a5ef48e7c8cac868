#include "core/ops.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace t3m::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

namespace {

bool should_record(std::initializer_list<const Tensor*> ins) {
    if (!grad_enabled()) return false;
    for (const Tensor* t : ins)
        if (t->defined() && t->requires_grad) return true;
    return false;
}

std::shared_ptr<Node> make_node(std::initializer_list<const Tensor*> ins, std::function<void()> fn) {
    auto node = std::make_shared<Node>();
    for (const Tensor* t : ins)
        if (t->defined() && t->node) node->parents.push_back(t->node);
    node->backward = std::move(fn);
    return node;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape)
        throw DataError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

using Buf = std::shared_ptr<std::vector<double>>;

Buf grad_of(const Tensor& t) { return t.requires_grad ? t.grad : nullptr; }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape("add", a, b);
    Tensor out = Tensor::zeros(a.shape);
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] + (*b.data)[i];
    if (should_record({&a, &b})) {
        out.set_requires_grad(true);
        out.node = make_node({&a, &b}, [ga = grad_of(a), gb = grad_of(b), go = out.grad, n] {
            if (ga)
                for (int64_t i = 0; i < n; ++i) (*ga)[i] += (*go)[i];
            if (gb)
                for (int64_t i = 0; i < n; ++i) (*gb)[i] += (*go)[i];
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape("sub", a, b);
    Tensor out = Tensor::zeros(a.shape);
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] - (*b.data)[i];
    if (should_record({&a, &b})) {
        out.set_requires_grad(true);
        out.node = make_node({&a, &b}, [ga = grad_of(a), gb = grad_of(b), go = out.grad, n] {
            if (ga)
                for (int64_t i = 0; i < n; ++i) (*ga)[i] += (*go)[i];
            if (gb)
                for (int64_t i = 0; i < n; ++i) (*gb)[i] -= (*go)[i];
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape("mul", a, b);
    Tensor out = Tensor::zeros(a.shape);
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] * (*b.data)[i];
    if (should_record({&a, &b})) {
        out.set_requires_grad(true);
        out.node = make_node({&a, &b},
                             [ga = grad_of(a), gb = grad_of(b), ad = a.data, bd = b.data, go = out.grad, n] {
                                 if (ga)
                                     for (int64_t i = 0; i < n; ++i) (*ga)[i] += (*go)[i] * (*bd)[i];
                                 if (gb)
                                     for (int64_t i = 0; i < n; ++i) (*gb)[i] += (*go)[i] * (*ad)[i];
                             });
    }
    return out;
}

Tensor add_scalar(const Tensor& a, double c) {
    Tensor out = Tensor::zeros(a.shape);
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] + c;
    if (should_record({&a})) {
        out.set_requires_grad(true);
        out.node = make_node({&a}, [ga = grad_of(a), go = out.grad, n] {
            if (ga)
                for (int64_t i = 0; i < n; ++i) (*ga)[i] += (*go)[i];
        });
    }
    return out;
}

Tensor scale(const Tensor& a, double c) {
    Tensor out = Tensor::zeros(a.shape);
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] * c;
    if (should_record({&a})) {
        out.set_requires_grad(true);
        out.node = make_node({&a}, [ga = grad_of(a), go = out.grad, c, n] {
            if (ga)
                for (int64_t i = 0; i < n; ++i) (*ga)[i] += (*go)[i] * c;
        });
    }
    return out;
}

Tensor relu(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape);
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) (*out.data)[i] = (*x.data)[i] > 0.0 ? (*x.data)[i] : 0.0;
    if (should_record({&x})) {
        out.set_requires_grad(true);
        out.node = make_node({&x}, [gx = grad_of(x), xd = x.data, go = out.grad, n] {
            if (gx)
                for (int64_t i = 0; i < n; ++i)
                    if ((*xd)[i] > 0.0) (*gx)[i] += (*go)[i];
        });
    }
    return out;
}

Tensor leaky_relu(const Tensor& x, double slope) {
    Tensor out = Tensor::zeros(x.shape);
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) {
        double v = (*x.data)[i];
        (*out.data)[i] = v > 0.0 ? v : slope * v;
    }
    if (should_record({&x})) {
        out.set_requires_grad(true);
        out.node = make_node({&x}, [gx = grad_of(x), xd = x.data, go = out.grad, slope, n] {
            if (gx)
                for (int64_t i = 0; i < n; ++i) (*gx)[i] += (*go)[i] * ((*xd)[i] > 0.0 ? 1.0 : slope);
        });
    }
    return out;
}

Tensor sigmoid(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape);
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) {
        double v = (*x.data)[i];
        (*out.data)[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    if (should_record({&x})) {
        out.set_requires_grad(true);
        out.node = make_node({&x}, [gx = grad_of(x), od = out.data, go = out.grad, n] {
            if (gx)
                for (int64_t i = 0; i < n; ++i) {
                    double y = (*od)[i];
                    (*gx)[i] += (*go)[i] * y * (1.0 - y);
                }
        });
    }
    return out;
}

Tensor detach(const Tensor& x) {
    Tensor out;
    out.shape = x.shape;
    out.data = x.data;
    return out;
}

Tensor transpose2d(const Tensor& x) {
    if (x.rank() != 2) throw DataError("transpose2d: expected rank-2, got " + x.shape_str());
    const int64_t r = x.dim(0), c = x.dim(1);
    Tensor out = Tensor::zeros({c, r});
    for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < c; ++j) (*out.data)[j * r + i] = (*x.data)[i * c + j];
    if (should_record({&x})) {
        out.set_requires_grad(true);
        out.node = make_node({&x}, [gx = grad_of(x), go = out.grad, r, c] {
            if (gx)
                for (int64_t i = 0; i < r; ++i)
                    for (int64_t j = 0; j < c; ++j) (*gx)[i * c + j] += (*go)[j * r + i];
        });
    }
    return out;
}

Tensor slice_cols(const Tensor& x, int64_t c0, int64_t len) {
    if (x.rank() != 2) throw DataError("slice_cols: expected rank-2, got " + x.shape_str());
    const int64_t r = x.dim(0), c = x.dim(1);
    if (c0 < 0 || len <= 0 || c0 + len > c)
        throw DataError("slice_cols: range [" + std::to_string(c0) + "," + std::to_string(c0 + len) +
                        ") out of " + std::to_string(c) + " columns");
    Tensor out = Tensor::zeros({r, len});
    for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < len; ++j) (*out.data)[i * len + j] = (*x.data)[i * c + c0 + j];
    if (should_record({&x})) {
        out.set_requires_grad(true);
        out.node = make_node({&x}, [gx = grad_of(x), go = out.grad, r, c, c0, len] {
            if (gx)
                for (int64_t i = 0; i < r; ++i)
                    for (int64_t j = 0; j < len; ++j) (*gx)[i * c + c0 + j] += (*go)[i * len + j];
        });
    }
    return out;
}

Tensor concat_cols(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw DataError("concat_cols: empty input");
    const int64_t r = xs[0].dim(0);
    int64_t total = 0;
    for (const Tensor& t : xs) {
        if (t.rank() != 2 || t.dim(0) != r)
            throw DataError("concat_cols: row mismatch " + t.shape_str());
        total += t.dim(1);
    }
    Tensor out = Tensor::zeros({r, total});
    int64_t off = 0;
    for (const Tensor& t : xs) {
        const int64_t c = t.dim(1);
        for (int64_t i = 0; i < r; ++i)
            for (int64_t j = 0; j < c; ++j) (*out.data)[i * total + off + j] = (*t.data)[i * c + j];
        off += c;
    }
    bool rec = false;
    for (const Tensor& t : xs) rec = rec || (grad_enabled() && t.requires_grad);
    if (rec) {
        out.set_requires_grad(true);
        auto node = std::make_shared<Node>();
        std::vector<std::pair<Buf, int64_t>> parts;  // grad buffer, width
        for (const Tensor& t : xs) {
            if (t.node) node->parents.push_back(t.node);
            parts.emplace_back(grad_of(t), t.dim(1));
        }
        node->backward = [parts, go = out.grad, r, total] {
            int64_t off2 = 0;
            for (const auto& [g, c] : parts) {
                if (g)
                    for (int64_t i = 0; i < r; ++i)
                        for (int64_t j = 0; j < c; ++j) (*g)[i * c + j] += (*go)[i * total + off2 + j];
                off2 += c;
            }
        };
        out.node = node;
    }
    return out;
}

Tensor pad_cols_left(const Tensor& x, int64_t p) {
    if (x.rank() != 2) throw DataError("pad_cols_left: expected rank-2, got " + x.shape_str());
    if (p < 0) throw DataError("pad_cols_left: negative padding");
    const int64_t r = x.dim(0), c = x.dim(1);
    Tensor out = Tensor::zeros({r, c + p});
    for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < c; ++j) (*out.data)[i * (c + p) + p + j] = (*x.data)[i * c + j];
    if (should_record({&x})) {
        out.set_requires_grad(true);
        out.node = make_node({&x}, [gx = grad_of(x), go = out.grad, r, c, p] {
            if (gx)
                for (int64_t i = 0; i < r; ++i)
                    for (int64_t j = 0; j < c; ++j) (*gx)[i * c + j] += (*go)[i * (c + p) + p + j];
        });
    }
    return out;
}

Tensor interp_cols(const Tensor& x, int64_t t_out) {
    if (x.rank() != 2) throw DataError("interp_cols: expected rank-2, got " + x.shape_str());
    if (t_out < 1) throw DataError("interp_cols: target length must be >= 1");
    const int64_t c = x.dim(0), t = x.dim(1);
    // sample positions and lerp weights are fixed by (t, t_out)
    std::vector<int64_t> j0(static_cast<size_t>(t_out));
    std::vector<double> w1(static_cast<size_t>(t_out));
    for (int64_t i = 0; i < t_out; ++i) {
        const double p = t_out == 1 ? 0.5 * static_cast<double>(t - 1)
                                    : static_cast<double>(i) * static_cast<double>(t - 1) /
                                          static_cast<double>(t_out - 1);
        int64_t j = static_cast<int64_t>(std::floor(p));
        if (j > t - 2) j = std::max<int64_t>(0, t - 2);
        j0[static_cast<size_t>(i)] = j;
        w1[static_cast<size_t>(i)] = t == 1 ? 0.0 : p - static_cast<double>(j);
    }
    Tensor out = Tensor::zeros({c, t_out});
    for (int64_t ch = 0; ch < c; ++ch) {
        const double* row = x.ptr() + ch * t;
        double* orow = out.ptr() + ch * t_out;
        for (int64_t i = 0; i < t_out; ++i) {
            const int64_t j = j0[static_cast<size_t>(i)];
            const double w = w1[static_cast<size_t>(i)];
            orow[i] = (1.0 - w) * row[j] + (t == 1 ? 0.0 : w * row[j + 1]);
        }
    }
    if (should_record({&x})) {
        out.set_requires_grad(true);
        out.node = make_node({&x}, [gx = grad_of(x), go = out.grad, j0, w1, c, t, t_out] {
            if (!gx) return;
            for (int64_t ch = 0; ch < c; ++ch) {
                double* grow = gx->data() + ch * t;
                const double* dorow = go->data() + ch * t_out;
                for (int64_t i = 0; i < t_out; ++i) {
                    const int64_t j = j0[static_cast<size_t>(i)];
                    const double w = w1[static_cast<size_t>(i)];
                    grow[j] += (1.0 - w) * dorow[i];
                    if (t > 1) grow[j + 1] += w * dorow[i];
                }
            }
        });
    }
    return out;
}

Tensor mean_pool_rows(const Tensor& x, int64_t window) {
    if (x.rank() != 2) throw DataError("mean_pool_rows: expected rank-2, got " + x.shape_str());
    const int64_t t = x.dim(0), d = x.dim(1);
    if (window <= 0 || t % window != 0)
        throw DataError("mean_pool_rows: rows " + std::to_string(t) + " not divisible by window " +
                        std::to_string(window));
    const int64_t to = t / window;
    Tensor out = Tensor::zeros({to, d});
    const double inv = 1.0 / static_cast<double>(window);
    for (int64_t i = 0; i < to; ++i)
        for (int64_t w = 0; w < window; ++w)
            for (int64_t j = 0; j < d; ++j)
                (*out.data)[i * d + j] += (*x.data)[(i * window + w) * d + j] * inv;
    if (should_record({&x})) {
        out.set_requires_grad(true);
        out.node = make_node({&x}, [gx = grad_of(x), go = out.grad, to, d, window, inv] {
            if (gx)
                for (int64_t i = 0; i < to; ++i)
                    for (int64_t w = 0; w < window; ++w)
                        for (int64_t j = 0; j < d; ++j)
                            (*gx)[(i * window + w) * d + j] += (*go)[i * d + j] * inv;
        });
    }
    return out;
}

Tensor gather_rows(const Tensor& table, const std::vector<int64_t>& idx) {
    if (table.rank() != 2) throw DataError("gather_rows: expected rank-2 table, got " + table.shape_str());
    const int64_t r = table.dim(0), d = table.dim(1);
    for (int64_t i : idx)
        if (i < 0 || i >= r)
            throw DataError("gather_rows: index " + std::to_string(i) + " out of [0," + std::to_string(r) + ")");
    const int64_t n = static_cast<int64_t>(idx.size());
    Tensor out = Tensor::zeros({n, d});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < d; ++j) (*out.data)[i * d + j] = (*table.data)[idx[static_cast<size_t>(i)] * d + j];
    if (should_record({&table})) {
        out.set_requires_grad(true);
        out.node = make_node({&table}, [gt = grad_of(table), go = out.grad, idx, d, n] {
            if (gt)
                for (int64_t i = 0; i < n; ++i)
                    for (int64_t j = 0; j < d; ++j)
                        (*gt)[idx[static_cast<size_t>(i)] * d + j] += (*go)[i * d + j];
        });
    }
    return out;
}

Tensor nct_to_rows(const Tensor& x) {
    const bool batched = x.rank() == 3;
    if (!batched && x.rank() != 2) throw DataError("nct_to_rows: expected rank-2/3, got " + x.shape_str());
    const int64_t n = batched ? x.dim(0) : 1;
    const int64_t c = batched ? x.dim(1) : x.dim(0);
    const int64_t t = batched ? x.dim(2) : x.dim(1);
    Tensor out = Tensor::zeros({n * t, c});
    for (int64_t b = 0; b < n; ++b)
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t s = 0; s < t; ++s)
                (*out.data)[(b * t + s) * c + ch] = (*x.data)[(b * c + ch) * t + s];
    if (should_record({&x})) {
        out.set_requires_grad(true);
        out.node = make_node({&x}, [gx = grad_of(x), go = out.grad, n, c, t] {
            if (gx)
                for (int64_t b = 0; b < n; ++b)
                    for (int64_t ch = 0; ch < c; ++ch)
                        for (int64_t s = 0; s < t; ++s)
                            (*gx)[(b * c + ch) * t + s] += (*go)[(b * t + s) * c + ch];
        });
    }
    return out;
}

Tensor rows_to_nct(const Tensor& x, int64_t n, int64_t t) {
    if (x.rank() != 2 || x.dim(0) != n * t)
        throw DataError("rows_to_nct: expected [" + std::to_string(n * t) + ",C], got " + x.shape_str());
    const int64_t c = x.dim(1);
    Tensor out = n == 1 ? Tensor::zeros({c, t}) : Tensor::zeros({n, c, t});
    for (int64_t b = 0; b < n; ++b)
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t s = 0; s < t; ++s)
                (*out.data)[(b * c + ch) * t + s] = (*x.data)[(b * t + s) * c + ch];
    if (should_record({&x})) {
        out.set_requires_grad(true);
        out.node = make_node({&x}, [gx = grad_of(x), go = out.grad, n, c, t] {
            if (gx)
                for (int64_t b = 0; b < n; ++b)
                    for (int64_t ch = 0; ch < c; ++ch)
                        for (int64_t s = 0; s < t; ++s)
                            (*gx)[(b * t + s) * c + ch] += (*go)[(b * c + ch) * t + s];
        });
    }
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw DataError("matmul: expected rank-2 inputs, got " + a.shape_str() + " and " + b.shape_str());
    if (a.dim(1) != b.dim(0))
        throw DataError("matmul: inner dims differ, " + a.shape_str() + " x " + b.shape_str());
    const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out = Tensor::zeros({m, n});
    Map(out.ptr(), m, n).noalias() = ConstMap(a.ptr(), m, k) * ConstMap(b.ptr(), k, n);
    if (should_record({&a, &b})) {
        out.set_requires_grad(true);
        out.node = make_node(
            {&a, &b},
            [ga = grad_of(a), gb = grad_of(b), ad = a.data, bd = b.data, go = out.grad, m, k, n] {
                ConstMap dout(go->data(), m, n);
                if (ga) Map(ga->data(), m, k).noalias() += dout * ConstMap(bd->data(), k, n).transpose();
                if (gb) Map(gb->data(), k, n).noalias() += ConstMap(ad->data(), m, k).transpose() * dout;
            });
    }
    return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.rank() != 2 || w.rank() != 2)
        throw DataError("linear: expected rank-2 input/weight, got " + x.shape_str() + " and " + w.shape_str());
    const int64_t r = x.dim(0), din = x.dim(1), dout = w.dim(0);
    if (w.dim(1) != din)
        throw DataError("linear: weight in-dim " + std::to_string(w.dim(1)) + " != input dim " +
                        std::to_string(din));
    if (b.defined() && (b.rank() != 1 || b.dim(0) != dout))
        throw DataError("linear: bias shape " + b.shape_str() + " != [" + std::to_string(dout) + "]");
    Tensor out = Tensor::zeros({r, dout});
    Map om(out.ptr(), r, dout);
    om.noalias() = ConstMap(x.ptr(), r, din) * ConstMap(w.ptr(), dout, din).transpose();
    if (b.defined())
        om.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.ptr(), dout);
    if (should_record({&x, &w, &b})) {
        out.set_requires_grad(true);
        out.node = make_node(
            {&x, &w, &b},
            [gx = grad_of(x), gw = grad_of(w), gb = b.defined() ? grad_of(b) : nullptr, xd = x.data,
             wd = w.data, go = out.grad, r, din, dout] {
                ConstMap dy(go->data(), r, dout);
                if (gx) Map(gx->data(), r, din).noalias() += dy * ConstMap(wd->data(), dout, din);
                if (gw) Map(gw->data(), dout, din).noalias() += dy.transpose() * ConstMap(xd->data(), r, din);
                if (gb) Eigen::Map<Eigen::RowVectorXd>(gb->data(), dout) += dy.colwise().sum();
            });
    }
    return out;
}

namespace {

struct ConvDims {
    int64_t n, ci, t;
    bool batched;
};

ConvDims conv_input_dims(const char* op, const Tensor& x) {
    if (x.rank() == 2) return {1, x.dim(0), x.dim(1), false};
    if (x.rank() == 3) return {x.dim(0), x.dim(1), x.dim(2), true};
    throw DataError(std::string(op) + ": expected rank-2/3 input, got " + x.shape_str());
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b,
              int64_t stride, int64_t pad, int64_t dilation) {
    const ConvDims in = conv_input_dims("conv1d", x);
    if (w.rank() != 3)
        throw DataError("conv1d: expected kernel [C_out,C_in,K], got " + w.shape_str());
    const int64_t co = w.dim(0), k = w.dim(2);
    if (w.dim(1) != in.ci)
        throw DataError("conv1d: kernel C_in " + std::to_string(w.dim(1)) + " != input channels " +
                        std::to_string(in.ci));
    if (stride < 1) throw DataError("conv1d: stride must be >= 1");
    if (pad < 0 || dilation < 1) throw DataError("conv1d: bad padding/dilation");
    const int64_t span = dilation * (k - 1) + 1;
    if (in.t + 2 * pad < span)
        throw DataError("conv1d: input length " + std::to_string(in.t) + " + 2*pad " + std::to_string(pad) +
                        " shorter than kernel span " + std::to_string(span));
    if (b.defined() && (b.rank() != 1 || b.dim(0) != co))
        throw DataError("conv1d: bias shape " + b.shape_str() + " != [" + std::to_string(co) + "]");
    const int64_t tout = (in.t + 2 * pad - span) / stride + 1;

    Tensor out = in.batched ? Tensor::zeros({in.n, co, tout}) : Tensor::zeros({co, tout});
    const double* xp = x.ptr();
    const double* wp = w.ptr();
    double* op = out.ptr();
    for (int64_t nb = 0; nb < in.n; ++nb) {
        for (int64_t oc = 0; oc < co; ++oc) {
            double* orow = op + (nb * co + oc) * tout;
            if (b.defined()) {
                const double bias = (*b.data)[oc];
                for (int64_t t = 0; t < tout; ++t) orow[t] = bias;
            }
            for (int64_t ic = 0; ic < in.ci; ++ic) {
                const double* xrow = xp + (nb * in.ci + ic) * in.t;
                const double* wrow = wp + (oc * in.ci + ic) * k;
                for (int64_t kk = 0; kk < k; ++kk) {
                    const double wv = wrow[kk];
                    if (wv == 0.0) continue;
                    const int64_t off = kk * dilation - pad;
                    for (int64_t t = 0; t < tout; ++t) {
                        const int64_t ti = t * stride + off;
                        if (ti >= 0 && ti < in.t) orow[t] += wv * xrow[ti];
                    }
                }
            }
        }
    }

    if (should_record({&x, &w, &b})) {
        out.set_requires_grad(true);
        out.node = make_node(
            {&x, &w, &b},
            [gx = grad_of(x), gw = grad_of(w), gb = b.defined() ? grad_of(b) : nullptr, xd = x.data,
             wd = w.data, go = out.grad, in, co, k, tout, stride, pad, dilation] {
                const double* xp2 = xd->data();
                const double* wp2 = wd->data();
                const double* gop = go->data();
                for (int64_t nb = 0; nb < in.n; ++nb) {
                    for (int64_t oc = 0; oc < co; ++oc) {
                        const double* grow = gop + (nb * co + oc) * tout;
                        if (gb) {
                            double s = 0.0;
                            for (int64_t t = 0; t < tout; ++t) s += grow[t];
                            (*gb)[oc] += s;
                        }
                        for (int64_t ic = 0; ic < in.ci; ++ic) {
                            const double* xrow = xp2 + (nb * in.ci + ic) * in.t;
                            const double* wrow = wp2 + (oc * in.ci + ic) * k;
                            double* gxrow = gx ? gx->data() + (nb * in.ci + ic) * in.t : nullptr;
                            double* gwrow = gw ? gw->data() + (oc * in.ci + ic) * k : nullptr;
                            for (int64_t kk = 0; kk < k; ++kk) {
                                const int64_t off = kk * dilation - pad;
                                double wsum = 0.0;
                                const double wv = wrow[kk];
                                for (int64_t t = 0; t < tout; ++t) {
                                    const int64_t ti = t * stride + off;
                                    if (ti < 0 || ti >= in.t) continue;
                                    if (gxrow) gxrow[ti] += grow[t] * wv;
                                    if (gwrow) wsum += grow[t] * xrow[ti];
                                }
                                if (gwrow) gwrow[kk] += wsum;
                            }
                        }
                    }
                }
            });
    }
    return out;
}

Tensor conv1d_transpose(const Tensor& x, const Tensor& w, const Tensor& b,
                        int64_t stride, int64_t pad) {
    const ConvDims in = conv_input_dims("conv1d_transpose", x);
    if (w.rank() != 3)
        throw DataError("conv1d_transpose: expected kernel [C_in,C_out,K], got " + w.shape_str());
    const int64_t co = w.dim(1), k = w.dim(2);
    if (w.dim(0) != in.ci)
        throw DataError("conv1d_transpose: kernel C_in " + std::to_string(w.dim(0)) +
                        " != input channels " + std::to_string(in.ci));
    if (stride < 1 || pad < 0) throw DataError("conv1d_transpose: bad stride/padding");
    const int64_t tout = (in.t - 1) * stride - 2 * pad + k;
    if (tout < 1) throw DataError("conv1d_transpose: output length would be " + std::to_string(tout));
    if (b.defined() && (b.rank() != 1 || b.dim(0) != co))
        throw DataError("conv1d_transpose: bias shape " + b.shape_str() + " != [" + std::to_string(co) + "]");

    Tensor out = in.batched ? Tensor::zeros({in.n, co, tout}) : Tensor::zeros({co, tout});
    const double* xp = x.ptr();
    const double* wp = w.ptr();
    double* op = out.ptr();
    if (b.defined()) {
        for (int64_t nb = 0; nb < in.n; ++nb)
            for (int64_t oc = 0; oc < co; ++oc) {
                double* orow = op + (nb * co + oc) * tout;
                const double bias = (*b.data)[oc];
                for (int64_t t = 0; t < tout; ++t) orow[t] += bias;
            }
    }
    for (int64_t nb = 0; nb < in.n; ++nb)
        for (int64_t ic = 0; ic < in.ci; ++ic) {
            const double* xrow = xp + (nb * in.ci + ic) * in.t;
            for (int64_t oc = 0; oc < co; ++oc) {
                const double* wrow = wp + (ic * co + oc) * k;
                double* orow = op + (nb * co + oc) * tout;
                for (int64_t t = 0; t < in.t; ++t) {
                    const double xv = xrow[t];
                    if (xv == 0.0) continue;
                    const int64_t base = t * stride - pad;
                    for (int64_t kk = 0; kk < k; ++kk) {
                        const int64_t to = base + kk;
                        if (to >= 0 && to < tout) orow[to] += xv * wrow[kk];
                    }
                }
            }
        }

    if (should_record({&x, &w, &b})) {
        out.set_requires_grad(true);
        out.node = make_node(
            {&x, &w, &b},
            [gx = grad_of(x), gw = grad_of(w), gb = b.defined() ? grad_of(b) : nullptr, xd = x.data,
             wd = w.data, go = out.grad, in, co, k, tout, stride, pad] {
                const double* xp2 = xd->data();
                const double* wp2 = wd->data();
                const double* gop = go->data();
                if (gb) {
                    for (int64_t nb = 0; nb < in.n; ++nb)
                        for (int64_t oc = 0; oc < co; ++oc) {
                            const double* grow = gop + (nb * co + oc) * tout;
                            double s = 0.0;
                            for (int64_t t = 0; t < tout; ++t) s += grow[t];
                            (*gb)[oc] += s;
                        }
                }
                for (int64_t nb = 0; nb < in.n; ++nb)
                    for (int64_t ic = 0; ic < in.ci; ++ic) {
                        const double* xrow = xp2 + (nb * in.ci + ic) * in.t;
                        double* gxrow = gx ? gx->data() + (nb * in.ci + ic) * in.t : nullptr;
                        for (int64_t oc = 0; oc < co; ++oc) {
                            const double* wrow = wp2 + (ic * co + oc) * k;
                            double* gwrow = gw ? gw->data() + (ic * co + oc) * k : nullptr;
                            const double* grow = gop + (nb * co + oc) * tout;
                            for (int64_t t = 0; t < in.t; ++t) {
                                const int64_t base = t * stride - pad;
                                double acc = 0.0;
                                for (int64_t kk = 0; kk < k; ++kk) {
                                    const int64_t to = base + kk;
                                    if (to < 0 || to >= tout) continue;
                                    acc += grow[to] * wrow[kk];
                                    if (gwrow) gwrow[kk] += grow[to] * xrow[t];
                                }
                                if (gxrow) gxrow[t] += acc;
                            }
                        }
                    }
            });
    }
    return out;
}

Tensor batchnorm1d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   Tensor& running_mean, Tensor& running_var,
                   bool training, double momentum, double eps) {
    const ConvDims in = conv_input_dims("batchnorm1d", x);
    const int64_t c = in.ci;
    auto check_vec = [&](const Tensor& v, const char* what) {
        if (v.rank() != 1 || v.dim(0) != c)
            throw DataError(std::string("batchnorm1d: ") + what + " shape " + v.shape_str() + " != [" +
                            std::to_string(c) + "]");
    };
    check_vec(gamma, "gamma");
    check_vec(beta, "beta");
    check_vec(running_mean, "running_mean");
    check_vec(running_var, "running_var");

    const int64_t m = in.n * in.t;
    Tensor out = Tensor::zeros(x.shape);
    auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(x.numel()));
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(c));

    for (int64_t ch = 0; ch < c; ++ch) {
        double mean, var;
        if (training) {
            double s = 0.0;
            for (int64_t nb = 0; nb < in.n; ++nb) {
                const double* row = x.ptr() + (nb * c + ch) * in.t;
                for (int64_t t = 0; t < in.t; ++t) s += row[t];
            }
            mean = s / static_cast<double>(m);
            double v = 0.0;
            for (int64_t nb = 0; nb < in.n; ++nb) {
                const double* row = x.ptr() + (nb * c + ch) * in.t;
                for (int64_t t = 0; t < in.t; ++t) {
                    const double d = row[t] - mean;
                    v += d * d;
                }
            }
            var = v / static_cast<double>(m);
            (*running_mean.data)[ch] = (1.0 - momentum) * (*running_mean.data)[ch] + momentum * mean;
            (*running_var.data)[ch] = (1.0 - momentum) * (*running_var.data)[ch] + momentum * var;
        } else {
            mean = (*running_mean.data)[ch];
            var = (*running_var.data)[ch];
        }
        const double istd = 1.0 / std::sqrt(var + eps);
        (*inv_std)[ch] = istd;
        const double g = (*gamma.data)[ch], bt = (*beta.data)[ch];
        for (int64_t nb = 0; nb < in.n; ++nb) {
            const double* row = x.ptr() + (nb * c + ch) * in.t;
            double* orow = out.ptr() + (nb * c + ch) * in.t;
            double* hrow = xhat->data() + (nb * c + ch) * in.t;
            for (int64_t t = 0; t < in.t; ++t) {
                const double h = (row[t] - mean) * istd;
                hrow[t] = h;
                orow[t] = g * h + bt;
            }
        }
    }

    if (should_record({&x, &gamma, &beta})) {
        out.set_requires_grad(true);
        out.node = make_node(
            {&x, &gamma, &beta},
            [gx = grad_of(x), gg = grad_of(gamma), gb = grad_of(beta), gd = gamma.data, go = out.grad,
             xhat, inv_std, in, c, m, training] {
                for (int64_t ch = 0; ch < c; ++ch) {
                    double dsum = 0.0, dhsum = 0.0;
                    for (int64_t nb = 0; nb < in.n; ++nb) {
                        const double* grow = go->data() + (nb * c + ch) * in.t;
                        const double* hrow = xhat->data() + (nb * c + ch) * in.t;
                        for (int64_t t = 0; t < in.t; ++t) {
                            dsum += grow[t];
                            dhsum += grow[t] * hrow[t];
                        }
                    }
                    if (gb) (*gb)[ch] += dsum;
                    if (gg) (*gg)[ch] += dhsum;
                    if (gx) {
                        const double g = (*gd)[ch] * (*inv_std)[ch];
                        const double mean_d = dsum / static_cast<double>(m);
                        const double mean_dh = dhsum / static_cast<double>(m);
                        for (int64_t nb = 0; nb < in.n; ++nb) {
                            const double* grow = go->data() + (nb * c + ch) * in.t;
                            const double* hrow = xhat->data() + (nb * c + ch) * in.t;
                            double* gxrow = gx->data() + (nb * c + ch) * in.t;
                            for (int64_t t = 0; t < in.t; ++t) {
                                if (training)
                                    gxrow[t] += g * (grow[t] - mean_d - hrow[t] * mean_dh);
                                else
                                    gxrow[t] += g * grow[t];
                            }
                        }
                    }
                }
            });
    }
    return out;
}

Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    if (x.rank() != 2) throw DataError("layernorm: expected rank-2, got " + x.shape_str());
    const int64_t r = x.dim(0), d = x.dim(1);
    if (gamma.rank() != 1 || gamma.dim(0) != d || beta.rank() != 1 || beta.dim(0) != d)
        throw DataError("layernorm: gamma/beta must be [" + std::to_string(d) + "]");
    Tensor out = Tensor::zeros(x.shape);
    auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(x.numel()));
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(r));
    for (int64_t i = 0; i < r; ++i) {
        const double* row = x.ptr() + i * d;
        double mean = 0.0;
        for (int64_t j = 0; j < d; ++j) mean += row[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (int64_t j = 0; j < d; ++j) {
            const double dv = row[j] - mean;
            var += dv * dv;
        }
        var /= static_cast<double>(d);
        const double istd = 1.0 / std::sqrt(var + eps);
        (*inv_std)[i] = istd;
        for (int64_t j = 0; j < d; ++j) {
            const double h = (row[j] - mean) * istd;
            (*xhat)[i * d + j] = h;
            (*out.data)[i * d + j] = (*gamma.data)[j] * h + (*beta.data)[j];
        }
    }
    if (should_record({&x, &gamma, &beta})) {
        out.set_requires_grad(true);
        out.node = make_node(
            {&x, &gamma, &beta},
            [gx = grad_of(x), gg = grad_of(gamma), gb = grad_of(beta), gd = gamma.data, go = out.grad,
             xhat, inv_std, r, d] {
                for (int64_t i = 0; i < r; ++i) {
                    const double* grow = go->data() + i * d;
                    const double* hrow = xhat->data() + i * d;
                    double mean_dh = 0.0, mean_dhh = 0.0;
                    for (int64_t j = 0; j < d; ++j) {
                        const double dh = grow[j] * (*gd)[j];
                        mean_dh += dh;
                        mean_dhh += dh * hrow[j];
                    }
                    mean_dh /= static_cast<double>(d);
                    mean_dhh /= static_cast<double>(d);
                    if (gx) {
                        double* gxrow = gx->data() + i * d;
                        for (int64_t j = 0; j < d; ++j) {
                            const double dh = grow[j] * (*gd)[j];
                            gxrow[j] += (dh - mean_dh - hrow[j] * mean_dhh) * (*inv_std)[i];
                        }
                    }
                    if (gg || gb)
                        for (int64_t j = 0; j < d; ++j) {
                            if (gg) (*gg)[j] += grow[j] * hrow[j];
                            if (gb) (*gb)[j] += grow[j];
                        }
                }
            });
    }
    return out;
}

Tensor softmax_rows(const Tensor& x) {
    if (x.rank() != 2) throw DataError("softmax_rows: expected rank-2, got " + x.shape_str());
    const int64_t r = x.dim(0), c = x.dim(1);
    Tensor out = Tensor::zeros(x.shape);
    for (int64_t i = 0; i < r; ++i) {
        const double* row = x.ptr() + i * c;
        double* orow = out.ptr() + i * c;
        double mx = row[0];
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double s = 0.0;
        for (int64_t j = 0; j < c; ++j) {
            orow[j] = std::exp(row[j] - mx);
            s += orow[j];
        }
        const double inv = 1.0 / s;
        for (int64_t j = 0; j < c; ++j) orow[j] *= inv;
    }
    if (should_record({&x})) {
        out.set_requires_grad(true);
        out.node = make_node({&x}, [gx = grad_of(x), od = out.data, go = out.grad, r, c] {
            if (!gx) return;
            for (int64_t i = 0; i < r; ++i) {
                const double* y = od->data() + i * c;
                const double* dy = go->data() + i * c;
                double dot = 0.0;
                for (int64_t j = 0; j < c; ++j) dot += dy[j] * y[j];
                double* g = gx->data() + i * c;
                for (int64_t j = 0; j < c; ++j) g[j] += (dy[j] - dot) * y[j];
            }
        });
    }
    return out;
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int64_t heads, bool causal) {
    if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2)
        throw DataError("attention: expected rank-2 q/k/v");
    const int64_t d = q.dim(1);
    if (k.dim(1) != d || v.dim(1) != d)
        throw DataError("attention: feature dims differ: q " + q.shape_str() + " k " + k.shape_str() +
                        " v " + v.shape_str());
    if (k.dim(0) != v.dim(0))
        throw DataError("attention: key rows " + std::to_string(k.dim(0)) + " != value rows " +
                        std::to_string(v.dim(0)));
    if (heads < 1 || d % heads != 0)
        throw ConfigError("attention: dim " + std::to_string(d) + " not divisible by heads " +
                          std::to_string(heads));
    const int64_t dh = d / heads;
    const int64_t tq = q.dim(0), tk = k.dim(0);
    const double sc = 1.0 / std::sqrt(static_cast<double>(dh));

    Tensor mask;
    if (causal) {
        mask = Tensor::zeros({tq, tk});
        for (int64_t i = 0; i < tq; ++i)
            for (int64_t j = 0; j < tk; ++j)
                if (j > i) (*mask.data)[i * tk + j] = -1e30;
    }

    std::vector<Tensor> outs;
    outs.reserve(static_cast<size_t>(heads));
    for (int64_t h = 0; h < heads; ++h) {
        Tensor qh = slice_cols(q, h * dh, dh);
        Tensor kh = slice_cols(k, h * dh, dh);
        Tensor vh = slice_cols(v, h * dh, dh);
        Tensor scores = scale(matmul(qh, transpose2d(kh)), sc);
        if (causal) scores = add(scores, mask);
        outs.push_back(matmul(softmax_rows(scores), vh));
    }
    return heads == 1 ? outs[0] : concat_cols(outs);
}

Tensor sum_all(const Tensor& x) {
    Tensor out = Tensor::scalar(0.0);
    double s = 0.0;
    for (double v : *x.data) s += v;
    (*out.data)[0] = s;
    if (should_record({&x})) {
        out.set_requires_grad(true);
        out.node = make_node({&x}, [gx = grad_of(x), go = out.grad, n = x.numel()] {
            if (gx) {
                const double g = (*go)[0];
                for (int64_t i = 0; i < n; ++i) (*gx)[i] += g;
            }
        });
    }
    return out;
}

Tensor mean_all(const Tensor& x) {
    const double inv = 1.0 / static_cast<double>(x.numel());
    Tensor out = Tensor::scalar(0.0);
    double s = 0.0;
    for (double v : *x.data) s += v;
    (*out.data)[0] = s * inv;
    if (should_record({&x})) {
        out.set_requires_grad(true);
        out.node = make_node({&x}, [gx = grad_of(x), go = out.grad, n = x.numel(), inv] {
            if (gx) {
                const double g = (*go)[0] * inv;
                for (int64_t i = 0; i < n; ++i) (*gx)[i] += g;
            }
        });
    }
    return out;
}

Tensor mse(const Tensor& a, const Tensor& b) {
    check_same_shape("mse", a, b);
    const int64_t n = a.numel();
    const double inv = 1.0 / static_cast<double>(n);
    Tensor out = Tensor::scalar(0.0);
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double d = (*a.data)[i] - (*b.data)[i];
        s += d * d;
    }
    (*out.data)[0] = s * inv;
    if (should_record({&a, &b})) {
        out.set_requires_grad(true);
        out.node = make_node({&a, &b},
                             [ga = grad_of(a), gb = grad_of(b), ad = a.data, bd = b.data, go = out.grad, n, inv] {
                                 const double g = (*go)[0] * 2.0 * inv;
                                 for (int64_t i = 0; i < n; ++i) {
                                     const double d = ((*ad)[i] - (*bd)[i]) * g;
                                     if (ga) (*ga)[i] += d;
                                     if (gb) (*gb)[i] -= d;
                                 }
                             });
    }
    return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int64_t>& targets) {
    if (logits.rank() != 2) throw DataError("cross_entropy: expected rank-2 logits, got " + logits.shape_str());
    const int64_t n = logits.dim(0), v = logits.dim(1);
    if (static_cast<int64_t>(targets.size()) != n)
        throw DataError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                        std::to_string(n) + " rows");
    for (int64_t t : targets)
        if (t < 0 || t >= v)
            throw DataError("cross_entropy: target index " + std::to_string(t) + " out of [0," +
                            std::to_string(v) + ")");
    Tensor out = Tensor::scalar(0.0);
    auto probs = std::make_shared<std::vector<double>>(static_cast<size_t>(n * v));
    double loss = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double* row = logits.ptr() + i * v;
        double mx = row[0];
        for (int64_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
        double s = 0.0;
        for (int64_t j = 0; j < v; ++j) s += std::exp(row[j] - mx);
        const double lse = mx + std::log(s);
        loss += lse - row[targets[static_cast<size_t>(i)]];
        for (int64_t j = 0; j < v; ++j) (*probs)[i * v + j] = std::exp(row[j] - lse);
    }
    (*out.data)[0] = loss / static_cast<double>(n);
    if (should_record({&logits})) {
        out.set_requires_grad(true);
        out.node = make_node({&logits}, [gl = grad_of(logits), go = out.grad, probs, targets, n, v] {
            if (!gl) return;
            const double g = (*go)[0] / static_cast<double>(n);
            for (int64_t i = 0; i < n; ++i) {
                for (int64_t j = 0; j < v; ++j) (*gl)[i * v + j] += g * (*probs)[i * v + j];
                (*gl)[i * v + targets[static_cast<size_t>(i)]] -= g;
            }
        });
    }
    return out;
}

Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets) {
    const int64_t n = logits.numel();
    if (static_cast<int64_t>(targets.size()) != n)
        throw DataError("bce_with_logits: " + std::to_string(targets.size()) + " targets for " +
                        std::to_string(n) + " logits");
    Tensor out = Tensor::scalar(0.0);
    double loss = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double z = (*logits.data)[i];
        const double y = targets[static_cast<size_t>(i)];
        loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    }
    (*out.data)[0] = loss / static_cast<double>(n);
    if (should_record({&logits})) {
        out.set_requires_grad(true);
        out.node = make_node({&logits}, [gl = grad_of(logits), ld = logits.data, go = out.grad, targets, n] {
            if (!gl) return;
            const double g = (*go)[0] / static_cast<double>(n);
            for (int64_t i = 0; i < n; ++i) {
                const double z = (*ld)[i];
                const double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
                (*gl)[i] += g * (p - targets[static_cast<size_t>(i)]);
            }
        });
    }
    return out;
}

}  // namespace t3m::nn
