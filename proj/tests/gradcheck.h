#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "core/tensor.h"

// Central finite-difference oracle, independent of the reverse-mode path it
// checks. f re-runs the whole forward from the current parameter values.
namespace gradcheck {

struct Result {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    std::string where;
};

inline Result check(std::vector<t3m::nn::Tensor*> params,
                    const std::function<t3m::nn::Tensor()>& f,
                    double h = 1e-5) {
    using t3m::nn::backward;
    for (auto* p : params) {
        p->set_requires_grad(true);
        p->zero_grad();
    }
    t3m::nn::Tensor loss = f();
    backward(loss);

    Result res;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        t3m::nn::Tensor& p = *params[pi];
        for (size_t i = 0; i < p.data->size(); ++i) {
            const double orig = (*p.data)[i];
            (*p.data)[i] = orig + h;
            const double lp = f().item();
            (*p.data)[i] = orig - h;
            const double lm = f().item();
            (*p.data)[i] = orig;
            const double fd = (lp - lm) / (2.0 * h);
            const double an = (*p.grad)[i];
            const double abserr = std::abs(fd - an);
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-3});
            const double relerr = abserr / denom;
            if (relerr > res.max_rel_err) {
                res.max_rel_err = relerr;
                res.where = "param " + std::to_string(pi) + " elem " + std::to_string(i);
            }
            res.max_abs_err = std::max(res.max_abs_err, abserr);
        }
    }
    return res;
}

}  // namespace gradcheck
