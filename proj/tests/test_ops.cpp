#include <doctest.h>

#include <cmath>
#include <thread>

#include "core/modules.h"
#include "core/ops.h"
#include "core/optim.h"
#include "core/rng.h"

using namespace t3m;
using namespace t3m::nn;

TEST_CASE("conv1d hand-evaluated values") {
    // [1,2,3] * [1,0,-1], stride 1, pad 1 -> [-2,-2,2]
    Tensor x = Tensor::from({1, 3}, {1, 2, 3});
    Tensor w = Tensor::from({1, 1, 3}, {1, 0, -1});
    Tensor out = conv1d(x, w, Tensor{}, 1, 1);
    REQUIRE(out.shape == std::vector<int64_t>{1, 3});
    CHECK((*out.data)[0] == doctest::Approx(-2.0));
    CHECK((*out.data)[1] == doctest::Approx(-2.0));
    CHECK((*out.data)[2] == doctest::Approx(2.0));
}

TEST_CASE("conv1d identity kernel") {
    Rng rng(7);
    Tensor x = Tensor::zeros({2, 5});
    for (double& v : *x.data) v = rng.normal();
    Tensor w = Tensor::zeros({2, 2, 1});
    (*w.data)[0 * 2 + 0] = 1.0;  // w[0,0,0]
    (*w.data)[1 * 2 + 1] = 1.0;  // w[1,1,0]
    Tensor out = conv1d(x, w, Tensor{}, 1, 0);
    CHECK(out.shape == x.shape);
    for (size_t i = 0; i < x.data->size(); ++i) CHECK((*out.data)[i] == (*x.data)[i]);
}

TEST_CASE("conv1d output length arithmetic") {
    // length 4, K=4, stride 2, pad 1 -> T_out = 2
    Tensor x = Tensor::zeros({1, 4});
    Tensor w = Tensor::zeros({1, 1, 4});
    Tensor out = conv1d(x, w, Tensor{}, 2, 1);
    CHECK(out.dim(1) == 2);

    // stride 1, pad (K-1)/2, odd K preserves length
    for (int64_t k : {1, 3, 5}) {
        Tensor w2 = Tensor::zeros({1, 1, k});
        Tensor out2 = conv1d(x, w2, Tensor{}, 1, (k - 1) / 2);
        CHECK(out2.dim(1) == 4);
    }
}

TEST_CASE("conv1d dimension errors name the offending axes") {
    Tensor x = Tensor::zeros({3, 4});
    Tensor w = Tensor::zeros({1, 2, 3});
    CHECK_THROWS_WITH_AS(conv1d(x, w, Tensor{}, 1, 1),
                         doctest::Contains("C_in 2 != input channels 3"), DataError);
    Tensor w2 = Tensor::zeros({1, 3, 8});
    CHECK_THROWS_AS(conv1d(x, w2, Tensor{}, 1, 1), DataError);
}

TEST_CASE("conv1d_transpose doubles length with k=4 s=2 p=1") {
    Rng rng(8);
    Tensor x = Tensor::zeros({2, 6});
    for (double& v : *x.data) v = rng.normal();
    Tensor w = Tensor::zeros({2, 3, 4});
    for (double& v : *w.data) v = rng.normal();
    Tensor out = conv1d_transpose(x, w, Tensor{}, 2, 1);
    CHECK(out.shape == std::vector<int64_t>{3, 12});
}

TEST_CASE("attention: single key row returns the value row") {
    Tensor q = Tensor::from({3, 2}, {0.3, -1.0, 2.0, 0.1, 0.0, 0.0});
    Tensor k = Tensor::from({1, 2}, {0.5, 0.7});
    Tensor v = Tensor::from({1, 2}, {4.0, -3.0});
    Tensor out = attention(q, k, v, 1, false);
    for (int64_t i = 0; i < 3; ++i) {
        CHECK((*out.data)[i * 2 + 0] == doctest::Approx(4.0));
        CHECK((*out.data)[i * 2 + 1] == doctest::Approx(-3.0));
    }
}

TEST_CASE("attention: identical queries give identical output rows") {
    Rng rng(9);
    Tensor q = Tensor::zeros({4, 6});
    for (int64_t j = 0; j < 6; ++j) {
        const double v = rng.normal();
        for (int64_t i = 0; i < 4; ++i) (*q.data)[i * 6 + j] = v;
    }
    Tensor k = Tensor::zeros({5, 6});
    Tensor v = Tensor::zeros({5, 6});
    for (double& x : *k.data) x = rng.normal();
    for (double& x : *v.data) x = rng.normal();
    Tensor out = attention(q, k, v, 2, false);
    for (int64_t i = 1; i < 4; ++i)
        for (int64_t j = 0; j < 6; ++j)
            CHECK((*out.data)[i * 6 + j] == (*out.data)[j]);
}

TEST_CASE("attention: two equal logits average the values") {
    Tensor q = Tensor::from({1, 1}, {0.0});  // q.k = 0 for both keys
    Tensor k = Tensor::from({2, 1}, {1.0, -1.0});
    Tensor v = Tensor::from({2, 1}, {3.0, 5.0});
    Tensor out = attention(q, k, v, 1, false);
    CHECK((*out.data)[0] == doctest::Approx(4.0));
}

TEST_CASE("attention: output is convex combination of value rows") {
    Rng rng(10);
    Tensor q = Tensor::zeros({3, 4});
    Tensor k = Tensor::zeros({5, 4});
    Tensor v = Tensor::zeros({5, 4});
    for (double& x : *q.data) x = rng.normal();
    for (double& x : *k.data) x = rng.normal();
    for (double& x : *v.data) x = rng.uniform(0.0, 1.0);
    Tensor out = attention(q, k, v, 1, false);
    double vmin = 1e30, vmax = -1e30;
    for (double x : *v.data) {
        vmin = std::min(vmin, x);
        vmax = std::max(vmax, x);
    }
    for (double x : *out.data) {
        CHECK(x >= vmin - 1e-12);
        CHECK(x <= vmax + 1e-12);
    }
}

TEST_CASE("attention: heads must divide dim") {
    Tensor q = Tensor::zeros({2, 6});
    CHECK_THROWS_AS(attention(q, q, q, 4, false), ConfigError);
}

TEST_CASE("softmax rows sum to one within 1e-12") {
    Rng rng(11);
    Tensor x = Tensor::zeros({8, 13});
    for (double& v : *x.data) v = rng.normal(0.0, 5.0);
    Tensor y = softmax_rows(x);
    for (int64_t i = 0; i < 8; ++i) {
        double s = 0.0;
        for (int64_t j = 0; j < 13; ++j) s += (*y.data)[i * 13 + j];
        CHECK(std::abs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("backward: sum gives all-ones grad; mse analytic value") {
    Tensor p = Tensor::zeros({2, 3}, true);
    Rng rng(12);
    for (double& v : *p.data) v = rng.normal();
    p.zero_grad();
    backward(sum_all(p));
    for (double g : *p.grad) CHECK(g == doctest::Approx(1.0));

    Tensor q = Tensor::from({1}, {2.0}, true);
    q.zero_grad();
    backward(mse(q, Tensor::from({1}, {0.0})));
    CHECK((*q.grad)[0] == doctest::Approx(4.0));
}

TEST_CASE("backward on non-scalar is a usage error") {
    Tensor p = Tensor::zeros({2, 2}, true);
    CHECK_THROWS_AS(backward(add(p, p)), UsageError);
}

TEST_CASE("backward: off-path parameters keep zero grad") {
    Tensor a = Tensor::zeros({3}, true);
    Tensor b = Tensor::zeros({3}, true);
    a.zero_grad();
    b.zero_grad();
    backward(sum_all(a));
    for (double g : *b.grad) CHECK(g == 0.0);
}

TEST_CASE("losses: mse identity and cross-entropy uniform") {
    Rng rng(13);
    Tensor x = Tensor::zeros({4, 4});
    for (double& v : *x.data) v = rng.normal();
    CHECK(mse(x, x).item() == 0.0);

    Tensor logits = Tensor::full({3, 4}, 0.7);
    CHECK(cross_entropy(logits, {0, 1, 3}).item() == doctest::Approx(std::log(4.0)));
}

TEST_CASE("cross-entropy decreases as the target logit rises") {
    Tensor base = Tensor::from({1, 4}, {0.2, -0.3, 0.5, 0.1});
    double prev = 1e30;
    for (double bump = -2.0; bump <= 2.0; bump += 0.25) {
        Tensor l = Tensor::from({1, 4}, {0.2, -0.3 + bump, 0.5, 0.1});
        const double v = cross_entropy(l, {1}).item();
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("cross-entropy rejects out-of-range targets") {
    Tensor logits = Tensor::zeros({2, 3});
    CHECK_THROWS_AS(cross_entropy(logits, {0, 3}), DataError);
}

TEST_CASE("adam first step moves by about lr") {
    Tensor p = Tensor::from({1}, {1.0}, true);
    AdamState st;
    st.lr = 0.1;
    adam_step(p, {1.0}, st);
    CHECK((*p.data)[0] == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(st.step_count == 1);
}

TEST_CASE("adam: zero grad leaves params unchanged") {
    Tensor p = Tensor::from({3}, {1.0, -2.0, 0.5}, true);
    AdamState st;
    adam_step(p, {0.0, 0.0, 0.0}, st);
    CHECK((*p.data)[0] == 1.0);
    CHECK((*p.data)[1] == -2.0);
    CHECK((*p.data)[2] == 0.5);
}

TEST_CASE("adam: identical seeded runs are bitwise identical") {
    auto run = [] {
        Rng rng(42);
        Linear l;
        l.init(rng, 4, 3);
        std::vector<NamedParam> ps;
        l.state("l", ps);
        Adam opt(ps, 1e-2);
        Tensor x = Tensor::zeros({5, 4});
        Rng drng(43);
        for (double& v : *x.data) v = drng.normal();
        Tensor tgt = Tensor::zeros({5, 3});
        for (double& v : *tgt.data) v = drng.normal();
        for (int step = 0; step < 25; ++step) {
            opt.zero_grad();
            backward(mse(l.forward(x), tgt));
            opt.step();
        }
        return *l.w.data;
    };
    auto a = run();
    auto b = run();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("cosine warmup schedule shape") {
    const double base = 1e-3;
    CHECK(cosine_warmup_lr(base, 0, 100, 0.05) <= base);
    CHECK(cosine_warmup_lr(base, 4, 100, 0.05) == doctest::Approx(base));
    CHECK(cosine_warmup_lr(base, 5, 100, 0.05) == doctest::Approx(base));
    CHECK(cosine_warmup_lr(base, 99, 100, 0.05) < 1e-5);
    // monotone decay after warmup
    double prev = base + 1.0;
    for (int64_t s = 5; s < 100; ++s) {
        const double lr = cosine_warmup_lr(base, s, 100, 0.05);
        CHECK(lr <= prev + 1e-15);
        prev = lr;
    }
}

TEST_CASE("frozen forward is safe from concurrent threads") {
    Rng rng(77);
    Linear l;
    l.init(rng, 16, 16);
    std::vector<NamedParam> ps;
    l.state("l", ps);
    set_requires_grad(ps, false);

    Tensor x1 = Tensor::zeros({8, 16});
    Tensor x2 = Tensor::zeros({8, 16});
    for (double& v : *x1.data) v = rng.normal();
    for (double& v : *x2.data) v = rng.normal();

    Tensor ref1 = l.forward(x1);
    Tensor ref2 = l.forward(x2);

    std::vector<double> out1, out2;
    std::thread t1([&] { out1 = *l.forward(x1).data; });
    std::thread t2([&] { out2 = *l.forward(x2).data; });
    t1.join();
    t2.join();
    CHECK(out1 == *ref1.data);
    CHECK(out2 == *ref2.data);
}
