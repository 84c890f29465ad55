#pragma once

// Shared test-only helpers: reference implementations written as direct,
// bounds-checked translations of the operator definitions (independent of
// the optimized library loops), plus a finite-difference gradient checker.

#include <cmath>
#include <functional>
#include <vector>

#include "psae/ops.hpp"
#include "psae/tensor.hpp"

namespace testutil {

template <typename T>
void fill_uniform(psae::TensorT<T>& t, psae::Rng& rng, double lo = -1.0, double hi = 1.0) {
    for (auto& x : t.vec()) x = static_cast<T>(rng.uniform(lo, hi));
}

// Direct nine-loop convolution: for every output element walk the kernel and
// skip taps that fall into padding.
template <typename T>
psae::TensorT<T> conv3d_oracle(const psae::TensorT<T>& x, const psae::TensorT<T>& k,
                               psae::Triple s, psae::Triple p) {
    const auto& xs = x.shape();  // (N, Ti, Ci, Hi, Wi)
    const auto& ks = k.shape();  // (Co, Kt, Ci, Kh, Kw)
    const int64_t N = xs[0], Ti = xs[1], Ci = xs[2], Hi = xs[3], Wi = xs[4];
    const int64_t Co = ks[0], Kt = ks[1], Kh = ks[3], Kw = ks[4];
    const int64_t To = (Ti + 2 * p.t - Kt) / s.t + 1;
    const int64_t Ho = (Hi + 2 * p.h - Kh) / s.h + 1;
    const int64_t Wo = (Wi + 2 * p.w - Kw) / s.w + 1;
    auto out = psae::TensorT<T>::zeros({N, To, Co, Ho, Wo});
    auto xat = [&](int64_t n, int64_t t, int64_t c, int64_t h, int64_t w) {
        return x.data()[(((n * Ti + t) * Ci + c) * Hi + h) * Wi + w];
    };
    auto kat = [&](int64_t co, int64_t kt, int64_t ci, int64_t kh, int64_t kw) {
        return k.data()[(((co * Kt + kt) * Ci + ci) * Kh + kh) * Kw + kw];
    };
    for (int64_t n = 0; n < N; ++n)
        for (int64_t to = 0; to < To; ++to)
            for (int64_t co = 0; co < Co; ++co)
                for (int64_t ho = 0; ho < Ho; ++ho)
                    for (int64_t wo = 0; wo < Wo; ++wo) {
                        T acc = T(0);
                        for (int64_t kt = 0; kt < Kt; ++kt)
                            for (int64_t ci = 0; ci < Ci; ++ci)
                                for (int64_t kh = 0; kh < Kh; ++kh)
                                    for (int64_t kw = 0; kw < Kw; ++kw) {
                                        const int64_t ti = to * s.t - p.t + kt;
                                        const int64_t hi = ho * s.h - p.h + kh;
                                        const int64_t wi = wo * s.w - p.w + kw;
                                        if (ti < 0 || ti >= Ti || hi < 0 || hi >= Hi || wi < 0 ||
                                            wi >= Wi)
                                            continue;
                                        acc += kat(co, kt, ci, kh, kw) * xat(n, ti, ci, hi, wi);
                                    }
                        out.data()[(((n * To + to) * Co + co) * Ho + ho) * Wo + wo] = acc;
                    }
    return out;
}

// Scatter-accumulate transposed convolution: every input element adds its
// kernel-weighted contribution into the output; out-of-range taps (cropped
// padding) are dropped.
template <typename T>
psae::TensorT<T> conv_transpose3d_oracle(const psae::TensorT<T>& x, const psae::TensorT<T>& k,
                                         psae::Triple s, psae::Triple p) {
    const auto& xs = x.shape();  // (N, Ti, Ci, Hi, Wi)
    const auto& ks = k.shape();  // (Ci, Kt, Co, Kh, Kw)
    const int64_t N = xs[0], Ti = xs[1], Ci = xs[2], Hi = xs[3], Wi = xs[4];
    const int64_t Kt = ks[1], Co = ks[2], Kh = ks[3], Kw = ks[4];
    const int64_t To = (Ti - 1) * s.t - 2 * p.t + Kt;
    const int64_t Ho = (Hi - 1) * s.h - 2 * p.h + Kh;
    const int64_t Wo = (Wi - 1) * s.w - 2 * p.w + Kw;
    auto out = psae::TensorT<T>::zeros({N, To, Co, Ho, Wo});
    auto kat = [&](int64_t ci, int64_t kt, int64_t co, int64_t kh, int64_t kw) {
        return k.data()[(((ci * Kt + kt) * Co + co) * Kh + kh) * Kw + kw];
    };
    for (int64_t n = 0; n < N; ++n)
        for (int64_t ti = 0; ti < Ti; ++ti)
            for (int64_t ci = 0; ci < Ci; ++ci)
                for (int64_t hi = 0; hi < Hi; ++hi)
                    for (int64_t wi = 0; wi < Wi; ++wi) {
                        const T xv = x.data()[(((n * Ti + ti) * Ci + ci) * Hi + hi) * Wi + wi];
                        for (int64_t kt = 0; kt < Kt; ++kt)
                            for (int64_t co = 0; co < Co; ++co)
                                for (int64_t kh = 0; kh < Kh; ++kh)
                                    for (int64_t kw = 0; kw < Kw; ++kw) {
                                        const int64_t to = ti * s.t - p.t + kt;
                                        const int64_t ho = hi * s.h - p.h + kh;
                                        const int64_t wo = wi * s.w - p.w + kw;
                                        if (to < 0 || to >= To || ho < 0 || ho >= Ho || wo < 0 ||
                                            wo >= Wo)
                                            continue;
                                        out.data()[(((n * To + to) * Co + co) * Ho + ho) * Wo +
                                                   wo] += xv * kat(ci, kt, co, kh, kw);
                                    }
                    }
    return out;
}

template <typename T>
double max_abs_diff(const psae::TensorT<T>& a, const psae::TensorT<T>& b) {
    if (a.shape() != b.shape()) return 1e30;
    double m = 0.0;
    for (size_t i = 0; i < a.vec().size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.vec()[i]) -
                                 static_cast<double>(b.vec()[i])));
    return m;
}

// Central-difference gradient check in double. `fwd` rebuilds the graph from
// the leaves and returns the scalar loss; it is invoked with nullptr for the
// probe evaluations. Returns the max relative error over all leaf elements.
inline double gradcheck(const std::function<psae::TensorD(psae::GraphD*)>& fwd,
                        std::vector<psae::TensorD> leaves, double eps = 1e-5) {
    psae::GraphD g;
    psae::TensorD loss = fwd(&g);
    for (auto& leaf : leaves) {
        leaf.ensure_grad();
        leaf.zero_grad();
    }
    g.backward(loss);
    double worst = 0.0;
    for (auto& leaf : leaves) {
        std::vector<double> analytic(leaf.grad_vec().begin(), leaf.grad_vec().end());
        for (int64_t i = 0; i < leaf.size(); ++i) {
            const double orig = leaf.data()[i];
            leaf.data()[i] = orig + eps;
            const double lp = fwd(nullptr).scalar();
            leaf.data()[i] = orig - eps;
            const double lm = fwd(nullptr).scalar();
            leaf.data()[i] = orig;
            const double fd = (lp - lm) / (2.0 * eps);
            const double a = analytic[static_cast<size_t>(i)];
            const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-8});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace testutil
