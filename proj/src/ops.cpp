#include "psae/ops.hpp"

#include <cmath>

namespace psae {

namespace {

int64_t ceil_div(int64_t a, int64_t b) {  // b > 0
    return a > 0 ? (a - 1) / b + 1 : -((-a) / b);
}

int64_t floor_div(int64_t a, int64_t b) {  // b > 0
    return a >= 0 ? a / b : -((-a + b - 1) / b);
}

// Both convolutions reduce to one geometry: a "small" side (the conv output,
// which is also the transposed-conv input) and a "large" side (the conv
// input / transposed-conv output), tied by
//   large_index = small_index * stride - pad + kernel_offset
// per spatial axis. The kernel is stored (c_small, K_t, c_large, K_h, K_w):
// that matches (C_out, K_t, C_in, ...) for conv3d and (C_in, K_t, C_out, ...)
// for conv_transpose3d, so three loops below serve forward and backward of
// both ops.
struct ConvGeom {
    int64_t n;
    int64_t ts, cs, hs, ws;  // small side extents
    int64_t tl, cl, hl, wl;  // large side extents
    int64_t kt, kh, kw;
    int64_t st, sh, sw;
    int64_t pt, ph, pw;
};

// small[n,ts,cs,hs,ws] += sum over (kt,cl,kh,kw) of kernel * large[...]
// (conv3d forward; conv_transpose3d backward w.r.t. input)
template <typename T>
void conv_gather(T* small, const T* large, const T* ker, const ConvGeom& g) {
    for (int64_t n = 0; n < g.n; ++n)
        for (int64_t ts = 0; ts < g.ts; ++ts)
            for (int64_t kt = 0; kt < g.kt; ++kt) {
                const int64_t tl = ts * g.st - g.pt + kt;
                if (tl < 0 || tl >= g.tl) continue;
                for (int64_t cs = 0; cs < g.cs; ++cs) {
                    T* sbase = small + (((n * g.ts + ts) * g.cs + cs) * g.hs) * g.ws;
                    for (int64_t cl = 0; cl < g.cl; ++cl) {
                        const T* kbase = ker + (((cs * g.kt + kt) * g.cl + cl) * g.kh) * g.kw;
                        const T* lbase = large + (((n * g.tl + tl) * g.cl + cl) * g.hl) * g.wl;
                        for (int64_t kh = 0; kh < g.kh; ++kh) {
                            const T* krow = kbase + kh * g.kw;
                            for (int64_t hs = 0; hs < g.hs; ++hs) {
                                const int64_t hl = hs * g.sh - g.ph + kh;
                                if (hl < 0 || hl >= g.hl) continue;
                                const T* lrow = lbase + hl * g.wl;
                                T* srow = sbase + hs * g.ws;
                                for (int64_t kw = 0; kw < g.kw; ++kw) {
                                    const T kv = krow[kw];
                                    const int64_t lo = std::max<int64_t>(0, ceil_div(g.pw - kw, g.sw));
                                    const int64_t hi =
                                        std::min(g.ws - 1, floor_div(g.wl - 1 + g.pw - kw, g.sw));
                                    int64_t wl = lo * g.sw - g.pw + kw;
                                    for (int64_t ws = lo; ws <= hi; ++ws, wl += g.sw)
                                        srow[ws] += kv * lrow[wl];
                                }
                            }
                        }
                    }
                }
            }
}

// large[...] += sum of kernel * small[n,ts,cs,hs,ws]   (the adjoint scatter:
// conv3d backward w.r.t. input; conv_transpose3d forward)
template <typename T>
void conv_scatter(T* large, const T* small, const T* ker, const ConvGeom& g) {
    for (int64_t n = 0; n < g.n; ++n)
        for (int64_t ts = 0; ts < g.ts; ++ts)
            for (int64_t kt = 0; kt < g.kt; ++kt) {
                const int64_t tl = ts * g.st - g.pt + kt;
                if (tl < 0 || tl >= g.tl) continue;
                for (int64_t cs = 0; cs < g.cs; ++cs) {
                    const T* sbase = small + (((n * g.ts + ts) * g.cs + cs) * g.hs) * g.ws;
                    for (int64_t cl = 0; cl < g.cl; ++cl) {
                        const T* kbase = ker + (((cs * g.kt + kt) * g.cl + cl) * g.kh) * g.kw;
                        T* lbase = large + (((n * g.tl + tl) * g.cl + cl) * g.hl) * g.wl;
                        for (int64_t kh = 0; kh < g.kh; ++kh) {
                            const T* krow = kbase + kh * g.kw;
                            for (int64_t hs = 0; hs < g.hs; ++hs) {
                                const int64_t hl = hs * g.sh - g.ph + kh;
                                if (hl < 0 || hl >= g.hl) continue;
                                T* lrow = lbase + hl * g.wl;
                                const T* srow = sbase + hs * g.ws;
                                for (int64_t kw = 0; kw < g.kw; ++kw) {
                                    const T kv = krow[kw];
                                    const int64_t lo = std::max<int64_t>(0, ceil_div(g.pw - kw, g.sw));
                                    const int64_t hi =
                                        std::min(g.ws - 1, floor_div(g.wl - 1 + g.pw - kw, g.sw));
                                    int64_t wl = lo * g.sw - g.pw + kw;
                                    for (int64_t ws = lo; ws <= hi; ++ws, wl += g.sw)
                                        lrow[wl] += kv * srow[ws];
                                }
                            }
                        }
                    }
                }
            }
}

// kgrad[cs,kt,cl,kh,kw] += sum over (n,ts,hs,ws) of small * large
// (backward w.r.t. kernel for both ops; callers pick which tensor plays
// "small" — it is always the one whose channel axis is the kernel's axis 0)
template <typename T>
void conv_kernel_grad(T* kgrad, const T* small, const T* large, const ConvGeom& g) {
    for (int64_t n = 0; n < g.n; ++n)
        for (int64_t ts = 0; ts < g.ts; ++ts)
            for (int64_t kt = 0; kt < g.kt; ++kt) {
                const int64_t tl = ts * g.st - g.pt + kt;
                if (tl < 0 || tl >= g.tl) continue;
                for (int64_t cs = 0; cs < g.cs; ++cs) {
                    const T* sbase = small + (((n * g.ts + ts) * g.cs + cs) * g.hs) * g.ws;
                    for (int64_t cl = 0; cl < g.cl; ++cl) {
                        T* kbase = kgrad + (((cs * g.kt + kt) * g.cl + cl) * g.kh) * g.kw;
                        const T* lbase = large + (((n * g.tl + tl) * g.cl + cl) * g.hl) * g.wl;
                        for (int64_t kh = 0; kh < g.kh; ++kh) {
                            T* krow = kbase + kh * g.kw;
                            for (int64_t hs = 0; hs < g.hs; ++hs) {
                                const int64_t hl = hs * g.sh - g.ph + kh;
                                if (hl < 0 || hl >= g.hl) continue;
                                const T* lrow = lbase + hl * g.wl;
                                const T* srow = sbase + hs * g.ws;
                                for (int64_t kw = 0; kw < g.kw; ++kw) {
                                    const int64_t lo = std::max<int64_t>(0, ceil_div(g.pw - kw, g.sw));
                                    const int64_t hi =
                                        std::min(g.ws - 1, floor_div(g.wl - 1 + g.pw - kw, g.sw));
                                    T acc = T(0);
                                    int64_t wl = lo * g.sw - g.pw + kw;
                                    for (int64_t ws = lo; ws <= hi; ++ws, wl += g.sw)
                                        acc += srow[ws] * lrow[wl];
                                    krow[kw] += acc;
                                }
                            }
                        }
                    }
                }
            }
}

void check_stride_pad(const char* op, Triple stride, Triple padding) {
    if (stride.t < 1 || stride.h < 1 || stride.w < 1)
        throw Error(concat(op, ": strides must be >= 1, got (", stride.t, ",", stride.h, ",",
                           stride.w, ")"));
    if (padding.t < 0 || padding.h < 0 || padding.w < 0)
        throw Error(concat(op, ": paddings must be >= 0, got (", padding.t, ",", padding.h, ",",
                           padding.w, ")"));
}

}  // namespace

template <typename T>
TensorT<T> conv3d(GraphT<T>* g, const TensorT<T>& input, const TensorT<T>& kernel, Triple stride,
                  Triple padding) {
    if (input.ndim() != 5)
        throw Error(concat("conv3d: input must be (N,T,C,H,W), got ", shape_str(input.shape())));
    if (kernel.ndim() != 5)
        throw Error(
            concat("conv3d: kernel must be (Co,Kt,Ci,Kh,Kw), got ", shape_str(kernel.shape())));
    if (kernel.dim(2) != input.dim(2))
        throw Error(concat("conv3d: kernel expects ", kernel.dim(2), " input channels, input has ",
                           input.dim(2)));
    check_stride_pad("conv3d", stride, padding);

    ConvGeom geo{};
    geo.n = input.dim(0);
    geo.tl = input.dim(1), geo.cl = input.dim(2), geo.hl = input.dim(3), geo.wl = input.dim(4);
    geo.cs = kernel.dim(0);
    geo.kt = kernel.dim(1), geo.kh = kernel.dim(3), geo.kw = kernel.dim(4);
    geo.st = stride.t, geo.sh = stride.h, geo.sw = stride.w;
    geo.pt = padding.t, geo.ph = padding.h, geo.pw = padding.w;
    geo.ts = floor_div(geo.tl + 2 * geo.pt - geo.kt, geo.st) + 1;
    geo.hs = floor_div(geo.hl + 2 * geo.ph - geo.kh, geo.sh) + 1;
    geo.ws = floor_div(geo.wl + 2 * geo.pw - geo.kw, geo.sw) + 1;
    if (geo.ts < 1 || geo.hs < 1 || geo.ws < 1)
        throw Error(concat("conv3d: kernel ", shape_str(kernel.shape()),
                           " does not fit padded input ", shape_str(input.shape())));

    TensorT<T> out = TensorT<T>::zeros({geo.n, geo.ts, geo.cs, geo.hs, geo.ws});
    conv_gather(out.data(), input.data(), kernel.data(), geo);

    if (g && (input.requires_grad() || kernel.requires_grad())) {
        out.set_requires_grad(true);
        out.ensure_grad();
        g->note_output(out.id());
        TensorT<T> x = input, k = kernel, y = out;
        g->record([x, k, y, geo]() mutable {
            if (x.requires_grad()) conv_scatter(x.grad_data(), y.grad_data(), k.data(), geo);
            if (k.requires_grad()) conv_kernel_grad(k.grad_data(), y.grad_data(), x.data(), geo);
        });
    }
    return out;
}

template <typename T>
TensorT<T> conv_transpose3d(GraphT<T>* g, const TensorT<T>& input, const TensorT<T>& kernel,
                            Triple stride, Triple padding) {
    if (input.ndim() != 5)
        throw Error(
            concat("conv_transpose3d: input must be (N,T,C,H,W), got ", shape_str(input.shape())));
    if (kernel.ndim() != 5)
        throw Error(concat("conv_transpose3d: kernel must be (Ci,Kt,Co,Kh,Kw), got ",
                           shape_str(kernel.shape())));
    if (kernel.dim(0) != input.dim(2))
        throw Error(concat("conv_transpose3d: kernel expects ", kernel.dim(0),
                           " input channels, input has ", input.dim(2)));
    check_stride_pad("conv_transpose3d", stride, padding);

    ConvGeom geo{};
    geo.n = input.dim(0);
    geo.ts = input.dim(1), geo.cs = input.dim(2), geo.hs = input.dim(3), geo.ws = input.dim(4);
    geo.cl = kernel.dim(2);
    geo.kt = kernel.dim(1), geo.kh = kernel.dim(3), geo.kw = kernel.dim(4);
    geo.st = stride.t, geo.sh = stride.h, geo.sw = stride.w;
    geo.pt = padding.t, geo.ph = padding.h, geo.pw = padding.w;
    geo.tl = (geo.ts - 1) * geo.st - 2 * geo.pt + geo.kt;
    geo.hl = (geo.hs - 1) * geo.sh - 2 * geo.ph + geo.kh;
    geo.wl = (geo.ws - 1) * geo.sw - 2 * geo.pw + geo.kw;
    if (geo.tl < 1 || geo.hl < 1 || geo.wl < 1)
        throw Error(concat("conv_transpose3d: output would be empty for input ",
                           shape_str(input.shape()), " kernel ", shape_str(kernel.shape())));

    TensorT<T> out = TensorT<T>::zeros({geo.n, geo.tl, geo.cl, geo.hl, geo.wl});
    conv_scatter(out.data(), input.data(), kernel.data(), geo);

    if (g && (input.requires_grad() || kernel.requires_grad())) {
        out.set_requires_grad(true);
        out.ensure_grad();
        g->note_output(out.id());
        TensorT<T> x = input, k = kernel, y = out;
        g->record([x, k, y, geo]() mutable {
            if (x.requires_grad()) conv_gather(x.grad_data(), y.grad_data(), k.data(), geo);
            if (k.requires_grad()) conv_kernel_grad(k.grad_data(), x.data(), y.grad_data(), geo);
        });
    }
    return out;
}

namespace {

// Shared tail for elementwise ops: mark/record only when someone upstream
// needs gradients.
template <typename T, typename Backward>
void finish_unary(GraphT<T>* g, const TensorT<T>& x, TensorT<T>& out, Backward bw) {
    if (g && x.requires_grad()) {
        out.set_requires_grad(true);
        out.ensure_grad();
        g->note_output(out.id());
        g->record(std::move(bw));
    }
}

}  // namespace

template <typename T>
TensorT<T> relu(GraphT<T>* g, const TensorT<T>& x) {
    TensorT<T> out = TensorT<T>::zeros(x.shape());
    const T* xv = x.data();
    T* ov = out.data();
    const int64_t n = x.size();
    for (int64_t i = 0; i < n; ++i) ov[i] = xv[i] > T(0) ? xv[i] : T(0);
    TensorT<T> xc = x, y = out;
    finish_unary(g, x, out, [xc, y, n]() mutable {
        const T* xv = xc.data();
        const T* og = y.grad_data();
        T* xg = xc.grad_data();
        for (int64_t i = 0; i < n; ++i)
            if (xv[i] > T(0)) xg[i] += og[i];
    });
    return out;
}

template <typename T>
TensorT<T> leaky_relu(GraphT<T>* g, const TensorT<T>& x, T negative_slope) {
    TensorT<T> out = TensorT<T>::zeros(x.shape());
    const T* xv = x.data();
    T* ov = out.data();
    const int64_t n = x.size();
    const T a = negative_slope;
    for (int64_t i = 0; i < n; ++i) ov[i] = xv[i] > T(0) ? xv[i] : a * xv[i];
    TensorT<T> xc = x, y = out;
    finish_unary(g, x, out, [xc, y, n, a]() mutable {
        const T* xv = xc.data();
        const T* og = y.grad_data();
        T* xg = xc.grad_data();
        for (int64_t i = 0; i < n; ++i) xg[i] += (xv[i] > T(0) ? og[i] : a * og[i]);
    });
    return out;
}

template <typename T>
TensorT<T> sigmoid(GraphT<T>* g, const TensorT<T>& x) {
    TensorT<T> out = TensorT<T>::zeros(x.shape());
    const T* xv = x.data();
    T* ov = out.data();
    const int64_t n = x.size();
    for (int64_t i = 0; i < n; ++i) {
        // Split by sign so exp() never overflows; saturates to {0,1}.
        if (xv[i] >= T(0)) {
            const T e = std::exp(-xv[i]);
            ov[i] = T(1) / (T(1) + e);
        } else {
            const T e = std::exp(xv[i]);
            ov[i] = e / (T(1) + e);
        }
    }
    TensorT<T> xc = x, y = out;
    finish_unary(g, x, out, [xc, y, n]() mutable {
        const T* yv = y.data();
        const T* og = y.grad_data();
        T* xg = xc.grad_data();
        for (int64_t i = 0; i < n; ++i) xg[i] += og[i] * yv[i] * (T(1) - yv[i]);
    });
    return out;
}

namespace {

template <typename T>
void check_same_shape(const char* op, const TensorT<T>& a, const TensorT<T>& b) {
    if (a.shape() != b.shape())
        throw Error(concat(op, ": shape mismatch ", shape_str(a.shape()), " vs ",
                           shape_str(b.shape())));
}

}  // namespace

template <typename T>
TensorT<T> add(GraphT<T>* g, const TensorT<T>& a, const TensorT<T>& b) {
    check_same_shape("add", a, b);
    TensorT<T> out = TensorT<T>::zeros(a.shape());
    const T* av = a.data();
    const T* bv = b.data();
    T* ov = out.data();
    const int64_t n = a.size();
    for (int64_t i = 0; i < n; ++i) ov[i] = av[i] + bv[i];
    if (g && (a.requires_grad() || b.requires_grad())) {
        out.set_requires_grad(true);
        out.ensure_grad();
        g->note_output(out.id());
        TensorT<T> ac = a, bc = b, y = out;
        g->record([ac, bc, y, n]() mutable {
            const T* og = y.grad_data();
            if (ac.requires_grad()) {
                T* ag = ac.grad_data();
                for (int64_t i = 0; i < n; ++i) ag[i] += og[i];
            }
            if (bc.requires_grad()) {
                T* bg = bc.grad_data();
                for (int64_t i = 0; i < n; ++i) bg[i] += og[i];
            }
        });
    }
    return out;
}

template <typename T>
TensorT<T> sub(GraphT<T>* g, const TensorT<T>& a, const TensorT<T>& b) {
    check_same_shape("sub", a, b);
    TensorT<T> out = TensorT<T>::zeros(a.shape());
    const T* av = a.data();
    const T* bv = b.data();
    T* ov = out.data();
    const int64_t n = a.size();
    for (int64_t i = 0; i < n; ++i) ov[i] = av[i] - bv[i];
    if (g && (a.requires_grad() || b.requires_grad())) {
        out.set_requires_grad(true);
        out.ensure_grad();
        g->note_output(out.id());
        TensorT<T> ac = a, bc = b, y = out;
        g->record([ac, bc, y, n]() mutable {
            const T* og = y.grad_data();
            if (ac.requires_grad()) {
                T* ag = ac.grad_data();
                for (int64_t i = 0; i < n; ++i) ag[i] += og[i];
            }
            if (bc.requires_grad()) {
                T* bg = bc.grad_data();
                for (int64_t i = 0; i < n; ++i) bg[i] -= og[i];
            }
        });
    }
    return out;
}

template <typename T>
TensorT<T> mul_scalar(GraphT<T>* g, const TensorT<T>& x, T c) {
    TensorT<T> out = TensorT<T>::zeros(x.shape());
    const T* xv = x.data();
    T* ov = out.data();
    const int64_t n = x.size();
    for (int64_t i = 0; i < n; ++i) ov[i] = c * xv[i];
    TensorT<T> xc = x, y = out;
    finish_unary(g, x, out, [xc, y, n, c]() mutable {
        const T* og = y.grad_data();
        T* xg = xc.grad_data();
        for (int64_t i = 0; i < n; ++i) xg[i] += c * og[i];
    });
    return out;
}

template <typename T>
TensorT<T> bias_add(GraphT<T>* g, const TensorT<T>& x, const TensorT<T>& bias) {
    if (x.ndim() != 5)
        throw Error(concat("bias_add: input must be (N,T,C,H,W), got ", shape_str(x.shape())));
    if (bias.ndim() != 1 || bias.dim(0) != x.dim(2))
        throw Error(concat("bias_add: bias must be (C=", x.dim(2), "), got ",
                           shape_str(bias.shape())));
    const int64_t nt = x.dim(0) * x.dim(1), c = x.dim(2), hw = x.dim(3) * x.dim(4);
    TensorT<T> out = TensorT<T>::zeros(x.shape());
    const T* xv = x.data();
    const T* bv = bias.data();
    T* ov = out.data();
    for (int64_t i = 0; i < nt; ++i)
        for (int64_t ci = 0; ci < c; ++ci) {
            const T b = bv[ci];
            const int64_t base = (i * c + ci) * hw;
            for (int64_t j = 0; j < hw; ++j) ov[base + j] = xv[base + j] + b;
        }
    if (g && (x.requires_grad() || bias.requires_grad())) {
        out.set_requires_grad(true);
        out.ensure_grad();
        g->note_output(out.id());
        TensorT<T> xc = x, bc = bias, y = out;
        g->record([xc, bc, y, nt, c, hw]() mutable {
            const T* og = y.grad_data();
            if (xc.requires_grad()) {
                T* xg = xc.grad_data();
                const int64_t n = nt * c * hw;
                for (int64_t i = 0; i < n; ++i) xg[i] += og[i];
            }
            if (bc.requires_grad()) {
                T* bg = bc.grad_data();
                for (int64_t i = 0; i < nt; ++i)
                    for (int64_t ci = 0; ci < c; ++ci) {
                        const int64_t base = (i * c + ci) * hw;
                        T acc = T(0);
                        for (int64_t j = 0; j < hw; ++j) acc += og[base + j];
                        bg[ci] += acc;
                    }
            }
        });
    }
    return out;
}

template <typename T>
TensorT<T> mse_loss(GraphT<T>* g, const TensorT<T>& pred, const TensorT<T>& target) {
    check_same_shape("mse_loss", pred, target);
    const int64_t n = pred.size();
    const T* pv = pred.data();
    const T* tv = target.data();
    double acc = 0.0;  // accumulate in double regardless of T
    for (int64_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(pv[i]) - static_cast<double>(tv[i]);
        acc += d * d;
    }
    TensorT<T> out = TensorT<T>::from_vector({}, {static_cast<T>(acc / static_cast<double>(n))});
    if (g && (pred.requires_grad() || target.requires_grad())) {
        out.set_requires_grad(true);
        out.ensure_grad();
        g->note_output(out.id());
        TensorT<T> pc = pred, tc = target, y = out;
        g->record([pc, tc, y, n]() mutable {
            const T scale = T(2) / static_cast<T>(n) * y.grad_data()[0];
            const T* pv = pc.data();
            const T* tv = tc.data();
            if (pc.requires_grad()) {
                T* pg = pc.grad_data();
                for (int64_t i = 0; i < n; ++i) pg[i] += scale * (pv[i] - tv[i]);
            }
            if (tc.requires_grad()) {
                T* tg = tc.grad_data();
                for (int64_t i = 0; i < n; ++i) tg[i] -= scale * (pv[i] - tv[i]);
            }
        });
    }
    return out;
}

#define PSAE_INSTANTIATE_OPS(T)                                                                  \
    template TensorT<T> conv3d<T>(GraphT<T>*, const TensorT<T>&, const TensorT<T>&, Triple,     \
                                  Triple);                                                       \
    template TensorT<T> conv_transpose3d<T>(GraphT<T>*, const TensorT<T>&, const TensorT<T>&,   \
                                            Triple, Triple);                                     \
    template TensorT<T> relu<T>(GraphT<T>*, const TensorT<T>&);                                 \
    template TensorT<T> leaky_relu<T>(GraphT<T>*, const TensorT<T>&, T);                        \
    template TensorT<T> sigmoid<T>(GraphT<T>*, const TensorT<T>&);                             \
    template TensorT<T> add<T>(GraphT<T>*, const TensorT<T>&, const TensorT<T>&);               \
    template TensorT<T> sub<T>(GraphT<T>*, const TensorT<T>&, const TensorT<T>&);               \
    template TensorT<T> mul_scalar<T>(GraphT<T>*, const TensorT<T>&, T);                        \
    template TensorT<T> bias_add<T>(GraphT<T>*, const TensorT<T>&, const TensorT<T>&);          \
    template TensorT<T> mse_loss<T>(GraphT<T>*, const TensorT<T>&, const TensorT<T>&);

PSAE_INSTANTIATE_OPS(float)
PSAE_INSTANTIATE_OPS(double)

#undef PSAE_INSTANTIATE_OPS

}  // namespace psae
