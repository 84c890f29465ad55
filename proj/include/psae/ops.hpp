#pragma once

#include "psae/tensor.hpp"

namespace psae {

// Per-axis (time, height, width) stride or padding for the 3-D convolutions.
struct Triple {
    int64_t t = 1;
    int64_t h = 1;
    int64_t w = 1;
};

// All ops take the graph as a pointer; pass nullptr to run inference-only
// (no closure recorded, outputs do not require grad). Tensors are laid out
// (N, T, C, H, W) row-major.

// kernel layout (C_out, K_t, C_in, K_h, K_w); output extent per axis is
// floor((in + 2*pad - k) / stride) + 1.
template <typename T>
TensorT<T> conv3d(GraphT<T>* g, const TensorT<T>& input, const TensorT<T>& kernel,
                  Triple stride, Triple padding);

// kernel layout (C_in, K_t, C_out, K_h, K_w); output extent per axis is
// (in - 1)*stride - 2*pad + k. Forward is the scatter adjoint of conv3d.
template <typename T>
TensorT<T> conv_transpose3d(GraphT<T>* g, const TensorT<T>& input, const TensorT<T>& kernel,
                            Triple stride, Triple padding);

template <typename T>
TensorT<T> relu(GraphT<T>* g, const TensorT<T>& x);

template <typename T>
TensorT<T> leaky_relu(GraphT<T>* g, const TensorT<T>& x, T negative_slope);

// Numerically stable; saturates to exactly 0/1 in the float type for large
// |x| instead of overflowing.
template <typename T>
TensorT<T> sigmoid(GraphT<T>* g, const TensorT<T>& x);

template <typename T>
TensorT<T> add(GraphT<T>* g, const TensorT<T>& a, const TensorT<T>& b);

template <typename T>
TensorT<T> sub(GraphT<T>* g, const TensorT<T>& a, const TensorT<T>& b);

template <typename T>
TensorT<T> mul_scalar(GraphT<T>* g, const TensorT<T>& x, T c);

// bias has shape (C); broadcast-added over (N, T, C, H, W).
template <typename T>
TensorT<T> bias_add(GraphT<T>* g, const TensorT<T>& x, const TensorT<T>& bias);

// Mean of squared differences, reduced to a scalar (shape ()).
template <typename T>
TensorT<T> mse_loss(GraphT<T>* g, const TensorT<T>& pred, const TensorT<T>& target);

}  // namespace psae
