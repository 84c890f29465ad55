#pragma once

#include <string>
#include <vector>

#include "psae/ops.hpp"
#include "psae/toml.hpp"

namespace psae {

// Conv-deconv ladder geometry. The encoder downsamples H,W at every layer and
// T at every layer after the first; the decoder mirrors it exactly, so the
// output shape equals the input shape.
struct AutoencoderConfig {
    int64_t window = 8;  // frames per sample (T)
    int64_t in_channels = 1;
    int64_t height = 64;
    int64_t width = 64;
    std::vector<int64_t> channels = {16, 32, 64};  // encoder ladder
    double leaky_slope = 0.2;

    void validate() const;

    // [model] section; window comes from [data] and rides along here because
    // the network geometry depends on it
    static AutoencoderConfig from_toml(const toml::Table& model, int64_t window);
    void to_toml(toml::Table& model) const;

    bool operator==(const AutoencoderConfig&) const = default;
};

// One stage of the ladder, fully determined by the config.
struct LayerPlan {
    bool transpose = false;
    int64_t c_in = 0, c_out = 0;
    Triple kernel, stride, pad;
    bool final_sigmoid = false;  // last decoder stage; all others leaky-relu
    std::string name;            // enc0, enc1, ..., dec0, ...
};
std::vector<LayerPlan> plan_layers(const AutoencoderConfig& cfg);

template <typename T>
class AutoencoderT {
public:
    // Kaiming-style uniform fan-in init for kernels, zero biases, all drawn
    // from the given generator in canonical parameter order.
    static AutoencoderT seeded(const AutoencoderConfig& cfg, Rng& rng);

    // Adopts externally provided tensors (checkpoint load); shapes must match
    // the plan exactly.
    static AutoencoderT from_params(const AutoencoderConfig& cfg,
                                    std::vector<TensorT<T>> params);

    const AutoencoderConfig& config() const { return cfg_; }
    // canonical order: enc0.kernel, enc0.bias, enc1.kernel, ..., decN.bias
    std::vector<TensorT<T>>& params() { return params_; }
    const std::vector<TensorT<T>>& params() const { return params_; }
    const std::vector<std::string>& param_names() const { return names_; }
    int64_t param_count() const;

    // x: (N, T, C, H, W) matching the config; returns same shape, in [0,1]
    TensorT<T> forward(GraphT<T>* g, const TensorT<T>& x) const;

    template <typename U>
    AutoencoderT<U> cast() const {
        std::vector<TensorT<U>> out;
        out.reserve(params_.size());
        for (const auto& p : params_) out.push_back(p.template cast<U>());
        return AutoencoderT<U>::from_params(cfg_, std::move(out));
    }

private:
    AutoencoderConfig cfg_;
    std::vector<LayerPlan> plan_;
    std::vector<TensorT<T>> params_;
    std::vector<std::string> names_;
};

using Autoencoder = AutoencoderT<float>;
using AutoencoderD = AutoencoderT<double>;

// Reconstruction losses. Both are plain MSE; they differ in what the target
// means at the call site: loss_normal reconstructs the input itself, while
// loss_pseudo pushes the reconstruction of a pseudo-anomalous input toward
// the *normal* window it was built from.
template <typename T>
TensorT<T> loss_normal(GraphT<T>* g, const TensorT<T>& xhat, const TensorT<T>& xn);
template <typename T>
TensorT<T> loss_pseudo(GraphT<T>* g, const TensorT<T>& xhat_of_xp, const TensorT<T>& xn);

}  // namespace psae
