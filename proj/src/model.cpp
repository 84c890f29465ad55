#include "psae/model.hpp"

#include <cmath>

namespace psae {

void AutoencoderConfig::validate() const {
    if (channels.empty()) throw Error("channel ladder is empty");
    for (int64_t c : channels)
        if (c < 1) throw Error(concat("channel count ", c, " must be >= 1"));
    if (in_channels < 1) throw Error(concat("in_channels = ", in_channels, " must be >= 1"));
    if (leaky_slope < 0.0 || leaky_slope >= 1.0)
        throw Error(concat("leaky_slope = ", leaky_slope, " outside [0,1)"));

    // every stride-2 stage halves an extent; mirroring needs them to divide out
    const int64_t levels = static_cast<int64_t>(channels.size());
    const int64_t t_div = int64_t{1} << (levels - 1);  // first layer keeps T
    const int64_t hw_div = int64_t{1} << levels;
    if (window < t_div || window % t_div != 0)
        throw Error(concat("window = ", window, " must be a positive multiple of ", t_div,
                           " for ", levels, " encoder layers"));
    if (height < hw_div || height % hw_div != 0)
        throw Error(concat("height = ", height, " must be a positive multiple of ", hw_div,
                           " for ", levels, " encoder layers"));
    if (width < hw_div || width % hw_div != 0)
        throw Error(concat("width = ", width, " must be a positive multiple of ", hw_div,
                           " for ", levels, " encoder layers"));
}

AutoencoderConfig AutoencoderConfig::from_toml(const toml::Table& model, int64_t window) {
    model.expect_only({"height", "width", "channels", "leaky_slope", "in_channels"}, {});
    AutoencoderConfig cfg;
    cfg.window = window;
    cfg.height = model.get_int_or("height", cfg.height);
    cfg.width = model.get_int_or("width", cfg.width);
    cfg.in_channels = model.get_int_or("in_channels", cfg.in_channels);
    if (model.has("channels")) cfg.channels = model.get_ints("channels");
    cfg.leaky_slope = model.get_float_or("leaky_slope", cfg.leaky_slope);
    cfg.validate();
    return cfg;
}

void AutoencoderConfig::to_toml(toml::Table& model) const {
    model.set("height", toml::Value::integer(height));
    model.set("width", toml::Value::integer(width));
    model.set("in_channels", toml::Value::integer(in_channels));
    std::vector<toml::Value> ladder;
    for (int64_t c : channels) ladder.push_back(toml::Value::integer(c));
    model.set("channels", toml::Value::array(std::move(ladder)));
    model.set("leaky_slope", toml::Value::floating(leaky_slope));
}

std::vector<LayerPlan> plan_layers(const AutoencoderConfig& cfg) {
    cfg.validate();
    const int64_t levels = static_cast<int64_t>(cfg.channels.size());
    std::vector<LayerPlan> plan;

    for (int64_t i = 0; i < levels; ++i) {
        LayerPlan l;
        l.c_in = i == 0 ? cfg.in_channels : cfg.channels[static_cast<size_t>(i - 1)];
        l.c_out = cfg.channels[static_cast<size_t>(i)];
        l.kernel = {3, 3, 3};
        l.stride = {i == 0 ? 1 : 2, 2, 2};
        l.pad = {1, 1, 1};
        l.name = concat("enc", i);
        plan.push_back(std::move(l));
    }
    for (int64_t i = 0; i < levels; ++i) {
        const int64_t mirror = levels - 1 - i;  // encoder stage being undone
        LayerPlan l;
        l.transpose = true;
        l.c_in = cfg.channels[static_cast<size_t>(mirror)];
        l.c_out = mirror == 0 ? cfg.in_channels : cfg.channels[static_cast<size_t>(mirror - 1)];
        l.stride = {mirror == 0 ? 1 : 2, 2, 2};
        // stride-2 axes invert exactly with k=2,p=0 ((n-1)*2+2 = 2n); the
        // stride-1 time axis keeps k=3,p=1 (n-1-2+3 = n)
        l.kernel = {l.stride.t == 2 ? 2 : 3, 2, 2};
        l.pad = {l.stride.t == 2 ? 0 : 1, 0, 0};
        l.final_sigmoid = i == levels - 1;
        l.name = concat("dec", i);
        plan.push_back(std::move(l));
    }
    return plan;
}

template <typename T>
AutoencoderT<T> AutoencoderT<T>::seeded(const AutoencoderConfig& cfg, Rng& rng) {
    AutoencoderT<T> model;
    model.cfg_ = cfg;
    model.plan_ = plan_layers(cfg);
    const double gain = std::sqrt(2.0 / (1.0 + cfg.leaky_slope * cfg.leaky_slope));
    for (const LayerPlan& l : model.plan_) {
        const Shape kshape = l.transpose
                                 ? Shape{l.c_in, l.kernel.t, l.c_out, l.kernel.h, l.kernel.w}
                                 : Shape{l.c_out, l.kernel.t, l.c_in, l.kernel.h, l.kernel.w};
        const double fan_in = static_cast<double>(l.c_in * l.kernel.t * l.kernel.h * l.kernel.w);
        const double bound = gain * std::sqrt(3.0 / fan_in);
        TensorT<T> kernel = TensorT<T>::zeros(kshape);
        T* kv = kernel.data();
        for (int64_t j = 0; j < kernel.size(); ++j)
            kv[j] = static_cast<T>(rng.uniform(-bound, bound));
        model.params_.push_back(std::move(kernel));
        model.names_.push_back(l.name + ".kernel");
        model.params_.push_back(TensorT<T>::zeros({l.c_out}));
        model.names_.push_back(l.name + ".bias");
    }
    return model;
}

template <typename T>
AutoencoderT<T> AutoencoderT<T>::from_params(const AutoencoderConfig& cfg,
                                             std::vector<TensorT<T>> params) {
    AutoencoderT<T> model;
    model.cfg_ = cfg;
    model.plan_ = plan_layers(cfg);
    if (params.size() != model.plan_.size() * 2)
        throw Error(concat("expected ", model.plan_.size() * 2, " parameter tensors, got ",
                           params.size()));
    size_t idx = 0;
    for (const LayerPlan& l : model.plan_) {
        const Shape kshape = l.transpose
                                 ? Shape{l.c_in, l.kernel.t, l.c_out, l.kernel.h, l.kernel.w}
                                 : Shape{l.c_out, l.kernel.t, l.c_in, l.kernel.h, l.kernel.w};
        if (params[idx].shape() != kshape)
            throw Error(concat(l.name, ".kernel: expected shape ", shape_str(kshape), ", got ",
                               shape_str(params[idx].shape())));
        model.names_.push_back(l.name + ".kernel");
        ++idx;
        if (params[idx].shape() != Shape{l.c_out})
            throw Error(concat(l.name, ".bias: expected shape (", l.c_out, "), got ",
                               shape_str(params[idx].shape())));
        model.names_.push_back(l.name + ".bias");
        ++idx;
    }
    model.params_ = std::move(params);
    return model;
}

template <typename T>
int64_t AutoencoderT<T>::param_count() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
}

template <typename T>
TensorT<T> AutoencoderT<T>::forward(GraphT<T>* g, const TensorT<T>& x) const {
    const Shape want{-1, cfg_.window, cfg_.in_channels, cfg_.height, cfg_.width};
    if (x.ndim() != 5 || x.dim(1) != want[1] || x.dim(2) != want[2] || x.dim(3) != want[3] ||
        x.dim(4) != want[4])
        throw Error(concat("forward: input ", shape_str(x.shape()), " does not match (N,",
                           cfg_.window, ",", cfg_.in_channels, ",", cfg_.height, ",", cfg_.width,
                           ")"));
    TensorT<T> h = x;
    for (size_t i = 0; i < plan_.size(); ++i) {
        const LayerPlan& l = plan_[i];
        const TensorT<T>& kernel = params_[2 * i];
        const TensorT<T>& bias = params_[2 * i + 1];
        h = l.transpose ? conv_transpose3d(g, h, kernel, l.stride, l.pad)
                        : conv3d(g, h, kernel, l.stride, l.pad);
        h = bias_add(g, h, bias);
        h = l.final_sigmoid ? sigmoid(g, h)
                            : leaky_relu(g, h, static_cast<T>(cfg_.leaky_slope));
    }
    return h;
}

template <typename T>
TensorT<T> loss_normal(GraphT<T>* g, const TensorT<T>& xhat, const TensorT<T>& xn) {
    return mse_loss(g, xhat, xn);
}

template <typename T>
TensorT<T> loss_pseudo(GraphT<T>* g, const TensorT<T>& xhat_of_xp, const TensorT<T>& xn) {
    return mse_loss(g, xhat_of_xp, xn);
}

#define PSAE_INSTANTIATE_MODEL(T)                                                            \
    template class AutoencoderT<T>;                                                          \
    template TensorT<T> loss_normal<T>(GraphT<T>*, const TensorT<T>&, const TensorT<T>&);    \
    template TensorT<T> loss_pseudo<T>(GraphT<T>*, const TensorT<T>&, const TensorT<T>&);

PSAE_INSTANTIATE_MODEL(float)
PSAE_INSTANTIATE_MODEL(double)

#undef PSAE_INSTANTIATE_MODEL

}  // namespace psae
