#include "psae/adam.hpp"

#include <cmath>

namespace psae {

void adam_step(std::vector<Tensor>& params, AdamState& state, const AdamConfig& cfg) {
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(static_cast<size_t>(params[i].size()), 0.0f);
            state.v[i].assign(static_cast<size_t>(params[i].size()), 0.0f);
        }
    }
    if (state.m.size() != params.size())
        throw Error(concat("adam_step: state holds ", state.m.size(), " slots for ",
                           params.size(), " params"));

    state.t += 1;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));

    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i];
        if (state.m[i].size() != static_cast<size_t>(p.size()))
            throw Error(concat("adam_step: state slot ", i, " sized ", state.m[i].size(),
                               ", param has ", p.size(), " elements"));
        float* pv = p.data();
        const bool has_grad = p.grad_allocated();
        const float* gv = has_grad ? p.grad_vec().data() : nullptr;
        float* m = state.m[i].data();
        float* v = state.v[i].data();
        const int64_t n = p.size();
        for (int64_t j = 0; j < n; ++j) {
            const double g = has_grad ? static_cast<double>(gv[j]) : 0.0;
            const double mj = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
            const double vj = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
            m[j] = static_cast<float>(mj);
            v[j] = static_cast<float>(vj);
            // the f32-stored moment is the one that persists, so the update
            // must read it back — not the double intermediate — or a resumed
            // run would diverge from an uninterrupted one
            const double mhat = static_cast<double>(m[j]) / c1;
            const double vhat = static_cast<double>(v[j]) / c2;
            pv[j] = static_cast<float>(static_cast<double>(pv[j]) -
                                       cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
    }
}

}  // namespace psae
