#pragma once

#include <vector>

#include "psae/tensor.hpp"

namespace psae {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Moments are stored in f32 — exactly what checkpoints hold — so a resumed
// run replays the same trajectory bit for bit. Update arithmetic is double.
struct AdamState {
    int64_t t = 0;
    std::vector<std::vector<float>> m;
    std::vector<std::vector<float>> v;
};

// One bias-corrected update over the parameter list. Gradients are read from
// each tensor's grad buffer (missing buffer = all-zero gradient). The state
// is lazily sized on first use and must keep matching the parameter list.
void adam_step(std::vector<Tensor>& params, AdamState& state, const AdamConfig& cfg);

}  // namespace psae
