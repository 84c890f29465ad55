#pragma once

#include <cstdint>
#include <filesystem>

#include "psae/common.hpp"

namespace psae {

// Built-in synthetic benchmark: textured squares drifting 1-2 px/frame over a
// static background are "normal"; test videos add either an appearance
// anomaly (a circle with a smooth texture never seen in training) or a motion
// anomaly (a square moving 4-6 px/frame) for a labeled span of frames.
struct SynthConfig {
    int frame_h = 64;
    int frame_w = 64;
    int frames_per_video = 200;
    int train_videos = 4;
    int test_appearance_videos = 2;
    int test_motion_videos = 2;

    void validate() const;
};

// Writes train/ and test/ video directories plus manifest.toml under root.
// Fully determined by (seed, config): regenerating yields identical bytes.
void generate_synth(const std::filesystem::path& root, uint64_t seed, const SynthConfig& cfg);

}  // namespace psae
