#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "psae/dataset.hpp"
#include "psae/image.hpp"

namespace psae {

enum class MaskKind { smoothmix_s, cutmix, smoothmix_c, mixup_patch };
const char* to_string(MaskKind k);
MaskKind parse_mask_kind(const std::string& s);

// Blend mask in [0,1]: zero outside the patch bounding region, value 1 at the
// center (the blend weight lambda for mixup_patch). Masks clip at frame edges.
Image build_mask(MaskKind kind, int64_t cx, int64_t cy, int64_t sw, int64_t sh, int frame_h,
                 int frame_w, double mixup_lambda = 0.5);

// Where intruding patch content comes from: seeded procedural textures, a
// directory of grayscale images, or clips from the training videos themselves.
class IntruderSource {
public:
    enum class Kind { procedural_textures, image_directory, self_dataset };

    static IntruderSource procedural_textures();
    static IntruderSource image_directory(const std::filesystem::path& dir);
    static IntruderSource self_dataset(std::shared_ptr<const std::vector<Video>> train_videos);

    Kind kind() const { return kind_; }

    // T full frames at (h,w), pixels in [0,1]. Still sources repeat one image
    // across all T frames; self_dataset aligns intruder frame t with input
    // frame t. `id` gets a human-readable description of the pick.
    std::vector<Image> sample(Rng& rng, int64_t t, int h, int w, std::string* id) const;

private:
    Kind kind_ = Kind::procedural_textures;
    std::vector<std::filesystem::path> files_;
    std::shared_ptr<const std::vector<Video>> videos_;
};

// The moving-patch state: per-frame centers after the random walk, the patch
// size, and what was blended in.
struct PatchState {
    int64_t sw = 0, sh = 0;
    std::vector<int64_t> cx, cy;  // per-frame centers, clamped to the frame
    std::vector<int64_t> dx, dy;  // per-frame deltas (index 0 is zero)
    MaskKind mask_kind = MaskKind::smoothmix_s;
    double mixup_lambda = 0.5;
    std::string intruder_id;
};

enum class PseudoKind { none, patch, skip };
const char* to_string(PseudoKind k);

struct PseudoAnomalySample {
    FrameSeq input;   // X^P
    FrameSeq target;  // the temporally consistent normal window
    PseudoKind kind = PseudoKind::none;
    // patch metadata
    PatchState patch;
    std::vector<Image> masks;  // per-frame blend masks
    // skip metadata
    int64_t skip_stride = 0;
    int64_t start = 0;
    std::vector<int64_t> input_indices;  // source frame index per input frame
};

// Overlays intruder content on every frame of a normal window through a
// moving mask: size uniform in [10, alpha*W] x [10, alpha*H], initial center
// uniform over the frame, then a per-frame random walk with steps uniform in
// {-beta..beta}, clamped at the borders. The intruder content is re-cropped
// at the moved center each frame (the full-frame intruder image is blended
// through the moving mask).
PseudoAnomalySample make_patch_pseudo(const FrameSeq& xn, const IntruderSource& intruder,
                                      double alpha, int64_t beta, MaskKind mask_kind, Rng& rng);

// Skip-frame pseudo anomaly: input frames at n, n+s, ..., n+(T-1)s; target is
// the consecutive window starting at the same n. Deterministic — no sampling
// happens here, so there is no generator parameter.
PseudoAnomalySample make_skip_pseudo(const Video& video, int64_t n, int64_t t, int64_t s);

struct PseudoConfig {
    double p = 0.2;  // probability a training sample is a pseudo anomaly
    bool patch_enabled = false;
    double alpha = 0.5;
    int64_t beta = 10;
    MaskKind mask_kind = MaskKind::smoothmix_s;
    bool skip_enabled = false;
    std::vector<int64_t> skip_strides = {2, 3, 4, 5};

    void validate() const;
};

struct TrainingSample {
    FrameSeq input;
    FrameSeq target;
    bool is_pseudo = false;
    PseudoKind kind = PseudoKind::none;
    int64_t window_start = 0;
    std::string info;  // diagnostics: what was generated
};

// Bernoulli(p) routing: with probability p the window is replaced by a pseudo
// anomaly (patch or skip, uniform when both are enabled) whose target stays
// the normal window; otherwise input == target == the normal window. When a
// skip draw would run past the end of the video, the start n is resampled
// (keeping s) from the valid range.
TrainingSample sample_training_input(const Video& video, const Window& window,
                                     const PseudoConfig& cfg, const IntruderSource& intruder,
                                     Rng& rng);

}  // namespace psae
