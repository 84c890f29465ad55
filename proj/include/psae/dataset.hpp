#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "psae/image.hpp"
#include "psae/tensor.hpp"

namespace psae {

struct Video {
    std::string id;
    int h = 0, w = 0;
    std::vector<Image> frames;
    std::vector<uint8_t> labels;  // 0/1 per frame, test videos only
    bool has_labels = false;
    int64_t frame_count() const { return static_cast<int64_t>(frames.size()); }
};

enum class LabelPolicy {
    ignore,           // never touch labels.txt (training)
    load_if_present,  // scoring without ground truth is fine
    require,          // evaluation needs labels
};

// Audit hook over every file the dataset layer reads; tests use it to prove
// training never opens labels or test videos.
struct AccessEvent {
    enum class Kind { frame, labels };
    Kind kind;
    std::string path;
};
void set_dataset_access_hook(std::function<void(const AccessEvent&)> hook);  // nullptr clears

// Loads frame_000000.pgm, frame_000001.pgm, ... (contiguous from 0) plus
// labels.txt per policy. The directory name becomes the video id.
Video load_video_dir(const std::filesystem::path& dir, LabelPolicy policy);

// A window of consecutive frames, pixels in [0,1], laid out (T, H, W).
struct FrameSeq {
    int64_t t = 0;
    int h = 0, w = 0;
    std::vector<float> px;

    float* frame(int64_t i) { return px.data() + i * h * w; }
    const float* frame(int64_t i) const { return px.data() + i * h * w; }
    Image image(int64_t i) const;
};

struct Window {
    int64_t start = 0;
    int64_t length = 0;
    FrameSeq frames;
    // Source index of window frame t is start + t, exactly.
    int64_t index(int64_t t) const { return start + t; }
};

Window sample_window(const Video& video, int64_t n, int64_t t);

// Stacks same-shaped windows into a (N, T, 1, H, W) batch tensor.
Tensor to_batch(const std::vector<const FrameSeq*>& seqs);

// ---------------------------------------------------------------- manifest

enum class Role { train, test };
enum class AnomalyKind { none, appearance, motion };

const char* to_string(Role r);
const char* to_string(AnomalyKind k);
Role parse_role(const std::string& s);
AnomalyKind parse_anomaly_kind(const std::string& s);

struct ManifestEntry {
    std::string dir;  // relative to the dataset root
    Role role = Role::train;
    AnomalyKind anomaly = AnomalyKind::none;
};

struct Manifest {
    std::vector<ManifestEntry> entries;
};

Manifest load_manifest(const std::filesystem::path& root);
void save_manifest(const std::filesystem::path& root, const Manifest& m);

// Loads every video of the given role, in manifest order.
std::vector<Video> load_videos(const std::filesystem::path& root, const Manifest& m, Role role,
                               LabelPolicy policy);

}  // namespace psae
