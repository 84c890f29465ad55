#include "psae/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "psae/dataset.hpp"
#include "psae/image.hpp"

namespace psae {

namespace {

constexpr int kSpriteMin = 6;

struct Sprite {
    bool circle = false;
    int size = 0;
    std::vector<float> tex;  // size x size tile, moves with the sprite
    double x = 0, y = 0;     // top-left corner
    double vx = 0, vy = 0;
};

// Training sprites get hard-edged cell patterns; the appearance intruder gets
// a smooth radial ramp instead — novel to the training set, but low-frequency,
// so a well-trained autoencoder has no trouble reproducing it. That keeps the
// baseline from flagging it as unreconstructible noise would be.
enum class TexKind { pattern, radial };

std::vector<float> make_texture(Rng& rng, int size, TexKind kind) {
    std::vector<float> tex(static_cast<size_t>(size) * size);
    if (kind == TexKind::radial) {
        const float center = static_cast<float>(rng.uniform(0.7, 0.95));
        const float edge = static_cast<float>(rng.uniform(0.35, 0.55));
        const double c = (size - 1) / 2.0;
        const double r = size / 2.0;
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const double d = std::sqrt((x - c) * (x - c) + (y - c) * (y - c)) / r;
                tex[static_cast<size_t>(y) * size + x] =
                    center + (edge - center) * static_cast<float>(std::min(1.0, d));
            }
        return tex;
    }
    const float a = static_cast<float>(rng.uniform(0.55, 0.9));
    const float b = static_cast<float>(rng.uniform(0.05, 0.35));
    const int cell = static_cast<int>(rng.uniform_int(2, 4));
    const int64_t cells = rng.uniform_int(0, 2);  // checker / h-stripes / v-stripes
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            int parity;
            if (cells == 0)
                parity = (x / cell + y / cell) % 2;
            else if (cells == 1)
                parity = (y / cell) % 2;
            else
                parity = (x / cell) % 2;
            tex[static_cast<size_t>(y) * size + x] = parity ? a : b;
        }
    return tex;
}

double signed_speed(Rng& rng, int lo, int hi) {
    const double mag = static_cast<double>(rng.uniform_int(lo, hi));
    return rng.uniform_int(0, 1) ? mag : -mag;
}

Sprite make_sprite(Rng& rng, int frame_h, int frame_w, bool circle, TexKind tex, int speed_lo,
                   int speed_hi) {
    Sprite s;
    s.circle = circle;
    const int hi = std::max(kSpriteMin, static_cast<int>(std::lround(0.25 * std::min(frame_h, frame_w))));
    s.size = static_cast<int>(rng.uniform_int(kSpriteMin, hi));
    s.tex = make_texture(rng, s.size, tex);
    s.x = rng.uniform(0.0, static_cast<double>(frame_w - s.size));
    s.y = rng.uniform(0.0, static_cast<double>(frame_h - s.size));
    s.vx = signed_speed(rng, speed_lo, speed_hi);
    s.vy = signed_speed(rng, speed_lo, speed_hi);
    return s;
}

void step_sprite(Sprite& s, int frame_h, int frame_w) {
    s.x += s.vx;
    s.y += s.vy;
    const double xmax = frame_w - s.size, ymax = frame_h - s.size;
    if (s.x < 0) {
        s.x = -s.x;
        s.vx = -s.vx;
    }
    if (s.x > xmax) {
        s.x = 2 * xmax - s.x;
        s.vx = -s.vx;
    }
    if (s.y < 0) {
        s.y = -s.y;
        s.vy = -s.vy;
    }
    if (s.y > ymax) {
        s.y = 2 * ymax - s.y;
        s.vy = -s.vy;
    }
}

void render_sprite(Image& frame, const Sprite& s) {
    const int ix = static_cast<int>(std::lround(s.x));
    const int iy = static_cast<int>(std::lround(s.y));
    const double c = (s.size - 1) / 2.0;
    const double r2 = (s.size / 2.0) * (s.size / 2.0);
    for (int dy = 0; dy < s.size; ++dy)
        for (int dx = 0; dx < s.size; ++dx) {
            if (s.circle && ((dx - c) * (dx - c) + (dy - c) * (dy - c)) > r2) continue;
            const int y = iy + dy, x = ix + dx;
            if (y < 0 || y >= frame.h || x < 0 || x >= frame.w) continue;
            frame.at(y, x) = s.tex[static_cast<size_t>(dy) * s.size + dx];
        }
}

struct GeneratedVideo {
    std::vector<Image> frames;
    std::vector<uint8_t> labels;  // empty for train videos
};

GeneratedVideo make_video(Rng& rng, const SynthConfig& cfg, AnomalyKind anomaly) {
    const int H = cfg.frame_h, W = cfg.frame_w, K = cfg.frames_per_video;

    Image bg(H, W);
    const float base = static_cast<float>(rng.uniform(0.15, 0.3));
    const float gx = static_cast<float>(rng.uniform(-0.1, 0.1));
    const float gy = static_cast<float>(rng.uniform(-0.1, 0.1));
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            bg.at(y, x) = std::clamp(
                base + gx * (static_cast<float>(x) / (W - 1) - 0.5f) +
                    gy * (static_cast<float>(y) / (H - 1) - 0.5f),
                0.0f, 1.0f);

    std::vector<Sprite> sprites;
    const int64_t count = rng.uniform_int(1, 3);
    for (int64_t i = 0; i < count; ++i)
        sprites.push_back(make_sprite(rng, H, W, false, TexKind::pattern, 1, 2));

    GeneratedVideo out;
    Sprite intruder;
    int t0 = 0, t1 = 0;
    if (anomaly != AnomalyKind::none) {
        t0 = static_cast<int>(rng.uniform_int(std::lround(0.10 * K), std::lround(0.30 * K)));
        const int len =
            static_cast<int>(rng.uniform_int(std::lround(0.25 * K), std::lround(0.45 * K)));
        t1 = std::min(K, t0 + len);
        if (anomaly == AnomalyKind::appearance)
            intruder = make_sprite(rng, H, W, true, TexKind::radial, 1, 2);  // novel look, normal speed
        else
            intruder = make_sprite(rng, H, W, false, TexKind::pattern, 4, 6);  // normal look, anomalous speed
        out.labels.assign(static_cast<size_t>(K), 0);
        for (int k = t0; k < t1; ++k) out.labels[static_cast<size_t>(k)] = 1;
    }

    for (int k = 0; k < K; ++k) {
        Image frame = bg;
        for (auto& s : sprites) render_sprite(frame, s);
        const bool intruding = anomaly != AnomalyKind::none && k >= t0 && k < t1;
        if (intruding) render_sprite(frame, intruder);
        out.frames.push_back(std::move(frame));
        for (auto& s : sprites) step_sprite(s, H, W);
        if (intruding) step_sprite(intruder, H, W);
    }
    return out;
}

void write_video_dir(const std::filesystem::path& dir, const GeneratedVideo& v) {
    std::filesystem::create_directories(dir);
    char name[32];
    for (size_t i = 0; i < v.frames.size(); ++i) {
        std::snprintf(name, sizeof(name), "frame_%06zu.pgm", i);
        write_pgm(dir / name, v.frames[i]);
    }
    if (!v.labels.empty()) {
        std::ofstream out(dir / "labels.txt", std::ios::binary);
        if (!out) throw Error(concat("cannot write labels in ", dir.string()));
        for (uint8_t l : v.labels) out << (l ? "1\n" : "0\n");
    }
}

}  // namespace

void SynthConfig::validate() const {
    const int min_dim = std::min(frame_h, frame_w);
    const int sprite_hi = static_cast<int>(std::lround(0.25 * min_dim));
    if (sprite_hi < kSpriteMin)
        throw Error(concat("frame size ", frame_w, "x", frame_h,
                           " too small for sprites: need min dimension >= ", 4 * kSpriteMin));
    if (frames_per_video < 40)
        throw Error(concat("frames_per_video = ", frames_per_video,
                           " too short (need >= 40 for windows and anomaly spans)"));
    if (train_videos < 1) throw Error("need at least one training video");
    if (test_appearance_videos < 0 || test_motion_videos < 0)
        throw Error("test video counts must be >= 0");
}

void generate_synth(const std::filesystem::path& root, uint64_t seed, const SynthConfig& cfg) {
    cfg.validate();
    std::filesystem::create_directories(root);
    Manifest manifest;
    char name[32];
    uint64_t stream = 0;

    for (int i = 0; i < cfg.train_videos; ++i) {
        Rng rng(derive_stream(seed, stream++));
        std::snprintf(name, sizeof(name), "vid_%03d", i);
        const std::string rel = std::string("train/") + name;
        write_video_dir(root / rel, make_video(rng, cfg, AnomalyKind::none));
        manifest.entries.push_back({rel, Role::train, AnomalyKind::none});
    }
    int test_idx = 0;
    for (int i = 0; i < cfg.test_appearance_videos; ++i) {
        Rng rng(derive_stream(seed, stream++));
        std::snprintf(name, sizeof(name), "vid_%03d", test_idx++);
        const std::string rel = std::string("test/") + name;
        write_video_dir(root / rel, make_video(rng, cfg, AnomalyKind::appearance));
        manifest.entries.push_back({rel, Role::test, AnomalyKind::appearance});
    }
    for (int i = 0; i < cfg.test_motion_videos; ++i) {
        Rng rng(derive_stream(seed, stream++));
        std::snprintf(name, sizeof(name), "vid_%03d", test_idx++);
        const std::string rel = std::string("test/") + name;
        write_video_dir(root / rel, make_video(rng, cfg, AnomalyKind::motion));
        manifest.entries.push_back({rel, Role::test, AnomalyKind::motion});
    }
    save_manifest(root, manifest);
}

}  // namespace psae
