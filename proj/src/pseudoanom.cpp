#include "psae/pseudoanom.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace psae {

const char* to_string(MaskKind k) {
    switch (k) {
        case MaskKind::smoothmix_s: return "smoothmix_s";
        case MaskKind::cutmix: return "cutmix";
        case MaskKind::smoothmix_c: return "smoothmix_c";
        case MaskKind::mixup_patch: return "mixup_patch";
    }
    return "?";
}

MaskKind parse_mask_kind(const std::string& s) {
    if (s == "smoothmix_s") return MaskKind::smoothmix_s;
    if (s == "cutmix") return MaskKind::cutmix;
    if (s == "smoothmix_c") return MaskKind::smoothmix_c;
    if (s == "mixup_patch") return MaskKind::mixup_patch;
    throw Error(concat("unknown mask kind '", s,
                       "' (expected smoothmix_s|cutmix|smoothmix_c|mixup_patch)"));
}

const char* to_string(PseudoKind k) {
    switch (k) {
        case PseudoKind::none: return "none";
        case PseudoKind::patch: return "patch";
        case PseudoKind::skip: return "skip";
    }
    return "?";
}

Image build_mask(MaskKind kind, int64_t cx, int64_t cy, int64_t sw, int64_t sh, int frame_h,
                 int frame_w, double mixup_lambda) {
    if (sw < 1 || sh < 1 || sw > frame_w || sh > frame_h)
        throw Error(concat("build_mask: size ", sw, "x", sh, " out of bounds for frame ", frame_w,
                           "x", frame_h));
    if (cx < 0 || cx >= frame_w || cy < 0 || cy >= frame_h)
        throw Error(concat("build_mask: center (", cx, ",", cy, ") outside frame ", frame_w, "x",
                           frame_h));
    if (mixup_lambda < 0.0 || mixup_lambda > 1.0)
        throw Error(concat("build_mask: lambda ", mixup_lambda, " outside [0,1]"));

    Image m(frame_h, frame_w);
    const double ex = sw / 2.0, ey = sh / 2.0;

    // raised cosine over the outer 20% of a half-extent: 1 on the core,
    // falling smoothly to 0 at the rectangle edge
    auto ramp = [](double d, double e) {
        d = std::abs(d);
        if (d > e) return 0.0;
        const double core = 0.8 * e;
        if (d <= core) return 1.0;
        return 0.5 * (1.0 + std::cos(M_PI * (d - core) / (e - core)));
    };

    const double radius = std::min(ex, ey);
    const double sigma = radius / 2.0;
    const double gfloor = std::exp(-radius * radius / (2.0 * sigma * sigma));

    // only the patch bounding box needs visiting; everything else stays 0
    const int x0 = std::max<int64_t>(0, cx - sw / 2 - 1);
    const int x1 = std::min<int64_t>(frame_w - 1, cx + sw / 2 + 1);
    const int y0 = std::max<int64_t>(0, cy - sh / 2 - 1);
    const int y1 = std::min<int64_t>(frame_h - 1, cy + sh / 2 + 1);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double dx = x - static_cast<double>(cx);
            const double dy = y - static_cast<double>(cy);
            double v = 0.0;
            switch (kind) {
                case MaskKind::smoothmix_s:
                    v = ramp(dx, ex) * ramp(dy, ey);
                    break;
                case MaskKind::cutmix:
                    v = (std::abs(dx) <= ex && std::abs(dy) <= ey) ? 1.0 : 0.0;
                    break;
                case MaskKind::smoothmix_c: {
                    const double r = std::sqrt(dx * dx + dy * dy);
                    if (r < radius) {
                        const double gauss = std::exp(-r * r / (2.0 * sigma * sigma));
                        v = (gauss - gfloor) / (1.0 - gfloor);
                    }
                    break;
                }
                case MaskKind::mixup_patch:
                    v = (std::abs(dx) <= ex && std::abs(dy) <= ey) ? mixup_lambda : 0.0;
                    break;
            }
            m.at(y, x) = static_cast<float>(v);
        }
    return m;
}

// ---------------------------------------------------------- IntruderSource

IntruderSource IntruderSource::procedural_textures() {
    IntruderSource s;
    s.kind_ = Kind::procedural_textures;
    return s;
}

IntruderSource IntruderSource::image_directory(const std::filesystem::path& dir) {
    IntruderSource s;
    s.kind_ = Kind::image_directory;
    if (!std::filesystem::is_directory(dir))
        throw Error(concat("intruder directory not found: ", dir.string()));
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".pgm")
            s.files_.push_back(entry.path());
    std::sort(s.files_.begin(), s.files_.end());
    if (s.files_.empty()) throw Error(concat("no .pgm images in ", dir.string()));
    return s;
}

IntruderSource IntruderSource::self_dataset(std::shared_ptr<const std::vector<Video>> train_videos) {
    IntruderSource s;
    s.kind_ = Kind::self_dataset;
    if (!train_videos || train_videos->empty())
        throw Error("self_dataset intruder needs a non-empty training video list");
    s.videos_ = std::move(train_videos);
    return s;
}

namespace {

Image procedural_image(Rng& rng, int h, int w, std::string* id) {
    Image img(h, w);
    const int64_t kind = rng.uniform_int(0, 2);
    if (kind == 0) {
        for (auto& v : img.px) v = static_cast<float>(rng.uniform());
        if (id) *id = "procedural:noise";
    } else if (kind == 1) {
        const float a = static_cast<float>(rng.uniform());
        const float b = static_cast<float>(rng.uniform());
        const int cell = static_cast<int>(rng.uniform_int(4, 8));
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                img.at(y, x) = ((x / cell + y / cell) % 2) ? a : b;
        if (id) *id = "procedural:checker";
    } else {
        const double theta = rng.uniform(0.0, 2.0 * M_PI);
        const double gx = std::cos(theta), gy = std::sin(theta);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double u = w > 1 ? static_cast<double>(x) / (w - 1) - 0.5 : 0.0;
                const double v = h > 1 ? static_cast<double>(y) / (h - 1) - 0.5 : 0.0;
                img.at(y, x) = static_cast<float>(std::clamp(gx * u + gy * v + 0.5, 0.0, 1.0));
            }
        if (id) *id = "procedural:gradient";
    }
    return img;
}

}  // namespace

std::vector<Image> IntruderSource::sample(Rng& rng, int64_t t, int h, int w,
                                          std::string* id) const {
    if (t < 1) throw Error("intruder sample: need at least one frame");
    std::vector<Image> frames;
    switch (kind_) {
        case Kind::procedural_textures: {
            Image img = procedural_image(rng, h, w, id);
            frames.assign(static_cast<size_t>(t), img);
            break;
        }
        case Kind::image_directory: {
            const auto& path = files_[static_cast<size_t>(
                rng.uniform_int(0, static_cast<int64_t>(files_.size()) - 1))];
            Image img = read_pgm(path);
            if (img.h != h || img.w != w) img = resize_bilinear(img, h, w);
            if (id) *id = concat("file:", path.filename().string());
            frames.assign(static_cast<size_t>(t), img);
            break;
        }
        case Kind::self_dataset: {
            const auto& vids = *videos_;
            const auto& v = vids[static_cast<size_t>(
                rng.uniform_int(0, static_cast<int64_t>(vids.size()) - 1))];
            const int64_t k = v.frame_count();
            if (k >= t) {
                const int64_t start = rng.uniform_int(0, k - t);
                for (int64_t i = 0; i < t; ++i) {
                    Image img = v.frames[static_cast<size_t>(start + i)];
                    if (img.h != h || img.w != w) img = resize_bilinear(img, h, w);
                    frames.push_back(std::move(img));
                }
                if (id) *id = concat("self:", v.id, "@", start);
            } else {
                // shorter than the window: fall back to one repeated frame
                const int64_t idx = rng.uniform_int(0, k - 1);
                Image img = v.frames[static_cast<size_t>(idx)];
                if (img.h != h || img.w != w) img = resize_bilinear(img, h, w);
                frames.assign(static_cast<size_t>(t), img);
                if (id) *id = concat("self:", v.id, "@", idx, ":still");
            }
            break;
        }
    }
    return frames;
}

// ------------------------------------------------------------- generators

PseudoAnomalySample make_patch_pseudo(const FrameSeq& xn, const IntruderSource& intruder,
                                      double alpha, int64_t beta, MaskKind mask_kind, Rng& rng) {
    const int64_t t = xn.t;
    const int h = xn.h, w = xn.w;
    if (t < 1 || h < 1 || w < 1) throw Error("make_patch_pseudo: empty window");
    if (alpha <= 0.0 || alpha > 1.0)
        throw Error(concat("make_patch_pseudo: alpha ", alpha, " outside (0,1]"));
    if (beta < 0) throw Error(concat("make_patch_pseudo: beta ", beta, " < 0"));
    const int64_t wmax = static_cast<int64_t>(alpha * w);
    const int64_t hmax = static_cast<int64_t>(alpha * h);
    if (wmax < 10 || hmax < 10)
        throw Error(concat("make_patch_pseudo: alpha*frame = ", wmax, "x", hmax,
                           " leaves no room for the minimum 10px patch"));

    // draw order (frozen): intruder pick, size, initial center, lambda
    // (mixup only), then per-frame deltas
    PseudoAnomalySample out;
    out.kind = PseudoKind::patch;
    std::vector<Image> intr = intruder.sample(rng, t, h, w, &out.patch.intruder_id);

    PatchState& st = out.patch;
    st.mask_kind = mask_kind;
    st.sw = rng.uniform_int(10, wmax);
    st.sh = rng.uniform_int(10, hmax);
    int64_t cx = rng.uniform_int(0, w - 1);
    int64_t cy = rng.uniform_int(0, h - 1);
    if (mask_kind == MaskKind::mixup_patch) st.mixup_lambda = rng.uniform(0.3, 0.7);

    out.input = xn;   // overwritten below
    out.target = xn;  // reconstruction target: the unmodified normal window
    for (int64_t i = 0; i < t; ++i) {
        int64_t dx = 0, dy = 0;
        if (i > 0) {
            dx = rng.uniform_int(-beta, beta);
            dy = rng.uniform_int(-beta, beta);
            cx = std::clamp<int64_t>(cx + dx, 0, w - 1);
            cy = std::clamp<int64_t>(cy + dy, 0, h - 1);
        }
        st.cx.push_back(cx);
        st.cy.push_back(cy);
        st.dx.push_back(dx);
        st.dy.push_back(dy);
        Image mask = build_mask(mask_kind, cx, cy, st.sw, st.sh, h, w, st.mixup_lambda);
        float* dst = out.input.frame(i);
        const float* src = xn.frame(i);
        const float* a = intr[static_cast<size_t>(i)].px.data();
        const int64_t hw = static_cast<int64_t>(h) * w;
        for (int64_t j = 0; j < hw; ++j) {
            const float m = mask.px[static_cast<size_t>(j)];
            dst[j] = (1.0f - m) * src[j] + m * a[j];
        }
        out.masks.push_back(std::move(mask));
        out.input_indices.push_back(i);
    }
    return out;
}

PseudoAnomalySample make_skip_pseudo(const Video& video, int64_t n, int64_t t, int64_t s) {
    const int64_t k = video.frame_count();
    if (s <= 1) throw Error(concat("make_skip_pseudo: stride ", s, " must be > 1"));
    if (t < 1) throw Error(concat("make_skip_pseudo: window length ", t, " < 1"));
    if (n < 0) throw Error(concat("make_skip_pseudo: negative start ", n));
    const int64_t last = n + (t - 1) * s;
    if (last >= k)
        throw Error(concat("make_skip_pseudo: needs frame ", last, " but video '", video.id,
                           "' has ", k, " frames — resample n or s"));

    PseudoAnomalySample out;
    out.kind = PseudoKind::skip;
    out.skip_stride = s;
    out.start = n;
    out.input.t = t;
    out.input.h = video.h;
    out.input.w = video.w;
    out.input.px.resize(static_cast<size_t>(t) * video.h * video.w);
    const size_t plane = static_cast<size_t>(video.h) * video.w;
    for (int64_t i = 0; i < t; ++i) {
        const int64_t src = n + i * s;
        out.input_indices.push_back(src);
        std::memcpy(out.input.frame(i), video.frames[static_cast<size_t>(src)].px.data(),
                    sizeof(float) * plane);
    }
    out.target = sample_window(video, n, t).frames;
    return out;
}

void PseudoConfig::validate() const {
    if (p < 0.0 || p > 1.0) throw Error(concat("pseudo probability p = ", p, " outside [0,1]"));
    if (p > 0.0 && !patch_enabled && !skip_enabled)
        throw Error("p > 0 but neither patch nor skip generation is enabled");
    if (patch_enabled) {
        if (alpha <= 0.0 || alpha > 1.0) throw Error(concat("alpha = ", alpha, " outside (0,1]"));
        if (beta < 0) throw Error(concat("beta = ", beta, " must be >= 0"));
    }
    if (skip_enabled) {
        if (skip_strides.empty()) throw Error("skip enabled but stride set is empty");
        for (int64_t s : skip_strides)
            if (s <= 1) throw Error(concat("skip stride ", s, " must be > 1"));
    }
}

TrainingSample sample_training_input(const Video& video, const Window& window,
                                     const PseudoConfig& cfg, const IntruderSource& intruder,
                                     Rng& rng) {
    if (cfg.p < 0.0 || cfg.p > 1.0)
        throw Error(concat("pseudo probability p = ", cfg.p, " outside [0,1]"));
    TrainingSample out;
    out.window_start = window.start;
    const bool pseudo = rng.uniform() < cfg.p;
    if (!pseudo) {
        out.input = window.frames;
        out.target = window.frames;
        out.info = "normal";
        return out;
    }

    PseudoKind kind;
    if (cfg.patch_enabled && cfg.skip_enabled)
        kind = rng.uniform_int(0, 1) == 0 ? PseudoKind::patch : PseudoKind::skip;
    else if (cfg.patch_enabled)
        kind = PseudoKind::patch;
    else if (cfg.skip_enabled)
        kind = PseudoKind::skip;
    else
        throw Error("pseudo sample drawn but no generator enabled");

    out.is_pseudo = true;
    out.kind = kind;
    if (kind == PseudoKind::patch) {
        PseudoAnomalySample ps = make_patch_pseudo(window.frames, intruder, cfg.alpha, cfg.beta,
                                                   cfg.mask_kind, rng);
        out.input = std::move(ps.input);
        out.target = std::move(ps.target);
        out.info = concat("patch mask=", to_string(cfg.mask_kind), " size=", ps.patch.sw, "x",
                          ps.patch.sh, " intruder=", ps.patch.intruder_id);
    } else {
        const int64_t s = cfg.skip_strides[static_cast<size_t>(
            rng.uniform_int(0, static_cast<int64_t>(cfg.skip_strides.size()) - 1))];
        const int64_t t = window.length;
        const int64_t n_max = video.frame_count() - 1 - (t - 1) * s;
        if (n_max < 0)
            throw Error(concat("video '", video.id, "' too short for skip stride ", s,
                               " with window ", t));
        int64_t n = window.start;
        if (n > n_max) n = rng.uniform_int(0, n_max);  // resample n, keep s
        PseudoAnomalySample ps = make_skip_pseudo(video, n, t, s);
        out.window_start = n;
        out.input = std::move(ps.input);
        out.target = std::move(ps.target);
        out.info = concat("skip s=", s, " n=", n);
    }
    return out;
}

}  // namespace psae
