#include "psae/scoring.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace psae {

namespace fs = std::filesystem;

double psnr(const Image& frame, const Image& recon, double max_value) {
    if (frame.h != recon.h || frame.w != recon.w)
        throw Error(concat("psnr: shape mismatch, ", frame.w, "x", frame.h, " vs ", recon.w, "x",
                           recon.h));
    if (frame.px.empty()) throw Error("psnr: empty frame");
    double sum = 0.0;
    for (size_t i = 0; i < frame.px.size(); ++i) {
        double d = static_cast<double>(frame.px[i]) - static_cast<double>(recon.px[i]);
        sum += d * d;
    }
    double mse = sum / static_cast<double>(frame.px.size());
    mse = std::max(mse, 1e-10);
    return 10.0 * std::log10(max_value * max_value / mse);
}

std::vector<double> normalize_scores(const std::vector<double>& psnr_db) {
    if (psnr_db.empty()) throw Error("normalize_scores: empty series");
    double lo = psnr_db[0], hi = psnr_db[0];
    for (double p : psnr_db) {
        lo = std::min(lo, p);
        hi = std::max(hi, p);
    }
    std::vector<double> s(psnr_db.size(), 0.0);
    if (hi == lo) return s;  // constant series: nothing stands out
    for (size_t i = 0; i < s.size(); ++i) s[i] = 1.0 - (psnr_db[i] - lo) / (hi - lo);
    return s;
}

namespace {

// Runs every stride-1 window through the model in batches and hands each
// window's original center frame and its reconstruction to `visit`, in order.
template <typename Fn>
void for_each_center(const Autoencoder& model, const Video& video, int64_t batch_size,
                     Fn&& visit) {
    const AutoencoderConfig& mc = model.config();
    const int64_t t = mc.window;
    const int64_t k = video.frame_count();
    if (batch_size < 1) throw Error(concat("batch_size must be >= 1, got ", batch_size));
    if (video.h != mc.height || video.w != mc.width)
        throw Error(concat("video '", video.id, "' is ", video.w, "x", video.h,
                           " but the model expects ", mc.width, "x", mc.height));
    if (k < t)
        throw Error(concat("video '", video.id, "' has ", k, " frames, shorter than the ", t,
                           "-frame window"));
    const int64_t center = t / 2;
    const int64_t nwin = k - t + 1;
    const int64_t hw = static_cast<int64_t>(video.h) * video.w;
    for (int64_t base = 0; base < nwin; base += batch_size) {
        const int64_t nb = std::min(batch_size, nwin - base);
        std::vector<Window> wins;
        wins.reserve(static_cast<size_t>(nb));
        std::vector<const FrameSeq*> ptrs;
        ptrs.reserve(static_cast<size_t>(nb));
        for (int64_t i = 0; i < nb; ++i) {
            wins.push_back(sample_window(video, base + i, t));
            ptrs.push_back(&wins.back().frames);
        }
        Tensor x = to_batch(ptrs);
        Tensor y = model.forward(nullptr, x);
        const float* out = y.data();
        for (int64_t i = 0; i < nb; ++i) {
            Image recon(video.h, video.w);
            const float* src = out + (i * t + center) * hw;
            std::copy(src, src + hw, recon.px.begin());
            visit(base + i, video.frames[static_cast<size_t>(base + i + center)], recon);
        }
    }
}

}  // namespace

ScoreSeries score_video(const Autoencoder& model, const Video& video, int64_t batch_size) {
    const int64_t t = model.config().window;
    const int64_t k = video.frame_count();
    const int64_t center = t / 2;
    const int64_t nwin = k - t + 1;
    std::vector<double> computed(static_cast<size_t>(std::max<int64_t>(nwin, 0)), 0.0);
    for_each_center(model, video, batch_size,
                    [&](int64_t win, const Image& orig, const Image& recon) {
                        computed[static_cast<size_t>(win)] = psnr(orig, recon);
                    });

    ScoreSeries out;
    out.video_id = video.id;
    out.center = center;
    out.first_scored = center;
    out.last_scored = nwin - 1 + center;
    out.psnr_db.resize(static_cast<size_t>(k));
    for (int64_t f = 0; f < k; ++f)
        out.psnr_db[static_cast<size_t>(f)] =
            computed[static_cast<size_t>(out.scored_from(f) - center)];
    out.score = normalize_scores(out.psnr_db);
    return out;
}

Image heatmap(const Image& frame, const Image& recon) {
    if (frame.h != recon.h || frame.w != recon.w)
        throw Error(concat("heatmap: shape mismatch, ", frame.w, "x", frame.h, " vs ", recon.w,
                           "x", recon.h));
    Image out(frame.h, frame.w);
    float lo = 0.0f, hi = 0.0f;
    for (size_t i = 0; i < out.px.size(); ++i) {
        float d = frame.px[i] - recon.px[i];
        out.px[i] = d * d;
        if (i == 0) lo = hi = out.px[i];
        lo = std::min(lo, out.px[i]);
        hi = std::max(hi, out.px[i]);
    }
    if (hi == lo) {
        std::fill(out.px.begin(), out.px.end(), 0.0f);
        return out;
    }
    for (float& v : out.px) v = (v - lo) / (hi - lo);
    return out;
}

std::vector<Image> video_heatmaps(const Autoencoder& model, const Video& video,
                                  int64_t batch_size) {
    std::vector<Image> heats;
    heats.reserve(static_cast<size_t>(
        std::max<int64_t>(video.frame_count() - model.config().window + 1, 0)));
    for_each_center(model, video, batch_size,
                    [&](int64_t, const Image& orig, const Image& recon) {
                        heats.push_back(heatmap(orig, recon));
                    });
    return heats;
}

void write_heatmaps(const fs::path& dir, const std::vector<Image>& heatmaps,
                    int64_t first_frame_idx) {
    fs::create_directories(dir);
    for (size_t i = 0; i < heatmaps.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "heat_%06lld.pgm",
                      static_cast<long long>(first_frame_idx + static_cast<int64_t>(i)));
        write_pgm(dir / name, heatmaps[i]);
    }
}

void write_scores_csv(const fs::path& path, const std::vector<ScoreSeries>& series) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error(concat("cannot open ", path.string(), " for writing"));
    f << "video_id,frame_idx,psnr_db,score\n";
    for (const ScoreSeries& s : series) {
        if (s.psnr_db.size() != s.score.size())
            throw Error(concat("score series '", s.video_id, "' has ", s.psnr_db.size(),
                               " psnr values but ", s.score.size(), " scores"));
        for (size_t i = 0; i < s.psnr_db.size(); ++i)
            f << s.video_id << ',' << i << ',' << format_number(s.psnr_db[i]) << ','
              << format_number(s.score[i]) << '\n';
    }
    if (!f.flush()) throw Error(concat("failed writing ", path.string()));
}

}  // namespace psae
