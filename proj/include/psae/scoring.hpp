#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "psae/dataset.hpp"
#include "psae/image.hpp"
#include "psae/model.hpp"

namespace psae {

// Peak signal-to-noise ratio in decibels: 10*log10(M^2 / mse). The MSE is
// floored at 1e-10, so a perfect reconstruction caps out at 100 dB (M = 1).
double psnr(const Image& frame, const Image& recon, double max_value = 1.0);

// Per-video min-max normalization of a PSNR series into anomaly scores:
// s = 1 - (p - min)/(max - min), so the worst-reconstructed frame scores 1.
// A constant series maps to all zeros (least anomalous).
std::vector<double> normalize_scores(const std::vector<double>& psnr_db);

// One PSNR and one score per source frame. Sliding stride-1 windows score
// only their center frame (start + window/2); frames before the first center
// and after the last inherit the nearest computed value.
struct ScoreSeries {
    std::string video_id;
    std::vector<double> psnr_db;
    std::vector<double> score;
    int64_t center = 0;        // window starting at n scores frame n + center
    int64_t first_scored = 0;  // first frame with its own computed score
    int64_t last_scored = 0;   // last frame with its own computed score

    // Which computed frame a given frame's value comes from.
    int64_t scored_from(int64_t frame) const {
        return std::clamp(frame, first_scored, last_scored);
    }
};

// Reconstructs every stride-1 window (batched) and scores center frames.
// Never touches labels. The video must match the model geometry and be at
// least one window long.
ScoreSeries score_video(const Autoencoder& model, const Video& video, int64_t batch_size = 8);

// Per-pixel squared reconstruction error, min-max normalized to [0,1].
// Constant error (including a perfect reconstruction) maps to all zeros.
Image heatmap(const Image& frame, const Image& recon);

// One heatmap per computed (center) frame, aligned with ScoreSeries: entry i
// belongs to source frame first_scored + i.
std::vector<Image> video_heatmaps(const Autoencoder& model, const Video& video,
                                  int64_t batch_size = 8);

// heat_%06d.pgm named by source frame index, starting at first_frame_idx.
void write_heatmaps(const std::filesystem::path& dir, const std::vector<Image>& heatmaps,
                    int64_t first_frame_idx);

// CSV with header video_id,frame_idx,psnr_db,score — one row per frame.
void write_scores_csv(const std::filesystem::path& path,
                      const std::vector<ScoreSeries>& series);

}  // namespace psae
