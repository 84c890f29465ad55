#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "psae/dataset.hpp"
#include "psae/scoring.hpp"
#include "psae/trainer.hpp"

namespace psae {

// Exact rank-statistic AUC with average ranks for ties (a tie counts 1/2):
// equal to the probability that a random positive outranks a random negative.
// Both classes must be present.
double roc_auc(const std::vector<double>& scores, const std::vector<uint8_t>& labels);

// Staircase ROC as (fpr, tpr) points from (0,0) to (1,1), one step per
// distinct score; tied scores move diagonally in a single step. The
// trapezoidal area under these points equals roc_auc exactly.
std::vector<std::pair<double, double>> roc_curve(const std::vector<double>& scores,
                                                 const std::vector<uint8_t>& labels);

struct VideoEval {
    std::string video_id;
    AnomalyKind anomaly = AnomalyKind::none;
    int64_t frames = 0;
    int64_t positives = 0;
    double auc = -1.0;  // -1 when the video holds a single class
    double mean_score_normal = 0.0;
    double mean_score_anomalous = 0.0;
};

struct EvalReport {
    double auc = 0.0;              // headline: all test frames concatenated
    double auc_appearance = -1.0;  // anomaly-kind subsets; -1 when absent
    double auc_motion = -1.0;
    std::vector<VideoEval> videos;
    std::vector<int64_t> hist_normal;  // score histograms, 20 bins over [0,1]
    std::vector<int64_t> hist_anomalous;
    uint64_t checkpoint_hash = 0;  // fnv1a64 of the checkpoint file bytes
    uint64_t dataset_hash = 0;     // fnv1a64 over ids, labels, quantized pixels
    std::string checkpoint_path;
    std::string data_root;
    // concatenated per-frame data in manifest order — feeds roc.csv and tests
    std::vector<double> all_scores;
    std::vector<uint8_t> all_labels;
    std::vector<ScoreSeries> series;
};

// Scores every test-role video with the checkpointed model (labels required),
// concatenates, and fills the report. Deterministic for fixed inputs.
EvalReport evaluate(const std::filesystem::path& ckpt_path,
                    const std::filesystem::path& data_root, int64_t batch_size = 8);

// Writes report.toml and roc.csv (fpr,tpr) into dir.
void write_report(const std::filesystem::path& dir, const EvalReport& report);

struct SweepPoint {
    double value = 0.0;
    double auc = -1.0;
    bool ok = false;
    std::string error;    // failure message when !ok
    std::string out_dir;  // where this point trained/evaluated
};

// Trains and evaluates one run per grid value of `param` — "p" ([train].p),
// "alpha" (patch size bound), or "stride" (single skip stride). Duplicate
// grid values collapse to one run; a failing point records its error and the
// sweep continues. Each point lands under base.out_dir/sweep_<param>_<value>.
std::vector<SweepPoint> run_sweep(const TrainConfig& base, const std::string& param,
                                  const std::vector<double>& values, int64_t batch_size = 8);

// CSV with header param,value,auc,error — auc empty for failed points.
void write_sweep_csv(const std::filesystem::path& path, const std::string& param,
                     const std::vector<SweepPoint>& points);

}  // namespace psae
