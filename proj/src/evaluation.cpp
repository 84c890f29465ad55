#include "psae/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace psae {

namespace fs = std::filesystem;

namespace {

struct ClassCounts {
    int64_t pos = 0, neg = 0;
};

ClassCounts check_labeled(const std::vector<double>& scores, const std::vector<uint8_t>& labels,
                          const char* who) {
    if (scores.size() != labels.size())
        throw Error(concat(who, ": ", scores.size(), " scores vs ", labels.size(), " labels"));
    if (scores.empty()) throw Error(concat(who, ": empty input"));
    ClassCounts c;
    for (uint8_t l : labels) {
        if (l > 1) throw Error(concat(who, ": label ", static_cast<int>(l), " is not 0/1"));
        if (l) ++c.pos;
        else ++c.neg;
    }
    if (c.pos == 0 || c.neg == 0)
        throw Error(concat(who, ": both classes required (", c.pos, " positives, ", c.neg,
                           " negatives)"));
    return c;
}

}  // namespace

double roc_auc(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
    ClassCounts c = check_labeled(scores, labels, "roc_auc");
    const size_t n = scores.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });
    // average 1-based ranks within tied runs
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
        double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (size_t k = i; k < j; ++k)
            if (labels[idx[k]]) rank_sum_pos += avg_rank;
        i = j;
    }
    double p = static_cast<double>(c.pos), q = static_cast<double>(c.neg);
    return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * q);
}

std::vector<std::pair<double, double>> roc_curve(const std::vector<double>& scores,
                                                 const std::vector<uint8_t>& labels) {
    ClassCounts c = check_labeled(scores, labels, "roc_curve");
    const size_t n = scores.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](size_t a, size_t b) { return scores[a] > scores[b]; });
    std::vector<std::pair<double, double>> pts;
    pts.emplace_back(0.0, 0.0);
    int64_t tp = 0, fp = 0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[idx[j]] == scores[idx[i]]) {
            if (labels[idx[j]]) ++tp;
            else ++fp;
            ++j;
        }
        pts.emplace_back(static_cast<double>(fp) / static_cast<double>(c.neg),
                         static_cast<double>(tp) / static_cast<double>(c.pos));
        i = j;
    }
    return pts;
}

namespace {

uint8_t quantize(float v) {
    float c = std::min(1.0f, std::max(0.0f, v));
    return static_cast<uint8_t>(std::lround(c * 255.0f));
}

uint64_t hash_video(uint64_t h, const Video& v) {
    h = fnv1a64(v.id.data(), v.id.size(), h);
    int64_t dims[3] = {v.frame_count(), v.h, v.w};
    h = fnv1a64(dims, sizeof dims, h);
    if (v.has_labels && !v.labels.empty()) h = fnv1a64(v.labels.data(), v.labels.size(), h);
    std::vector<uint8_t> row;
    for (const Image& img : v.frames) {
        row.resize(img.px.size());
        for (size_t i = 0; i < img.px.size(); ++i) row[i] = quantize(img.px[i]);
        h = fnv1a64(row.data(), row.size(), h);
    }
    return h;
}

// AUC over the concatenation of the selected videos, or -1 when the subset is
// empty or single-class.
double subset_auc(const std::vector<ScoreSeries>& series, const std::vector<Video>& videos,
                  const std::vector<AnomalyKind>& kinds, AnomalyKind want) {
    std::vector<double> s;
    std::vector<uint8_t> l;
    for (size_t i = 0; i < videos.size(); ++i) {
        if (kinds[i] != want) continue;
        s.insert(s.end(), series[i].score.begin(), series[i].score.end());
        l.insert(l.end(), videos[i].labels.begin(), videos[i].labels.end());
    }
    bool pos = false, neg = false;
    for (uint8_t x : l) (x ? pos : neg) = true;
    if (!pos || !neg) return -1.0;
    return roc_auc(s, l);
}

std::string hex64(uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

EvalReport evaluate(const fs::path& ckpt_path, const fs::path& data_root, int64_t batch_size) {
    EvalReport rep;
    {
        std::ifstream f(ckpt_path, std::ios::binary);
        if (!f) throw Error(concat("cannot open checkpoint ", ckpt_path.string()));
        std::ostringstream os;
        os << f.rdbuf();
        std::string bytes = os.str();
        rep.checkpoint_hash = fnv1a64(bytes);
    }
    Checkpoint ck = load_checkpoint(ckpt_path);
    Autoencoder model = model_from_checkpoint(ck);

    Manifest man = load_manifest(data_root);
    std::vector<Video> videos = load_videos(data_root, man, Role::test, LabelPolicy::require);
    if (videos.empty()) throw Error(concat("no test videos in the manifest under ",
                                           data_root.string()));
    std::vector<AnomalyKind> kinds;
    for (const ManifestEntry& e : man.entries)
        if (e.role == Role::test) kinds.push_back(e.anomaly);

    uint64_t dh = 14695981039346656037ull;
    for (const Video& v : videos) dh = hash_video(dh, v);
    rep.dataset_hash = dh;
    rep.checkpoint_path = ckpt_path.string();
    rep.data_root = data_root.string();

    rep.hist_normal.assign(20, 0);
    rep.hist_anomalous.assign(20, 0);
    for (size_t i = 0; i < videos.size(); ++i) {
        const Video& v = videos[i];
        ScoreSeries s = score_video(model, v, batch_size);
        VideoEval ve;
        ve.video_id = v.id;
        ve.anomaly = kinds[i];
        ve.frames = v.frame_count();
        double sum_pos = 0.0, sum_neg = 0.0;
        for (size_t f = 0; f < s.score.size(); ++f) {
            uint8_t lab = v.labels[f];
            if (lab) {
                ++ve.positives;
                sum_pos += s.score[f];
            } else {
                sum_neg += s.score[f];
            }
            auto bin = static_cast<size_t>(std::min(19.0, std::floor(s.score[f] * 20.0)));
            (lab ? rep.hist_anomalous : rep.hist_normal)[bin] += 1;
        }
        int64_t negatives = ve.frames - ve.positives;
        ve.mean_score_anomalous = ve.positives ? sum_pos / static_cast<double>(ve.positives) : 0.0;
        ve.mean_score_normal = negatives ? sum_neg / static_cast<double>(negatives) : 0.0;
        ve.auc = (ve.positives > 0 && negatives > 0) ? roc_auc(s.score, v.labels) : -1.0;
        rep.all_scores.insert(rep.all_scores.end(), s.score.begin(), s.score.end());
        rep.all_labels.insert(rep.all_labels.end(), v.labels.begin(), v.labels.end());
        rep.videos.push_back(std::move(ve));
        rep.series.push_back(std::move(s));
    }
    rep.auc = roc_auc(rep.all_scores, rep.all_labels);
    rep.auc_appearance = subset_auc(rep.series, videos, kinds, AnomalyKind::appearance);
    rep.auc_motion = subset_auc(rep.series, videos, kinds, AnomalyKind::motion);
    return rep;
}

void write_report(const fs::path& dir, const EvalReport& rep) {
    fs::create_directories(dir);
    toml::Table root;
    toml::Table& res = root.subtable("result");
    res.set("auc", toml::Value::floating(rep.auc));
    res.set("frames", toml::Value::integer(static_cast<int64_t>(rep.all_labels.size())));
    int64_t positives = 0;
    for (uint8_t l : rep.all_labels) positives += l;
    res.set("positives", toml::Value::integer(positives));
    toml::Table& sub = res.subtable("subsets");
    sub.set("appearance", toml::Value::floating(rep.auc_appearance));
    sub.set("motion", toml::Value::floating(rep.auc_motion));

    toml::Table& prov = root.subtable("provenance");
    prov.set("checkpoint", toml::Value::str(rep.checkpoint_path));
    prov.set("checkpoint_hash", toml::Value::str(hex64(rep.checkpoint_hash)));
    prov.set("data_root", toml::Value::str(rep.data_root));
    prov.set("dataset_hash", toml::Value::str(hex64(rep.dataset_hash)));
    prov.set("version", toml::Value::str(kVersion));

    toml::Table& hist = root.subtable("histogram");
    hist.set("bins", toml::Value::integer(20));
    std::vector<toml::Value> hn, ha;
    for (int64_t c : rep.hist_normal) hn.push_back(toml::Value::integer(c));
    for (int64_t c : rep.hist_anomalous) ha.push_back(toml::Value::integer(c));
    hist.set("normal", toml::Value::array(std::move(hn)));
    hist.set("anomalous", toml::Value::array(std::move(ha)));

    for (const VideoEval& ve : rep.videos) {
        toml::Table& v = root.append_table("video");
        v.set("id", toml::Value::str(ve.video_id));
        v.set("anomaly", toml::Value::str(to_string(ve.anomaly)));
        v.set("frames", toml::Value::integer(ve.frames));
        v.set("positives", toml::Value::integer(ve.positives));
        v.set("auc", toml::Value::floating(ve.auc));
        v.set("mean_score_normal", toml::Value::floating(ve.mean_score_normal));
        v.set("mean_score_anomalous", toml::Value::floating(ve.mean_score_anomalous));
    }
    toml::write_file(dir / "report.toml", root);

    std::ofstream roc(dir / "roc.csv", std::ios::trunc);
    if (!roc) throw Error(concat("cannot open ", (dir / "roc.csv").string(), " for writing"));
    roc << "fpr,tpr\n";
    for (auto [fpr, tpr] : roc_curve(rep.all_scores, rep.all_labels))
        roc << format_number(fpr) << ',' << format_number(tpr) << '\n';
    if (!roc.flush()) throw Error(concat("failed writing ", (dir / "roc.csv").string()));
}

std::vector<SweepPoint> run_sweep(const TrainConfig& base, const std::string& param,
                                  const std::vector<double>& values, int64_t batch_size) {
    if (param != "p" && param != "alpha" && param != "stride")
        throw Error(concat("unknown sweep parameter '", param,
                           "' (expected p, alpha, or stride)"));
    if (values.empty()) throw Error("sweep: empty grid");
    std::vector<double> grid;
    for (double v : values)
        if (std::find(grid.begin(), grid.end(), v) == grid.end()) grid.push_back(v);

    std::vector<SweepPoint> out;
    for (double v : grid) {
        SweepPoint pt;
        pt.value = v;
        TrainConfig cfg = base;
        cfg.out_dir =
            (fs::path(base.out_dir) / concat("sweep_", param, "_", format_number(v))).string();
        pt.out_dir = cfg.out_dir;
        try {
            if (param == "p") {
                cfg.p = v;
            } else if (param == "alpha") {
                cfg.pseudo.alpha = v;
            } else {
                if (v != std::floor(v) || v < 2.0)
                    throw Error(concat("stride grid value ", v, " must be an integer > 1"));
                cfg.pseudo.skip_strides = {static_cast<int64_t>(v)};
            }
            TrainResult tr = train(cfg);
            EvalReport rep = evaluate(tr.final_checkpoint, cfg.data_root, batch_size);
            write_report(cfg.out_dir, rep);
            pt.auc = rep.auc;
            pt.ok = true;
        } catch (const Error& err) {
            pt.ok = false;
            pt.error = err.what();
        }
        out.push_back(std::move(pt));
    }
    return out;
}

void write_sweep_csv(const fs::path& path, const std::string& param,
                     const std::vector<SweepPoint>& points) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error(concat("cannot open ", path.string(), " for writing"));
    f << "param,value,auc,error\n";
    for (const SweepPoint& pt : points) {
        std::string err = pt.error;
        for (char& c : err)
            if (c == ',' || c == '\n') c = ';';
        f << param << ',' << format_number(pt.value) << ','
          << (pt.ok ? format_number(pt.auc) : std::string()) << ',' << err << '\n';
    }
    if (!f.flush()) throw Error(concat("failed writing ", path.string()));
}

}  // namespace psae
