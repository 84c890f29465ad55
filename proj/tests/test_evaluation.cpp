#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "psae/evaluation.hpp"

using namespace psae;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

// Brute-force pair counting: P(positive score > negative score) + 1/2 ties.
double auc_oracle(const std::vector<double>& s, const std::vector<uint8_t>& l) {
    double wins = 0.0;
    int64_t pairs = 0;
    for (size_t i = 0; i < s.size(); ++i) {
        if (!l[i]) continue;
        for (size_t j = 0; j < s.size(); ++j) {
            if (l[j]) continue;
            ++pairs;
            if (s[i] > s[j]) wins += 1.0;
            else if (s[i] == s[j]) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

fs::path fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("psae_eval_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE_MESSAGE(f.good(), "cannot open ", p.string());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

void write_video(const fs::path& dir, int frames, int h, int w, int phase,
                 const std::vector<uint8_t>* labels) {
    fs::create_directories(dir);
    for (int k = 0; k < frames; ++k) {
        Image img(h, w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                img.at(y, x) = 0.2f + 0.3f * static_cast<float>(y) / static_cast<float>(h);
        int cx = (phase + 2 * k) % (w - 4);
        int cy = (3 * phase + k) % (h - 4);
        bool anomalous = labels && (*labels)[static_cast<size_t>(k)] == 1;
        for (int y = cy; y < cy + 4; ++y)
            for (int x = cx; x < cx + 4; ++x) img.at(y, x) = anomalous ? 0.05f : 0.9f;
        char name[32];
        std::snprintf(name, sizeof name, "frame_%06d.pgm", k);
        write_pgm(dir / name, img);
    }
    if (labels) {
        std::ofstream lf(dir / "labels.txt");
        for (uint8_t l : *labels) lf << static_cast<int>(l) << "\n";
    }
}

std::vector<uint8_t> interval_labels(int frames, int lo, int hi) {
    std::vector<uint8_t> l(static_cast<size_t>(frames), 0);
    for (int k = lo; k < hi; ++k) l[static_cast<size_t>(k)] = 1;
    return l;
}

// Two train videos plus one appearance and one motion test video.
fs::path make_dataset(const std::string& tag, int frames = 20) {
    fs::path root = fresh_dir(tag);
    write_video(root / "train_a", frames, 16, 16, 1, nullptr);
    write_video(root / "train_b", frames, 16, 16, 5, nullptr);
    std::vector<uint8_t> la = interval_labels(frames, frames / 3, 2 * frames / 3);
    std::vector<uint8_t> lm = interval_labels(frames, frames / 2, frames - 2);
    write_video(root / "test_app", frames, 16, 16, 9, &la);
    write_video(root / "test_mot", frames, 16, 16, 4, &lm);
    Manifest m;
    m.entries.push_back({"train_a", Role::train, AnomalyKind::none});
    m.entries.push_back({"train_b", Role::train, AnomalyKind::none});
    m.entries.push_back({"test_app", Role::test, AnomalyKind::appearance});
    m.entries.push_back({"test_mot", Role::test, AnomalyKind::motion});
    save_manifest(root, m);
    return root;
}

TrainConfig quick_config(const fs::path& root, const fs::path& out) {
    TrainConfig cfg;
    cfg.data_root = root.string();
    cfg.window = 4;
    cfg.model.height = 16;
    cfg.model.width = 16;
    cfg.model.channels = {4, 8};
    cfg.p = 0.2;
    cfg.epochs = 1;
    cfg.steps_per_epoch = 5;
    cfg.batch_size = 2;
    cfg.adam.lr = 1e-3;
    cfg.seed = 21;
    cfg.out_dir = out.string();
    cfg.pseudo.skip_enabled = true;
    cfg.pseudo.skip_strides = {2, 3};
    return cfg;
}

}  // namespace

TEST_CASE("roc_auc reproduces the worked examples") {
    CHECK(roc_auc({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0}) == Approx(1.0));
    CHECK(roc_auc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}) == Approx(0.5));
    CHECK(roc_auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == Approx(0.75));
    CHECK(roc_auc({0.9, 0.8, 0.1, 0.2}, {0, 0, 1, 1}) == Approx(0.0));
}

TEST_CASE("roc_auc equals brute-force pair counting exactly on 100 tied instances") {
    Rng rng(101);
    for (int trial = 0; trial < 100; ++trial) {
        int64_t n = rng.uniform_int(2, 1000);
        std::vector<double> s(static_cast<size_t>(n));
        std::vector<uint8_t> l(static_cast<size_t>(n));
        // coarse score grid forces plenty of exact ties
        int64_t levels = rng.uniform_int(2, 12);
        bool saw_pos = false, saw_neg = false;
        for (int64_t i = 0; i < n; ++i) {
            s[static_cast<size_t>(i)] =
                static_cast<double>(rng.uniform_int(0, levels - 1)) / static_cast<double>(levels);
            uint8_t lab = rng.uniform() < 0.3 ? 1 : 0;
            l[static_cast<size_t>(i)] = lab;
            (lab ? saw_pos : saw_neg) = true;
        }
        if (!saw_pos) l[0] = 1;
        if (!saw_neg) l[static_cast<size_t>(n - 1)] = 0;
        if (n == 2) {
            l[0] = 1;
            l[1] = 0;
        }
        CHECK(roc_auc(s, l) == auc_oracle(s, l));
    }
}

TEST_CASE("roc_auc complement and monotone-transform invariance") {
    Rng rng(55);
    std::vector<double> s(60);
    std::vector<uint8_t> l(60);
    for (size_t i = 0; i < s.size(); ++i) {
        s[i] = rng.uniform();  // continuous: ties have probability zero
        l[i] = i % 3 == 0 ? 1 : 0;
    }
    double a = roc_auc(s, l);

    std::vector<double> neg = s;
    for (double& v : neg) v = -v;
    CHECK(roc_auc(neg, l) == Approx(1.0 - a).epsilon(1e-12));

    std::vector<double> cubed = s, expd = s;
    for (double& v : cubed) v = v * v * v;
    for (double& v : expd) v = std::exp(3.0 * v) + 2.0;
    CHECK(roc_auc(cubed, l) == a);
    CHECK(roc_auc(expd, l) == a);
}

TEST_CASE("roc_auc rejects degenerate inputs") {
    CHECK_THROWS_WITH_AS(roc_auc({0.1, 0.2}, {1, 1}), doctest::Contains("both classes"), Error);
    CHECK_THROWS_WITH_AS(roc_auc({0.1, 0.2}, {0, 0}), doctest::Contains("both classes"), Error);
    CHECK_THROWS_WITH_AS(roc_auc({}, {}), doctest::Contains("empty"), Error);
    CHECK_THROWS_WITH_AS(roc_auc({0.1}, {1, 0}), doctest::Contains("scores"), Error);
    CHECK_THROWS_WITH_AS(roc_auc({0.1, 0.2}, {0, 2}), doctest::Contains("not 0/1"), Error);
}

TEST_CASE("roc_curve is a staircase whose trapezoidal area equals roc_auc") {
    auto area = [](const std::vector<std::pair<double, double>>& pts) {
        double a = 0.0;
        for (size_t i = 1; i < pts.size(); ++i)
            a += (pts[i].first - pts[i - 1].first) * 0.5 * (pts[i].second + pts[i - 1].second);
        return a;
    };

    std::vector<std::pair<double, double>> perfect =
        roc_curve({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0});
    CHECK(perfect.front() == std::pair{0.0, 0.0});
    CHECK(perfect.back() == std::pair{1.0, 1.0});
    bool hits_corner = false;
    for (auto [f, t] : perfect) hits_corner |= (f == 0.0 && t == 1.0);
    CHECK(hits_corner);

    std::vector<std::pair<double, double>> flat = roc_curve({0.4, 0.4, 0.4}, {1, 0, 1});
    REQUIRE(flat.size() == 2);  // all tied: single diagonal jump
    CHECK(area(flat) == Approx(0.5));

    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        int64_t n = rng.uniform_int(5, 200);
        std::vector<double> s(static_cast<size_t>(n));
        std::vector<uint8_t> l(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) {
            s[static_cast<size_t>(i)] = static_cast<double>(rng.uniform_int(0, 9)) / 10.0;
            l[static_cast<size_t>(i)] = rng.uniform() < 0.4 ? 1 : 0;
        }
        l[0] = 1;
        l[static_cast<size_t>(n - 1)] = 0;
        auto pts = roc_curve(s, l);
        for (size_t i = 1; i < pts.size(); ++i) {
            CHECK(pts[i].first >= pts[i - 1].first);
            CHECK(pts[i].second >= pts[i - 1].second);
        }
        CHECK(area(pts) == Approx(roc_auc(s, l)).epsilon(1e-12));
    }
}

TEST_CASE("evaluate fills a coherent, deterministic report") {
    fs::path root = make_dataset("report");
    fs::path out = fresh_dir("report_out");
    TrainConfig cfg = quick_config(root, out);
    TrainResult tr = train(cfg);

    EvalReport rep = evaluate(tr.final_checkpoint, root);
    CHECK(rep.auc >= 0.0);
    CHECK(rep.auc <= 1.0);
    REQUIRE(rep.videos.size() == 2);
    CHECK(rep.videos[0].video_id == "test_app");
    CHECK(rep.videos[0].anomaly == AnomalyKind::appearance);
    CHECK(rep.videos[0].frames == 20);
    CHECK(rep.videos[0].positives == 7);  // frames 6..12
    CHECK(rep.videos[1].video_id == "test_mot");
    CHECK(rep.videos[1].anomaly == AnomalyKind::motion);
    CHECK(rep.videos[1].positives == 8);  // frames 10..17
    for (const VideoEval& ve : rep.videos) {
        CHECK(ve.auc >= 0.0);  // both classes present in both videos
        CHECK(ve.auc <= 1.0);
    }
    CHECK(rep.all_scores.size() == 40);
    CHECK(rep.all_labels.size() == 40);
    int64_t hist_total = 0;
    for (int64_t c : rep.hist_normal) hist_total += c;
    for (int64_t c : rep.hist_anomalous) hist_total += c;
    CHECK(hist_total == 40);
    CHECK(rep.auc_appearance >= 0.0);
    CHECK(rep.auc_motion >= 0.0);
    CHECK(rep.checkpoint_hash != 0);
    CHECK(rep.dataset_hash != 0);

    EvalReport again = evaluate(tr.final_checkpoint, root);
    CHECK(again.auc == rep.auc);
    CHECK(again.checkpoint_hash == rep.checkpoint_hash);
    CHECK(again.dataset_hash == rep.dataset_hash);
    CHECK(again.all_scores == rep.all_scores);
}

TEST_CASE("write_report emits parseable report.toml and a roc.csv staircase") {
    fs::path root = make_dataset("files");
    fs::path out = fresh_dir("files_out");
    TrainConfig cfg = quick_config(root, out);
    TrainResult tr = train(cfg);
    EvalReport rep = evaluate(tr.final_checkpoint, root);

    fs::path rdir = out / "eval";
    write_report(rdir, rep);
    toml::Table t = toml::parse_file(rdir / "report.toml");
    CHECK(t.table("result").get_float("auc") == Approx(rep.auc));
    CHECK(t.table("result").get_int("frames") == 40);
    CHECK(t.table("result").table("subsets").get_float("appearance") ==
          Approx(rep.auc_appearance));
    CHECK(t.table("provenance").get_string("checkpoint_hash").size() == 16);
    CHECK(t.table("provenance").get_string("version") == kVersion);
    REQUIRE(t.has_table_array("video"));
    CHECK(t.table_array("video").size() == 2);
    CHECK(t.table_array("video")[0].get_string("id") == "test_app");
    CHECK(t.table("histogram").get_ints("normal").size() == 20);

    std::string roc = slurp(rdir / "roc.csv");
    CHECK(roc.rfind("fpr,tpr\n", 0) == 0);
    CHECK(roc.find("1,1\n") != std::string::npos);

    // identical inputs, identical bytes
    fs::path rdir2 = out / "eval2";
    write_report(rdir2, rep);
    CHECK(slurp(rdir2 / "report.toml") == slurp(rdir / "report.toml"));
    CHECK(slurp(rdir2 / "roc.csv") == slurp(rdir / "roc.csv"));
}

TEST_CASE("evaluate requires labels and a test split") {
    fs::path root = fresh_dir("nolabels");
    write_video(root / "train_a", 12, 16, 16, 1, nullptr);
    write_video(root / "test_u", 12, 16, 16, 2, nullptr);  // no labels.txt
    Manifest m;
    m.entries.push_back({"train_a", Role::train, AnomalyKind::none});
    m.entries.push_back({"test_u", Role::test, AnomalyKind::appearance});
    save_manifest(root, m);

    fs::path out = fresh_dir("nolabels_out");
    TrainConfig cfg = quick_config(root, out);
    TrainResult tr = train(cfg);
    CHECK_THROWS_WITH_AS(evaluate(tr.final_checkpoint, root), doctest::Contains("labels"),
                         Error);

    // manifest with no test entries at all
    fs::path root2 = fresh_dir("notest");
    write_video(root2 / "train_a", 12, 16, 16, 1, nullptr);
    Manifest m2;
    m2.entries.push_back({"train_a", Role::train, AnomalyKind::none});
    save_manifest(root2, m2);
    TrainConfig cfg2 = quick_config(root2, fresh_dir("notest_out"));
    TrainResult tr2 = train(cfg2);
    CHECK_THROWS_WITH_AS(evaluate(tr2.final_checkpoint, root2),
                         doctest::Contains("no test videos"), Error);

    CHECK_THROWS_WITH_AS(evaluate(out / "missing.bin", root), doctest::Contains("checkpoint"),
                         Error);
}

TEST_CASE("sweep dedups the grid, survives bad points, and matches the baseline at p=0") {
    fs::path root = make_dataset("sweep");
    fs::path out = fresh_dir("sweep_out");
    TrainConfig base = quick_config(root, out);

    std::vector<SweepPoint> pts = run_sweep(base, "p", {0.0, 0.2, 0.2, 1.5});
    REQUIRE(pts.size() == 3);  // 0.2 deduplicated
    CHECK(pts[0].value == 0.0);
    CHECK(pts[0].ok);
    CHECK(pts[1].value == 0.2);
    CHECK(pts[1].ok);
    CHECK(pts[2].value == 1.5);
    CHECK_FALSE(pts[2].ok);
    CHECK(pts[2].error.find("outside [0,1]") != std::string::npos);

    // p = 0 sweep point reproduces a separately trained baseline's AUC: the
    // run dir differs but the training trajectory cannot.
    TrainConfig baseline = quick_config(root, fresh_dir("sweep_baseline"));
    baseline.p = 0.0;
    TrainResult tr = train(baseline);
    EvalReport rep = evaluate(tr.final_checkpoint, root);
    CHECK(pts[0].auc == rep.auc);

    fs::path csv = out / "sweep.csv";
    write_sweep_csv(csv, "p", pts);
    std::string text = slurp(csv);
    CHECK(text.rfind("param,value,auc,error\n", 0) == 0);
    CHECK(text.find("p,0,") != std::string::npos);
    CHECK(text.find("p,1.5,,") != std::string::npos);  // empty auc on failure
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);

    CHECK_THROWS_WITH_AS(run_sweep(base, "gamma", {0.1}), doctest::Contains("gamma"), Error);
    CHECK_THROWS_WITH_AS(run_sweep(base, "p", {}), doctest::Contains("empty"), Error);

    // stride sweep rejects fractional values per point but keeps going
    std::vector<SweepPoint> spts = run_sweep(base, "stride", {2.5});
    REQUIRE(spts.size() == 1);
    CHECK_FALSE(spts[0].ok);
    CHECK(spts[0].error.find("integer") != std::string::npos);
}
