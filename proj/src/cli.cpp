#include "psae/cli.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "psae/checkpoint.hpp"
#include "psae/common.hpp"
#include "psae/dataset.hpp"
#include "psae/evaluation.hpp"
#include "psae/pseudoanom.hpp"
#include "psae/scoring.hpp"
#include "psae/synth.hpp"
#include "psae/trainer.hpp"

namespace fs = std::filesystem;

namespace psae {
namespace {

std::string quote_arg(const std::string& a) {
    if (!a.empty() && a.find_first_of(" \t\"'") == std::string::npos) return a;
    std::string q = "\"";
    for (char c : a) {
        if (c == '"' || c == '\\') q += '\\';
        q += c;
    }
    q += '"';
    return q;
}

std::string command_line(const std::vector<std::string>& args) {
    std::string line = "psae";
    for (const std::string& a : args) {
        line += ' ';
        line += quote_arg(a);
    }
    return line;
}

// Every command drops provenance.toml next to its outputs: the exact command
// line, the version, and a config snapshot sufficient to re-run it.
void write_provenance(const fs::path& dir, const std::string& command, const std::string& argv_line,
                      toml::Table config) {
    fs::create_directories(dir);
    toml::Table root;
    toml::Table& p = root.subtable("provenance");
    p.set("command", toml::Value::str(command));
    p.set("version", toml::Value::str(kVersion));
    p.set("args", toml::Value::str(argv_line));
    root.subtable("config") = std::move(config);
    toml::write_file(dir / "provenance.toml", root);
}

bool dir_nonempty(const fs::path& p) {
    std::error_code ec;
    if (!fs::is_directory(p, ec)) return false;
    return fs::directory_iterator(p, ec) != fs::directory_iterator();
}

// ------------------------------------------------------------------- synth

struct SynthArgs {
    std::string out;
    uint64_t seed = 0;
    int frames = 200;
    int videos = 4;
    int size = 64;
    bool force = false;
};

void cmd_synth(const SynthArgs& a, const std::string& argv_line) {
    SynthConfig sc;
    sc.frame_h = a.size;
    sc.frame_w = a.size;
    sc.frames_per_video = a.frames;
    sc.train_videos = a.videos;
    sc.validate();

    fs::path out = a.out;
    if (dir_nonempty(out)) {
        if (!a.force) throw Error(concat("output directory ", out.string(), " is not empty (pass --force to regenerate)"));
        fs::remove_all(out);
    }
    generate_synth(out, a.seed, sc);

    toml::Table cfg;
    cfg.set("seed", toml::Value::integer(static_cast<int64_t>(a.seed)));
    cfg.set("frames", toml::Value::integer(a.frames));
    cfg.set("train_videos", toml::Value::integer(a.videos));
    cfg.set("test_appearance_videos", toml::Value::integer(sc.test_appearance_videos));
    cfg.set("test_motion_videos", toml::Value::integer(sc.test_motion_videos));
    cfg.set("size", toml::Value::integer(a.size));
    write_provenance(out, "synth", argv_line, std::move(cfg));

    std::cout << "wrote " << (a.videos + sc.test_appearance_videos + sc.test_motion_videos)
              << " videos (" << a.videos << " train, " << sc.test_appearance_videos << "+"
              << sc.test_motion_videos << " test) under " << out.string() << "\n";
}

// ------------------------------------------------------------- preview-aug

struct PreviewArgs {
    std::string data;
    std::string out;
    std::string kind = "patch";
    uint64_t seed = 0;
    int count = 3;
    int64_t window = 8;
    double alpha = 0.5;
    int64_t beta = 10;
    std::string mask = "smoothmix_s";
    int64_t stride = 2;
    std::string intruder = "procedural";
    std::string intruder_dir;
};

void write_frames(const fs::path& dir, const char* stem, const FrameSeq& seq) {
    for (int64_t t = 0; t < seq.t; ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "%s_%02" PRId64 ".pgm", stem, t);
        write_pgm(dir / name, seq.image(t));
    }
}

void cmd_preview(const PreviewArgs& a, const std::string& argv_line) {
    if (a.count < 1) throw Error("--count must be >= 1");
    if (a.window < 2) throw Error("--window must be >= 2");
    if (a.kind == "skip" && a.stride < 2) throw Error("--stride must be > 1");

    Manifest man = load_manifest(a.data);
    auto videos = std::make_shared<std::vector<Video>>(
        load_videos(a.data, man, Role::train, LabelPolicy::ignore));
    if (videos->empty()) throw Error(concat("no training videos in the manifest under ", a.data));

    IntruderSource src = IntruderSource::procedural_textures();
    if (a.kind == "patch") {
        if (a.intruder == "directory") {
            if (a.intruder_dir.empty()) throw Error("--intruder directory needs --intruder-dir");
            src = IntruderSource::image_directory(a.intruder_dir);
        } else if (a.intruder == "self") {
            src = IntruderSource::self_dataset(videos);
        }
        MaskKind mk = parse_mask_kind(a.mask);
        if (a.alpha <= 0.0 || a.alpha > 1.0) throw Error(concat("--alpha ", format_number(a.alpha), " outside (0,1]"));
        if (a.beta < 0) throw Error("--beta must be >= 0");
        (void)mk;
    }

    fs::create_directories(a.out);
    for (int i = 0; i < a.count; ++i) {
        // One private stream per sample index, same scheme as training.
        Rng rng(derive_stream(a.seed, static_cast<uint64_t>(i)));
        const Video& v = (*videos)[static_cast<size_t>(
            rng.uniform_int(0, static_cast<int64_t>(videos->size()) - 1))];

        PseudoAnomalySample ps;
        if (a.kind == "patch") {
            if (v.frame_count() < a.window)
                throw Error(concat("video ", v.id, " is shorter than the ", a.window, "-frame window"));
            int64_t n = rng.uniform_int(0, v.frame_count() - a.window);
            Window win = sample_window(v, n, a.window);
            ps = make_patch_pseudo(win.frames, src, a.alpha, a.beta, parse_mask_kind(a.mask), rng);
        } else {
            int64_t last = v.frame_count() - 1 - (a.window - 1) * a.stride;
            if (last < 0)
                throw Error(concat("video ", v.id, " is too short for skip stride ", a.stride,
                                   " with a ", a.window, "-frame window"));
            int64_t n = rng.uniform_int(0, last);
            ps = make_skip_pseudo(v, n, a.window, a.stride);
        }

        char sub[32];
        std::snprintf(sub, sizeof(sub), "sample_%03d", i);
        fs::path dir = fs::path(a.out) / sub;
        fs::create_directories(dir);
        write_frames(dir, "input", ps.input);
        write_frames(dir, "target", ps.target);
        for (size_t t = 0; t < ps.masks.size(); ++t) {
            char name[32];
            std::snprintf(name, sizeof(name), "mask_%02zu.pgm", t);
            write_pgm(dir / name, ps.masks[t]);
        }

        std::cout << sub << ": video=" << v.id;
        if (ps.kind == PseudoKind::patch) {
            std::cout << " patch mask=" << a.mask << " size=" << ps.patch.sw << "x" << ps.patch.sh
                      << " intruder=" << ps.patch.intruder_id;
        } else {
            std::cout << " skip s=" << ps.skip_stride << " n=" << ps.start;
        }
        std::cout << "\n";
    }

    toml::Table cfg;
    cfg.set("data", toml::Value::str(a.data));
    cfg.set("kind", toml::Value::str(a.kind));
    cfg.set("seed", toml::Value::integer(static_cast<int64_t>(a.seed)));
    cfg.set("count", toml::Value::integer(a.count));
    cfg.set("window", toml::Value::integer(a.window));
    if (a.kind == "patch") {
        cfg.set("alpha", toml::Value::floating(a.alpha));
        cfg.set("beta", toml::Value::integer(a.beta));
        cfg.set("mask", toml::Value::str(a.mask));
        cfg.set("intruder", toml::Value::str(a.intruder));
        if (!a.intruder_dir.empty()) cfg.set("intruder_dir", toml::Value::str(a.intruder_dir));
    } else {
        cfg.set("stride", toml::Value::integer(a.stride));
    }
    write_provenance(a.out, "preview-aug", argv_line, std::move(cfg));
}

// ------------------------------------------------------------------- train

void cmd_train(const std::string& config_path, const std::string& resume_path,
               const std::string& argv_line) {
    TrainConfig cfg = TrainConfig::load(config_path);
    // Written before the run so even an interrupted run documents itself.
    write_provenance(cfg.out_dir, "train", argv_line, cfg.to_toml());
    TrainResult res = resume_path.empty() ? train(cfg) : resume(cfg, resume_path);
    std::cout << "trained " << res.epochs_done << " epochs, last loss "
              << format_number(res.last_loss) << ", pseudo fraction "
              << format_number(res.pseudo_fraction) << "\n";
    std::cout << "final checkpoint: " << res.final_checkpoint.string() << "\n";
}

// ------------------------------------------------------------------- score

struct ScoreArgs {
    std::string ckpt;
    std::string data;
    std::string out;
    int64_t batch = 8;
    bool heatmaps = false;
};

void cmd_score(const ScoreArgs& a, const std::string& argv_line) {
    Checkpoint ck = load_checkpoint(a.ckpt);
    Autoencoder model = model_from_checkpoint(ck);
    Manifest man = load_manifest(a.data);
    // Ground truth is optional here: scoring is inference, not evaluation.
    std::vector<Video> videos = load_videos(a.data, man, Role::test, LabelPolicy::load_if_present);
    if (videos.empty()) throw Error(concat("no test videos in the manifest under ", a.data));

    fs::create_directories(a.out);
    int64_t total = 0;
    std::vector<ScoreSeries> series;
    series.reserve(videos.size());
    for (const Video& v : videos) {
        series.push_back(score_video(model, v, a.batch));
        total += v.frame_count();
        if (a.heatmaps) {
            std::vector<Image> maps = video_heatmaps(model, v, a.batch);
            write_heatmaps(fs::path(a.out) / "heatmaps" / v.id, maps, series.back().first_scored);
        }
    }
    write_scores_csv(fs::path(a.out) / "scores.csv", series);

    toml::Table cfg;
    cfg.set("checkpoint", toml::Value::str(a.ckpt));
    cfg.set("data", toml::Value::str(a.data));
    cfg.set("batch", toml::Value::integer(a.batch));
    cfg.set("heatmaps", toml::Value::boolean(a.heatmaps));
    write_provenance(a.out, "score", argv_line, std::move(cfg));

    std::cout << "scored " << videos.size() << " videos (" << total << " frames) -> "
              << (fs::path(a.out) / "scores.csv").string() << "\n";
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
    std::string ckpt;
    std::string data;
    std::string out;
    int64_t batch = 8;
};

void cmd_eval(const EvalArgs& a, const std::string& argv_line) {
    EvalReport rep = evaluate(a.ckpt, a.data, a.batch);
    write_report(a.out, rep);

    toml::Table cfg;
    cfg.set("checkpoint", toml::Value::str(a.ckpt));
    cfg.set("data", toml::Value::str(a.data));
    cfg.set("batch", toml::Value::integer(a.batch));
    write_provenance(a.out, "eval", argv_line, std::move(cfg));

    int64_t positives = 0;
    for (uint8_t l : rep.all_labels) positives += l;
    std::cout << "auc " << format_number(rep.auc) << " over " << rep.all_scores.size()
              << " frames (" << positives << " anomalous)\n";
    if (rep.auc_appearance >= 0.0)
        std::cout << "appearance auc " << format_number(rep.auc_appearance) << "\n";
    if (rep.auc_motion >= 0.0) std::cout << "motion auc " << format_number(rep.auc_motion) << "\n";
    std::cout << "report: " << (fs::path(a.out) / "report.toml").string() << "\n";
}

// ------------------------------------------------------------------- sweep

struct SweepArgs {
    std::string config;
    std::string param;
    std::vector<double> grid;
    std::string out;
    int64_t batch = 8;
};

void cmd_sweep(const SweepArgs& a, const std::string& argv_line) {
    TrainConfig base = TrainConfig::load(a.config);
    std::vector<SweepPoint> points = run_sweep(base, a.param, a.grid, a.batch);

    fs::path out = a.out.empty() ? fs::path(base.out_dir) : fs::path(a.out);
    fs::create_directories(out);
    write_sweep_csv(out / "sweep.csv", a.param, points);

    toml::Table cfg;
    cfg.set("config", toml::Value::str(a.config));
    cfg.set("param", toml::Value::str(a.param));
    std::vector<toml::Value> grid;
    grid.reserve(a.grid.size());
    for (double v : a.grid) grid.push_back(toml::Value::floating(v));
    cfg.set("grid", toml::Value::array(std::move(grid)));
    cfg.set("batch", toml::Value::integer(a.batch));
    write_provenance(out, "sweep", argv_line, std::move(cfg));

    size_t ok = 0;
    for (const SweepPoint& pt : points) {
        std::cout << a.param << "=" << format_number(pt.value) << " ";
        if (pt.ok) {
            std::cout << "auc=" << format_number(pt.auc) << "\n";
            ++ok;
        } else {
            std::cout << "failed: " << pt.error << "\n";
        }
    }
    std::cout << "wrote " << (out / "sweep.csv").string() << "\n";
    if (ok == 0) throw Error("every sweep point failed");
}

}  // namespace

int run(const std::vector<std::string>& args) {
    const std::string argv_line = command_line(args);

    CLI::App app{"pseudo-anomaly autoencoder for video anomaly detection"};
    app.name("psae");
    app.require_subcommand(1);

    SynthArgs sy;
    CLI::App* synth = app.add_subcommand("synth", "generate the synthetic moving-shapes benchmark");
    synth->add_option("--out", sy.out, "dataset root to create")->required();
    synth->add_option("--seed", sy.seed, "generator seed");
    synth->add_option("--frames", sy.frames, "frames per video");
    synth->add_option("--videos", sy.videos, "number of training videos");
    synth->add_option("--size", sy.size, "frame height and width");
    synth->add_flag("--force", sy.force, "wipe a non-empty output directory");

    PreviewArgs pv;
    CLI::App* preview = app.add_subcommand("preview-aug", "write pseudo-anomaly input/target/mask frames");
    preview->add_option("--data", pv.data, "dataset root")->required();
    preview->add_option("--out", pv.out, "output directory")->required();
    preview->add_option("--kind", pv.kind, "pseudo-anomaly kind")
        ->check(CLI::IsMember({"patch", "skip"}));
    preview->add_option("--seed", pv.seed, "sampling seed");
    preview->add_option("--count", pv.count, "number of samples");
    preview->add_option("--window", pv.window, "frames per window");
    preview->add_option("--alpha", pv.alpha, "max patch size as a fraction of the frame");
    preview->add_option("--beta", pv.beta, "max per-frame patch movement in pixels");
    preview->add_option("--mask", pv.mask, "patch mask kind")
        ->check(CLI::IsMember({"smoothmix_s", "cutmix", "smoothmix_c", "mixup_patch"}));
    preview->add_option("--stride", pv.stride, "skip stride");
    preview->add_option("--intruder", pv.intruder, "patch content source")
        ->check(CLI::IsMember({"procedural", "directory", "self"}));
    preview->add_option("--intruder-dir", pv.intruder_dir, "image directory for --intruder directory");

    std::string train_config, train_resume;
    CLI::App* train = app.add_subcommand("train", "train from a TOML config");
    train->add_option("--config", train_config, "TOML training config")->required();
    train->add_option("--resume", train_resume, "checkpoint to resume from");

    ScoreArgs sc;
    CLI::App* score = app.add_subcommand("score", "score test videos with a trained model");
    score->add_option("--ckpt", sc.ckpt, "checkpoint file")->required();
    score->add_option("--data", sc.data, "dataset root")->required();
    score->add_option("--out", sc.out, "output directory")->required();
    score->add_option("--batch", sc.batch, "windows per forward pass");
    score->add_flag("--heatmaps", sc.heatmaps, "also write per-frame error heatmaps");

    EvalArgs ev;
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint against labeled test videos");
    eval->add_option("--ckpt", ev.ckpt, "checkpoint file")->required();
    eval->add_option("--data", ev.data, "dataset root")->required();
    eval->add_option("--out", ev.out, "output directory")->required();
    eval->add_option("--batch", ev.batch, "windows per forward pass");

    SweepArgs sw;
    CLI::App* sweep = app.add_subcommand("sweep", "train and evaluate across a parameter grid");
    sweep->add_option("--config", sw.config, "base TOML training config")->required();
    sweep->add_option("--param", sw.param, "parameter to sweep")
        ->required()
        ->check(CLI::IsMember({"p", "alpha", "stride"}));
    sweep->add_option("--grid", sw.grid, "comma-separated values")->required()->delimiter(',');
    sweep->add_option("--out", sw.out, "where sweep.csv goes (default: the config's out_dir)");
    sweep->add_option("--batch", sw.batch, "windows per forward pass");

    synth->callback([&] { cmd_synth(sy, argv_line); });
    preview->callback([&] { cmd_preview(pv, argv_line); });
    train->callback([&] { cmd_train(train_config, train_resume, argv_line); });
    score->callback([&] { cmd_score(sc, argv_line); });
    eval->callback([&] { cmd_eval(ev, argv_line); });
    sweep->callback([&] { cmd_sweep(sw, argv_line); });

    try {
        // CLI11's vector-parse overload consumes a reversed argv.
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);  // prints help or the usage error
        return code == 0 ? 0 : 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace psae
