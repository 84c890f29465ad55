#include "psae/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "psae/ops.hpp"

namespace psae {

namespace fs = std::filesystem;

// ------------------------------------------------------------------- config

AutoencoderConfig TrainConfig::effective_model() const {
    AutoencoderConfig m = model;
    m.window = window;
    return m;
}

PseudoConfig TrainConfig::effective_pseudo() const {
    PseudoConfig pc = pseudo;
    pc.p = p;
    return pc;
}

void TrainConfig::validate() const {
    if (data_root.empty()) throw Error("training config: [data].root is required");
    if (window < 1) throw Error(concat("window must be >= 1, got ", window));
    effective_model().validate();
    if (epochs < 1 || epochs > 1000000)
        throw Error(concat("epochs must be in [1, 1000000], got ", epochs));
    if (steps_per_epoch < 1)
        throw Error(concat("steps_per_epoch must be >= 1, got ", steps_per_epoch));
    if (batch_size < 1) throw Error(concat("batch_size must be >= 1, got ", batch_size));
    if (checkpoint_every < 1)
        throw Error(concat("checkpoint_every must be >= 1, got ", checkpoint_every));
    if (!std::isfinite(adam.lr) || adam.lr <= 0.0)
        throw Error(concat("lr must be positive, got ", adam.lr));
    if (adam.beta1 < 0.0 || adam.beta1 >= 1.0)
        throw Error(concat("beta1 must be in [0,1), got ", adam.beta1));
    if (adam.beta2 < 0.0 || adam.beta2 >= 1.0)
        throw Error(concat("beta2 must be in [0,1), got ", adam.beta2));
    if (!std::isfinite(adam.eps) || adam.eps <= 0.0)
        throw Error(concat("eps must be positive, got ", adam.eps));
    if (seed > static_cast<uint64_t>(std::numeric_limits<int64_t>::max()))
        throw Error("seed must fit a signed 64-bit integer so the config snapshot round-trips");
    if (out_dir.empty()) throw Error("training config: [train].out_dir is required");
    if (intruder != "procedural" && intruder != "directory" && intruder != "self")
        throw Error(concat("intruder must be one of procedural|directory|self, got '", intruder,
                           "'"));
    if (intruder == "directory" && intruder_dir.empty())
        throw Error("intruder = \"directory\" requires intruder_dir");
    effective_pseudo().validate();
}

TrainConfig TrainConfig::from_toml(const toml::Table& root) {
    root.expect_only({}, {"data", "model", "train", "pseudo"});
    TrainConfig cfg;
    if (root.has_table("data")) {
        const toml::Table& d = root.table("data");
        d.expect_only({"root", "window"}, {});
        cfg.data_root = d.get_string_or("root", "");
        cfg.window = d.get_int_or("window", cfg.window);
    }
    if (root.has_table("model")) {
        cfg.model = AutoencoderConfig::from_toml(root.table("model"), cfg.window);
    } else {
        cfg.model.window = cfg.window;
    }
    if (root.has_table("train")) {
        const toml::Table& t = root.table("train");
        t.expect_only({"p", "epochs", "steps_per_epoch", "batch_size", "lr", "beta1", "beta2",
                       "eps", "seed", "checkpoint_every", "out_dir"},
                      {});
        cfg.p = t.get_float_or("p", cfg.p);
        cfg.epochs = t.get_int_or("epochs", cfg.epochs);
        cfg.steps_per_epoch = t.get_int_or("steps_per_epoch", cfg.steps_per_epoch);
        cfg.batch_size = t.get_int_or("batch_size", cfg.batch_size);
        cfg.adam.lr = t.get_float_or("lr", cfg.adam.lr);
        cfg.adam.beta1 = t.get_float_or("beta1", cfg.adam.beta1);
        cfg.adam.beta2 = t.get_float_or("beta2", cfg.adam.beta2);
        cfg.adam.eps = t.get_float_or("eps", cfg.adam.eps);
        int64_t seed = t.get_int_or("seed", 0);
        if (seed < 0) throw Error(concat("'seed' in [train] must be >= 0, got ", seed));
        cfg.seed = static_cast<uint64_t>(seed);
        cfg.checkpoint_every = t.get_int_or("checkpoint_every", cfg.checkpoint_every);
        cfg.out_dir = t.get_string_or("out_dir", cfg.out_dir);
    }
    if (root.has_table("pseudo")) {
        const toml::Table& pz = root.table("pseudo");
        pz.expect_only({}, {"patch", "skip"});
        if (pz.has_table("patch")) {
            const toml::Table& pa = pz.table("patch");
            pa.expect_only({"enabled", "alpha", "beta", "mask", "intruder", "intruder_dir"}, {});
            cfg.pseudo.patch_enabled = pa.get_bool_or("enabled", false);
            cfg.pseudo.alpha = pa.get_float_or("alpha", cfg.pseudo.alpha);
            cfg.pseudo.beta = pa.get_int_or("beta", cfg.pseudo.beta);
            if (pa.has("mask")) cfg.pseudo.mask_kind = parse_mask_kind(pa.get_string("mask"));
            cfg.intruder = pa.get_string_or("intruder", cfg.intruder);
            cfg.intruder_dir = pa.get_string_or("intruder_dir", cfg.intruder_dir);
        }
        if (pz.has_table("skip")) {
            const toml::Table& sk = pz.table("skip");
            sk.expect_only({"enabled", "strides"}, {});
            cfg.pseudo.skip_enabled = sk.get_bool_or("enabled", false);
            if (sk.has("strides")) cfg.pseudo.skip_strides = sk.get_ints("strides");
        }
    }
    cfg.pseudo.p = cfg.p;
    cfg.validate();
    return cfg;
}

TrainConfig TrainConfig::load(const fs::path& path) { return from_toml(toml::parse_file(path)); }

toml::Table TrainConfig::to_toml() const {
    toml::Table root;
    toml::Table& d = root.subtable("data");
    d.set("root", toml::Value::str(data_root));
    d.set("window", toml::Value::integer(window));
    effective_model().to_toml(root.subtable("model"));
    toml::Table& t = root.subtable("train");
    t.set("p", toml::Value::floating(p));
    t.set("epochs", toml::Value::integer(epochs));
    t.set("steps_per_epoch", toml::Value::integer(steps_per_epoch));
    t.set("batch_size", toml::Value::integer(batch_size));
    t.set("lr", toml::Value::floating(adam.lr));
    t.set("beta1", toml::Value::floating(adam.beta1));
    t.set("beta2", toml::Value::floating(adam.beta2));
    t.set("eps", toml::Value::floating(adam.eps));
    t.set("seed", toml::Value::integer(static_cast<int64_t>(seed)));
    t.set("checkpoint_every", toml::Value::integer(checkpoint_every));
    t.set("out_dir", toml::Value::str(out_dir));
    toml::Table& pa = root.subtable("pseudo").subtable("patch");
    pa.set("enabled", toml::Value::boolean(pseudo.patch_enabled));
    pa.set("alpha", toml::Value::floating(pseudo.alpha));
    pa.set("beta", toml::Value::integer(pseudo.beta));
    pa.set("mask", toml::Value::str(to_string(pseudo.mask_kind)));
    pa.set("intruder", toml::Value::str(intruder));
    pa.set("intruder_dir", toml::Value::str(intruder_dir));
    toml::Table& sk = root.subtable("pseudo").subtable("skip");
    sk.set("enabled", toml::Value::boolean(pseudo.skip_enabled));
    std::vector<toml::Value> strides;
    strides.reserve(pseudo.skip_strides.size());
    for (int64_t s : pseudo.skip_strides) strides.push_back(toml::Value::integer(s));
    sk.set("strides", toml::Value::array(std::move(strides)));
    return root;
}

std::string TrainConfig::canonical_toml() const { return toml::serialize(to_toml()); }

uint64_t TrainConfig::hash() const { return fnv1a64(canonical_toml()); }

// -------------------------------------------------------------------- steps

float train_step(Autoencoder& model, const std::vector<TrainingSample>& batch, AdamState& opt,
                 const AdamConfig& adam_cfg) {
    if (batch.empty()) throw Error("train_step: empty batch");
    std::vector<const FrameSeq*> ins, tgts;
    ins.reserve(batch.size());
    tgts.reserve(batch.size());
    for (const TrainingSample& s : batch) {
        ins.push_back(&s.input);
        tgts.push_back(&s.target);
    }
    Tensor x = to_batch(ins);
    Tensor y = to_batch(tgts);
    for (Tensor& prm : model.params()) {
        prm.set_requires_grad(true);
        prm.ensure_grad();
        prm.zero_grad();
    }
    Graph g;
    Tensor xhat = model.forward(&g, x);
    // One MSE over the stacked batch: every sample carries its own target
    // (itself when normal, the clean window when pseudo), so this equals the
    // mixed per-sample objective.
    Tensor loss = mse_loss(&g, xhat, y);
    float lv = loss.scalar();
    if (!std::isfinite(lv)) {
        std::string detail;
        for (const TrainingSample& s : batch) {
            if (!detail.empty()) detail += "; ";
            detail += s.info;
        }
        throw Error(concat("non-finite loss (", lv, ") — batch: ", detail));
    }
    g.backward(loss);
    adam_step(model.params(), opt, adam_cfg);
    return lv;
}

// --------------------------------------------------------------------- loop

namespace {

struct RunState {
    Autoencoder model;
    AdamState opt;
    uint64_t sample_counter = 0;
    uint32_t start_epoch = 0;
    bool fresh = true;
};

fs::path epoch_path(const std::string& out_dir, uint32_t epoch) {
    char name[32];
    std::snprintf(name, sizeof name, "ckpt_epoch_%04u.bin", epoch);
    return fs::path(out_dir) / name;
}

Checkpoint snapshot(const TrainConfig& cfg, const Autoencoder& model, const AdamState& opt,
                    uint32_t epoch, uint64_t sample_counter) {
    Checkpoint ck;
    ck.config_hash = cfg.hash();
    ck.seed = cfg.seed;
    ck.sample_counter = sample_counter;
    ck.epoch = epoch;
    ck.adam_t = opt.t;
    ck.config_toml = cfg.canonical_toml();
    const std::vector<Tensor>& ps = model.params();
    const std::vector<std::string>& ns = model.param_names();
    for (size_t i = 0; i < ps.size(); ++i) ck.tensors.emplace_back(ns[i], ps[i].clone());
    for (size_t i = 0; i < ps.size(); ++i) {
        std::vector<float> m = i < opt.m.size() ? opt.m[i]
                                                : std::vector<float>(ps[i].vec().size(), 0.0f);
        ck.tensors.emplace_back("adam.m." + ns[i], Tensor::from_vector(ps[i].shape(), std::move(m)));
    }
    for (size_t i = 0; i < ps.size(); ++i) {
        std::vector<float> v = i < opt.v.size() ? opt.v[i]
                                                : std::vector<float>(ps[i].vec().size(), 0.0f);
        ck.tensors.emplace_back("adam.v." + ns[i], Tensor::from_vector(ps[i].shape(), std::move(v)));
    }
    return ck;
}

TrainResult run_training(const TrainConfig& cfg, RunState st) {
    Manifest man = load_manifest(cfg.data_root);
    auto videos = std::make_shared<std::vector<Video>>(
        load_videos(cfg.data_root, man, Role::train, LabelPolicy::ignore));
    if (videos->empty())
        throw Error(concat("no training videos in the manifest under ", cfg.data_root));

    const PseudoConfig pc = cfg.effective_pseudo();
    int64_t max_stride = 0;
    if (pc.p > 0.0 && pc.skip_enabled)
        max_stride = *std::max_element(pc.skip_strides.begin(), pc.skip_strides.end());
    for (const Video& v : *videos) {
        if (v.h != cfg.model.height || v.w != cfg.model.width)
            throw Error(concat("video '", v.id, "' is ", v.w, "x", v.h, " but the model expects ",
                               cfg.model.width, "x", cfg.model.height));
        if (v.frame_count() < cfg.window)
            throw Error(concat("video '", v.id, "' has ", v.frame_count(),
                               " frames, shorter than the ", cfg.window, "-frame window"));
        int64_t need = (cfg.window - 1) * max_stride + 1;
        if (max_stride > 1 && v.frame_count() < need)
            throw Error(concat("video '", v.id, "' has ", v.frame_count(),
                               " frames, too short for skip stride ", max_stride, " with a ",
                               cfg.window, "-frame window (needs ", need, ")"));
    }

    IntruderSource intruder = IntruderSource::procedural_textures();
    if (pc.p > 0.0 && pc.patch_enabled) {
        if (cfg.intruder == "directory")
            intruder = IntruderSource::image_directory(cfg.intruder_dir);
        else if (cfg.intruder == "self")
            intruder = IntruderSource::self_dataset(videos);
    }

    fs::create_directories(cfg.out_dir);
    const fs::path log_path = fs::path(cfg.out_dir) / "train_log.csv";
    std::ofstream log;
    if (st.fresh || !fs::exists(log_path)) {
        log.open(log_path, std::ios::trunc);
        log << "epoch,step,loss,pseudo_fraction\n";
    } else {
        log.open(log_path, std::ios::app);
    }
    if (!log) throw Error(concat("cannot open ", log_path.string(), " for writing"));

    const int64_t nvid = static_cast<int64_t>(videos->size());
    uint64_t drawn = 0, pseudo_drawn = 0;
    float last_loss = 0.0f;
    const uint32_t total_epochs = static_cast<uint32_t>(cfg.epochs);
    for (uint32_t e = st.start_epoch; e < total_epochs; ++e) {
        for (int64_t step = 0; step < cfg.steps_per_epoch; ++step) {
            std::vector<TrainingSample> batch;
            batch.reserve(static_cast<size_t>(cfg.batch_size));
            uint64_t batch_pseudo = 0;
            for (int64_t b = 0; b < cfg.batch_size; ++b) {
                // One private stream per drawn sample: replay after a resume
                // does not depend on batch boundaries or draw counts.
                Rng srng(derive_stream(cfg.seed, st.sample_counter));
                ++st.sample_counter;
                const Video& v = (*videos)[static_cast<size_t>(srng.uniform_int(0, nvid - 1))];
                int64_t start = srng.uniform_int(0, v.frame_count() - cfg.window);
                Window win = sample_window(v, start, cfg.window);
                batch.push_back(sample_training_input(v, win, pc, intruder, srng));
                ++drawn;
                if (batch.back().is_pseudo) ++batch_pseudo;
            }
            pseudo_drawn += batch_pseudo;
            try {
                last_loss = train_step(st.model, batch, st.opt, cfg.adam);
            } catch (const Error& err) {
                throw Error(concat("epoch ", e + 1, " step ", step + 1, ": ", err.what()));
            }
            // Per-batch fraction, not cumulative: every row is a pure function
            // of (seed, sample indices), so a resumed run reproduces the log.
            double frac = static_cast<double>(batch_pseudo) / static_cast<double>(cfg.batch_size);
            log << (e + 1) << ',' << (step + 1) << ',' << format_number(last_loss) << ','
                << format_number(frac) << '\n';
        }
        log.flush();
        uint32_t done = e + 1;
        if (done % static_cast<uint32_t>(cfg.checkpoint_every) == 0)
            save_checkpoint(epoch_path(cfg.out_dir, done),
                            snapshot(cfg, st.model, st.opt, done, st.sample_counter));
    }

    fs::path final_path = fs::path(cfg.out_dir) / "ckpt_final.bin";
    save_checkpoint(final_path,
                    snapshot(cfg, st.model, st.opt, total_epochs, st.sample_counter));
    TrainResult res;
    res.final_checkpoint = final_path;
    res.epochs_done = total_epochs;
    res.pseudo_fraction =
        drawn ? static_cast<double>(pseudo_drawn) / static_cast<double>(drawn) : 0.0;
    res.last_loss = last_loss;
    return res;
}

}  // namespace

TrainResult train(const TrainConfig& cfg) {
    cfg.validate();
    RunState st;
    // The init stream index can never collide with a sample counter.
    Rng init_rng(derive_stream(cfg.seed, std::numeric_limits<uint64_t>::max()));
    st.model = Autoencoder::seeded(cfg.effective_model(), init_rng);
    st.fresh = true;
    return run_training(cfg, std::move(st));
}

TrainResult resume(const TrainConfig& cfg, const fs::path& ckpt_path) {
    cfg.validate();
    Checkpoint ck = load_checkpoint(ckpt_path);
    if (ck.config_hash != cfg.hash())
        throw Error(concat("checkpoint config hash ", ck.config_hash,
                           " does not match this config's hash ", cfg.hash(),
                           "; refusing to resume"));
    RunState st;
    st.model = model_from_checkpoint(ck);
    const std::vector<Tensor>& ps = st.model.params();
    const std::vector<std::string>& ns = st.model.param_names();
    st.opt.t = ck.adam_t;
    st.opt.m.resize(ps.size());
    st.opt.v.resize(ps.size());
    for (size_t i = 0; i < ps.size(); ++i) {
        const Tensor& tm = ck.find("adam.m." + ns[i]);
        const Tensor& tv = ck.find("adam.v." + ns[i]);
        if (tm.shape() != ps[i].shape() || tv.shape() != ps[i].shape())
            throw Error(concat("optimizer moment shape mismatch for '", ns[i], "'"));
        st.opt.m[i] = tm.vec();
        st.opt.v[i] = tv.vec();
    }
    if (static_cast<int64_t>(ck.epoch) > cfg.epochs)
        throw Error(concat("checkpoint is at epoch ", ck.epoch, " but the config trains only ",
                           cfg.epochs, " epochs"));
    st.start_epoch = ck.epoch;
    st.sample_counter = ck.sample_counter;
    st.fresh = false;
    return run_training(cfg, std::move(st));
}

TrainConfig config_from_checkpoint(const Checkpoint& ckpt) {
    return TrainConfig::from_toml(toml::parse(ckpt.config_toml, "checkpoint config"));
}

Autoencoder model_from_checkpoint(const Checkpoint& ckpt) {
    TrainConfig tc = config_from_checkpoint(ckpt);
    AutoencoderConfig mc = tc.effective_model();
    std::vector<Tensor> params;
    for (const LayerPlan& lp : plan_layers(mc)) {
        params.push_back(ckpt.find(lp.name + ".kernel").clone());
        params.push_back(ckpt.find(lp.name + ".bias").clone());
    }
    return Autoencoder::from_params(mc, std::move(params));
}

}  // namespace psae
