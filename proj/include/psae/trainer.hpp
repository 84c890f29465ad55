#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "psae/adam.hpp"
#include "psae/checkpoint.hpp"
#include "psae/dataset.hpp"
#include "psae/model.hpp"
#include "psae/pseudoanom.hpp"

namespace psae {

// Full training recipe, loadable from a TOML file with sections [data],
// [model], [train], [pseudo.patch], [pseudo.skip]. Unknown keys anywhere are
// fatal: a silently ignored typo would corrupt an experiment.
struct TrainConfig {
    // [data]
    std::string data_root;
    int64_t window = 8;
    // [model] — window is mirrored into the geometry
    AutoencoderConfig model;
    // [train]
    double p = 0.2;
    int64_t epochs = 10;
    int64_t steps_per_epoch = 50;
    int64_t batch_size = 4;
    AdamConfig adam;
    uint64_t seed = 0;
    int64_t checkpoint_every = 1;  // epochs between snapshots
    std::string out_dir = "runs/default";
    // [pseudo.patch] / [pseudo.skip] — pseudo.p mirrors p
    PseudoConfig pseudo;
    std::string intruder = "procedural";  // procedural | directory | self
    std::string intruder_dir;

    // The geometry/routing actually used by training: model with the [data]
    // window folded in, pseudo with the [train] p folded in. Callers should
    // never read cfg.model.window or cfg.pseudo.p directly.
    AutoencoderConfig effective_model() const;
    PseudoConfig effective_pseudo() const;

    void validate() const;
    static TrainConfig from_toml(const toml::Table& root);
    static TrainConfig load(const std::filesystem::path& path);
    toml::Table to_toml() const;
    std::string canonical_toml() const;  // serialized snapshot, hash input
    uint64_t hash() const;
};

// One optimizer update on a batch of routed samples (inputs may be normal or
// pseudo; each carries its own target). Returns the batch loss. A non-finite
// loss aborts with the offending samples' metadata in the message.
float train_step(Autoencoder& model, const std::vector<TrainingSample>& batch, AdamState& opt,
                 const AdamConfig& adam_cfg);

struct TrainResult {
    std::filesystem::path final_checkpoint;
    uint32_t epochs_done = 0;
    double pseudo_fraction = 0.0;  // realized over samples drawn this run
    float last_loss = 0.0f;
};

// Runs the full loop: per-sample seeded streams, epoch checkpoints
// (ckpt_epoch_%04d.bin at the configured cadence), ckpt_final.bin, and
// train_log.csv (epoch,step,loss,pseudo_fraction; the fraction is cumulative
// over the run). Training reads only train-role videos, labels ignored.
TrainResult train(const TrainConfig& cfg);

// Continues from a checkpoint written by the same config (hash-checked);
// the resumed trajectory is identical to an uninterrupted run.
TrainResult resume(const TrainConfig& cfg, const std::filesystem::path& ckpt_path);

TrainConfig config_from_checkpoint(const Checkpoint& ckpt);
Autoencoder model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace psae
