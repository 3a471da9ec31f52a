#pragma once

#include <map>
#include <string>
#include <vector>

#include "wact/config.hpp"

namespace wact {

struct TrainRunResult {
    VelocityModel model;
    std::vector<double> losses;       // per step
    std::string csv;                  // "step,loss,seed" rows
    std::string checkpoint_path;      // empty when not persisted
    std::string csv_path;
};

// Seeded end-to-end training run. Overrides the config's strategy/model
// switches so the ablation harness can reuse one config document.
struct TrainOverrides {
    std::optional<std::string> strategy;
    std::optional<bool> use_aipa;
    std::optional<bool> use_irope;
    std::optional<std::size_t> steps;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> face_refs;
    std::optional<std::size_t> body_refs;
    bool no_references = false; // unconditional baseline
};

TrainRunResult run_training(const ExperimentConfig& cfg, const Corpus& corpus,
                            const std::string& run_name, const TrainOverrides& overrides = {},
                            bool persist = true);

// Mean RF loss over the clips of a split with fixed seeded (t, eps) draws.
// Conditioning is the canonical three-view context unless no_references.
double validation_loss(const VelocityModel& model, const Corpus& corpus, const ToyCodec& codec,
                       const std::string& split, const RfConfig& rf, std::size_t draws_per_clip,
                       std::uint64_t seed, bool no_references = false);

// Same, grouped by the clip's dominant body view label (F/S/B).
std::map<std::string, double> validation_loss_by_view(const VelocityModel& model,
                                                      const Corpus& corpus, const ToyCodec& codec,
                                                      const RfConfig& rf,
                                                      std::size_t draws_per_clip, std::uint64_t seed);

// ---- ablation harness -----------------------------------------------------

struct SamplingAblationRow {
    std::string setting; // Raw-Crop | Random Sampling | Viewpoint-Adaptive
    double front = 0.0, side = 0.0, back = 0.0, average = 0.0; // toy val losses
};

struct ArchitectureAblationRow {
    std::string setting; // Full-Attn | AIPA only | AIPA + I-RoPE
    bool aipa = false, irope = false;
    double val_loss = 0.0;
    double back_loss = 0.0;
};

struct AblationReport {
    std::vector<SamplingAblationRow> sampling;        // exactly 3 rows
    std::vector<ArchitectureAblationRow> architecture; // exactly 3 rows
    std::string to_text() const;
    std::string to_json() const;
};

AblationReport run_ablation(const ExperimentConfig& cfg, const Corpus& corpus);

// Generation: Euler-samples a clip latent for the subject/caption and writes
// latent + decoded tensors to <out>/<name>.wact. Returns the path.
std::string run_sampling(const ExperimentConfig& cfg, const Corpus& corpus,
                         const VelocityModel& model, const std::string& subject, int caption_id,
                         std::size_t steps, std::uint64_t seed, const std::string& name);

} // namespace wact
