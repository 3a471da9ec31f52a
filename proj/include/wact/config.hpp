#pragma once

#include <string>

#include "wact/curation.hpp"
#include "wact/model.hpp"
#include "wact/synth.hpp"

namespace wact {

// Single-document experiment configuration. Parsing is strict: unknown keys
// are rejected with the full path of the offending key, and schema_version
// must match kConfigSchemaVersion. CLI flags override file values, which
// override the defaults below.
inline constexpr int kConfigSchemaVersion = 1;

struct TrainConfig {
    std::size_t steps = 500;
    std::size_t batch_size = 2;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    std::string strategy = "viewpoint_adaptive";
    std::size_t face_refs = 1;
    std::size_t body_refs = 2;
    bool random_ref_count = false; // uniform over {0..face_refs} / {0..body_refs}
    bool subset_mixing = true;
    std::size_t val_draws = 4;     // (t, eps) draws per validation clip

    AdamConfig adam() const;
    EpisodeOptions episode_options(double delta, double gamma) const;
};

struct BenchConfig {
    std::string judge = "fixture"; // "fixture" | "remote"
    std::string policy = "zero";   // "zero" | "exclude"
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    std::string corpus_dir = "corpus";
    std::string codec = "identity";
    ModelConfig model;
    TrainConfig train;
    RfConfig rf;
    double sampler_delta = 0.5235987755982988; // pi/6
    double sampler_gamma = 0.5;
    FilterThresholds thresholds;
    CorpusParams corpus;
    BenchConfig bench;

    void validate() const; // ConfigError on out-of-range values
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& cfg);

} // namespace wact
