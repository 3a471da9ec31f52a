#include "wact/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace wact {

using nlohmann::json;

AdamConfig TrainConfig::adam() const {
    AdamConfig a;
    a.lr = lr;
    a.beta1 = beta1;
    a.beta2 = beta2;
    a.eps = eps;
    a.weight_decay = weight_decay;
    return a;
}

EpisodeOptions TrainConfig::episode_options(double delta, double gamma) const {
    EpisodeOptions e;
    e.strategy = strategy_from_string(strategy);
    e.delta = delta;
    e.gamma = gamma;
    e.face_refs = face_refs;
    e.body_refs = body_refs;
    e.random_ref_count = random_ref_count;
    e.subset_mixing = subset_mixing;
    return e;
}

void ExperimentConfig::validate() const {
    model.validate();
    if (train.batch_size == 0) throw ConfigError("config: train.batch_size must be positive");
    if (train.face_refs > 5 || train.body_refs > 5) {
        throw ConfigError("config: reference counts are limited to 5 per region");
    }
    strategy_from_string(train.strategy);
    codec_from_string(codec);
    if (!(sampler_delta > 0.0)) throw ConfigError("config: sampler.delta must be > 0");
    if (!(sampler_gamma > 0.0 && sampler_gamma <= 1.0)) {
        throw ConfigError("config: sampler.gamma must be in (0, 1]");
    }
    if (rf.sampler_steps == 0) throw ConfigError("config: rf.sampler_steps must be positive");
    if (bench.judge != "fixture" && bench.judge != "remote") {
        throw ConfigError("config: bench.judge must be 'fixture' or 'remote'");
    }
    if (bench.policy != "zero" && bench.policy != "exclude") {
        throw ConfigError("config: bench.policy must be 'zero' or 'exclude'");
    }
    profile_views_per_subject(corpus.profile);
}

namespace {

void reject_unknown(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw ConfigError("config: unknown key '" + (path.empty() ? it.key() : path + "." + it.key()) +
                              "'");
        }
    }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

} // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: root must be an object");
    reject_unknown(j, "", {"schema_version", "seed", "out_dir", "corpus_dir", "codec", "model",
                           "train", "rf", "sampler", "thresholds", "corpus", "bench"});
    if (!j.contains("schema_version")) throw ConfigError("config: missing schema_version");
    const int version = j.at("schema_version").get<int>();
    if (version != kConfigSchemaVersion) {
        throw ConfigError("config: schema_version " + std::to_string(version) + " unsupported (want " +
                          std::to_string(kConfigSchemaVersion) + ")");
    }

    ExperimentConfig cfg;
    read(j, "seed", cfg.seed);
    read(j, "out_dir", cfg.out_dir);
    read(j, "corpus_dir", cfg.corpus_dir);
    read(j, "codec", cfg.codec);

    if (j.contains("model")) {
        const json& m = j["model"];
        reject_unknown(m, "model",
                       {"d_model", "heads", "blocks", "lora_rank", "lora_scale", "patch",
                        "time_features", "caption_vocab", "channels", "h_max", "w_max", "freq_base",
                        "delta_face", "delta_body", "use_aipa", "use_irope"});
        read(m, "d_model", cfg.model.d_model);
        read(m, "heads", cfg.model.heads);
        read(m, "blocks", cfg.model.blocks);
        read(m, "lora_rank", cfg.model.lora_rank);
        read(m, "lora_scale", cfg.model.lora_scale);
        read(m, "patch", cfg.model.patch);
        read(m, "time_features", cfg.model.time_features);
        read(m, "caption_vocab", cfg.model.caption_vocab);
        read(m, "channels", cfg.model.channels);
        read(m, "h_max", cfg.model.h_max);
        read(m, "w_max", cfg.model.w_max);
        read(m, "freq_base", cfg.model.freq_base);
        read(m, "delta_face", cfg.model.delta_face);
        read(m, "delta_body", cfg.model.delta_body);
        read(m, "use_aipa", cfg.model.use_aipa);
        read(m, "use_irope", cfg.model.use_irope);
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        reject_unknown(t, "train",
                       {"steps", "batch_size", "lr", "beta1", "beta2", "eps", "weight_decay",
                        "strategy", "face_refs", "body_refs", "random_ref_count", "subset_mixing",
                        "val_draws"});
        read(t, "steps", cfg.train.steps);
        read(t, "batch_size", cfg.train.batch_size);
        read(t, "lr", cfg.train.lr);
        read(t, "beta1", cfg.train.beta1);
        read(t, "beta2", cfg.train.beta2);
        read(t, "eps", cfg.train.eps);
        read(t, "weight_decay", cfg.train.weight_decay);
        read(t, "strategy", cfg.train.strategy);
        read(t, "face_refs", cfg.train.face_refs);
        read(t, "body_refs", cfg.train.body_refs);
        read(t, "random_ref_count", cfg.train.random_ref_count);
        read(t, "subset_mixing", cfg.train.subset_mixing);
        read(t, "val_draws", cfg.train.val_draws);
    }
    if (j.contains("rf")) {
        const json& r = j["rf"];
        reject_unknown(r, "rf", {"weight_fn", "sampler_steps", "condition_first_frame"});
        if (r.contains("weight_fn")) {
            const std::string w = r["weight_fn"].get<std::string>();
            if (w != "uniform") throw ConfigError("config: rf.weight_fn '" + w + "' unsupported");
            cfg.rf.weight_fn = WeightFn::Uniform;
        }
        read(r, "sampler_steps", cfg.rf.sampler_steps);
        read(r, "condition_first_frame", cfg.rf.condition_first_frame);
    }
    if (j.contains("sampler")) {
        const json& s = j["sampler"];
        reject_unknown(s, "sampler", {"delta", "gamma"});
        read(s, "delta", cfg.sampler_delta);
        read(s, "gamma", cfg.sampler_gamma);
    }
    if (j.contains("thresholds")) {
        const json& t = j["thresholds"];
        reject_unknown(t, "thresholds", {"tau_face", "tau_clip", "tau_track"});
        read(t, "tau_face", cfg.thresholds.tau_face);
        read(t, "tau_clip", cfg.thresholds.tau_clip);
        read(t, "tau_track", cfg.thresholds.tau_track);
    }
    if (j.contains("corpus")) {
        const json& c = j["corpus"];
        reject_unknown(c, "corpus",
                       {"n_subjects", "frames", "image_size", "clips_per_subject",
                        "val_clips_per_subject", "profile", "seed"});
        read(c, "n_subjects", cfg.corpus.n_subjects);
        read(c, "frames", cfg.corpus.frames);
        read(c, "image_size", cfg.corpus.image_size);
        read(c, "clips_per_subject", cfg.corpus.clips_per_subject);
        read(c, "val_clips_per_subject", cfg.corpus.val_clips_per_subject);
        read(c, "profile", cfg.corpus.profile);
        read(c, "seed", cfg.corpus.seed);
    }
    if (j.contains("bench")) {
        const json& b = j["bench"];
        reject_unknown(b, "bench", {"judge", "policy"});
        read(b, "judge", cfg.bench.judge);
        read(b, "policy", cfg.bench.policy);
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json j = {
        {"schema_version", kConfigSchemaVersion},
        {"seed", cfg.seed},
        {"out_dir", cfg.out_dir},
        {"corpus_dir", cfg.corpus_dir},
        {"codec", cfg.codec},
        {"model",
         {{"d_model", cfg.model.d_model},
          {"heads", cfg.model.heads},
          {"blocks", cfg.model.blocks},
          {"lora_rank", cfg.model.lora_rank},
          {"lora_scale", cfg.model.lora_scale},
          {"patch", cfg.model.patch},
          {"time_features", cfg.model.time_features},
          {"caption_vocab", cfg.model.caption_vocab},
          {"channels", cfg.model.channels},
          {"h_max", cfg.model.h_max},
          {"w_max", cfg.model.w_max},
          {"freq_base", cfg.model.freq_base},
          {"delta_face", cfg.model.delta_face},
          {"delta_body", cfg.model.delta_body},
          {"use_aipa", cfg.model.use_aipa},
          {"use_irope", cfg.model.use_irope}}},
        {"train",
         {{"steps", cfg.train.steps},
          {"batch_size", cfg.train.batch_size},
          {"lr", cfg.train.lr},
          {"beta1", cfg.train.beta1},
          {"beta2", cfg.train.beta2},
          {"eps", cfg.train.eps},
          {"weight_decay", cfg.train.weight_decay},
          {"strategy", cfg.train.strategy},
          {"face_refs", cfg.train.face_refs},
          {"body_refs", cfg.train.body_refs},
          {"random_ref_count", cfg.train.random_ref_count},
          {"subset_mixing", cfg.train.subset_mixing},
          {"val_draws", cfg.train.val_draws}}},
        {"rf",
         {{"weight_fn", "uniform"},
          {"sampler_steps", cfg.rf.sampler_steps},
          {"condition_first_frame", cfg.rf.condition_first_frame}}},
        {"sampler", {{"delta", cfg.sampler_delta}, {"gamma", cfg.sampler_gamma}}},
        {"thresholds",
         {{"tau_face", cfg.thresholds.tau_face},
          {"tau_clip", cfg.thresholds.tau_clip},
          {"tau_track", cfg.thresholds.tau_track}}},
        {"corpus",
         {{"n_subjects", cfg.corpus.n_subjects},
          {"frames", cfg.corpus.frames},
          {"image_size", cfg.corpus.image_size},
          {"clips_per_subject", cfg.corpus.clips_per_subject},
          {"val_clips_per_subject", cfg.corpus.val_clips_per_subject},
          {"profile", cfg.corpus.profile},
          {"seed", cfg.corpus.seed}}},
        {"bench", {{"judge", cfg.bench.judge}, {"policy", cfg.bench.policy}}},
    };
    return j.dump(2);
}

} // namespace wact
