#include "wact/experiments.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace wact {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string body_label_of_clip(const ClipMeta& clip, std::size_t frames) {
    const double mid = clip.theta_start + clip.omega * static_cast<double>(frames - 1) / 2.0;
    const double df = circular_distance(mid, 0.0);
    const double ds = std::min(circular_distance(mid, kPi / 2), circular_distance(mid, 3 * kPi / 2));
    const double db = circular_distance(mid, kPi);
    if (df <= ds && df <= db) return "F";
    if (ds <= db) return "S";
    return "B";
}

} // namespace

TrainRunResult run_training(const ExperimentConfig& cfg, const Corpus& corpus,
                            const std::string& run_name, const TrainOverrides& overrides,
                            bool persist) {
    ModelConfig model_cfg = cfg.model;
    if (overrides.use_aipa) model_cfg.use_aipa = *overrides.use_aipa;
    if (overrides.use_irope) model_cfg.use_irope = *overrides.use_irope;
    TrainConfig train_cfg = cfg.train;
    if (overrides.strategy) train_cfg.strategy = *overrides.strategy;
    if (overrides.steps) train_cfg.steps = *overrides.steps;
    if (overrides.face_refs) train_cfg.face_refs = *overrides.face_refs;
    if (overrides.body_refs) train_cfg.body_refs = *overrides.body_refs;
    const std::uint64_t seed = overrides.seed ? *overrides.seed : cfg.seed;

    EpisodeOptions episodes = train_cfg.episode_options(cfg.sampler_delta, cfg.sampler_gamma);
    if (overrides.no_references) {
        episodes.face_refs = 0;
        episodes.body_refs = 0;
        episodes.random_ref_count = false;
    }
    const ToyCodec codec{codec_from_string(cfg.codec)};

    Rng root(seed);
    Rng init_rng = root.split();
    Rng data_rng = root.split();

    TrainRunResult result{VelocityModel(model_cfg, init_rng), {}, {}, {}, {}};
    VelocityModel& model = result.model;

    const std::vector<const ClipMeta*> train_clips = corpus.clips_of_split("train");
    if (train_clips.empty()) throw ContractError("run_training: corpus has no train clips");

    AdamState adam_state;
    const AdamConfig opt = train_cfg.adam();
    std::ostringstream csv;
    csv << "step,loss,seed\n";
    csv.precision(17);
    result.losses.reserve(train_cfg.steps);
    for (std::size_t step = 0; step < train_cfg.steps; ++step) {
        std::vector<TrainExample> batch;
        batch.reserve(train_cfg.batch_size);
        for (std::size_t b = 0; b < train_cfg.batch_size; ++b) {
            const ClipMeta& clip = *train_clips[data_rng.uniform_index(train_clips.size())];
            batch.push_back(make_episode(corpus, codec, clip, episodes, data_rng));
        }
        const double loss = train_step(model, batch, adam_state, opt, cfg.rf, data_rng);
        result.losses.push_back(loss);
        csv << (step + 1) << "," << loss << "," << seed << "\n";
    }
    result.csv = csv.str();

    if (persist) {
        std::error_code ec;
        fs::create_directories(cfg.out_dir, ec);
        if (ec) throw IoError("run_training: cannot create '" + cfg.out_dir + "': " + ec.message());
        result.checkpoint_path = (fs::path(cfg.out_dir) / (run_name + ".wact")).string();
        result.csv_path = (fs::path(cfg.out_dir) / (run_name + ".losses.csv")).string();
        save_checkpoint(model.to_checkpoint(), result.checkpoint_path);
        std::ofstream f(result.csv_path);
        if (!f) throw IoError("run_training: cannot write '" + result.csv_path + "'");
        f << result.csv;
    }
    return result;
}

double validation_loss(const VelocityModel& model, const Corpus& corpus, const ToyCodec& codec,
                       const std::string& split, const RfConfig& rf, std::size_t draws_per_clip,
                       std::uint64_t seed, bool no_references) {
    const std::vector<const ClipMeta*> clips = corpus.clips_of_split(split);
    if (clips.empty()) throw ContractError("validation_loss: no clips in split '" + split + "'");
    Rng rng(seed);
    double total = 0.0;
    std::size_t count = 0;
    for (const ClipMeta* clip : clips) {
        LatentVideo z0 = codec.encode_video(corpus.clip_tensor(*clip));
        ConditionContext ctx;
        if (no_references) {
            ctx.caption_id = clip->caption_id;
        } else {
            ctx = canonical_context(corpus, codec, clip->subject, clip->caption_id);
        }
        for (std::size_t d = 0; d < draws_per_clip; ++d) {
            const double t = rng.uniform();
            Tensor noise(z0.data.shape());
            for (double& x : noise.data()) x = rng.normal();
            LatentVideo eps(std::move(noise));
            GradTape tape;
            VelocityModel::Bound bound = model.bind(tape);
            auto velocity = [&](GradTape& tp, const LatentVideo& z, double tt,
                                const ConditionContext& c) {
                return model.forward(tp, bound, z, tt, c);
            };
            GradTape::Var loss = rf_loss(tape, velocity, z0, eps, t, ctx, rf);
            total += tape.value(loss)[0];
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

std::map<std::string, double> validation_loss_by_view(const VelocityModel& model,
                                                      const Corpus& corpus, const ToyCodec& codec,
                                                      const RfConfig& rf,
                                                      std::size_t draws_per_clip,
                                                      std::uint64_t seed) {
    std::vector<const ClipMeta*> clips = corpus.clips_of_split("val");
    for (const ClipMeta* c : corpus.clips_of_split("val_back")) clips.push_back(c);
    if (clips.empty()) throw ContractError("validation_loss_by_view: no validation clips");
    Rng rng(seed);
    std::map<std::string, double> sums;
    std::map<std::string, std::size_t> counts;
    for (const ClipMeta* clip : clips) {
        const std::string label = body_label_of_clip(*clip, corpus.params.frames);
        LatentVideo z0 = codec.encode_video(corpus.clip_tensor(*clip));
        ConditionContext ctx = canonical_context(corpus, codec, clip->subject, clip->caption_id);
        for (std::size_t d = 0; d < draws_per_clip; ++d) {
            const double t = rng.uniform();
            Tensor noise(z0.data.shape());
            for (double& x : noise.data()) x = rng.normal();
            LatentVideo eps(std::move(noise));
            GradTape tape;
            VelocityModel::Bound bound = model.bind(tape);
            auto velocity = [&](GradTape& tp, const LatentVideo& z, double tt,
                                const ConditionContext& c) {
                return model.forward(tp, bound, z, tt, c);
            };
            sums[label] += tape.value(rf_loss(tape, velocity, z0, eps, t, ctx, rf))[0];
            counts[label] += 1;
        }
    }
    std::map<std::string, double> out;
    for (const auto& [label, sum] : sums) out[label] = sum / static_cast<double>(counts.at(label));
    return out;
}

// ---- ablation --------------------------------------------------------------

std::string AblationReport::to_text() const {
    std::ostringstream os;
    os << "Reference sampling strategies (toy validation RF loss; lower is better;\n"
          "not comparable to any full-scale score):\n";
    os << "  Setting              Front    Side     Back     Average\n";
    for (const SamplingAblationRow& r : sampling) {
        char line[160];
        std::snprintf(line, sizeof(line), "  %-20s %-8.4f %-8.4f %-8.4f %-8.4f\n", r.setting.c_str(),
                      r.front, r.side, r.back, r.average);
        os << line;
    }
    os << "\nModel components (toy validation RF loss; lower is better):\n";
    os << "  Setting              AIPA  I-RoPE  ValLoss  BackLoss\n";
    for (const ArchitectureAblationRow& r : architecture) {
        char line[160];
        std::snprintf(line, sizeof(line), "  %-20s %-5s %-7s %-8.4f %-8.4f\n", r.setting.c_str(),
                      r.aipa ? "yes" : "no", r.irope ? "yes" : "no", r.val_loss, r.back_loss);
        os << line;
    }
    return os.str();
}

std::string AblationReport::to_json() const {
    json js;
    js["sampling"] = json::array();
    for (const SamplingAblationRow& r : sampling) {
        js["sampling"].push_back({{"setting", r.setting},
                                  {"front", r.front},
                                  {"side", r.side},
                                  {"back", r.back},
                                  {"average", r.average}});
    }
    js["architecture"] = json::array();
    for (const ArchitectureAblationRow& r : architecture) {
        js["architecture"].push_back({{"setting", r.setting},
                                      {"aipa", r.aipa},
                                      {"irope", r.irope},
                                      {"val_loss", r.val_loss},
                                      {"back_loss", r.back_loss}});
    }
    js["note"] = "toy-scale reconstruction losses; lower is better; not comparable to "
                 "full-scale benchmark scores";
    return js.dump(2);
}

AblationReport run_ablation(const ExperimentConfig& cfg, const Corpus& corpus) {
    const ToyCodec codec{codec_from_string(cfg.codec)};
    AblationReport report;

    const std::vector<std::pair<std::string, std::string>> strategies = {
        {"Raw-Crop", "raw_crop"},
        {"Random Sampling", "random"},
        {"Viewpoint-Adaptive", "viewpoint_adaptive"},
    };
    for (const auto& [label, strategy] : strategies) {
        TrainOverrides ov;
        ov.strategy = strategy;
        TrainRunResult run = run_training(cfg, corpus, "ablate_" + strategy, ov, false);
        auto by_view = validation_loss_by_view(run.model, corpus, codec, cfg.rf,
                                               cfg.train.val_draws, cfg.seed + 9001);
        SamplingAblationRow row;
        row.setting = label;
        row.front = by_view.count("F") ? by_view["F"] : 0.0;
        row.side = by_view.count("S") ? by_view["S"] : 0.0;
        row.back = by_view.count("B") ? by_view["B"] : 0.0;
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& [k, v] : by_view) {
            sum += v;
            ++n;
        }
        row.average = n ? sum / static_cast<double>(n) : 0.0;
        report.sampling.push_back(row);
    }

    const std::vector<std::tuple<std::string, bool, bool>> archs = {
        {"Full-Attn", false, true},
        {"AIPA only", true, false},
        {"AIPA + I-RoPE", true, true},
    };
    for (const auto& [label, aipa, irope] : archs) {
        TrainOverrides ov;
        ov.use_aipa = aipa;
        ov.use_irope = irope;
        TrainRunResult run = run_training(cfg, corpus, "ablate_arch", ov, false);
        ArchitectureAblationRow row;
        row.setting = label;
        row.aipa = aipa;
        row.irope = irope;
        row.val_loss = validation_loss(run.model, corpus, codec, "val", cfg.rf, cfg.train.val_draws,
                                       cfg.seed + 9002);
        row.back_loss = validation_loss(run.model, corpus, codec, "val_back", cfg.rf,
                                        cfg.train.val_draws, cfg.seed + 9003);
        report.architecture.push_back(row);
    }
    return report;
}

std::string run_sampling(const ExperimentConfig& cfg, const Corpus& corpus,
                         const VelocityModel& model, const std::string& subject, int caption_id,
                         std::size_t steps, std::uint64_t seed, const std::string& name) {
    const ToyCodec codec{codec_from_string(cfg.codec)};
    ConditionContext ctx = canonical_context(corpus, codec, subject, caption_id);

    // latent shape from a reference clip of this subject
    const ClipMeta* proto = nullptr;
    for (const ClipMeta& c : corpus.clips) {
        if (c.subject == subject) {
            proto = &c;
            break;
        }
    }
    if (!proto) throw ContractError("run_sampling: unknown subject '" + subject + "'");
    LatentVideo shape_ref = codec.encode_video(corpus.clip_tensor(*proto));

    Rng rng(seed);
    Tensor noise(shape_ref.data.shape());
    for (double& x : noise.data()) x = rng.normal();

    LatentVideo z = euler_sample(model.as_velocity_eval(), LatentVideo(std::move(noise)), ctx, steps);
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("run_sampling: cannot create '" + cfg.out_dir + "': " + ec.message());
    Checkpoint out;
    out.put("latent", z.data);
    out.put("decoded", codec.decode_video(z));
    const std::string path = (fs::path(cfg.out_dir) / (name + ".wact")).string();
    save_checkpoint(out, path);
    return path;
}

} // namespace wact
