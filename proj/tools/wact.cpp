// Command-line driver: synthetic corpus generation, toy training, sampling,
// ablations, curation runs and benchmark scoring.
//
// Exit codes: 0 success, 2 config error, 3 I/O error, 4 contract/validation
// error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "wact/bench.hpp"
#include "wact/config.hpp"
#include "wact/experiments.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

wact::ExperimentConfig load_or_default(const std::string& config_path) {
    if (config_path.empty()) return wact::ExperimentConfig{};
    return wact::load_config(config_path);
}

std::vector<json> read_jsonl(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw wact::IoError("cannot open '" + path + "'");
    std::vector<json> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            rows.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw wact::ValidationError(path + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return rows;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path);
    if (!f) throw wact::IoError("cannot write '" + path + "'");
    f << content;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"wact: identity-conditioned video mechanisms at desk scale"};
    app.require_subcommand(1);

    std::string config_path, out_dir, corpus_dir;
    std::uint64_t seed = 0;
    bool seed_set = false, out_set = false;

    // ---- gen-corpus ----
    auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic identity corpus");
    std::size_t gc_subjects = 0, gc_frames = 0, gc_size = 0, gc_clips = 0, gc_val_clips = 0;
    std::string gc_profile;
    gen->add_option("--config", config_path, "experiment config JSON");
    gen->add_option("--out", out_dir, "output directory")->required();
    auto* gc_seed_opt = gen->add_option("--seed", seed, "corpus seed");
    gen->add_option("--subjects", gc_subjects, "number of subjects");
    gen->add_option("--frames", gc_frames, "frames per clip");
    gen->add_option("--size", gc_size, "render edge length");
    gen->add_option("--clips", gc_clips, "train clips per subject");
    gen->add_option("--val-clips", gc_val_clips, "validation clips per subject (per split)");
    gen->add_option("--profile", gc_profile, "view profile: canonical|imbalanced");

    // ---- train ----
    auto* train = app.add_subcommand("train", "train the toy velocity model");
    std::string train_run = "train", train_strategy;
    std::size_t train_steps = 0;
    bool train_no_refs = false;
    train->add_option("--config", config_path, "experiment config JSON");
    train->add_option("--corpus", corpus_dir, "corpus directory");
    auto* tr_out_opt = train->add_option("--out", out_dir, "output directory");
    auto* tr_seed_opt = train->add_option("--seed", seed, "training seed");
    train->add_option("--steps", train_steps, "optimizer steps");
    train->add_option("--strategy", train_strategy, "raw_crop|random|viewpoint_adaptive");
    train->add_option("--run-name", train_run, "output file stem");
    train->add_flag("--no-references", train_no_refs, "train without reference conditioning");

    // ---- sample ----
    auto* sample = app.add_subcommand("sample", "generate latents from a trained checkpoint");
    std::string sm_ckpt, sm_subject = "subj_000", sm_name = "sample";
    int sm_caption = 0;
    std::size_t sm_steps = 0;
    sample->add_option("--config", config_path, "experiment config JSON");
    sample->add_option("--corpus", corpus_dir, "corpus directory");
    sample->add_option("--checkpoint", sm_ckpt, "model checkpoint")->required();
    auto* sm_out_opt = sample->add_option("--out", out_dir, "output directory");
    auto* sm_seed_opt = sample->add_option("--seed", seed, "noise seed");
    sample->add_option("--subject", sm_subject, "subject id");
    sample->add_option("--caption", sm_caption, "caption id");
    sample->add_option("--steps", sm_steps, "Euler steps");
    sample->add_option("--name", sm_name, "output file stem");

    // ---- ablate ----
    auto* ablate = app.add_subcommand("ablate", "run the sampling and architecture ablations");
    ablate->add_option("--config", config_path, "experiment config JSON");
    ablate->add_option("--corpus", corpus_dir, "corpus directory");
    auto* ab_out_opt = ablate->add_option("--out", out_dir, "output directory");
    auto* ab_seed_opt = ablate->add_option("--seed", seed, "run seed");

    // ---- curate ----
    auto* curate = app.add_subcommand("curate", "run the filter cascade over metadata records");
    std::string cu_in;
    double cu_tau_face = -1.0, cu_tau_clip = -1.0, cu_tau_track = -1.0;
    curate->add_option("--config", config_path, "experiment config JSON");
    curate->add_option("--in", cu_in, "input records JSONL")->required();
    curate->add_option("--out", out_dir, "output directory")->required();
    curate->add_option("--tau-face", cu_tau_face, "coarse identity threshold");
    curate->add_option("--tau-clip", cu_tau_clip, "fine clip-consistency threshold");
    curate->add_option("--tau-track", cu_tau_track, "fine tracking threshold");
    std::string cu_jobs_subset;
    curate->add_option("--emit-jobs", cu_jobs_subset, "emit augmentation jobs for subset A|B|C");
    auto* cu_seed_opt = curate->add_option("--seed", seed, "job sampling seed");

    // ---- stats ----
    auto* stats = app.add_subcommand("stats", "viewpoint distribution statistics");
    std::string st_in;
    stats->add_option("--in", st_in, "input records JSONL")->required();
    stats->add_option("--out", out_dir, "output directory");

    // ---- bench ----
    auto* bench = app.add_subcommand("bench", "score generated videos");
    std::string be_videos, be_bank, be_verdicts, be_embeds, be_judge = "fixture", be_policy = "zero";
    bench->add_option("--config", config_path, "experiment config JSON");
    bench->add_option("--videos", be_videos, "videos JSONL")->required();
    bench->add_option("--bank", be_bank, "reference bank JSONL")->required();
    bench->add_option("--verdicts", be_verdicts, "fixture verdict JSONL (fixture judge)");
    bench->add_option("--embeds", be_embeds, "embedding fixture JSONL")->required();
    auto* be_out_opt = bench->add_option("--out", out_dir, "output directory");
    bench->add_option("--judge", be_judge, "fixture|remote (remote reads WA_JUDGE_URL/WA_JUDGE_TOKEN)");
    bench->add_option("--policy", be_policy, "judge-error policy: zero|exclude");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e); // --help exits 0 here
    }

    try {
        wact::ExperimentConfig cfg = load_or_default(config_path);
        seed_set = gc_seed_opt->count() || tr_seed_opt->count() || sm_seed_opt->count() ||
                   ab_seed_opt->count() || cu_seed_opt->count();
        out_set = tr_out_opt->count() || sm_out_opt->count() || ab_out_opt->count() ||
                  be_out_opt->count();
        if (seed_set) cfg.seed = seed;
        if (out_set) cfg.out_dir = out_dir;
        if (!corpus_dir.empty()) cfg.corpus_dir = corpus_dir;

        if (*gen) {
            wact::CorpusParams params = cfg.corpus;
            params.seed = seed_set ? seed : cfg.corpus.seed;
            if (gc_subjects) params.n_subjects = gc_subjects;
            if (gc_frames) params.frames = gc_frames;
            if (gc_size) params.image_size = gc_size;
            if (gc_clips) params.clips_per_subject = gc_clips;
            if (gc_val_clips) params.val_clips_per_subject = gc_val_clips;
            if (!gc_profile.empty()) params.profile = gc_profile;
            wact::gen_corpus(params, out_dir);
            std::cout << "corpus written to " << out_dir << " ("
                      << params.n_subjects * wact::profile_views_per_subject(params.profile)
                      << " pool rows)\n";
        } else if (*train) {
            wact::Corpus corpus = wact::Corpus::load(cfg.corpus_dir);
            wact::TrainOverrides ov;
            if (train_steps) ov.steps = train_steps;
            if (!train_strategy.empty()) ov.strategy = train_strategy;
            ov.no_references = train_no_refs;
            wact::TrainRunResult result = wact::run_training(cfg, corpus, train_run, ov, true);
            std::cout << "trained " << result.losses.size() << " steps; final loss "
                      << result.losses.back() << "\n"
                      << "checkpoint: " << result.checkpoint_path << "\n"
                      << "losses: " << result.csv_path << "\n";
        } else if (*sample) {
            wact::Corpus corpus = wact::Corpus::load(cfg.corpus_dir);
            wact::Rng dummy(1);
            wact::VelocityModel model(cfg.model, dummy);
            model.load_from_checkpoint(wact::load_checkpoint(sm_ckpt));
            const std::size_t steps = sm_steps ? sm_steps : cfg.rf.sampler_steps;
            const std::string path = wact::run_sampling(cfg, corpus, model, sm_subject, sm_caption,
                                                        steps, cfg.seed, sm_name);
            std::cout << "sample written to " << path << "\n";
        } else if (*ablate) {
            wact::Corpus corpus = wact::Corpus::load(cfg.corpus_dir);
            wact::AblationReport report = wact::run_ablation(cfg, corpus);
            std::error_code ec;
            fs::create_directories(cfg.out_dir, ec);
            if (ec) throw wact::IoError("cannot create '" + cfg.out_dir + "'");
            write_file((fs::path(cfg.out_dir) / "ablation.txt").string(), report.to_text());
            write_file((fs::path(cfg.out_dir) / "ablation.json").string(), report.to_json());
            std::cout << report.to_text();
        } else if (*curate) {
            wact::FilterThresholds th = cfg.thresholds;
            if (cu_tau_face >= 0.0) th.tau_face = cu_tau_face;
            if (cu_tau_clip >= 0.0) th.tau_clip = cu_tau_clip;
            if (cu_tau_track >= 0.0) th.tau_track = cu_tau_track;
            auto records = wact::load_records_jsonl(cu_in);
            wact::CascadeResult result = wact::run_cascade(records, th);
            std::error_code ec;
            fs::create_directories(out_dir, ec);
            if (ec) throw wact::IoError("cannot create '" + out_dir + "'");
            wact::save_records_jsonl(result.kept, (fs::path(out_dir) / "kept.jsonl").string());
            wact::save_audit_jsonl(result.audit, (fs::path(out_dir) / "audit.jsonl").string());
            if (!cu_jobs_subset.empty()) {
                wact::Rng rng(seed_set ? seed : cfg.seed);
                auto jobs = wact::make_augmentation_jobs(result.kept, cu_jobs_subset, rng);
                wact::save_jobs_jsonl(jobs, (fs::path(out_dir) / "jobs.jsonl").string());
            }
            std::cout << "kept " << result.kept.size() << " of " << records.size() << " records ("
                      << result.audit.size() << " audited)\n";
        } else if (*stats) {
            auto records = wact::load_records_jsonl(st_in);
            wact::ViewpointStats vs = wact::viewpoint_stats(records);
            const std::string table = wact::format_stats_table(vs);
            std::cout << table;
            if (!out_dir.empty()) {
                std::error_code ec;
                fs::create_directories(out_dir, ec);
                if (ec) throw wact::IoError("cannot create '" + out_dir + "'");
                write_file((fs::path(out_dir) / "stats.txt").string(), table);
                write_file((fs::path(out_dir) / "stats.json").string(), wact::stats_to_json(vs));
            }
        } else if (*bench) {
            std::unique_ptr<wact::Judge> judge;
            if (be_judge == "remote") {
                auto remote = wact::RemoteJudge::from_env();
                if (!remote) throw wact::ConfigError("remote judge requested but WA_JUDGE_URL is unset");
                judge = std::move(remote);
            } else if (be_judge == "fixture") {
                if (be_verdicts.empty()) {
                    throw wact::ConfigError("fixture judge needs --verdicts");
                }
                judge = std::make_unique<wact::FixtureJudge>(wact::FixtureJudge::from_file(be_verdicts));
            } else {
                throw wact::ConfigError("unknown judge '" + be_judge + "'");
            }
            const wact::JudgeErrorPolicy policy = be_policy == "exclude"
                                                      ? wact::JudgeErrorPolicy::Exclude
                                                      : wact::JudgeErrorPolicy::ScoreZero;
            wact::FixtureEmbedder embedder = wact::FixtureEmbedder::from_file(be_embeds);

            std::map<std::string, wact::ReferenceBank> banks;
            for (const json& j : read_jsonl(be_bank)) {
                wact::ReferenceBank::Entry entry;
                entry.view = j.at("view").get<std::string>();
                entry.embedding = j.at("embedding").get<std::vector<double>>();
                entry.image_ref = j.value("image_ref", "");
                banks[j.at("subject_id").get<std::string>()].entries.push_back(std::move(entry));
            }

            wact::BenchReport report;
            for (const json& j : read_jsonl(be_videos)) {
                wact::VideoHandle video;
                video.video_id = j.at("video_id").get<std::string>();
                video.subject_id = j.at("subject_id").get<std::string>();
                video.setting = j.value("setting", "arbitrary");
                video.frames = j.at("frames").get<long>();
                video.prompt = j.value("prompt", video.video_id);
                auto bank = banks.find(video.subject_id);
                if (bank == banks.end()) {
                    throw wact::ValidationError("no reference bank for subject '" + video.subject_id +
                                                "'");
                }
                report.rows.push_back(
                    wact::evaluate_video(video, bank->second, *judge, embedder, policy));
            }
            const std::string csv = wact::report_to_csv(report);
            std::cout << csv;
            if (!cfg.out_dir.empty()) {
                std::error_code ec;
                fs::create_directories(cfg.out_dir, ec);
                if (ec) throw wact::IoError("cannot create '" + cfg.out_dir + "'");
                write_file((fs::path(cfg.out_dir) / "bench.csv").string(), csv);
                write_file((fs::path(cfg.out_dir) / "bench.json").string(),
                           wact::report_to_json(report));
            }
        }
    } catch (const wact::ConfigError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 2;
    } catch (const wact::IoError& e) {
        std::cerr << "error: io: " << e.what() << "\n";
        return 3;
    } catch (const wact::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
