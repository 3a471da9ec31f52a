#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wact/views.hpp"

namespace wact {

// Per-frame evaluation outcome.
struct FrameObservation {
    long frame_index = 0;
    std::string estimated_view;                        // face/body label
    int body_verdict = 0;                              // binary identity verdict
    std::optional<std::vector<double>> face_embedding; // unit-norm when present
    bool judge_error = false;
};

// Ground-truth references covering multiple viewpoints for one subject.
struct ReferenceBank {
    struct Entry {
        std::string view;
        std::vector<double> embedding;
        std::string image_ref; // opaque handle passed to the judge
    };
    std::vector<Entry> entries;

    bool empty() const { return entries.empty(); }
};

// Picks the bank entry with the same label, else the one at minimal circular
// angular distance under the fixed label->angle map; ties resolve in label
// order F<S<B (body) and F<L<R<U<D (face).
const ReferenceBank::Entry& match_reference(const std::string& estimated_view,
                                            const ReferenceBank& bank);

// (1/T) sum of binary body verdicts.
double score_body(const std::vector<FrameObservation>& observations);

// Mean cosine between each face-bearing frame embedding and its
// viewpoint-matched reference embedding; faceless frames are excluded.
double score_face_identity(const std::vector<FrameObservation>& observations,
                           const ReferenceBank& bank);

// (1/N) sum of video-level alignment verdicts.
double score_alignment(const std::vector<int>& video_verdicts);

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

// ---- pluggable oracles -----------------------------------------------------

// Binary-verdict oracle: view estimation, frame-vs-reference identity check,
// video-level prompt adherence. Implementations may throw on transport
// failure; the evaluator records the frame as judge_error.
class Judge {
public:
    virtual ~Judge() = default;
    virtual std::string estimate_view(const std::string& video_id, long frame_index) = 0;
    virtual int verify_identity(const std::string& video_id, long frame_index,
                                const std::string& reference_ref) = 0;
    virtual int verify_alignment(const std::string& video_id, const std::string& prompt) = 0;
};

// Deterministic judge reading scripted verdicts from a JSONL fixture:
//   {"video_id": str, "frame_index": int, "view": str, "verdict": 0|1}
// frame_index -1 carries the video-level alignment verdict.
class FixtureJudge : public Judge {
public:
    static FixtureJudge from_file(const std::string& path);
    static FixtureJudge from_string(const std::string& jsonl);

    std::string estimate_view(const std::string& video_id, long frame_index) override;
    int verify_identity(const std::string& video_id, long frame_index,
                        const std::string& reference_ref) override;
    int verify_alignment(const std::string& video_id, const std::string& prompt) override;

private:
    struct Row {
        std::string view;
        int verdict = 0;
    };
    std::map<std::pair<std::string, long>, Row> rows_;
    const Row& row(const std::string& video_id, long frame_index) const;
};

struct RemoteJudgeConfig {
    std::string url;   // e.g. http://host:port
    std::string token; // bearer token, may be empty
    int timeout_s = 10;
    int max_attempts = 3;
    int backoff_ms = 100; // doubles per retry
};

// HTTP judge client. POSTs JSON to <url>/judge:
//   {"action": "view"|"identity"|"alignment", "video_id": ..., ...}
// and expects {"view": str} or {"verdict": 0|1}. Reads WA_JUDGE_URL and
// WA_JUDGE_TOKEN when constructed from the environment.
class RemoteJudge : public Judge {
public:
    explicit RemoteJudge(RemoteJudgeConfig cfg);
    static std::unique_ptr<RemoteJudge> from_env(); // nullptr when WA_JUDGE_URL unset

    std::string estimate_view(const std::string& video_id, long frame_index) override;
    int verify_identity(const std::string& video_id, long frame_index,
                        const std::string& reference_ref) override;
    int verify_alignment(const std::string& video_id, const std::string& prompt) override;

private:
    RemoteJudgeConfig cfg_;
    std::string post(const std::string& body); // retries with backoff, throws IoError
};

// Feature provider for face identity and feature-level alignment.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::string name() const = 0;
    virtual std::optional<std::vector<double>> face_embedding(const std::string& video_id,
                                                              long frame_index) = 0;
    virtual std::vector<double> video_feature(const std::string& video_id) = 0;
    virtual std::vector<double> text_feature(const std::string& prompt) = 0;
};

// Fixture-backed embedder; rows:
//   {"video_id": str, "frame_index": int, "face_embedding": [...]}
//   {"video_id": str, "video_feature": [...]}
//   {"video_id": str, "text_feature": [...]}
class FixtureEmbedder : public Embedder {
public:
    static FixtureEmbedder from_file(const std::string& path);
    static FixtureEmbedder from_string(const std::string& jsonl);

    std::string name() const override { return "fixture"; }
    std::optional<std::vector<double>> face_embedding(const std::string& video_id,
                                                      long frame_index) override;
    std::vector<double> video_feature(const std::string& video_id) override;
    std::vector<double> text_feature(const std::string& prompt) override;

private:
    std::map<std::pair<std::string, long>, std::vector<double>> faces_;
    std::map<std::string, std::vector<double>> video_features_;
    std::map<std::string, std::vector<double>> text_features_;
};

// ---- end-to-end evaluation ---------------------------------------------

enum class JudgeErrorPolicy { ScoreZero, Exclude };

struct VideoHandle {
    std::string video_id;
    std::string subject_id;
    std::string setting; // "three-view" | "arbitrary" | "in-the-wild"
    long frames = 0;
    std::string prompt;
};

struct BenchRow {
    std::string subject_id;
    std::string setting;
    double score_body = 0.0;
    double face_id = 0.0;
    double feat_align = 0.0;
    int vlm_align = 0;
    std::size_t judge_errors = 0;
    std::string embedder;
};

struct BenchReport {
    std::vector<BenchRow> rows;
    double mean_body() const;
    double mean_face() const;
    double mean_feat() const;
    double mean_vlm() const; // Score_Align over videos
};

// Per-frame view estimation -> reference matching -> binary verdict, then
// the three aggregate metrics plus the video-level alignment verdict.
BenchRow evaluate_video(const VideoHandle& video, const ReferenceBank& bank, Judge& judge,
                        Embedder& embedder, JudgeErrorPolicy policy = JudgeErrorPolicy::ScoreZero);

std::string report_to_csv(const BenchReport& report);
std::string report_to_json(const BenchReport& report); // aggregate mirror

} // namespace wact
