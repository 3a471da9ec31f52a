#include "wact/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "wact/error.hpp"

namespace wact {

using nlohmann::json;

namespace {

double label_angle(const std::string& label) {
    return is_body_view(label) && !is_face_view(label) ? body_view_angle(label)
                                                       : face_view_angle(label);
}

std::size_t label_rank(const std::string& label) {
    // fixed tie order: F < S < B for bodies, F < L < R < U < D for faces
    static const std::vector<std::string> order = {"F", "S", "B", "L", "R", "U", "D"};
    for (std::size_t i = 0; i < order.size(); ++i)
        if (order[i] == label) return i;
    return order.size();
}

} // namespace

const ReferenceBank::Entry& match_reference(const std::string& estimated_view,
                                            const ReferenceBank& bank) {
    if (bank.empty()) throw ContractError("match_reference: empty reference bank");
    for (const auto& e : bank.entries)
        if (e.view == estimated_view) return e;
    const double target = label_angle(estimated_view);
    const ReferenceBank::Entry* best = &bank.entries[0];
    double best_d = circular_distance(target, label_angle(best->view));
    for (const auto& e : bank.entries) {
        const double d = circular_distance(target, label_angle(e.view));
        if (d < best_d || (d == best_d && label_rank(e.view) < label_rank(best->view))) {
            best = &e;
            best_d = d;
        }
    }
    return *best;
}

double score_body(const std::vector<FrameObservation>& observations) {
    if (observations.empty()) throw DomainError("score_body: no observations");
    double sum = 0.0;
    for (const FrameObservation& o : observations) sum += static_cast<double>(o.body_verdict);
    return sum / static_cast<double>(observations.size());
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty()) {
        throw DimensionError("cosine_similarity: vector lengths " + std::to_string(a.size()) +
                             " vs " + std::to_string(b.size()));
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw DomainError("cosine_similarity: zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double score_face_identity(const std::vector<FrameObservation>& observations,
                           const ReferenceBank& bank) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const FrameObservation& o : observations) {
        if (!o.face_embedding) continue;
        const ReferenceBank::Entry& ref = match_reference(o.estimated_view, bank);
        sum += cosine_similarity(*o.face_embedding, ref.embedding);
        ++n;
    }
    if (n == 0) throw DomainError("score_face_identity: no face-bearing frames");
    return sum / static_cast<double>(n);
}

double score_alignment(const std::vector<int>& video_verdicts) {
    if (video_verdicts.empty()) throw DomainError("score_alignment: no videos");
    double sum = 0.0;
    for (int v : video_verdicts) sum += static_cast<double>(v);
    return sum / static_cast<double>(video_verdicts.size());
}

// ---- fixture judge -------------------------------------------------------

FixtureJudge FixtureJudge::from_string(const std::string& jsonl) {
    FixtureJudge judge;
    std::istringstream is(jsonl);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
            Row row;
            row.view = j.value("view", "F");
            row.verdict = j.at("verdict").get<int>();
            judge.rows_[{j.at("video_id").get<std::string>(), j.at("frame_index").get<long>()}] = row;
        } catch (const json::exception& e) {
            throw ValidationError("verdict fixture line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return judge;
}

FixtureJudge FixtureJudge::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open verdict fixture '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return from_string(ss.str());
}

const FixtureJudge::Row& FixtureJudge::row(const std::string& video_id, long frame_index) const {
    auto it = rows_.find({video_id, frame_index});
    if (it == rows_.end()) {
        throw IoError("verdict fixture has no row for " + video_id + " frame " +
                      std::to_string(frame_index));
    }
    return it->second;
}

std::string FixtureJudge::estimate_view(const std::string& video_id, long frame_index) {
    return row(video_id, frame_index).view;
}

int FixtureJudge::verify_identity(const std::string& video_id, long frame_index,
                                  const std::string&) {
    return row(video_id, frame_index).verdict;
}

int FixtureJudge::verify_alignment(const std::string& video_id, const std::string&) {
    return row(video_id, -1).verdict;
}

// ---- remote judge ----------------------------------------------------------

RemoteJudge::RemoteJudge(RemoteJudgeConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.url.empty()) throw ConfigError("remote judge: empty URL");
}

std::unique_ptr<RemoteJudge> RemoteJudge::from_env() {
    const char* url = std::getenv("WA_JUDGE_URL");
    if (!url || !*url) return nullptr;
    RemoteJudgeConfig cfg;
    cfg.url = url;
    if (const char* token = std::getenv("WA_JUDGE_TOKEN")) cfg.token = token;
    return std::make_unique<RemoteJudge>(std::move(cfg));
}

std::string RemoteJudge::post(const std::string& body) {
    std::string last_error;
    int backoff = cfg_.backoff_ms;
    for (int attempt = 0; attempt < cfg_.max_attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
            backoff *= 2;
        }
        httplib::Client client(cfg_.url);
        client.set_connection_timeout(cfg_.timeout_s);
        client.set_read_timeout(cfg_.timeout_s);
        httplib::Headers headers;
        if (!cfg_.token.empty()) headers.emplace("Authorization", "Bearer " + cfg_.token);
        auto res = client.Post("/judge", headers, body, "application/json");
        if (res && res->status == 200) return res->body;
        last_error = res ? "HTTP " + std::to_string(res->status)
                         : "transport error " + httplib::to_string(res.error());
    }
    throw IoError("remote judge: " + last_error + " after " + std::to_string(cfg_.max_attempts) +
                  " attempts");
}

std::string RemoteJudge::estimate_view(const std::string& video_id, long frame_index) {
    json req = {{"action", "view"}, {"video_id", video_id}, {"frame_index", frame_index}};
    json res = json::parse(post(req.dump()));
    return res.at("view").get<std::string>();
}

int RemoteJudge::verify_identity(const std::string& video_id, long frame_index,
                                 const std::string& reference_ref) {
    json req = {{"action", "identity"},
                {"video_id", video_id},
                {"frame_index", frame_index},
                {"reference", reference_ref}};
    json res = json::parse(post(req.dump()));
    return res.at("verdict").get<int>();
}

int RemoteJudge::verify_alignment(const std::string& video_id, const std::string& prompt) {
    json req = {{"action", "alignment"}, {"video_id", video_id}, {"prompt", prompt}};
    json res = json::parse(post(req.dump()));
    return res.at("verdict").get<int>();
}

// ---- fixture embedder ------------------------------------------------------

FixtureEmbedder FixtureEmbedder::from_string(const std::string& jsonl) {
    FixtureEmbedder emb;
    std::istringstream is(jsonl);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
            const std::string vid = j.at("video_id").get<std::string>();
            if (j.contains("face_embedding")) {
                emb.faces_[{vid, j.at("frame_index").get<long>()}] =
                    j["face_embedding"].get<std::vector<double>>();
            } else if (j.contains("video_feature")) {
                emb.video_features_[vid] = j["video_feature"].get<std::vector<double>>();
            } else if (j.contains("text_feature")) {
                emb.text_features_[vid] = j["text_feature"].get<std::vector<double>>();
            }
        } catch (const json::exception& e) {
            throw ValidationError("embedding fixture line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return emb;
}

FixtureEmbedder FixtureEmbedder::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open embedding fixture '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return from_string(ss.str());
}

std::optional<std::vector<double>> FixtureEmbedder::face_embedding(const std::string& video_id,
                                                                   long frame_index) {
    auto it = faces_.find({video_id, frame_index});
    if (it == faces_.end()) return std::nullopt;
    return it->second;
}

std::vector<double> FixtureEmbedder::video_feature(const std::string& video_id) {
    auto it = video_features_.find(video_id);
    if (it == video_features_.end()) throw IoError("no video feature for '" + video_id + "'");
    return it->second;
}

std::vector<double> FixtureEmbedder::text_feature(const std::string& prompt) {
    // keyed by video id in the fixture; fall back to prompt string
    auto it = text_features_.find(prompt);
    if (it == text_features_.end()) throw IoError("no text feature for '" + prompt + "'");
    return it->second;
}

// ---- end-to-end evaluation ---------------------------------------------

BenchRow evaluate_video(const VideoHandle& video, const ReferenceBank& bank, Judge& judge,
                        Embedder& embedder, JudgeErrorPolicy policy) {
    if (video.frames <= 0) throw ContractError("evaluate_video: no frames in '" + video.video_id + "'");
    std::vector<FrameObservation> obs;
    obs.reserve(static_cast<std::size_t>(video.frames));
    std::size_t errors = 0;
    for (long f = 0; f < video.frames; ++f) {
        FrameObservation o;
        o.frame_index = f;
        try {
            o.estimated_view = judge.estimate_view(video.video_id, f);
            const ReferenceBank::Entry& ref = match_reference(o.estimated_view, bank);
            o.body_verdict = judge.verify_identity(video.video_id, f, ref.image_ref);
        } catch (const Error&) {
            o.judge_error = true;
            o.body_verdict = 0;
            ++errors;
            if (policy == JudgeErrorPolicy::Exclude) continue;
        }
        o.face_embedding = embedder.face_embedding(video.video_id, f);
        if (o.judge_error) o.face_embedding.reset(); // no trusted view to match against
        obs.push_back(std::move(o));
    }
    if (obs.empty()) throw DomainError("evaluate_video: every frame failed and policy excludes them");

    BenchRow row;
    row.subject_id = video.subject_id;
    row.setting = video.setting;
    row.score_body = score_body(obs);
    row.face_id = score_face_identity(obs, bank);
    row.feat_align =
        cosine_similarity(embedder.video_feature(video.video_id), embedder.text_feature(video.prompt));
    row.vlm_align = judge.verify_alignment(video.video_id, video.prompt);
    row.judge_errors = errors;
    row.embedder = embedder.name();
    return row;
}

double BenchReport::mean_body() const {
    double s = 0.0;
    for (const BenchRow& r : rows) s += r.score_body;
    return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

double BenchReport::mean_face() const {
    double s = 0.0;
    for (const BenchRow& r : rows) s += r.face_id;
    return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

double BenchReport::mean_feat() const {
    double s = 0.0;
    for (const BenchRow& r : rows) s += r.feat_align;
    return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

double BenchReport::mean_vlm() const {
    std::vector<int> verdicts;
    verdicts.reserve(rows.size());
    for (const BenchRow& r : rows) verdicts.push_back(r.vlm_align);
    return verdicts.empty() ? 0.0 : score_alignment(verdicts);
}

std::string report_to_csv(const BenchReport& report) {
    std::ostringstream os;
    os << "subject_id,setting,score_body,face_id,feat_align,vlm_align\n";
    os.precision(17);
    for (const BenchRow& r : report.rows) {
        os << r.subject_id << "," << r.setting << "," << r.score_body << "," << r.face_id << ","
           << r.feat_align << "," << r.vlm_align << "\n";
    }
    return os.str();
}

std::string report_to_json(const BenchReport& report) {
    json agg = {{"videos", report.rows.size()},
                {"face_identity", report.mean_face()},
                {"body_consistency", report.mean_body()},
                {"semantic_alignment",
                 {{"feature_level", report.mean_feat()}, {"vlm_level", report.mean_vlm()}}}};
    json per_setting = json::object();
    for (const char* setting : {"three-view", "arbitrary", "in-the-wild"}) {
        BenchReport sub;
        for (const BenchRow& r : report.rows)
            if (r.setting == setting) sub.rows.push_back(r);
        if (sub.rows.empty()) continue;
        per_setting[setting] = {{"videos", sub.rows.size()},
                                {"face_identity", sub.mean_face()},
                                {"body_consistency", sub.mean_body()},
                                {"semantic_alignment",
                                 {{"feature_level", sub.mean_feat()}, {"vlm_level", sub.mean_vlm()}}}};
    }
    json out = {{"aggregate", agg}, {"per_setting", per_setting}};
    if (!report.rows.empty()) out["embedder"] = report.rows.front().embedder;
    return out.dump(2);
}

} // namespace wact
