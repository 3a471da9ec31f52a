#include "wact/curation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace wact {

using nlohmann::json;

namespace {

double mean(const std::vector<double>& xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

void validate_views(const VideoRecord& rec) {
    if (!is_face_view(rec.face_view)) {
        throw ValidationError("record '" + rec.id + "': unknown face view '" + rec.face_view + "'");
    }
    if (!is_body_view(rec.body_view)) {
        throw ValidationError("record '" + rec.id + "': unknown body view '" + rec.body_view + "'");
    }
}

} // namespace

FilterDecision coarse_filter(const VideoRecord& rec, const FilterThresholds& th) {
    if (rec.face_sims_1fps.empty()) {
        throw ValidationError("record '" + rec.id + "': no 1 fps face similarities");
    }
    const double m = mean(rec.face_sims_1fps);
    if (m < th.tau_face) return {false, "coarse", "coarse_identity", m};
    return {true, "coarse", "", m};
}

FilterDecision fine_filter(const VideoRecord& rec, const FilterThresholds& th) {
    if (rec.clip_sims_8fps.empty()) {
        throw ValidationError("record '" + rec.id + "': no 8 fps clip similarities");
    }
    if (rec.track_quality < th.tau_track) return {false, "fine", "tracking", rec.track_quality};
    const double m = mean(rec.clip_sims_8fps);
    // retained only strictly above the threshold
    if (!(m > th.tau_clip)) return {false, "fine", "clip_consistency", m};
    return {true, "fine", "", m};
}

CascadeResult run_cascade(const std::vector<VideoRecord>& records, const FilterThresholds& th,
                          SimilarityScorer* scorer) {
    CascadeResult res;
    for (const VideoRecord& in : records) {
        VideoRecord rec = in;
        if (scorer) {
            try {
                if (rec.face_sims_1fps.empty()) rec.face_sims_1fps = scorer->face_sims_1fps(rec.id);
                if (rec.clip_sims_8fps.empty()) {
                    rec.clip_sims_8fps = scorer->clip_sims_8fps(rec.id);
                    rec.track_quality = scorer->track_quality(rec.id);
                }
            } catch (const std::exception& e) {
                res.audit.push_back({rec.id, "scorer", std::string("scorer_error: ") + e.what(), 0.0});
                continue;
            }
        }
        FilterDecision coarse;
        try {
            coarse = coarse_filter(rec, th);
        } catch (const ValidationError& e) {
            res.audit.push_back({rec.id, "coarse", std::string("malformed: ") + e.what(), 0.0});
            continue;
        }
        if (!coarse.keep) {
            res.audit.push_back({rec.id, coarse.stage, coarse.reason, coarse.value});
            continue;
        }
        FilterDecision fine;
        try {
            fine = fine_filter(rec, th);
        } catch (const ValidationError& e) {
            res.audit.push_back({rec.id, "fine", std::string("malformed: ") + e.what(), 0.0});
            continue;
        }
        if (!fine.keep) {
            res.audit.push_back({rec.id, fine.stage, fine.reason, fine.value});
            continue;
        }
        res.kept.push_back(std::move(rec));
    }
    return res;
}

// ---- viewpoint statistics ------------------------------------------------

double ViewpointRow::percent(std::size_t label_idx) const {
    if (total == 0) return 0.0;
    return 100.0 * static_cast<double>(counts[label_idx].second) / static_cast<double>(total);
}

std::string ViewpointRow::distribution() const {
    std::string out;
    char buf[64];
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (i) out += " / ";
        std::snprintf(buf, sizeof(buf), "%s:%.1f", counts[i].first.c_str(), percent(i));
        out += buf;
    }
    return out;
}

ViewpointStats viewpoint_stats(const std::vector<VideoRecord>& records) {
    for (const VideoRecord& rec : records) validate_views(rec);
    ViewpointStats stats;
    const std::vector<std::string> sources = {"self_crop", "generated"};
    for (const char* region : {"face", "body"}) {
        const auto& labels = std::string(region) == "face" ? face_view_labels() : body_view_labels();
        for (const std::string& source : sources) {
            ViewpointRow row;
            row.region = region;
            row.source = source;
            for (const std::string& l : labels) row.counts.emplace_back(l, 0);
            for (const VideoRecord& rec : records) {
                if (rec.source != source) continue;
                const std::string& view = std::string(region) == "face" ? rec.face_view : rec.body_view;
                for (auto& [label, count] : row.counts) {
                    if (label == view) {
                        ++count;
                        ++row.total;
                        break;
                    }
                }
            }
            stats.rows.push_back(std::move(row));
        }
    }
    return stats;
}

std::string format_stats_table(const ViewpointStats& stats) {
    std::ostringstream os;
    os << "Region  Source      Quantity  Viewpoint Distribution (%)\n";
    for (const ViewpointRow& row : stats.rows) {
        char line[256];
        std::snprintf(line, sizeof(line), "%-7s %-11s %-9zu %s\n", row.region.c_str(),
                      row.source.c_str(), row.total, row.distribution().c_str());
        os << line;
    }
    return os.str();
}

std::string stats_to_json(const ViewpointStats& stats) {
    json out = json::object();
    for (const ViewpointRow& row : stats.rows) {
        json dist = json::object();
        for (std::size_t i = 0; i < row.counts.size(); ++i) {
            // one-decimal percentages, matching the text table
            dist[row.counts[i].first] = std::round(row.percent(i) * 10.0) / 10.0;
        }
        out[row.region][row.source] = {{"count", row.total}, {"distribution", dist}};
    }
    return out.dump(2);
}

// ---- attribute pool --------------------------------------------------------

const AttributePool& AttributePool::standard() {
    static const AttributePool pool = [] {
        AttributePool p;
        // 20 places x 10 qualifiers = 200 environments
        const std::vector<std::string> places = {
            "library",   "bedroom",  "market",     "beach",   "forest",  "rooftop", "subway",
            "cafe",      "office",   "gym",        "kitchen", "garden",  "stadium", "museum",
            "harbor",    "desert",   "mountain trail", "city street", "train station", "courtyard"};
        const std::vector<std::string> qualifiers = {"cozy",   "crowded", "serene",  "rainy",
                                                     "sunlit", "foggy",   "night-time", "snowy",
                                                     "autumn", "futuristic"};
        for (const auto& q : qualifiers)
            for (const auto& pl : places) p.environments.push_back(q + " " + pl);
        p.expressions = {"happiness", "sadness", "surprise", "fear",
                         "anger",     "disgust", "contempt", "neutral"};
        p.lighting = {"sunny day",      "overcast sky", "golden hour", "blue hour",
                      "studio softbox", "hard spotlight", "neon light",  "candlelight",
                      "firelight",      "cinematic rim light"};
        p.motions = {"walking",   "running",  "sitting",   "standing",  "reading",
                     "drinking",  "eating",   "talking",   "phone calling", "waving",
                     "jumping",   "dancing",  "cycling",   "yoga",      "stretching",
                     "boxing",    "swimming", "playing basketball", "playing football", "hiking",
                     "singing",   "playing guitar", "playing piano", "painting", "photography",
                     "laughing",  "crying",   "arguing",   "hugging",   "shaking hands"};
        return p;
    }();
    return pool;
}

std::vector<AugmentationJob> make_augmentation_jobs(const std::vector<VideoRecord>& records,
                                                    const std::string& subset, Rng& rng) {
    if (subset != "A" && subset != "B" && subset != "C") {
        throw ValidationError("unknown augmentation subset '" + subset + "'");
    }
    const AttributePool& pool = AttributePool::standard();
    const std::vector<std::string> six_views = {"front",    "left side", "right side",
                                                "back",     "top-down",  "bottom-up"};
    std::vector<AugmentationJob> jobs;
    for (const VideoRecord& rec : records) {
        if (subset == "A") {
            for (std::size_t v = 0; v < six_views.size(); ++v) {
                AugmentationJob job;
                job.id = rec.id + "/view_aug/" + std::to_string(v);
                job.subset = "A";
                job.instruction = "Render the subject from the " + six_views[v] +
                                  " viewpoint while keeping identity and clothing unchanged.";
                job.source_ref = rec.id;
                jobs.push_back(std::move(job));
            }
        } else if (subset == "B") {
            AugmentationJob job;
            job.id = rec.id + "/attr_aug";
            job.subset = "B";
            const std::string& env = pool.environments[rng.uniform_index(pool.environments.size())];
            const std::string& expr = pool.expressions[rng.uniform_index(pool.expressions.size())];
            const std::string& light = pool.lighting[rng.uniform_index(pool.lighting.size())];
            const std::string& motion = pool.motions[rng.uniform_index(pool.motions.size())];
            job.instruction = "Change the background to a " + env + " under " + light +
                              ", give the subject a " + expr + " expression while " + motion +
                              ", keeping the person's identity unchanged.";
            job.source_ref = rec.id;
            jobs.push_back(std::move(job));
        } else {
            AugmentationJob job;
            job.id = rec.id + "/three_view";
            job.subset = "C";
            job.instruction = "Arrange the subject's front, side and back views into a standard "
                              "orthogonal character sheet with consistent identity and clothing.";
            job.source_ref = rec.id;
            jobs.push_back(std::move(job));
        }
    }
    return jobs;
}

// ---- JSONL interfaces ------------------------------------------------------

std::vector<VideoRecord> parse_records_jsonl(const std::string& text) {
    std::vector<VideoRecord> out;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ValidationError("records line " + std::to_string(lineno) + ": " + e.what());
        }
        VideoRecord rec;
        try {
            rec.id = j.at("id").get<std::string>();
            rec.duration_s = j.value("duration_s", 0.0);
            if (j.contains("face_sims_1fps")) rec.face_sims_1fps = j["face_sims_1fps"].get<std::vector<double>>();
            if (j.contains("clip_sims_8fps")) rec.clip_sims_8fps = j["clip_sims_8fps"].get<std::vector<double>>();
            rec.track_quality = j.value("track_quality", 1.0);
            rec.face_view = j.value("face_view", "F");
            rec.body_view = j.value("body_view", "F");
            rec.subset = j.value("subset", "");
            rec.source = j.value("source", "self_crop");
        } catch (const json::exception& e) {
            throw ValidationError("records line " + std::to_string(lineno) + ": " + e.what());
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<VideoRecord> load_records_jsonl(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open records '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_records_jsonl(ss.str());
}

std::string record_to_json(const VideoRecord& rec) {
    json j = {{"id", rec.id},
              {"duration_s", rec.duration_s},
              {"face_sims_1fps", rec.face_sims_1fps},
              {"clip_sims_8fps", rec.clip_sims_8fps},
              {"track_quality", rec.track_quality},
              {"face_view", rec.face_view},
              {"body_view", rec.body_view},
              {"source", rec.source}};
    if (!rec.subset.empty()) j["subset"] = rec.subset;
    return j.dump();
}

void save_records_jsonl(const std::vector<VideoRecord>& records, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write records '" + path + "'");
    for (const VideoRecord& rec : records) f << record_to_json(rec) << "\n";
}

void save_audit_jsonl(const std::vector<AuditEntry>& audit, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write audit log '" + path + "'");
    for (const AuditEntry& e : audit) {
        json j = {{"id", e.id}, {"stage", e.stage}, {"reason", e.reason}, {"value", e.value}};
        f << j.dump() << "\n";
    }
}

void save_jobs_jsonl(const std::vector<AugmentationJob>& jobs, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write jobs '" + path + "'");
    for (const AugmentationJob& job : jobs) {
        json j = {{"id", job.id}, {"subset", job.subset}, {"instruction", job.instruction},
                  {"source_ref", job.source_ref}};
        f << j.dump() << "\n";
    }
}

} // namespace wact
