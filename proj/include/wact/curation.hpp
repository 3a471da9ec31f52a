#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wact/rng.hpp"
#include "wact/views.hpp"

namespace wact {

// Metadata record for one candidate video flowing through the filter
// cascade. Similarity arrays may be precomputed or filled by a scorer.
struct VideoRecord {
    std::string id;
    double duration_s = 0.0;
    std::vector<double> face_sims_1fps; // first-frame face similarity, 1 fps
    std::vector<double> clip_sims_8fps; // frame-to-frame consistency, 8 fps
    double track_quality = 1.0;         // dense-tracking occlusion/cut score in [0,1]
    std::string face_view = "F";        // F L R U D
    std::string body_view = "F";        // F S B
    std::string subset;                 // "A" | "B" | "C" | ""
    std::string source = "self_crop";   // "self_crop" | "generated"
};

struct FilterThresholds {
    double tau_face = 0.4;  // coarse: discard mean face similarity strictly below
    double tau_clip = 0.45; // fine: retain clip consistency strictly above
    double tau_track = 0.5; // fine: discard tracking score strictly below
};

struct FilterDecision {
    bool keep = true;
    std::string stage;  // "coarse" | "fine"
    std::string reason; // "coarse_identity" | "tracking" | "clip_consistency"
    double value = 0.0;
};

// Discards iff mean(face_sims_1fps) < tau_face. Never reads the 8 fps fields.
FilterDecision coarse_filter(const VideoRecord& rec, const FilterThresholds& th);

// Discards iff track_quality < tau_track, else iff mean(clip_sims_8fps) <= tau_clip.
FilterDecision fine_filter(const VideoRecord& rec, const FilterThresholds& th);

// Optional hook filling similarity fields from an external scorer.
class SimilarityScorer {
public:
    virtual ~SimilarityScorer() = default;
    virtual std::vector<double> face_sims_1fps(const std::string& id) = 0;
    virtual std::vector<double> clip_sims_8fps(const std::string& id) = 0;
    virtual double track_quality(const std::string& id) = 0;
};

struct AuditEntry {
    std::string id;
    std::string stage;  // "coarse" | "fine" | "scorer"
    std::string reason;
    double value = 0.0;
};

struct CascadeResult {
    std::vector<VideoRecord> kept;
    std::vector<AuditEntry> audit;
};

// Order-preserving coarse-to-fine cascade. Records failing either stage, or
// whose scorer raised, land in the audit log; kept + audited = input.
CascadeResult run_cascade(const std::vector<VideoRecord>& records, const FilterThresholds& th,
                          SimilarityScorer* scorer = nullptr);

// ---- viewpoint statistics ------------------------------------------------

struct ViewpointRow {
    std::string region;        // "face" | "body"
    std::string source;        // "self_crop" | "generated"
    std::size_t total = 0;
    std::vector<std::pair<std::string, std::size_t>> counts; // per label, fixed label order
    std::string distribution() const; // "F:50.0 / S:25.0 / B:25.0"
    double percent(std::size_t label_idx) const;
};

struct ViewpointStats {
    std::vector<ViewpointRow> rows; // face x {self_crop, generated}, body x {...}
};

// Counts face_view/body_view labels per region and source class.
ViewpointStats viewpoint_stats(const std::vector<VideoRecord>& records);
std::string format_stats_table(const ViewpointStats& stats);
std::string stats_to_json(const ViewpointStats& stats); // machine-readable mirror

// ---- generative augmentation requests -------------------------------------

// The attribute pool backing subset-B editing instructions: 200 environments,
// 8 expressions, 10 lighting conditions, 30 motions.
struct AttributePool {
    std::vector<std::string> environments;
    std::vector<std::string> expressions;
    std::vector<std::string> lighting;
    std::vector<std::string> motions;

    static const AttributePool& standard();
};

struct AugmentationJob {
    std::string id;
    std::string subset; // "A" | "B" | "C"
    std::string instruction;
    std::string source_ref;
};

// Emits external-editing requests for the kept records: subset A = six-view
// transformations, subset B = attribute edits sampled from the pool, subset
// C = canonical three-view sheets.
std::vector<AugmentationJob> make_augmentation_jobs(const std::vector<VideoRecord>& records,
                                                    const std::string& subset, Rng& rng);

// ---- JSONL interfaces ------------------------------------------------------

std::vector<VideoRecord> load_records_jsonl(const std::string& path);
std::vector<VideoRecord> parse_records_jsonl(const std::string& text);
std::string record_to_json(const VideoRecord& rec);
void save_records_jsonl(const std::vector<VideoRecord>& records, const std::string& path);
void save_audit_jsonl(const std::vector<AuditEntry>& audit, const std::string& path);
void save_jobs_jsonl(const std::vector<AugmentationJob>& jobs, const std::string& path);

} // namespace wact
