#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "wact/checkpoint.hpp"
#include "wact/model.hpp"
#include "wact/rectflow.hpp"
#include "wact/view_sampler.hpp"

namespace wact {

// Procedurally rendered identity: a colored figure whose silhouette, face
// marks and back stripe depend on the viewing azimuth. Rendering is a pure
// function of (params, theta, frame), so corpora regenerate bit-identically.
struct SyntheticSubject {
    std::string id;
    std::vector<double> params; // colors, proportions, bob amplitude
    int caption_id = 0;

    static SyntheticSubject make(const std::string& id, Rng& rng, int caption_id);
};

// Full-figure render, {3, size, size}, values in [0, 1].
Tensor render_body(const SyntheticSubject& subject, double theta, double frame, std::size_t size);
// Head crop render.
Tensor render_face(const SyntheticSubject& subject, double theta, double frame, std::size_t size);
// Per-channel lighting tint (attribute-augmented variants).
Tensor apply_tint(const Tensor& img, const std::array<double, 3>& tint);

// Rotating clip: {frames, 3, size, size}; frame i is rendered at
// theta_start + omega * i.
Tensor render_clip(const SyntheticSubject& subject, double theta_start, double omega,
                   std::size_t frames, std::size_t size);

// ---- toy codec -------------------------------------------------------------

enum class CodecKind { Identity, AvgPool2 };

// Stand-in for the latent codec: identity, or a fixed 2x2 average pool.
struct ToyCodec {
    CodecKind kind = CodecKind::Identity;

    Tensor encode_image(const Tensor& img) const;        // {c,h,w} -> {c,h',w'}
    LatentVideo encode_video(const Tensor& clip) const;  // {f,c,h,w}
    Tensor decode_video(const LatentVideo& z) const;     // nearest-neighbor upsample
};

CodecKind codec_from_string(const std::string& s);

// ---- corpus ---------------------------------------------------------------

struct CorpusParams {
    std::size_t n_subjects = 32;
    std::size_t frames = 4;
    std::size_t image_size = 16;
    std::size_t clips_per_subject = 2;
    std::size_t val_clips_per_subject = 1;
    std::string profile = "canonical"; // "canonical" | "imbalanced"
    std::uint64_t seed = 1;
};

// One candidate pool row plus where its render lives.
struct PoolRow {
    Candidate candidate; // id, theta, region, subset
    std::string subject;
    std::string view;        // label within the region taxonomy
    std::string source;      // "self_crop" | "generated"
    std::string tensor_name; // in the subject checkpoint
};

struct ClipMeta {
    std::string subject;
    std::size_t index = 0;
    int caption_id = 0;
    double theta_start = 0.0;
    double omega = 0.0;
    std::string split;       // "train" | "val" | "val_back"
    std::string tensor_name;
};

// Writes manifest.json, pool.jsonl, clips.jsonl, captions.jsonl,
// records.jsonl and one checkpoint per subject under subjects/.
void gen_corpus(const CorpusParams& params, const std::string& out_dir);

struct Corpus {
    CorpusParams params;
    std::vector<std::string> subject_ids;
    std::vector<ClipMeta> clips;
    std::vector<PoolRow> pool;
    std::map<int, std::string> captions;

    static Corpus load(const std::string& dir);

    const Tensor& ref_image(const PoolRow& row) const;
    const Tensor& clip_tensor(const ClipMeta& clip) const;
    std::vector<const ClipMeta*> clips_of_split(const std::string& split) const;
    std::vector<const PoolRow*> subject_pool(const std::string& subject) const;

private:
    std::map<std::string, Checkpoint> subject_data_;
};

// The documented per-subject view list of a profile (drives the pool row
// count contract: rows = subjects x views).
std::size_t profile_views_per_subject(const std::string& profile);

// ---- training episodes -----------------------------------------------------

enum class SamplingStrategy { RawCrop, Random, ViewpointAdaptive };

SamplingStrategy strategy_from_string(const std::string& s);
std::string strategy_to_string(SamplingStrategy s);

struct EpisodeOptions {
    SamplingStrategy strategy = SamplingStrategy::ViewpointAdaptive;
    double delta = 0.5235987755982988; // pi/6
    double gamma = 0.5;
    std::size_t face_refs = 0;     // draws per region; clamped to pool size
    std::size_t body_refs = 3;
    bool random_ref_count = false; // uniform over {0..face_refs}/{0..body_refs}
    bool subset_mixing = true;     // draw episode subset A/B/C at 5:2:1
};

// Builds one training example for the clip: encodes the clip and the drawn
// reference images through the codec.
TrainExample make_episode(const Corpus& corpus, const ToyCodec& codec, const ClipMeta& clip,
                          const EpisodeOptions& opts, Rng& rng);

// Canonical three-view conditioning (subset-C body renders) used for
// evaluation, identical across sampling strategies.
ConditionContext canonical_context(const Corpus& corpus, const ToyCodec& codec,
                                   const std::string& subject, int caption_id);

} // namespace wact
