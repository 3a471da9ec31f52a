#include "wact/synth.hpp"

#include <algorithm>
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
constexpr double kTwoPi = 2.0 * kPi;
constexpr double kBackground = 0.08;

struct Palette {
    double body[3], head[3], trim[3];
    double body_width;  // half-width fraction of the canvas
    double head_radius; // radius fraction
    double bob_amp;     // vertical bob in pixels
};

Palette palette(const SyntheticSubject& s) {
    const auto& p = s.params;
    if (p.size() < 12) throw ContractError("subject '" + s.id + "' has malformed params");
    Palette pal;
    for (int i = 0; i < 3; ++i) pal.body[i] = p[i];
    for (int i = 0; i < 3; ++i) pal.head[i] = p[3 + i];
    for (int i = 0; i < 3; ++i) pal.trim[i] = p[6 + i];
    pal.body_width = p[9];
    pal.head_radius = p[10];
    pal.bob_amp = p[11];
    return pal;
}

void put_pixel(Tensor& img, long y, long x, const double rgb[3]) {
    const long s = static_cast<long>(img.shape()[1]);
    if (y < 0 || y >= s || x < 0 || x >= s) return;
    const std::size_t plane = static_cast<std::size_t>(s) * static_cast<std::size_t>(s);
    for (int c = 0; c < 3; ++c)
        img[static_cast<std::size_t>(c) * plane + static_cast<std::size_t>(y * s + x)] = rgb[c];
}

void fill_rect(Tensor& img, long y0, long y1, long x0, long x1, const double rgb[3]) {
    for (long y = y0; y <= y1; ++y)
        for (long x = x0; x <= x1; ++x) put_pixel(img, y, x, rgb);
}

void fill_circle(Tensor& img, long cy, long cx, long r, const double rgb[3]) {
    for (long y = cy - r; y <= cy + r; ++y)
        for (long x = cx - r; x <= cx + r; ++x)
            if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r) put_pixel(img, y, x, rgb);
}

} // namespace

SyntheticSubject SyntheticSubject::make(const std::string& id, Rng& rng, int caption_id) {
    SyntheticSubject s;
    s.id = id;
    s.caption_id = caption_id;
    s.params.reserve(12);
    for (int i = 0; i < 9; ++i) s.params.push_back(rng.uniform(0.2, 0.95)); // three rgb triples
    s.params.push_back(rng.uniform(0.10, 0.20)); // body half-width fraction
    s.params.push_back(rng.uniform(0.12, 0.18)); // head radius fraction
    s.params.push_back(rng.uniform(0.0, 1.5));   // bob amplitude
    return s;
}

Tensor render_body(const SyntheticSubject& subject, double theta, double frame, std::size_t size) {
    const Palette pal = palette(subject);
    const long s = static_cast<long>(size);
    Tensor img = Tensor::full({3, size, size}, kBackground);
    const double ct = std::cos(theta), st = std::sin(theta);
    const long dy = std::llround(pal.bob_amp * std::sin(kTwoPi * frame / 8.0));
    const long cx = s / 2 + std::llround(0.08 * static_cast<double>(s) * st);

    // torso: thinner from the side
    const long hw = std::max<long>(
        1, std::llround(static_cast<double>(s) * pal.body_width * (0.35 + 0.65 * std::fabs(ct))));
    const long y0 = std::llround(0.40 * static_cast<double>(s)) + dy;
    const long y1 = s - 2 + dy;
    fill_rect(img, y0, y1, cx - hw, cx + hw, pal.body);

    if (ct < -0.3) {
        // back stripe, visible only from behind
        const long sw = std::max<long>(0, hw / 4);
        fill_rect(img, y0, y1, cx - sw, cx + sw, pal.trim);
    } else if (ct > 0.3) {
        // chest badge
        fill_rect(img, y0 + 1, y0 + 3, cx - 1, cx + 1, pal.trim);
    }

    // head
    const long r = std::max<long>(1, std::llround(static_cast<double>(s) * pal.head_radius));
    const long hy = std::llround(0.22 * static_cast<double>(s)) + dy;
    fill_circle(img, hy, cx, r, pal.head);
    if (ct > 0.3) {
        const double dark[3] = {0.05, 0.05, 0.05};
        const long eye = std::max<long>(1, std::llround(static_cast<double>(r) * 0.6 * ct));
        put_pixel(img, hy, cx - eye, dark);
        put_pixel(img, hy, cx + eye, dark);
    }
    return img;
}

Tensor render_face(const SyntheticSubject& subject, double theta, double frame, std::size_t size) {
    const Palette pal = palette(subject);
    const long s = static_cast<long>(size);
    Tensor img = Tensor::full({3, size, size}, kBackground);
    const double ct = std::cos(theta), st = std::sin(theta);
    const long dy = std::llround(pal.bob_amp * std::sin(kTwoPi * frame / 8.0));
    const long cx = s / 2 + std::llround(0.15 * static_cast<double>(s) * st);
    const long cy = s / 2 + dy;
    const long r = std::max<long>(2, std::llround(0.30 * static_cast<double>(s)));

    if (ct < -0.3) {
        // back of the head: darker shade plus a trim tie
        double shade[3] = {pal.head[0] * 0.55, pal.head[1] * 0.55, pal.head[2] * 0.55};
        fill_circle(img, cy, cx, r, shade);
        fill_rect(img, cy, cy + r / 2, cx, cx, pal.trim);
    } else {
        fill_circle(img, cy, cx, r, pal.head);
        // headband
        fill_rect(img, cy - r, cy - r + 1, cx - r / 2, cx + r / 2, pal.trim);
        if (ct > 0.3) {
            const double dark[3] = {0.05, 0.05, 0.05};
            const long eye = std::max<long>(1, std::llround(static_cast<double>(r) * 0.5 * ct));
            put_pixel(img, cy, cx - eye, dark);
            put_pixel(img, cy, cx + eye, dark);
        }
    }
    return img;
}

Tensor apply_tint(const Tensor& img, const std::array<double, 3>& tint) {
    if (img.ndim() != 3 || img.shape()[0] != 3) {
        throw DimensionError("apply_tint: expected {3,h,w}, got " + img.shape_str());
    }
    Tensor out = img;
    const std::size_t plane = img.shape()[1] * img.shape()[2];
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < plane; ++i)
            out[c * plane + i] = std::clamp(img[c * plane + i] * tint[c], 0.0, 1.0);
    return out;
}

Tensor render_clip(const SyntheticSubject& subject, double theta_start, double omega,
                   std::size_t frames, std::size_t size) {
    Tensor clip({frames, 3, size, size});
    const std::size_t stride = 3 * size * size;
    for (std::size_t f = 0; f < frames; ++f) {
        Tensor frame = render_body(subject, theta_start + omega * static_cast<double>(f),
                                   static_cast<double>(f), size);
        std::copy(frame.data().begin(), frame.data().end(), clip.data().begin() + f * stride);
    }
    return clip;
}

// ---- toy codec -------------------------------------------------------------

CodecKind codec_from_string(const std::string& s) {
    if (s == "identity") return CodecKind::Identity;
    if (s == "avgpool2") return CodecKind::AvgPool2;
    throw ConfigError("unknown codec '" + s + "'");
}

Tensor ToyCodec::encode_image(const Tensor& img) const {
    if (img.ndim() != 3) throw DimensionError("codec: expected {c,h,w}, got " + img.shape_str());
    if (kind == CodecKind::Identity) return img;
    const std::size_t c = img.shape()[0], h = img.shape()[1], w = img.shape()[2];
    if (h % 2 != 0 || w % 2 != 0) throw DimensionError("codec: avgpool2 needs even extents");
    Tensor out({c, h / 2, w / 2});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h / 2; ++y)
            for (std::size_t x = 0; x < w / 2; ++x) {
                double sum = 0.0;
                for (std::size_t dy = 0; dy < 2; ++dy)
                    for (std::size_t dx = 0; dx < 2; ++dx)
                        sum += img[(ch * h + 2 * y + dy) * w + 2 * x + dx];
                out[(ch * (h / 2) + y) * (w / 2) + x] = sum * 0.25;
            }
    return out;
}

LatentVideo ToyCodec::encode_video(const Tensor& clip) const {
    if (clip.ndim() != 4) throw DimensionError("codec: expected {f,c,h,w}, got " + clip.shape_str());
    if (kind == CodecKind::Identity) return LatentVideo(clip);
    const std::size_t f = clip.shape()[0];
    std::vector<Tensor> frames;
    const std::size_t stride = clip.size() / f;
    for (std::size_t i = 0; i < f; ++i) {
        Tensor frame({clip.shape()[1], clip.shape()[2], clip.shape()[3]});
        std::copy(clip.data().begin() + i * stride, clip.data().begin() + (i + 1) * stride,
                  frame.data().begin());
        frames.push_back(encode_image(frame));
    }
    Tensor out({f, frames[0].shape()[0], frames[0].shape()[1], frames[0].shape()[2]});
    const std::size_t ostride = out.size() / f;
    for (std::size_t i = 0; i < f; ++i)
        std::copy(frames[i].data().begin(), frames[i].data().end(), out.data().begin() + i * ostride);
    return LatentVideo(std::move(out));
}

Tensor ToyCodec::decode_video(const LatentVideo& z) const {
    if (kind == CodecKind::Identity) return z.data;
    const std::size_t f = z.frames(), c = z.channels(), h = z.height(), w = z.width();
    Tensor out({f, c, 2 * h, 2 * w});
    for (std::size_t i = 0; i < f; ++i)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t y = 0; y < 2 * h; ++y)
                for (std::size_t x = 0; x < 2 * w; ++x)
                    out[((i * c + ch) * 2 * h + y) * 2 * w + x] =
                        z.data[((i * c + ch) * h + y / 2) * w + x / 2];
    return out;
}

// ---- corpus ---------------------------------------------------------------

namespace {

struct ViewSpec {
    Region region;
    const char* label;
    double theta;
    const char* subset;
    const char* source;
    bool tint;
};

const std::vector<ViewSpec>& profile_views(const std::string& profile) {
    static const std::vector<ViewSpec> canonical = {
        {Region::Face, "F", 0.0, "A", "self_crop", false},
        {Region::Body, "F", 0.0, "A", "self_crop", false},
        {Region::Face, "L", kTwoPi - kPi / 4, "A", "generated", false},
        {Region::Face, "R", kPi / 4, "A", "generated", false},
        {Region::Face, "U", 0.0, "A", "generated", false},
        {Region::Face, "D", 0.0, "A", "generated", false},
        {Region::Body, "S", kPi / 2, "A", "generated", false},
        {Region::Body, "B", kPi, "A", "generated", false},
        {Region::Face, "F", 0.0, "B", "generated", true},
        {Region::Body, "F", 0.0, "B", "generated", true},
        {Region::Body, "F", 0.0, "C", "generated", false},
        {Region::Body, "S", kPi / 2, "C", "generated", false},
        {Region::Body, "B", kPi, "C", "generated", false},
    };
    // raw crops stay frontal-biased (no self-crop backs); generated rows
    // cover the side/back arc
    static const std::vector<ViewSpec> imbalanced = {
        {Region::Body, "F", 0.0, "A", "self_crop", false},
        {Region::Body, "F", kPi / 12, "A", "self_crop", false},
        {Region::Body, "F", kTwoPi - kPi / 12, "A", "self_crop", false},
        {Region::Body, "S", kPi / 2, "A", "self_crop", false},
        {Region::Face, "F", 0.0, "A", "self_crop", false},
        {Region::Face, "R", kPi / 4, "A", "self_crop", false},
        {Region::Body, "S", 3 * kPi / 8, "A", "generated", false},
        {Region::Body, "B", 3 * kPi / 4, "A", "generated", false},
        {Region::Body, "B", kPi, "A", "generated", false},
        {Region::Body, "B", 5 * kPi / 4, "A", "generated", false},
        {Region::Body, "S", 13 * kPi / 8, "A", "generated", false},
        {Region::Body, "F", 7 * kPi / 4, "A", "generated", false},
        {Region::Face, "L", kTwoPi - kPi / 4, "A", "generated", false},
        {Region::Face, "R", kPi / 4, "A", "generated", false},
        {Region::Face, "U", 0.0, "A", "generated", false},
        {Region::Face, "D", 0.0, "A", "generated", false},
        {Region::Face, "F", 0.0, "B", "generated", true},
        {Region::Body, "F", 0.0, "B", "generated", true},
        {Region::Body, "F", 0.0, "C", "generated", false},
        {Region::Body, "S", kPi / 2, "C", "generated", false},
        {Region::Body, "B", kPi, "C", "generated", false},
    };
    if (profile == "canonical") return canonical;
    if (profile == "imbalanced") return imbalanced;
    throw ConfigError("unknown corpus profile '" + profile + "'");
}

const std::vector<std::pair<int, std::string>>& caption_classes() {
    static const std::vector<std::pair<int, std::string>> captions = {
        {0, "the subject turns slowly counterclockwise"},
        {1, "the subject turns slowly clockwise"},
        {2, "the subject turns quickly counterclockwise"},
        {3, "the subject turns quickly clockwise"},
    };
    return captions;
}

double caption_omega(int caption_id) {
    switch (caption_id) {
        case 0: return kPi / 8;
        case 1: return -kPi / 8;
        case 2: return kPi / 4;
        case 3: return -kPi / 4;
        default: throw ContractError("unknown caption id " + std::to_string(caption_id));
    }
}

std::string subject_name(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "subj_%03zu", i);
    return buf;
}

std::string body_label_of(double theta) {
    const double df = circular_distance(theta, 0.0);
    const double ds = std::min(circular_distance(theta, kPi / 2), circular_distance(theta, 3 * kPi / 2));
    const double db = circular_distance(theta, kPi);
    if (df <= ds && df <= db) return "F";
    if (ds <= db) return "S";
    return "B";
}

std::string face_label_of(double theta) {
    const double df = circular_distance(theta, 0.0);
    const double dr = circular_distance(theta, kPi / 4);
    const double dl = circular_distance(theta, kTwoPi - kPi / 4);
    if (df <= dr && df <= dl) return "F";
    if (dr <= dl) return "R";
    return "L";
}

} // namespace

std::size_t profile_views_per_subject(const std::string& profile) {
    return profile_views(profile).size();
}

void gen_corpus(const CorpusParams& params, const std::string& out_dir) {
    if (params.n_subjects < 1) throw ConfigError("gen_corpus: need at least one subject");
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "subjects", ec);
    if (ec) throw IoError("gen_corpus: cannot create '" + out_dir + "': " + ec.message());

    const auto& views = profile_views(params.profile);
    Rng root(params.seed);

    std::ofstream pool_out(fs::path(out_dir) / "pool.jsonl");
    std::ofstream clips_out(fs::path(out_dir) / "clips.jsonl");
    std::ofstream records_out(fs::path(out_dir) / "records.jsonl");
    std::ofstream captions_out(fs::path(out_dir) / "captions.jsonl");
    if (!pool_out || !clips_out || !records_out || !captions_out) {
        throw IoError("gen_corpus: cannot write corpus files under '" + out_dir + "'");
    }

    for (const auto& [cid, text] : caption_classes()) {
        captions_out << json{{"caption_id", cid}, {"text", text}}.dump() << "\n";
    }

    std::size_t record_counter = 0;
    for (std::size_t si = 0; si < params.n_subjects; ++si) {
        Rng rng = root.split();
        const std::string sid = subject_name(si);
        SyntheticSubject subject = SyntheticSubject::make(sid, rng, static_cast<int>(si % 4));
        Checkpoint ckpt;
        ckpt.put("params", Tensor({subject.params.size()}, subject.params));

        // reference pool rows
        for (std::size_t v = 0; v < views.size(); ++v) {
            const ViewSpec& spec = views[v];
            char tname[16];
            std::snprintf(tname, sizeof(tname), "ref.%02zu", v);
            Tensor img = spec.region == Region::Face
                             ? render_face(subject, spec.theta, 0.0, params.image_size)
                             : render_body(subject, spec.theta, 0.0, params.image_size);
            if (spec.tint) {
                img = apply_tint(img, {rng.uniform(0.7, 1.3), rng.uniform(0.7, 1.3),
                                       rng.uniform(0.7, 1.3)});
            }
            ckpt.put(tname, std::move(img));
            json row = {{"id", sid + "/" + tname},
                        {"theta", spec.theta},
                        {"region", region_to_string(spec.region)},
                        {"subset", spec.subset},
                        {"view", spec.label},
                        {"source", spec.source},
                        {"subject", sid},
                        {"tensor", tname}};
            pool_out << row.dump() << "\n";
        }

        // clips: train + held-out general/back-view validation
        const double omega = caption_omega(subject.caption_id);
        std::size_t clip_idx = 0;
        auto emit_clip = [&](double theta_start, const std::string& split) {
            char tname[16];
            std::snprintf(tname, sizeof(tname), "clip.%02zu", clip_idx);
            ckpt.put(tname, render_clip(subject, theta_start, omega, params.frames, params.image_size));
            json row = {{"subject", sid},       {"index", clip_idx},
                        {"caption_id", subject.caption_id}, {"theta_start", theta_start},
                        {"omega", omega},       {"split", split},
                        {"tensor", tname}};
            clips_out << row.dump() << "\n";

            // curation metadata record; a deterministic fraction is corrupted
            // so the cascade has something to reject
            ++record_counter;
            const double mid = normalize_angle(theta_start +
                                               omega * static_cast<double>(params.frames - 1) / 2.0);
            std::vector<double> face_sims, clip_sims;
            const std::size_t n1 = params.frames;
            const std::size_t n8 = params.frames * 8;
            const bool bad_face = record_counter % 5 == 0;
            const bool bad_clip = record_counter % 7 == 0;
            const bool bad_track = record_counter % 11 == 0;
            for (std::size_t i = 0; i < n1; ++i)
                face_sims.push_back(bad_face ? rng.uniform(0.05, 0.35) : rng.uniform(0.55, 0.95));
            for (std::size_t i = 0; i < n8; ++i)
                clip_sims.push_back(bad_clip ? rng.uniform(0.10, 0.42) : rng.uniform(0.55, 0.95));
            json rec = {{"id", sid + "/" + tname},
                        {"duration_s", static_cast<double>(params.frames)},
                        {"face_sims_1fps", face_sims},
                        {"clip_sims_8fps", clip_sims},
                        {"track_quality", bad_track ? rng.uniform(0.0, 0.4) : rng.uniform(0.7, 1.0)},
                        {"face_view", face_label_of(mid)},
                        {"body_view", body_label_of(mid)},
                        {"source", "self_crop"},
                        {"subset", "A"}};
            records_out << rec.dump() << "\n";
            ++clip_idx;
        };
        for (std::size_t k = 0; k < params.clips_per_subject; ++k)
            emit_clip(rng.uniform(0.0, kTwoPi), "train");
        for (std::size_t k = 0; k < params.val_clips_per_subject; ++k)
            emit_clip(rng.uniform(0.0, kTwoPi), "val");
        for (std::size_t k = 0; k < params.val_clips_per_subject; ++k) {
            // sweep centered on the back view
            const double span = omega * static_cast<double>(params.frames - 1);
            emit_clip(normalize_angle(kPi - span / 2.0 + rng.uniform(-kPi / 6, kPi / 6)), "val_back");
        }

        save_checkpoint(ckpt, (fs::path(out_dir) / "subjects" / (sid + ".wact")).string());
    }

    json manifest = {{"schema_version", 1},
                     {"n_subjects", params.n_subjects},
                     {"frames", params.frames},
                     {"image_size", params.image_size},
                     {"clips_per_subject", params.clips_per_subject},
                     {"val_clips_per_subject", params.val_clips_per_subject},
                     {"profile", params.profile},
                     {"seed", params.seed},
                     {"views_per_subject", views.size()}};
    std::ofstream mf(fs::path(out_dir) / "manifest.json");
    if (!mf) throw IoError("gen_corpus: cannot write manifest");
    mf << manifest.dump(2) << "\n";
}

Corpus Corpus::load(const std::string& dir) {
    Corpus corpus;
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw IoError("corpus: missing manifest in '" + dir + "'");
    json manifest = json::parse(mf);
    corpus.params.n_subjects = manifest.at("n_subjects").get<std::size_t>();
    corpus.params.frames = manifest.at("frames").get<std::size_t>();
    corpus.params.image_size = manifest.at("image_size").get<std::size_t>();
    corpus.params.clips_per_subject = manifest.at("clips_per_subject").get<std::size_t>();
    corpus.params.val_clips_per_subject = manifest.at("val_clips_per_subject").get<std::size_t>();
    corpus.params.profile = manifest.at("profile").get<std::string>();
    corpus.params.seed = manifest.at("seed").get<std::uint64_t>();

    auto read_lines = [](const fs::path& path) {
        std::ifstream f(path);
        if (!f) throw IoError("corpus: missing '" + path.string() + "'");
        std::vector<json> rows;
        std::string line;
        while (std::getline(f, line)) {
            if (!line.empty()) rows.push_back(json::parse(line));
        }
        return rows;
    };

    for (const json& j : read_lines(fs::path(dir) / "pool.jsonl")) {
        PoolRow row;
        row.candidate.id = j.at("id").get<std::string>();
        row.candidate.theta = j.at("theta").get<double>();
        row.candidate.region = region_from_string(j.at("region").get<std::string>());
        row.candidate.subset = j.value("subset", "");
        row.subject = j.at("subject").get<std::string>();
        row.view = j.at("view").get<std::string>();
        row.source = j.at("source").get<std::string>();
        row.tensor_name = j.at("tensor").get<std::string>();
        corpus.pool.push_back(std::move(row));
    }
    for (const json& j : read_lines(fs::path(dir) / "clips.jsonl")) {
        ClipMeta clip;
        clip.subject = j.at("subject").get<std::string>();
        clip.index = j.at("index").get<std::size_t>();
        clip.caption_id = j.at("caption_id").get<int>();
        clip.theta_start = j.at("theta_start").get<double>();
        clip.omega = j.at("omega").get<double>();
        clip.split = j.at("split").get<std::string>();
        clip.tensor_name = j.at("tensor").get<std::string>();
        corpus.clips.push_back(std::move(clip));
    }
    for (const json& j : read_lines(fs::path(dir) / "captions.jsonl")) {
        corpus.captions[j.at("caption_id").get<int>()] = j.at("text").get<std::string>();
    }
    for (std::size_t si = 0; si < corpus.params.n_subjects; ++si) {
        const std::string sid = subject_name(si);
        corpus.subject_ids.push_back(sid);
        corpus.subject_data_.emplace(
            sid, load_checkpoint((fs::path(dir) / "subjects" / (sid + ".wact")).string()));
    }
    return corpus;
}

const Tensor& Corpus::ref_image(const PoolRow& row) const {
    return subject_data_.at(row.subject).require(row.tensor_name);
}

const Tensor& Corpus::clip_tensor(const ClipMeta& clip) const {
    return subject_data_.at(clip.subject).require(clip.tensor_name);
}

std::vector<const ClipMeta*> Corpus::clips_of_split(const std::string& split) const {
    std::vector<const ClipMeta*> out;
    for (const ClipMeta& c : clips)
        if (c.split == split) out.push_back(&c);
    return out;
}

std::vector<const PoolRow*> Corpus::subject_pool(const std::string& subject) const {
    std::vector<const PoolRow*> out;
    for (const PoolRow& r : pool)
        if (r.subject == subject) out.push_back(&r);
    return out;
}

// ---- training episodes -----------------------------------------------------

SamplingStrategy strategy_from_string(const std::string& s) {
    if (s == "raw_crop") return SamplingStrategy::RawCrop;
    if (s == "random") return SamplingStrategy::Random;
    if (s == "viewpoint_adaptive") return SamplingStrategy::ViewpointAdaptive;
    throw ConfigError("unknown sampling strategy '" + s + "'");
}

std::string strategy_to_string(SamplingStrategy s) {
    switch (s) {
        case SamplingStrategy::RawCrop: return "raw_crop";
        case SamplingStrategy::Random: return "random";
        case SamplingStrategy::ViewpointAdaptive: return "viewpoint_adaptive";
    }
    return "?";
}

namespace {

// 5:2:1 episode mixing over the three reference subsets
std::string draw_subset(Rng& rng) {
    const double u = rng.uniform();
    if (u < 5.0 / 8.0) return "A";
    if (u < 7.0 / 8.0) return "B";
    return "C";
}

std::vector<const PoolRow*> filter_rows(const std::vector<const PoolRow*>& rows, Region region,
                                        const EpisodeOptions& opts, const std::string& subset) {
    std::vector<const PoolRow*> out;
    for (const PoolRow* r : rows) {
        if (r->candidate.region != region) continue;
        if (opts.strategy == SamplingStrategy::RawCrop) {
            if (r->source == "self_crop") out.push_back(r);
        } else if (subset.empty() || r->candidate.subset == subset) {
            out.push_back(r);
        }
    }
    return out;
}

} // namespace

TrainExample make_episode(const Corpus& corpus, const ToyCodec& codec, const ClipMeta& clip,
                          const EpisodeOptions& opts, Rng& rng) {
    TrainExample ex;
    ex.z0 = codec.encode_video(corpus.clip_tensor(clip));
    ex.ctx.caption_id = clip.caption_id;

    const std::vector<const PoolRow*> rows = corpus.subject_pool(clip.subject);
    auto draw_region = [&](Region region, std::size_t want) {
        if (want == 0) return;
        std::string subset;
        if (opts.subset_mixing && opts.strategy != SamplingStrategy::RawCrop) {
            subset = draw_subset(rng);
        }
        std::vector<const PoolRow*> filtered = filter_rows(rows, region, opts, subset);
        if (filtered.empty() && !subset.empty()) {
            filtered = filter_rows(rows, region, opts, "A"); // subset has no rows for this region
        }
        if (filtered.empty()) return;

        std::vector<Candidate> pool;
        pool.reserve(filtered.size());
        for (const PoolRow* r : filtered) pool.push_back(r->candidate);
        SamplerConfig cfg;
        cfg.delta = opts.delta;
        cfg.gamma = opts.strategy == SamplingStrategy::ViewpointAdaptive ? opts.gamma : 1.0;
        cfg.draws = std::min(want, pool.size());
        std::vector<Candidate> picked = draw_references(pool, cfg, rng);

        for (const Candidate& c : picked) {
            for (const PoolRow* r : filtered) {
                if (r->candidate.id == c.id) {
                    Tensor encoded = codec.encode_image(corpus.ref_image(*r));
                    (region == Region::Face ? ex.ctx.face_refs : ex.ctx.body_refs)
                        .push_back(std::move(encoded));
                    break;
                }
            }
        }
    };

    const std::size_t want_face =
        opts.random_ref_count ? rng.uniform_index(opts.face_refs + 1) : opts.face_refs;
    const std::size_t want_body =
        opts.random_ref_count ? rng.uniform_index(opts.body_refs + 1) : opts.body_refs;
    draw_region(Region::Face, want_face);
    draw_region(Region::Body, want_body);
    return ex;
}

ConditionContext canonical_context(const Corpus& corpus, const ToyCodec& codec,
                                   const std::string& subject, int caption_id) {
    ConditionContext ctx;
    ctx.caption_id = caption_id;
    for (const PoolRow* r : corpus.subject_pool(subject)) {
        if (r->candidate.subset == "C" && r->candidate.region == Region::Body) {
            ctx.body_refs.push_back(codec.encode_image(corpus.ref_image(*r)));
        }
    }
    if (ctx.body_refs.empty()) {
        throw ContractError("canonical_context: subject '" + subject + "' has no three-view rows");
    }
    return ctx;
}

} // namespace wact
