#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "wact/rng.hpp"
#include "wact/views.hpp"

namespace wact {

enum class Region { Face, Body };

Region region_from_string(const std::string& s); // "face" | "body"
std::string region_to_string(Region r);

// One drawable reference image: viewpoint azimuth plus its current sampling
// weight. theta is kept normalized to [0, 2pi).
struct Candidate {
    std::string id;
    double theta = 0.0;
    Region region = Region::Face;
    double weight = 1.0;
    std::string subset; // "A" | "B" | "C" | ""
};

struct SamplerConfig {
    double delta = 0.5235987755982988; // pi/6 angular neighborhood
    double gamma = 0.5;                // weight decay for suppressed neighbors
    std::size_t draws = 0;             // references to draw, in [0, 5]

    void validate() const; // ConfigError on gamma >= 1 or delta <= 0
};

// Multiplies the weight of every remaining candidate within circular angular
// distance < delta of the selected one by gamma, exactly once.
void suppress(std::vector<Candidate>& pool, const Candidate& selected, const SamplerConfig& cfg);

// `draws` rounds of (weighted draw proportional to current weights, remove,
// suppress). Weights are episode-local: the caller's pool is not modified.
std::vector<Candidate> draw_references(const std::vector<Candidate>& pool, const SamplerConfig& cfg,
                                       Rng& rng);

// Exact selection-set distribution by enumerating every ordered draw
// sequence with full weight bookkeeping. Test oracle; pools of size <= 8.
std::map<std::set<std::string>, double> enumerate_distribution(const std::vector<Candidate>& pool,
                                                               const SamplerConfig& cfg);

// JSONL candidate ingestion: {"id": str, "theta": float, "region":
// "face"|"body", "subset": "A"|"B"|"C"}. Unknown keys are ignored.
std::vector<Candidate> load_candidates_jsonl(const std::string& path);
std::vector<Candidate> parse_candidates_jsonl(const std::string& text);

} // namespace wact
