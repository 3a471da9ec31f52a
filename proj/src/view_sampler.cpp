#include "wact/view_sampler.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "wact/error.hpp"

namespace wact {

using nlohmann::json;

Region region_from_string(const std::string& s) {
    if (s == "face") return Region::Face;
    if (s == "body") return Region::Body;
    throw ValidationError("unknown region '" + s + "'");
}

std::string region_to_string(Region r) { return r == Region::Face ? "face" : "body"; }

void SamplerConfig::validate() const {
    if (!(delta > 0.0)) throw ConfigError("sampler: delta must be > 0");
    // gamma == 1 is the no-suppression ablation
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("sampler: gamma must be in (0, 1]");
    if (draws > 5) throw ConfigError("sampler: draws must be in [0, 5]");
}

void suppress(std::vector<Candidate>& pool, const Candidate& selected, const SamplerConfig& cfg) {
    for (Candidate& c : pool) {
        if (circular_distance(selected.theta, c.theta) < cfg.delta) c.weight *= cfg.gamma;
    }
}

namespace {

std::size_t weighted_pick(const std::vector<Candidate>& pool, Rng& rng) {
    double total = 0.0;
    for (const Candidate& c : pool) total += c.weight;
    const double u = rng.uniform() * total;
    double cum = 0.0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        cum += pool[i].weight;
        if (u < cum) return i;
    }
    return pool.size() - 1; // numeric edge: u landed on the total
}

} // namespace

std::vector<Candidate> draw_references(const std::vector<Candidate>& pool, const SamplerConfig& cfg,
                                       Rng& rng) {
    cfg.validate();
    if (cfg.draws > pool.size()) {
        throw RequestError("draw_references: " + std::to_string(cfg.draws) + " draws from pool of " +
                           std::to_string(pool.size()));
    }
    std::vector<Candidate> remaining = pool;
    for (Candidate& c : remaining) c.theta = normalize_angle(c.theta);
    std::vector<Candidate> picked;
    picked.reserve(cfg.draws);
    for (std::size_t d = 0; d < cfg.draws; ++d) {
        const std::size_t i = weighted_pick(remaining, rng);
        Candidate sel = remaining[i];
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(i));
        suppress(remaining, sel, cfg);
        picked.push_back(std::move(sel));
    }
    return picked;
}

namespace {

void enumerate_rec(std::vector<Candidate> pool, std::set<std::string> chosen, double prob,
                   std::size_t draws_left, const SamplerConfig& cfg,
                   std::map<std::set<std::string>, double>& out) {
    if (draws_left == 0) {
        out[std::move(chosen)] += prob;
        return;
    }
    double total = 0.0;
    for (const Candidate& c : pool) total += c.weight;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const double p = pool[i].weight / total;
        std::vector<Candidate> next = pool;
        Candidate sel = next[i];
        next.erase(next.begin() + static_cast<std::ptrdiff_t>(i));
        suppress(next, sel, cfg);
        std::set<std::string> next_chosen = chosen;
        next_chosen.insert(sel.id);
        enumerate_rec(std::move(next), std::move(next_chosen), prob * p, draws_left - 1, cfg, out);
    }
}

} // namespace

std::map<std::set<std::string>, double> enumerate_distribution(const std::vector<Candidate>& pool,
                                                               const SamplerConfig& cfg) {
    cfg.validate();
    if (pool.size() > 8) {
        throw RequestError("enumerate_distribution: pool of " + std::to_string(pool.size()) +
                           " exceeds the factorial-enumeration limit of 8");
    }
    if (cfg.draws > pool.size()) {
        throw RequestError("enumerate_distribution: draws exceed pool size");
    }
    std::vector<Candidate> normalized = pool;
    for (Candidate& c : normalized) c.theta = normalize_angle(c.theta);
    std::map<std::set<std::string>, double> out;
    enumerate_rec(std::move(normalized), {}, 1.0, cfg.draws, cfg, out);
    return out;
}

std::vector<Candidate> parse_candidates_jsonl(const std::string& text) {
    std::vector<Candidate> out;
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
            throw ValidationError("candidate pool line " + std::to_string(lineno) + ": " + e.what());
        }
        Candidate c;
        try {
            c.id = j.at("id").get<std::string>();
            c.theta = normalize_angle(j.at("theta").get<double>());
            c.region = region_from_string(j.at("region").get<std::string>());
            if (j.contains("subset")) c.subset = j["subset"].get<std::string>();
        } catch (const json::exception& e) {
            throw ValidationError("candidate pool line " + std::to_string(lineno) + ": " + e.what());
        }
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<Candidate> load_candidates_jsonl(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open candidate pool '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_candidates_jsonl(ss.str());
}

} // namespace wact
