#include "wact/rope.hpp"

#include <cmath>
#include <string>

namespace wact {

RopeConfig RopeConfig::make(std::size_t head_dim, std::size_t h_max, std::size_t w_max) {
    RopeConfig cfg;
    cfg.head_dim = head_dim;
    cfg.h_max = h_max;
    cfg.w_max = w_max;
    const std::size_t pairs = head_dim / 2;
    const std::size_t per_axis = pairs / 3;
    const std::size_t rem = pairs - 3 * per_axis;
    cfg.axis_split = {2 * (per_axis + rem), 2 * per_axis, 2 * per_axis};
    cfg.validate();
    return cfg;
}

void RopeConfig::validate() const {
    if (head_dim == 0 || head_dim % 2 != 0) {
        throw ConfigError("rope: head_dim must be even and positive, got " + std::to_string(head_dim));
    }
    if (freq_base <= 0.0) throw ConfigError("rope: freq_base must be positive");
    if (delta_face >= delta_body) {
        throw ConfigError("rope: delta_face must be < delta_body (" + std::to_string(delta_face) +
                          " vs " + std::to_string(delta_body) + ")");
    }
    if (h_max == 0 || w_max == 0) throw ConfigError("rope: h_max/w_max must be positive");
    std::size_t sum = 0;
    for (std::size_t g : axis_split) {
        if (g % 2 != 0) throw ConfigError("rope: axis group dims must be even");
        sum += g;
    }
    if (sum != head_dim) {
        throw ConfigError("rope: axis_split must sum to head_dim (" + std::to_string(sum) + " vs " +
                          std::to_string(head_dim) + ")");
    }
}

std::vector<PositionTriple> assign_positions(std::size_t n_frames, std::size_t grid_h,
                                             std::size_t grid_w, const std::vector<RefGrid>& refs,
                                             const RopeConfig& cfg) {
    cfg.validate();
    if (n_frames == 0) throw ConfigError("assign_positions: need at least one frame");
    if (grid_h > cfg.h_max || grid_w > cfg.w_max) {
        throw ConfigError("assign_positions: video grid " + std::to_string(grid_h) + "x" +
                          std::to_string(grid_w) + " exceeds (h_max, w_max) = (" +
                          std::to_string(cfg.h_max) + ", " + std::to_string(cfg.w_max) + ")");
    }
    std::vector<PositionTriple> out;
    out.reserve(n_frames * grid_h * grid_w);
    for (std::size_t t = 0; t < n_frames; ++t)
        for (std::size_t h = 0; h < grid_h; ++h)
            for (std::size_t w = 0; w < grid_w; ++w)
                out.push_back({static_cast<std::int64_t>(t), static_cast<std::int64_t>(h),
                               static_cast<std::int64_t>(w)});

    const std::int64_t T = static_cast<std::int64_t>(n_frames);
    std::int64_t w_off_face = 0;
    std::int64_t w_off_body = 0;
    for (const RefGrid& ref : refs) {
        if (ref.kind == TokenKind::Video) throw ConfigError("assign_positions: refs must not be video tokens");
        const bool face = ref.kind == TokenKind::FaceRef;
        const std::int64_t t = T + (face ? cfg.delta_face : cfg.delta_body);
        std::int64_t& w_off = face ? w_off_face : w_off_body;
        for (std::size_t h = 0; h < ref.h; ++h)
            for (std::size_t w = 0; w < ref.w; ++w)
                out.push_back({t, static_cast<std::int64_t>(cfg.h_max + h),
                               static_cast<std::int64_t>(cfg.w_max) + w_off + static_cast<std::int64_t>(w)});
        w_off += static_cast<std::int64_t>(ref.w);
    }
    return out;
}

namespace {

// sign=+1 applies the rotation, sign=-1 its inverse (used by the backward pass)
Tensor rope_rotate(const Tensor& x, const std::vector<PositionTriple>& positions,
                   const RopeConfig& cfg, double sign) {
    cfg.validate();
    if (x.ndim() != 2 || x.cols() != cfg.head_dim) {
        throw DimensionError("apply_rope: expected [L x " + std::to_string(cfg.head_dim) + "], got " +
                             x.shape_str());
    }
    if (positions.size() != x.rows()) {
        throw DimensionError("apply_rope: " + std::to_string(positions.size()) + " positions for " +
                             std::to_string(x.rows()) + " tokens");
    }
    Tensor out = x;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const double axis_pos[3] = {static_cast<double>(positions[r].t),
                                    static_cast<double>(positions[r].h),
                                    static_cast<double>(positions[r].w)};
        std::size_t col = 0;
        for (int axis = 0; axis < 3; ++axis) {
            const std::size_t g = cfg.axis_split[axis];
            for (std::size_t i = 0; i < g / 2; ++i) {
                const double freq =
                    std::pow(cfg.freq_base, -2.0 * static_cast<double>(i) / static_cast<double>(g));
                const double theta = sign * axis_pos[axis] * freq;
                const double c = std::cos(theta), s = std::sin(theta);
                const double x0 = x.at(r, col + 2 * i);
                const double x1 = x.at(r, col + 2 * i + 1);
                out.at(r, col + 2 * i) = x0 * c - x1 * s;
                out.at(r, col + 2 * i + 1) = x0 * s + x1 * c;
            }
            col += g;
        }
    }
    return out;
}

} // namespace

Tensor apply_rope(const Tensor& x, const std::vector<PositionTriple>& positions,
                  const RopeConfig& cfg) {
    return rope_rotate(x, positions, cfg, 1.0);
}

GradTape::Var apply_rope(GradTape& tape, GradTape::Var x,
                         const std::vector<PositionTriple>& positions, const RopeConfig& cfg) {
    Tensor out = rope_rotate(tape.value(x), positions, cfg, 1.0);
    // rotations are orthogonal: the pullback is the inverse rotation
    return tape.custom_unary(x, std::move(out), [positions, cfg](const Tensor& gout) {
        return rope_rotate(gout, positions, cfg, -1.0);
    });
}

} // namespace wact
