#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "wact/tape.hpp"
#include "wact/tensor.hpp"

namespace wact {

enum class TokenKind { Video, FaceRef, BodyRef };

// (t, h, w) coordinate of one token in the shared spatio-temporal lattice.
// Video tokens use their raster coordinates; reference tokens live on the
// planes t = T + delta_face / T + delta_body with (h, w) shifted past
// (h_max, w_max) so the three token families never collide.
struct PositionTriple {
    std::int64_t t = 0;
    std::int64_t h = 0;
    std::int64_t w = 0;

    bool operator==(const PositionTriple&) const = default;
};

struct RopeConfig {
    std::size_t head_dim = 16;
    double freq_base = 10000.0;
    std::int64_t delta_face = 4;
    std::int64_t delta_body = 128;
    std::size_t h_max = 8;
    std::size_t w_max = 8;
    // feature dims assigned to the (t, h, w) axes; each even, summing to head_dim
    std::array<std::size_t, 3> axis_split = {8, 4, 4};

    // Equal thirds in rotary pairs, remainder to the temporal axis.
    static RopeConfig make(std::size_t head_dim, std::size_t h_max, std::size_t w_max);

    void validate() const; // ConfigError on violation
};

// Patch grid of one reference image as it enters the token sequence.
struct RefGrid {
    std::size_t h = 0;
    std::size_t w = 0;
    TokenKind kind = TokenKind::FaceRef; // FaceRef or BodyRef
};

// Positions for [video tokens (raster order); reference tokens in the given
// order]. Face references land on the plane t = T + delta_face, body
// references on t = T + delta_body; same-kind references tile side by side
// along w starting at (h_max, w_max).
std::vector<PositionTriple> assign_positions(std::size_t n_frames, std::size_t grid_h,
                                             std::size_t grid_w, const std::vector<RefGrid>& refs,
                                             const RopeConfig& cfg);

// Rotary application: x is [L x head_dim]; each axis group of the feature
// vector is rotated pairwise by theta_i = pos_axis / freq_base^(2i/g).
Tensor apply_rope(const Tensor& x, const std::vector<PositionTriple>& positions,
                  const RopeConfig& cfg);

// Same rotation as a differentiable tape op.
GradTape::Var apply_rope(GradTape& tape, GradTape::Var x,
                         const std::vector<PositionTriple>& positions, const RopeConfig& cfg);

} // namespace wact
