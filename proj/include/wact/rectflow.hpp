#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "wact/tape.hpp"
#include "wact/tensor.hpp"

namespace wact {

// Latent clip: frames x channels x height x width.
struct LatentVideo {
    Tensor data; // {f, c, h, w}

    LatentVideo() = default;
    explicit LatentVideo(Tensor t);

    std::size_t frames() const { return data.shape()[0]; }
    std::size_t channels() const { return data.shape()[1]; }
    std::size_t height() const { return data.shape()[2]; }
    std::size_t width() const { return data.shape()[3]; }
};

// Conditioning bundle: caption id keys the learned prompt-embedding table;
// reference images are encoded latent grids {c, h, w}.
struct ConditionContext {
    int caption_id = -1; // -1 = unconditioned
    std::vector<Tensor> face_refs;
    std::vector<Tensor> body_refs;

    std::size_t ref_count() const { return face_refs.size() + body_refs.size(); }
};

enum class WeightFn { Uniform };

struct RfConfig {
    WeightFn weight_fn = WeightFn::Uniform;
    std::size_t sampler_steps = 8;
    bool condition_first_frame = false;

    double weight(double t) const; // positive on (0,1)
};

// Differentiable velocity estimate on the given tape; output shaped like z_t.
using VelocityFn =
    std::function<GradTape::Var(GradTape&, const LatentVideo& z_t, double t, const ConditionContext&)>;

// Forward-only velocity estimate (used by the sampler).
using VelocityEval = std::function<Tensor(const LatentVideo& z_t, double t, const ConditionContext&)>;

// z_t = (1 - t) z0 + t eps, elementwise; endpoints are exact.
LatentVideo interpolate(const LatentVideo& z0, const LatentVideo& eps, double t);

// w(t) * mean((v(z_t, t, ctx) - (eps - z0))^2). With condition_first_frame the
// first latent frame of z_t is replaced by the clean frame and excluded from
// the mean.
GradTape::Var rf_loss(GradTape& tape, const VelocityFn& velocity, const LatentVideo& z0,
                      const LatentVideo& eps, double t, const ConditionContext& ctx,
                      const RfConfig& cfg);

// Euler integration of dz/dt = v from t=1 (z=eps) down to t=0.
// When first_frame is given it is held fixed after every step.
LatentVideo euler_sample(const VelocityEval& velocity, const LatentVideo& eps,
                         const ConditionContext& ctx, std::size_t steps,
                         const Tensor* first_frame = nullptr);

} // namespace wact
