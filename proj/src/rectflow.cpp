#include "wact/rectflow.hpp"

#include <cstring>
#include <string>

namespace wact {

LatentVideo::LatentVideo(Tensor t) : data(std::move(t)) {
    if (data.ndim() != 4) {
        throw DimensionError("latent video must be 4-D {f,c,h,w}, got " + data.shape_str());
    }
}

double RfConfig::weight(double) const {
    return 1.0; // uniform
}

LatentVideo interpolate(const LatentVideo& z0, const LatentVideo& eps, double t) {
    if (!z0.data.same_shape(eps.data)) {
        throw DimensionError("interpolate: shape mismatch " + z0.data.shape_str() + " vs " +
                             eps.data.shape_str());
    }
    if (!(t >= 0.0 && t <= 1.0)) {
        throw DomainError("interpolate: t must be in [0,1], got " + std::to_string(t));
    }
    Tensor out(z0.data.shape());
    const double a = 1.0 - t;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * z0.data[i] + t * eps.data[i];
    return LatentVideo(std::move(out));
}

GradTape::Var rf_loss(GradTape& tape, const VelocityFn& velocity, const LatentVideo& z0,
                      const LatentVideo& eps, double t, const ConditionContext& ctx,
                      const RfConfig& cfg) {
    LatentVideo z_t = interpolate(z0, eps, t);
    const std::size_t frame_elems = z0.data.size() / z0.frames();
    const bool mask_first = cfg.condition_first_frame && z0.frames() > 1;
    if (mask_first) {
        std::memcpy(z_t.data.data().data(), z0.data.data().data(), frame_elems * sizeof(double));
    }

    GradTape::Var pred = velocity(tape, z_t, t, ctx);
    if (tape.value(pred).shape() != z0.data.shape()) {
        throw ContractError("rf_loss: velocity shape " + tape.value(pred).shape_str() +
                            " does not match latent " + z0.data.shape_str());
    }
    GradTape::Var target = tape.leaf(sub(eps.data, z0.data));
    GradTape::Var diff = tape.sub(pred, target);
    GradTape::Var sq = tape.mul(diff, diff);
    if (mask_first) {
        Tensor mask = Tensor::full(z0.data.shape(), 1.0);
        std::fill(mask.data().begin(), mask.data().begin() + frame_elems, 0.0);
        GradTape::Var masked = tape.mul(sq, tape.leaf(std::move(mask)));
        const double n = static_cast<double>(z0.data.size() - frame_elems);
        return tape.scale(tape.sum_all(masked), cfg.weight(t) / n);
    }
    return tape.scale(tape.mean_all(sq), cfg.weight(t));
}

LatentVideo euler_sample(const VelocityEval& velocity, const LatentVideo& eps,
                         const ConditionContext& ctx, std::size_t steps, const Tensor* first_frame) {
    if (steps < 1) throw ContractError("euler_sample: steps must be >= 1");
    LatentVideo z = eps;
    const std::size_t frame_elems = z.data.size() / z.frames();
    auto pin_first = [&] {
        if (first_frame) {
            if (first_frame->size() != frame_elems) {
                throw DimensionError("euler_sample: first frame size mismatch");
            }
            std::memcpy(z.data.data().data(), first_frame->data().data(), frame_elems * sizeof(double));
        }
    };
    pin_first();
    const double dt = 1.0 / static_cast<double>(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = 1.0 - static_cast<double>(k) * dt;
        Tensor v = velocity(z, t, ctx);
        if (!v.same_shape(z.data)) {
            throw ContractError("euler_sample: velocity shape " + v.shape_str() +
                                " does not match latent " + z.data.shape_str());
        }
        for (std::size_t i = 0; i < z.data.size(); ++i) z.data[i] -= dt * v[i];
        pin_first();
    }
    return z;
}

} // namespace wact
