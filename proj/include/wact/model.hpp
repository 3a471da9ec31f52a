#pragma once

#include <map>
#include <string>
#include <vector>

#include "wact/aipa.hpp"
#include "wact/checkpoint.hpp"
#include "wact/rectflow.hpp"

namespace wact {

struct ModelConfig {
    std::size_t d_model = 64;
    std::size_t heads = 4;
    std::size_t blocks = 2;
    std::size_t lora_rank = 8;
    double lora_scale = 1.0;
    std::size_t patch = 4;          // square patch edge on the latent grid
    std::size_t time_features = 4;  // Fourier pairs encoding the diffusion time
    std::size_t caption_vocab = 64;
    std::size_t channels = 3;       // latent channels
    std::size_t h_max = 8;          // maximum patch-grid extent (rope spatial shift)
    std::size_t w_max = 8;
    double freq_base = 10000.0;
    std::int64_t delta_face = 4;
    std::int64_t delta_body = 128;
    bool use_aipa = true;   // false: joint full attention (ablation)
    bool use_irope = true;  // false: reference tokens reuse the frame-0 raster positions

    RopeConfig rope() const;
    std::size_t patch_dim() const { return channels * patch * patch; }
    void validate() const;
};

// Toy latent velocity predictor: patch embedding + Fourier time features +
// a stack of identity-conditioned attention blocks + linear velocity head.
// Attention projections are frozen at initialization; the trainable set is
// the reference adapters plus the embedding/head parameters.
class VelocityModel {
public:
    VelocityModel(ModelConfig cfg, Rng& rng);

    const ModelConfig& config() const { return cfg_; }

    struct Bound {
        std::vector<BoundBlock> blocks;
        GradTape::Var patch_embed, patch_bias, time_embed, caption_table, out_head, out_bias;
        // name -> var for every parameter, same names as the checkpoint
        std::vector<std::pair<std::string, GradTape::Var>> named;
    };

    Bound bind(GradTape& tape) const;

    // Differentiable forward; z_in is the (possibly first-frame-conditioned)
    // interpolated latent. Returns a Var shaped like z_in.
    GradTape::Var forward(GradTape& tape, const Bound& bound, const LatentVideo& z_in, double t,
                          const ConditionContext& ctx) const;

    // Convenience adapters for the rectified-flow entry points.
    VelocityFn as_velocity_fn() const;
    VelocityEval as_velocity_eval() const;

    // Parameter traversal in a fixed order (checkpoint order).
    void visit_params(const std::function<void(const std::string&, Tensor&, bool trainable)>& fn);
    void visit_params(const std::function<void(const std::string&, const Tensor&, bool trainable)>& fn) const;

    Checkpoint to_checkpoint() const;
    void load_from_checkpoint(const Checkpoint& ckpt); // IoError on missing/mismatched tensors

private:
    ModelConfig cfg_;
    std::vector<AipaBlockParams> blocks_;
    Tensor patch_embed_;   // patch_dim x d_model
    Tensor patch_bias_;    // 1 x d_model
    Tensor time_embed_;    // 2*time_features x d_model
    Tensor caption_table_; // caption_vocab x d_model
    Tensor out_head_;      // d_model x patch_dim
    Tensor out_bias_;      // 1 x patch_dim

    friend struct ModelTestAccess;
};

// Test hook: zero the output head so the model is an exact zero field.
struct ModelTestAccess {
    static void zero_output_head(VelocityModel& m);
};

// ---- optimizer -----------------------------------------------------------

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

struct AdamState {
    std::size_t step = 0;
    std::map<std::string, Tensor> m;
    std::map<std::string, Tensor> v;
};

// One training example: clean latent + conditioning.
struct TrainExample {
    LatentVideo z0;
    ConditionContext ctx;
};

// One optimizer step on a batch: samples t ~ U(0,1) and eps ~ N(0,I) per
// element from the given rng, averages the per-example losses in index order,
// and updates the trainable parameters only. Returns the batch loss.
double train_step(VelocityModel& model, const std::vector<TrainExample>& batch, AdamState& state,
                  const AdamConfig& opt, const RfConfig& rf, Rng& rng);

// ---- latent <-> token plumbing (exposed for tests) -----------------------

// Flat index map sending token-major patch layout to latent-major layout:
// tokens[token, col] = latent[map[token * patch_dim + col]].
std::vector<std::size_t> patchify_index_map(std::size_t frames, std::size_t channels, std::size_t h,
                                            std::size_t w, std::size_t patch);

} // namespace wact
