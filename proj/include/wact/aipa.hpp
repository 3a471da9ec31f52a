#pragma once

#include <optional>
#include <vector>

#include "wact/rope.hpp"
#include "wact/tape.hpp"
#include "wact/tensor.hpp"

namespace wact {

// Asymmetric identity-preserving attention block.
//
// Layout (pre-norm, RMS normalization, residual on every attention sublayer):
//   stage 1, video stream:  v1 = v0 + MHA(rms(v0)) . W_O
//   stage 1, ref stream:    c  = r0 + MHA'(rms(r0)) . (W_O + dW_O)
//   stage 2, fusion:        v2 = v1 + MHA(q from rms(v1),
//                                         k/v from [rms(v1); rms(c); rms(ctx)]) . W_O
// where MHA projects with the frozen W_{Q,K,V} and MHA' with the
// adapter-augmented (W + dW). In stage 2 the video and context rows use
// frozen projections, the reference rows the adapter-augmented ones. Rotary
// positions are applied per head to q and k; context rows are not rotated.
// Reference tokens never attend to video tokens, so the identity stream is
// independent of the video latents by construction.

// Low-rank additive delta dW = scale * down * up on a frozen projection.
// up starts at zero so dW == 0 at initialization.
struct LoraAdapter {
    Tensor down;        // d_model x r
    Tensor up;          // r x d_model
    double scale = 1.0;

    static LoraAdapter init(std::size_t d_model, std::size_t rank, double scale, Rng& rng);

    std::size_t rank() const { return down.cols(); }
    Tensor delta() const; // scale * down * up, d_model x d_model
};

struct AipaBlockParams {
    std::size_t d_model = 64;
    std::size_t heads = 4;
    Tensor w_q, w_k, w_v, w_o;          // frozen backbone projections
    LoraAdapter a_q, a_k, a_v, a_o;     // reference-only adapters, shared by face and body

    static AipaBlockParams init(std::size_t d_model, std::size_t heads, std::size_t lora_rank,
                                double lora_scale, Rng& rng);
};

// Token stream entering a block: a video block followed by a reference block
// (face and body tokens in any order within the reference block).
struct TokenSequence {
    Tensor tokens;                        // L x d_model
    std::vector<TokenKind> kinds;         // per token
    std::vector<PositionTriple> positions;

    std::size_t video_count() const;
    std::size_t ref_count() const { return kinds.size() - video_count(); }
    void validate() const; // ContractError on bad partition or length mismatch
};

// Tape bindings -----------------------------------------------------------

struct BoundAdapter {
    GradTape::Var down, up;
    double scale = 1.0;
};

struct BoundBlock {
    std::size_t d_model = 0;
    std::size_t heads = 0;
    GradTape::Var w_q, w_k, w_v, w_o;
    BoundAdapter a_q, a_k, a_v, a_o;
};

// Registers the block parameters on a tape. Frozen projections are always
// non-trainable leaves; adapters are trainable unless disabled.
BoundBlock bind_block(GradTape& tape, const AipaBlockParams& params, bool trainable_adapters = true);

struct SeqVars {
    GradTape::Var video;                     // L_v x d_model
    std::optional<GradTape::Var> refs;       // L_r x d_model, absent when no references
    std::vector<PositionTriple> video_positions;
    std::vector<PositionTriple> ref_positions;
};

SeqVars bind_sequence(GradTape& tape, const TokenSequence& seq, bool video_trainable = false,
                      bool refs_trainable = false);

// Helpers shared by the block stages -------------------------------------

// x . W + scale * (x . down) . up
GradTape::Var project_adapted(GradTape& tape, GradTape::Var x, GradTape::Var w,
                              const BoundAdapter& adapter);

// Per-head rotary application on an [L x d_model] tensor.
GradTape::Var apply_rope_heads(GradTape& tape, GradTape::Var x,
                               const std::vector<PositionTriple>& positions, const RopeConfig& cfg,
                               std::size_t heads);

// Heads-split softmax attention over pre-rotated q/k; returns concatenated
// head outputs (no output projection).
GradTape::Var multihead_attention(GradTape& tape, GradTape::Var q, GradTape::Var k, GradTape::Var v,
                                  std::size_t heads);

// Block stages ------------------------------------------------------------

// (W_{Q,K,V} + dW)^T-style projections of reference tokens: returns q_c, k_c, v_c.
struct RefProjections {
    GradTape::Var q, k, v;
};
RefProjections project_reference(GradTape& tape, GradTape::Var c, const BoundBlock& block);

struct Stage1Out {
    GradTape::Var video_hidden;              // L_v x d_model
    std::optional<GradTape::Var> c_ref;      // L_r x d_model identity representation
};

// Stage 1: video tokens self-attend among themselves with frozen weights;
// face and body reference tokens self-attend jointly with adapted weights.
Stage1Out stage1_self_attention(GradTape& tape, const SeqVars& seq, const BoundBlock& block,
                                const RopeConfig& rope);

// Stage 2: video tokens query [video; c_ref; context]; reference tokens get
// no output rows. context_tokens (optional, e.g. text embeddings) use frozen
// projections and no rotation.
GradTape::Var stage2_asymmetric_fusion(GradTape& tape, GradTape::Var video_hidden,
                                       std::optional<GradTape::Var> c_ref, const SeqVars& seq,
                                       const BoundBlock& block, const RopeConfig& rope,
                                       std::optional<GradTape::Var> context_tokens = std::nullopt);

// Full block: stage 1 then stage 2. Output has one row per video token.
GradTape::Var aipa_block(GradTape& tape, const SeqVars& seq, const BoundBlock& block,
                         const RopeConfig& rope,
                         std::optional<GradTape::Var> context_tokens = std::nullopt);

// Ablation variant: two joint self-attention sublayers over [video; refs]
// (reference rows still use adapted projections); output is the video rows.
GradTape::Var full_attention_block(GradTape& tape, const SeqVars& seq, const BoundBlock& block,
                                   const RopeConfig& rope,
                                   std::optional<GradTape::Var> context_tokens = std::nullopt);

// One joint self-attention sublayer over an already-concatenated
// [video; refs] stream; building block of the full-attention variant.
GradTape::Var full_attention_sublayer(GradTape& tape, GradTape::Var joint, std::size_t n_video,
                                      std::size_t n_ref,
                                      const std::vector<PositionTriple>& all_positions,
                                      const BoundBlock& block, const RopeConfig& rope,
                                      std::optional<GradTape::Var> context_tokens = std::nullopt);

// Reference path for the reduction invariant: two pre-norm self-attention
// sublayers over the video tokens with frozen weights only. Kept as a
// separate straight-line implementation on purpose.
Tensor baseline_video_block(const Tensor& video, const std::vector<PositionTriple>& positions,
                            const AipaBlockParams& params, const RopeConfig& rope);

} // namespace wact
