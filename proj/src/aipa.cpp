#include "wact/aipa.hpp"

#include <cmath>
#include <string>

namespace wact {

LoraAdapter LoraAdapter::init(std::size_t d_model, std::size_t rank, double scale, Rng& rng) {
    if (rank == 0) throw ConfigError("lora: rank must be positive");
    if (scale <= 0.0) throw ConfigError("lora: scale must be positive");
    LoraAdapter a;
    a.down = Tensor::randn({d_model, rank}, rng, 1.0 / std::sqrt(static_cast<double>(rank)));
    a.up = Tensor::zeros({rank, d_model});
    a.scale = scale;
    return a;
}

Tensor LoraAdapter::delta() const { return wact::scale(matmul(down, up), scale); }

AipaBlockParams AipaBlockParams::init(std::size_t d_model, std::size_t heads, std::size_t lora_rank,
                                      double lora_scale, Rng& rng) {
    if (heads == 0 || d_model % heads != 0) {
        throw ConfigError("aipa: head count " + std::to_string(heads) + " must divide d_model " +
                          std::to_string(d_model));
    }
    AipaBlockParams p;
    p.d_model = d_model;
    p.heads = heads;
    const double std = 1.0 / std::sqrt(static_cast<double>(d_model));
    p.w_q = Tensor::randn({d_model, d_model}, rng, std);
    p.w_k = Tensor::randn({d_model, d_model}, rng, std);
    p.w_v = Tensor::randn({d_model, d_model}, rng, std);
    p.w_o = Tensor::randn({d_model, d_model}, rng, std);
    p.a_q = LoraAdapter::init(d_model, lora_rank, lora_scale, rng);
    p.a_k = LoraAdapter::init(d_model, lora_rank, lora_scale, rng);
    p.a_v = LoraAdapter::init(d_model, lora_rank, lora_scale, rng);
    p.a_o = LoraAdapter::init(d_model, lora_rank, lora_scale, rng);
    return p;
}

std::size_t TokenSequence::video_count() const {
    std::size_t n = 0;
    while (n < kinds.size() && kinds[n] == TokenKind::Video) ++n;
    return n;
}

void TokenSequence::validate() const {
    if (tokens.ndim() != 2 || tokens.rows() != kinds.size() || positions.size() != kinds.size()) {
        throw ContractError("token sequence: tokens/kinds/positions lengths disagree");
    }
    const std::size_t n_video = video_count();
    if (n_video == 0) throw ContractError("token sequence: a video block must exist");
    for (std::size_t i = n_video; i < kinds.size(); ++i) {
        if (kinds[i] == TokenKind::Video) {
            throw ContractError("token sequence: video tokens must form a single leading block");
        }
    }
}

BoundBlock bind_block(GradTape& tape, const AipaBlockParams& params, bool trainable_adapters) {
    BoundBlock b;
    b.d_model = params.d_model;
    b.heads = params.heads;
    b.w_q = tape.leaf(params.w_q, false);
    b.w_k = tape.leaf(params.w_k, false);
    b.w_v = tape.leaf(params.w_v, false);
    b.w_o = tape.leaf(params.w_o, false);
    auto bind_adapter = [&](const LoraAdapter& a) {
        return BoundAdapter{tape.leaf(a.down, trainable_adapters), tape.leaf(a.up, trainable_adapters),
                            a.scale};
    };
    b.a_q = bind_adapter(params.a_q);
    b.a_k = bind_adapter(params.a_k);
    b.a_v = bind_adapter(params.a_v);
    b.a_o = bind_adapter(params.a_o);
    return b;
}

SeqVars bind_sequence(GradTape& tape, const TokenSequence& seq, bool video_trainable,
                      bool refs_trainable) {
    seq.validate();
    const std::size_t n_video = seq.video_count();
    const std::size_t n_ref = seq.ref_count();
    SeqVars vars;
    vars.video = tape.leaf(slice_rows(seq.tokens, 0, n_video), video_trainable);
    vars.video_positions.assign(seq.positions.begin(), seq.positions.begin() + n_video);
    if (n_ref > 0) {
        vars.refs = tape.leaf(slice_rows(seq.tokens, n_video, n_ref), refs_trainable);
        vars.ref_positions.assign(seq.positions.begin() + n_video, seq.positions.end());
    }
    return vars;
}

GradTape::Var project_adapted(GradTape& tape, GradTape::Var x, GradTape::Var w,
                              const BoundAdapter& adapter) {
    GradTape::Var base = tape.matmul(x, w);
    GradTape::Var low = tape.matmul(tape.matmul(x, adapter.down), adapter.up);
    return tape.add(base, tape.scale(low, adapter.scale));
}

GradTape::Var apply_rope_heads(GradTape& tape, GradTape::Var x,
                               const std::vector<PositionTriple>& positions, const RopeConfig& cfg,
                               std::size_t heads) {
    const std::size_t d_model = tape.value(x).cols();
    const std::size_t head_dim = d_model / heads;
    std::vector<GradTape::Var> parts;
    parts.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        GradTape::Var slice = tape.slice_cols(x, h * head_dim, head_dim);
        parts.push_back(apply_rope(tape, slice, positions, cfg));
    }
    return tape.concat_cols(parts);
}

GradTape::Var multihead_attention(GradTape& tape, GradTape::Var q, GradTape::Var k, GradTape::Var v,
                                  std::size_t heads) {
    const std::size_t d_model = tape.value(q).cols();
    if (heads == 0 || d_model % heads != 0) {
        throw ConfigError("attention: head count must divide d_model");
    }
    const std::size_t head_dim = d_model / heads;
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(head_dim));
    std::vector<GradTape::Var> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        GradTape::Var qh = tape.slice_cols(q, h * head_dim, head_dim);
        GradTape::Var kh = tape.slice_cols(k, h * head_dim, head_dim);
        GradTape::Var vh = tape.slice_cols(v, h * head_dim, head_dim);
        GradTape::Var logits = tape.scale(tape.matmul(qh, tape.transpose(kh)), inv_sqrt_d);
        GradTape::Var probs = tape.softmax_lastdim(logits);
        outs.push_back(tape.matmul(probs, vh));
    }
    return tape.concat_cols(outs);
}

RefProjections project_reference(GradTape& tape, GradTape::Var c, const BoundBlock& block) {
    if (tape.value(c).rows() < 1) throw ContractError("project_reference: no reference tokens");
    return RefProjections{project_adapted(tape, c, block.w_q, block.a_q),
                          project_adapted(tape, c, block.w_k, block.a_k),
                          project_adapted(tape, c, block.w_v, block.a_v)};
}

namespace {

// x + MHA(rms(x)) . W_O over a single token stream with frozen weights.
GradTape::Var frozen_self_attention_sublayer(GradTape& tape, GradTape::Var x,
                                             const std::vector<PositionTriple>& positions,
                                             const BoundBlock& block, const RopeConfig& rope) {
    GradTape::Var n = tape.rms_norm_rows(x);
    GradTape::Var q = apply_rope_heads(tape, tape.matmul(n, block.w_q), positions, rope, block.heads);
    GradTape::Var k = apply_rope_heads(tape, tape.matmul(n, block.w_k), positions, rope, block.heads);
    GradTape::Var v = tape.matmul(n, block.w_v);
    GradTape::Var attn = multihead_attention(tape, q, k, v, block.heads);
    return tape.add(x, tape.matmul(attn, block.w_o));
}

} // namespace

Stage1Out stage1_self_attention(GradTape& tape, const SeqVars& seq, const BoundBlock& block,
                                const RopeConfig& rope) {
    if (tape.value(seq.video).rows() == 0) {
        throw ContractError("stage1: a video block must exist");
    }
    Stage1Out out;
    out.video_hidden = frozen_self_attention_sublayer(tape, seq.video, seq.video_positions, block, rope);
    if (seq.refs) {
        GradTape::Var n = tape.rms_norm_rows(*seq.refs);
        RefProjections proj = project_reference(tape, n, block);
        GradTape::Var q = apply_rope_heads(tape, proj.q, seq.ref_positions, rope, block.heads);
        GradTape::Var k = apply_rope_heads(tape, proj.k, seq.ref_positions, rope, block.heads);
        GradTape::Var attn = multihead_attention(tape, q, k, proj.v, block.heads);
        out.c_ref = tape.add(*seq.refs, project_adapted(tape, attn, block.w_o, block.a_o));
    }
    return out;
}

GradTape::Var stage2_asymmetric_fusion(GradTape& tape, GradTape::Var video_hidden,
                                       std::optional<GradTape::Var> c_ref, const SeqVars& seq,
                                       const BoundBlock& block, const RopeConfig& rope,
                                       std::optional<GradTape::Var> context_tokens) {
    GradTape::Var x = tape.rms_norm_rows(video_hidden);
    GradTape::Var q = apply_rope_heads(tape, tape.matmul(x, block.w_q), seq.video_positions, rope,
                                       block.heads);
    std::vector<GradTape::Var> k_parts{
        apply_rope_heads(tape, tape.matmul(x, block.w_k), seq.video_positions, rope, block.heads)};
    std::vector<GradTape::Var> v_parts{tape.matmul(x, block.w_v)};
    if (c_ref) {
        GradTape::Var m = tape.rms_norm_rows(*c_ref);
        k_parts.push_back(apply_rope_heads(tape, project_adapted(tape, m, block.w_k, block.a_k),
                                           seq.ref_positions, rope, block.heads));
        v_parts.push_back(project_adapted(tape, m, block.w_v, block.a_v));
    }
    if (context_tokens) {
        // context rows: frozen projections, no rotation
        GradTape::Var cn = tape.rms_norm_rows(*context_tokens);
        k_parts.push_back(tape.matmul(cn, block.w_k));
        v_parts.push_back(tape.matmul(cn, block.w_v));
    }
    GradTape::Var k = tape.concat_rows(k_parts);
    GradTape::Var v = tape.concat_rows(v_parts);
    GradTape::Var attn = multihead_attention(tape, q, k, v, block.heads);
    return tape.add(video_hidden, tape.matmul(attn, block.w_o));
}

GradTape::Var aipa_block(GradTape& tape, const SeqVars& seq, const BoundBlock& block,
                         const RopeConfig& rope, std::optional<GradTape::Var> context_tokens) {
    Stage1Out s1 = stage1_self_attention(tape, seq, block, rope);
    return stage2_asymmetric_fusion(tape, s1.video_hidden, s1.c_ref, seq, block, rope, context_tokens);
}

GradTape::Var full_attention_sublayer(GradTape& tape, GradTape::Var joint, std::size_t n_video,
                                      std::size_t n_ref,
                                      const std::vector<PositionTriple>& all_positions,
                                      const BoundBlock& block, const RopeConfig& rope,
                                      std::optional<GradTape::Var> context_tokens) {
    GradTape::Var x = tape.rms_norm_rows(joint);
    auto project_split = [&](GradTape::Var w, const BoundAdapter& a) {
        if (n_ref == 0) return tape.matmul(x, w);
        GradTape::Var xv = tape.slice_rows(x, 0, n_video);
        GradTape::Var xr = tape.slice_rows(x, n_video, n_ref);
        return tape.concat_rows({tape.matmul(xv, w), project_adapted(tape, xr, w, a)});
    };
    GradTape::Var q =
        apply_rope_heads(tape, project_split(block.w_q, block.a_q), all_positions, rope, block.heads);
    std::vector<GradTape::Var> k_parts{
        apply_rope_heads(tape, project_split(block.w_k, block.a_k), all_positions, rope, block.heads)};
    std::vector<GradTape::Var> v_parts{project_split(block.w_v, block.a_v)};
    if (context_tokens) {
        GradTape::Var cn = tape.rms_norm_rows(*context_tokens);
        k_parts.push_back(tape.matmul(cn, block.w_k));
        v_parts.push_back(tape.matmul(cn, block.w_v));
    }
    GradTape::Var k = k_parts.size() > 1 ? tape.concat_rows(k_parts) : k_parts[0];
    GradTape::Var v = v_parts.size() > 1 ? tape.concat_rows(v_parts) : v_parts[0];
    GradTape::Var attn = multihead_attention(tape, q, k, v, block.heads);
    GradTape::Var out = [&] {
        if (n_ref == 0) return tape.matmul(attn, block.w_o);
        GradTape::Var ov = tape.matmul(tape.slice_rows(attn, 0, n_video), block.w_o);
        GradTape::Var orf =
            project_adapted(tape, tape.slice_rows(attn, n_video, n_ref), block.w_o, block.a_o);
        return tape.concat_rows({ov, orf});
    }();
    return tape.add(joint, out);
}

GradTape::Var full_attention_block(GradTape& tape, const SeqVars& seq, const BoundBlock& block,
                                   const RopeConfig& rope,
                                   std::optional<GradTape::Var> context_tokens) {
    const std::size_t n_video = tape.value(seq.video).rows();
    const std::size_t n_ref = seq.refs ? tape.value(*seq.refs).rows() : 0;
    std::vector<PositionTriple> all_pos = seq.video_positions;
    all_pos.insert(all_pos.end(), seq.ref_positions.begin(), seq.ref_positions.end());

    GradTape::Var joint = seq.refs ? tape.concat_rows({seq.video, *seq.refs}) : seq.video;
    joint = full_attention_sublayer(tape, joint, n_video, n_ref, all_pos, block, rope, context_tokens);
    joint = full_attention_sublayer(tape, joint, n_video, n_ref, all_pos, block, rope, context_tokens);
    return n_ref == 0 ? joint : tape.slice_rows(joint, 0, n_video);
}

Tensor baseline_video_block(const Tensor& video, const std::vector<PositionTriple>& positions,
                            const AipaBlockParams& params, const RopeConfig& rope) {
    const std::size_t heads = params.heads;
    const std::size_t head_dim = params.d_model / heads;
    auto rope_heads = [&](const Tensor& x) {
        std::vector<Tensor> parts;
        for (std::size_t h = 0; h < heads; ++h)
            parts.push_back(apply_rope(slice_cols(x, h * head_dim, head_dim), positions, rope));
        return concat_cols(parts);
    };
    auto sublayer = [&](const Tensor& x) {
        Tensor n = rms_norm_rows(x);
        Tensor q = rope_heads(matmul(n, params.w_q));
        Tensor k = rope_heads(matmul(n, params.w_k));
        Tensor v = matmul(n, params.w_v);
        std::vector<Tensor> outs;
        for (std::size_t h = 0; h < heads; ++h) {
            Tensor qh = slice_cols(q, h * head_dim, head_dim);
            Tensor kh = slice_cols(k, h * head_dim, head_dim);
            Tensor vh = slice_cols(v, h * head_dim, head_dim);
            Tensor logits = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(static_cast<double>(head_dim)));
            outs.push_back(matmul(softmax_lastdim(logits), vh));
        }
        return add(x, matmul(concat_cols(outs), params.w_o));
    };
    return sublayer(sublayer(video));
}

} // namespace wact
