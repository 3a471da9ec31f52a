#include "wact/model.hpp"

#include <cmath>

namespace wact {

RopeConfig ModelConfig::rope() const {
    RopeConfig r = RopeConfig::make(d_model / heads, h_max, w_max);
    r.freq_base = freq_base;
    r.delta_face = delta_face;
    r.delta_body = delta_body;
    return r;
}

void ModelConfig::validate() const {
    if (heads == 0 || d_model % heads != 0) throw ConfigError("model: heads must divide d_model");
    if ((d_model / heads) % 2 != 0) throw ConfigError("model: head_dim must be even for rotary pairs");
    if (blocks == 0) throw ConfigError("model: need at least one block");
    if (patch == 0) throw ConfigError("model: patch must be positive");
    if (time_features == 0) throw ConfigError("model: time_features must be positive");
    if (caption_vocab == 0) throw ConfigError("model: caption_vocab must be positive");
    rope().validate();
}

std::vector<std::size_t> patchify_index_map(std::size_t frames, std::size_t channels, std::size_t h,
                                            std::size_t w, std::size_t patch) {
    if (patch == 0 || h % patch != 0 || w % patch != 0) {
        throw ConfigError("patchify: latent " + std::to_string(h) + "x" + std::to_string(w) +
                          " not divisible by patch " + std::to_string(patch));
    }
    const std::size_t gh = h / patch, gw = w / patch;
    std::vector<std::size_t> map;
    map.reserve(frames * channels * h * w);
    for (std::size_t f = 0; f < frames; ++f)
        for (std::size_t i = 0; i < gh; ++i)
            for (std::size_t j = 0; j < gw; ++j)
                for (std::size_t c = 0; c < channels; ++c)
                    for (std::size_t py = 0; py < patch; ++py)
                        for (std::size_t px = 0; px < patch; ++px)
                            map.push_back(((f * channels + c) * h + i * patch + py) * w + j * patch + px);
    return map;
}

namespace {

std::vector<std::size_t> invert_map(const std::vector<std::size_t>& map) {
    std::vector<std::size_t> inv(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) inv[map[i]] = i;
    return inv;
}

Tensor time_feature_row(double t, std::size_t pairs) {
    Tensor row({1, 2 * pairs});
    const double two_pi = 6.283185307179586476925286766559;
    for (std::size_t k = 0; k < pairs; ++k) {
        const double f = std::pow(2.0, static_cast<double>(k));
        row[2 * k] = std::sin(two_pi * f * t);
        row[2 * k + 1] = std::cos(two_pi * f * t);
    }
    return row;
}

} // namespace

VelocityModel::VelocityModel(ModelConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
    cfg_.validate();
    blocks_.reserve(cfg_.blocks);
    for (std::size_t i = 0; i < cfg_.blocks; ++i) {
        blocks_.push_back(
            AipaBlockParams::init(cfg_.d_model, cfg_.heads, cfg_.lora_rank, cfg_.lora_scale, rng));
    }
    const std::size_t pd = cfg_.patch_dim();
    patch_embed_ = Tensor::randn({pd, cfg_.d_model}, rng, 1.0 / std::sqrt(static_cast<double>(pd)));
    patch_bias_ = Tensor::zeros({1, cfg_.d_model});
    time_embed_ = Tensor::randn({2 * cfg_.time_features, cfg_.d_model},
                                rng, 1.0 / std::sqrt(static_cast<double>(2 * cfg_.time_features)));
    caption_table_ = Tensor::randn({cfg_.caption_vocab, cfg_.d_model}, rng,
                                   1.0 / std::sqrt(static_cast<double>(cfg_.d_model)));
    out_head_ = Tensor::randn({cfg_.d_model, pd}, rng, 1.0 / std::sqrt(static_cast<double>(cfg_.d_model)));
    out_bias_ = Tensor::zeros({1, pd});
}

void VelocityModel::visit_params(
    const std::function<void(const std::string&, Tensor&, bool)>& fn) {
    const char* proj_names[4] = {"q", "k", "v", "o"};
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        AipaBlockParams& b = blocks_[i];
        Tensor* frozen[4] = {&b.w_q, &b.w_k, &b.w_v, &b.w_o};
        LoraAdapter* adapters[4] = {&b.a_q, &b.a_k, &b.a_v, &b.a_o};
        for (int p = 0; p < 4; ++p) {
            const std::string base = "aipa." + std::to_string(i) + "." + proj_names[p] + ".";
            fn(base + "frozen", *frozen[p], false);
            fn(base + "down", adapters[p]->down, true);
            fn(base + "up", adapters[p]->up, true);
        }
    }
    fn("embed.patch.weight", patch_embed_, true);
    fn("embed.patch.bias", patch_bias_, true);
    fn("embed.time.weight", time_embed_, true);
    fn("embed.caption.table", caption_table_, true);
    fn("head.out.weight", out_head_, true);
    fn("head.out.bias", out_bias_, true);
}

void VelocityModel::visit_params(
    const std::function<void(const std::string&, const Tensor&, bool)>& fn) const {
    const_cast<VelocityModel*>(this)->visit_params(
        [&](const std::string& name, Tensor& t, bool trainable) { fn(name, t, trainable); });
}

VelocityModel::Bound VelocityModel::bind(GradTape& tape) const {
    Bound b;
    for (const AipaBlockParams& blk : blocks_) b.blocks.push_back(bind_block(tape, blk, true));
    // names must match visit_params order so the optimizer can pair grads
    const char* proj_names[4] = {"q", "k", "v", "o"};
    for (std::size_t i = 0; i < b.blocks.size(); ++i) {
        const BoundBlock& bb = b.blocks[i];
        const GradTape::Var frozen[4] = {bb.w_q, bb.w_k, bb.w_v, bb.w_o};
        const BoundAdapter adapters[4] = {bb.a_q, bb.a_k, bb.a_v, bb.a_o};
        for (int p = 0; p < 4; ++p) {
            const std::string base = "aipa." + std::to_string(i) + "." + proj_names[p] + ".";
            b.named.emplace_back(base + "frozen", frozen[p]);
            b.named.emplace_back(base + "down", adapters[p].down);
            b.named.emplace_back(base + "up", adapters[p].up);
        }
    }
    b.patch_embed = tape.leaf(patch_embed_, true);
    b.patch_bias = tape.leaf(patch_bias_, true);
    b.time_embed = tape.leaf(time_embed_, true);
    b.caption_table = tape.leaf(caption_table_, true);
    b.out_head = tape.leaf(out_head_, true);
    b.out_bias = tape.leaf(out_bias_, true);
    b.named.emplace_back("embed.patch.weight", b.patch_embed);
    b.named.emplace_back("embed.patch.bias", b.patch_bias);
    b.named.emplace_back("embed.time.weight", b.time_embed);
    b.named.emplace_back("embed.caption.table", b.caption_table);
    b.named.emplace_back("head.out.weight", b.out_head);
    b.named.emplace_back("head.out.bias", b.out_bias);
    return b;
}

GradTape::Var VelocityModel::forward(GradTape& tape, const Bound& bound, const LatentVideo& z_in,
                                     double t, const ConditionContext& ctx) const {
    if (z_in.channels() != cfg_.channels) {
        throw ContractError("model: latent has " + std::to_string(z_in.channels()) +
                            " channels, config says " + std::to_string(cfg_.channels));
    }
    const std::size_t f = z_in.frames();
    const std::size_t gh = z_in.height() / cfg_.patch;
    const std::size_t gw = z_in.width() / cfg_.patch;
    const std::size_t pd = cfg_.patch_dim();
    const RopeConfig rope_cfg = cfg_.rope();

    // video tokens
    auto map = patchify_index_map(f, cfg_.channels, z_in.height(), z_in.width(), cfg_.patch);
    GradTape::Var z_leaf = tape.leaf(z_in.data);
    GradTape::Var tokens = tape.gather_flat(z_leaf, map, {f * gh * gw, pd});
    GradTape::Var video = tape.add_row_broadcast(tape.matmul(tokens, bound.patch_embed), bound.patch_bias);
    GradTape::Var time_row = tape.matmul(tape.leaf(time_feature_row(t, cfg_.time_features)),
                                         bound.time_embed);
    video = tape.add_row_broadcast(video, time_row);

    // reference tokens (face block then body block)
    std::vector<RefGrid> ref_grids;
    std::vector<GradTape::Var> ref_parts;
    auto embed_ref = [&](const Tensor& img, TokenKind kind) {
        if (img.ndim() != 3 || img.shape()[0] != cfg_.channels) {
            throw ContractError("model: reference image must be {c,h,w}, got " + img.shape_str());
        }
        const std::size_t rh = img.shape()[1], rw = img.shape()[2];
        auto rmap = patchify_index_map(1, cfg_.channels, rh, rw, cfg_.patch);
        GradTape::Var leaf = tape.leaf(img);
        GradTape::Var rt = tape.gather_flat(leaf, rmap, {(rh / cfg_.patch) * (rw / cfg_.patch), pd});
        ref_parts.push_back(
            tape.add_row_broadcast(tape.matmul(rt, bound.patch_embed), bound.patch_bias));
        ref_grids.push_back(RefGrid{rh / cfg_.patch, rw / cfg_.patch, kind});
    };
    for (const Tensor& img : ctx.face_refs) embed_ref(img, TokenKind::FaceRef);
    for (const Tensor& img : ctx.body_refs) embed_ref(img, TokenKind::BodyRef);

    // positions
    SeqVars seq;
    seq.video = video;
    std::vector<PositionTriple> all_pos;
    if (cfg_.use_irope) {
        all_pos = assign_positions(f, gh, gw, ref_grids, rope_cfg);
    } else {
        // ablation: references collapse onto the frame-0 raster
        all_pos = assign_positions(f, gh, gw, {}, rope_cfg);
        for (const RefGrid& g : ref_grids)
            for (std::size_t i = 0; i < g.h; ++i)
                for (std::size_t j = 0; j < g.w; ++j)
                    all_pos.push_back({0, static_cast<std::int64_t>(i), static_cast<std::int64_t>(j)});
    }
    const std::size_t n_video = f * gh * gw;
    seq.video_positions.assign(all_pos.begin(), all_pos.begin() + n_video);
    seq.ref_positions.assign(all_pos.begin() + n_video, all_pos.end());
    if (!ref_parts.empty()) {
        seq.refs = ref_parts.size() > 1 ? tape.concat_rows(ref_parts) : ref_parts[0];
    }

    // prompt embedding
    std::optional<GradTape::Var> ctx_tokens;
    if (ctx.caption_id >= 0) {
        if (static_cast<std::size_t>(ctx.caption_id) >= cfg_.caption_vocab) {
            throw ContractError("model: caption id " + std::to_string(ctx.caption_id) +
                                " outside vocab " + std::to_string(cfg_.caption_vocab));
        }
        ctx_tokens = tape.take_rows(bound.caption_table, {static_cast<std::size_t>(ctx.caption_id)});
    }

    // attention stack
    GradTape::Var v = seq.video;
    if (cfg_.use_aipa) {
        std::optional<GradTape::Var> r = seq.refs;
        for (const BoundBlock& blk : bound.blocks) {
            SeqVars cur = seq;
            cur.video = v;
            cur.refs = r;
            Stage1Out s1 = stage1_self_attention(tape, cur, blk, rope_cfg);
            v = stage2_asymmetric_fusion(tape, s1.video_hidden, s1.c_ref, cur, blk, rope_cfg, ctx_tokens);
            r = s1.c_ref;
        }
    } else {
        const std::size_t n_ref = seq.refs ? tape.value(*seq.refs).rows() : 0;
        GradTape::Var joint = seq.refs ? tape.concat_rows({v, *seq.refs}) : v;
        for (const BoundBlock& blk : bound.blocks) {
            joint = full_attention_sublayer(tape, joint, n_video, n_ref, all_pos, blk, rope_cfg, ctx_tokens);
            joint = full_attention_sublayer(tape, joint, n_video, n_ref, all_pos, blk, rope_cfg, ctx_tokens);
        }
        v = n_ref == 0 ? joint : tape.slice_rows(joint, 0, n_video);
    }

    // velocity head
    GradTape::Var n = tape.rms_norm_rows(v);
    GradTape::Var out_tokens = tape.add_row_broadcast(tape.matmul(n, bound.out_head), bound.out_bias);
    GradTape::Var flat = tape.reshape(out_tokens, {n_video * pd});
    GradTape::Var latent = tape.gather_flat(flat, invert_map(map), {n_video * pd});
    return tape.reshape(latent, z_in.data.shape());
}

VelocityFn VelocityModel::as_velocity_fn() const {
    return [this](GradTape& tape, const LatentVideo& z, double t, const ConditionContext& ctx) {
        Bound b = bind(tape);
        return forward(tape, b, z, t, ctx);
    };
}

VelocityEval VelocityModel::as_velocity_eval() const {
    return [this](const LatentVideo& z, double t, const ConditionContext& ctx) {
        GradTape tape;
        Bound b = bind(tape);
        return tape.value(forward(tape, b, z, t, ctx));
    };
}

Checkpoint VelocityModel::to_checkpoint() const {
    Checkpoint ckpt;
    visit_params([&](const std::string& name, const Tensor& t, bool) { ckpt.put(name, t); });
    return ckpt;
}

void VelocityModel::load_from_checkpoint(const Checkpoint& ckpt) {
    visit_params([&](const std::string& name, Tensor& t, bool) {
        const Tensor& src = ckpt.require(name);
        if (src.shape() != t.shape()) {
            throw IoError("checkpoint: tensor '" + name + "' has shape " + src.shape_str() +
                          ", expected " + t.shape_str());
        }
        t = src;
    });
}

void ModelTestAccess::zero_output_head(VelocityModel& m) {
    m.out_head_ = Tensor::zeros(m.out_head_.shape());
    m.out_bias_ = Tensor::zeros(m.out_bias_.shape());
}

// ---- optimizer -----------------------------------------------------------

namespace {

void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, std::size_t step,
                 const AdamConfig& opt) {
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * grad[i];
        v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        param[i] -= opt.lr * (mhat / (std::sqrt(vhat) + opt.eps) + opt.weight_decay * param[i]);
    }
}

} // namespace

double train_step(VelocityModel& model, const std::vector<TrainExample>& batch, AdamState& state,
                  const AdamConfig& opt, const RfConfig& rf, Rng& rng) {
    if (batch.empty()) throw ContractError("train_step: empty batch");
    for (const TrainExample& ex : batch) {
        if (ex.ctx.face_refs.size() > 5 || ex.ctx.body_refs.size() > 5) {
            throw ContractError("train_step: at most 5 face and 5 body references per example");
        }
    }

    GradTape tape;
    VelocityModel::Bound bound = model.bind(tape);
    GradTape::Var total;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const TrainExample& ex = batch[i];
        const double t = rng.uniform();
        Tensor noise(ex.z0.data.shape());
        for (double& x : noise.data()) x = rng.normal();
        LatentVideo eps(std::move(noise));
        auto velocity = [&](GradTape& tp, const LatentVideo& z, double tt, const ConditionContext& c) {
            return model.forward(tp, bound, z, tt, c);
        };
        GradTape::Var loss_i = rf_loss(tape, velocity, ex.z0, eps, t, ex.ctx, rf);
        total = (i == 0) ? loss_i : tape.add(total, loss_i);
    }
    total = tape.scale(total, 1.0 / static_cast<double>(batch.size()));
    const double loss_value = tape.value(total)[0];
    if (!std::isfinite(loss_value)) {
        throw TrainingError("train_step: non-finite loss " + std::to_string(loss_value) + " at step " +
                            std::to_string(state.step + 1));
    }
    tape.backward(total);

    state.step += 1;
    std::size_t named_idx = 0;
    model.visit_params([&](const std::string& name, Tensor& param, bool trainable) {
        // bound.named is produced in visit order
        const auto& [bname, var] = bound.named[named_idx++];
        if (bname != name) throw ContractError("train_step: parameter order mismatch for " + name);
        if (!trainable) return;
        const Tensor& grad = tape.grad(var);
        auto mit = state.m.find(name);
        if (mit == state.m.end()) {
            state.m.emplace(name, Tensor::zeros(param.shape()));
            state.v.emplace(name, Tensor::zeros(param.shape()));
        }
        adam_update(param, grad, state.m.at(name), state.v.at(name), state.step, opt);
    });
    return loss_value;
}

} // namespace wact
