// Test-side oracles, kept independent of the library kernels they check:
// central finite differences, and a straight-line reimplementation of the
// attention block (plain loops, no tape, its own accumulation order).
#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "wact/aipa.hpp"
#include "wact/tensor.hpp"

namespace oracle {

using wact::Tensor;

// Central finite differences of a scalar function with respect to one
// parameter tensor (mutated in place and restored).
template <typename F>
Tensor finite_diff_grad(F&& f, Tensor& param, double h = 1e-6) {
    Tensor grad(param.shape());
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double saved = param[i];
        param[i] = saved + h;
        const double fp = f();
        param[i] = saved - h;
        const double fm = f();
        param[i] = saved;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

inline double rel_err(double a, double b) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-8});
}

inline double max_rel_err(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, rel_err(a[i], b[i]));
    return m;
}

// ---- straight-line linear algebra (ijk order, local accumulator) ----------

inline Tensor mm(const Tensor& a, const Tensor& b) {
    Tensor out({a.rows(), b.cols()});
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a.at(i, k) * b.at(k, j);
            out.at(i, j) = s;
        }
    return out;
}

inline Tensor tr(const Tensor& a) {
    Tensor out({a.cols(), a.rows()});
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
    return out;
}

inline Tensor softmax_rows(const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double mx = x.at(r, 0);
        for (std::size_t j = 1; j < x.cols(); ++j) mx = std::max(mx, x.at(r, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) {
            out.at(r, j) = std::exp(x.at(r, j) - mx);
            sum += out.at(r, j);
        }
        for (std::size_t j = 0; j < x.cols(); ++j) out.at(r, j) /= sum;
    }
    return out;
}

inline Tensor rms(const Tensor& x, double eps = 1e-8) {
    Tensor out(x.shape());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double ss = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) ss += x.at(r, j) * x.at(r, j);
        const double inv = 1.0 / std::sqrt(ss / static_cast<double>(x.cols()) + eps);
        for (std::size_t j = 0; j < x.cols(); ++j) out.at(r, j) = x.at(r, j) * inv;
    }
    return out;
}

// Single-head scaled dot-product attention written as plain loops.
inline Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v) {
    const double inv = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Tensor logits = mm(q, tr(k));
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] *= inv;
    return mm(softmax_rows(logits), v);
}

// Rotary application re-derived from the documented formula: per axis group g
// of the head vector, pair i rotates by pos_axis / base^(2i/g).
inline Tensor rope(const Tensor& x, const std::vector<wact::PositionTriple>& pos,
                   const wact::RopeConfig& cfg) {
    Tensor out = x;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const double axes[3] = {static_cast<double>(pos[r].t), static_cast<double>(pos[r].h),
                                static_cast<double>(pos[r].w)};
        std::size_t col = 0;
        for (int a = 0; a < 3; ++a) {
            const std::size_t g = cfg.axis_split[a];
            for (std::size_t i = 0; i < g / 2; ++i) {
                const double theta =
                    axes[a] / std::pow(cfg.freq_base, 2.0 * static_cast<double>(i) / static_cast<double>(g));
                const double c = std::cos(theta), s = std::sin(theta);
                const double x0 = x.at(r, col + 2 * i), x1 = x.at(r, col + 2 * i + 1);
                out.at(r, col + 2 * i) = x0 * c - x1 * s;
                out.at(r, col + 2 * i + 1) = x0 * s + x1 * c;
            }
            col += g;
        }
    }
    return out;
}

inline Tensor rope_heads(const Tensor& x, const std::vector<wact::PositionTriple>& pos,
                         const wact::RopeConfig& cfg, std::size_t heads) {
    const std::size_t hd = x.cols() / heads;
    Tensor out = x;
    for (std::size_t h = 0; h < heads; ++h) {
        Tensor slice({x.rows(), hd});
        for (std::size_t r = 0; r < x.rows(); ++r)
            for (std::size_t j = 0; j < hd; ++j) slice.at(r, j) = x.at(r, h * hd + j);
        Tensor rotated = rope(slice, pos, cfg);
        for (std::size_t r = 0; r < x.rows(); ++r)
            for (std::size_t j = 0; j < hd; ++j) out.at(r, h * hd + j) = rotated.at(r, j);
    }
    return out;
}

inline Tensor mha(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads) {
    const std::size_t hd = q.cols() / heads;
    Tensor out({q.rows(), q.cols()});
    for (std::size_t h = 0; h < heads; ++h) {
        Tensor qh({q.rows(), hd}), kh({k.rows(), hd}), vh({v.rows(), hd});
        for (std::size_t r = 0; r < q.rows(); ++r)
            for (std::size_t j = 0; j < hd; ++j) qh.at(r, j) = q.at(r, h * hd + j);
        for (std::size_t r = 0; r < k.rows(); ++r)
            for (std::size_t j = 0; j < hd; ++j) {
                kh.at(r, j) = k.at(r, h * hd + j);
                vh.at(r, j) = v.at(r, h * hd + j);
            }
        Tensor oh = attention(qh, kh, vh);
        for (std::size_t r = 0; r < q.rows(); ++r)
            for (std::size_t j = 0; j < hd; ++j) out.at(r, h * hd + j) = oh.at(r, j);
    }
    return out;
}

inline Tensor vstack(const Tensor& a, const Tensor& b) {
    Tensor out({a.rows() + b.rows(), a.cols()});
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t j = 0; j < a.cols(); ++j) out.at(r, j) = a.at(r, j);
    for (std::size_t r = 0; r < b.rows(); ++r)
        for (std::size_t j = 0; j < b.cols(); ++j) out.at(a.rows() + r, j) = b.at(r, j);
    return out;
}

inline Tensor plus(const Tensor& a, const Tensor& b) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

inline Tensor adapted(const Tensor& x, const Tensor& w, const wact::LoraAdapter& a) {
    Tensor base = mm(x, w);
    Tensor low = mm(mm(x, a.down), a.up);
    for (std::size_t i = 0; i < base.size(); ++i) base[i] += a.scale * low[i];
    return base;
}

// Full two-stage block, mirroring the documented architecture:
//   stage 1: masked self-attention (video block and reference block attend
//            within themselves), frozen weights for video rows, adapted
//            weights for reference rows, residual on both streams;
//   stage 2: video queries [video; c_ref; context] with rotations on video
//            and reference keys only.
inline Tensor aipa_block(const Tensor& video, const std::optional<Tensor>& refs,
                         const std::vector<wact::PositionTriple>& video_pos,
                         const std::vector<wact::PositionTriple>& ref_pos,
                         const wact::AipaBlockParams& p, const wact::RopeConfig& cfg,
                         const std::optional<Tensor>& ctx = std::nullopt) {
    // stage 1, video stream
    Tensor nv = rms(video);
    Tensor v1 = plus(video, mm(mha(rope_heads(mm(nv, p.w_q), video_pos, cfg, p.heads),
                                   rope_heads(mm(nv, p.w_k), video_pos, cfg, p.heads),
                                   mm(nv, p.w_v), p.heads),
                               p.w_o));
    // stage 1, reference stream
    std::optional<Tensor> c_ref;
    if (refs) {
        Tensor nr = rms(*refs);
        Tensor attn = mha(rope_heads(adapted(nr, p.w_q, p.a_q), ref_pos, cfg, p.heads),
                          rope_heads(adapted(nr, p.w_k, p.a_k), ref_pos, cfg, p.heads),
                          adapted(nr, p.w_v, p.a_v), p.heads);
        c_ref = plus(*refs, adapted(attn, p.w_o, p.a_o));
    }
    // stage 2
    Tensor x = rms(v1);
    Tensor q = rope_heads(mm(x, p.w_q), video_pos, cfg, p.heads);
    Tensor k = rope_heads(mm(x, p.w_k), video_pos, cfg, p.heads);
    Tensor v = mm(x, p.w_v);
    if (c_ref) {
        Tensor m = rms(*c_ref);
        k = vstack(k, rope_heads(adapted(m, p.w_k, p.a_k), ref_pos, cfg, p.heads));
        v = vstack(v, adapted(m, p.w_v, p.a_v));
    }
    if (ctx) {
        Tensor cn = rms(*ctx);
        k = vstack(k, mm(cn, p.w_k));
        v = vstack(v, mm(cn, p.w_v));
    }
    return plus(v1, mm(mha(q, k, v, p.heads), p.w_o));
}

// Stage-1 reference stream alone (identity representation oracle).
inline Tensor stage1_refs(const Tensor& refs, const std::vector<wact::PositionTriple>& ref_pos,
                          const wact::AipaBlockParams& p, const wact::RopeConfig& cfg) {
    Tensor nr = rms(refs);
    Tensor attn = mha(rope_heads(adapted(nr, p.w_q, p.a_q), ref_pos, cfg, p.heads),
                      rope_heads(adapted(nr, p.w_k, p.a_k), ref_pos, cfg, p.heads),
                      adapted(nr, p.w_v, p.a_v), p.heads);
    return plus(refs, adapted(attn, p.w_o, p.a_o));
}

} // namespace oracle
