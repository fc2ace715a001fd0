#include "editlab/nncore.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "editlab/rng.hpp"

namespace editlab {

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

Tensor Tensor::zeros(std::vector<int> shape) {
    Tensor t;
    t.data.assign(shape_numel(shape), 0.0f);
    t.shape = std::move(shape);
    return t;
}

void Tensor::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0f);
}

void Tensor::zero_grad() { grad.assign(data.size(), 0.0f); }

Tensor image_to_chw(const Image& img) {
    const int h = img.height();
    const int w = img.width();
    Tensor t = Tensor::zeros({3, h, w});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                t.data[(static_cast<std::size_t>(c) * h + y) * w + x] = img.at(x, y, c);
    return t;
}

Image chw_to_image(const Tensor& t) {
    if (t.shape.size() != 3 || t.shape[0] != 3) throw std::invalid_argument("chw_to_image: expected [3,H,W]");
    const int h = t.shape[1];
    const int w = t.shape[2];
    Image img(w, h);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                img.set(x, y, c, t.data[(static_cast<std::size_t>(c) * h + y) * w + x]);
    return img;
}

ModelParams ModelParams::init(const Topology& topo, std::uint64_t seed) {
    Rng rng(seed);
    const int C = topo.hidden;
    auto he_conv = [&](int out_c, int in_c) {
        Tensor t = Tensor::zeros({out_c, in_c, 3, 3});
        const float limit = std::sqrt(6.0f / static_cast<float>(in_c * 9));
        for (float& v : t.data) v = rng.uniform_f(-limit, limit);
        return t;
    };
    ModelParams p;
    p.topo = topo;
    p.conv_in_w = he_conv(C, 6);
    p.conv_in_b = Tensor::zeros({C});
    p.blk1_w = he_conv(C, C);
    p.blk1_b = Tensor::zeros({C});
    p.blk2_w = he_conv(C, C);
    p.blk2_b = Tensor::zeros({C});
    p.conv_out_w = he_conv(3, C);
    p.conv_out_b = Tensor::zeros({3});
    p.embed = Tensor::zeros({topo.vocab, topo.d_text});
    for (float& v : p.embed.data) v = static_cast<float>(rng.normal()) * 0.1f;
    // Conditioning paths start at zero: the model begins unconditioned and
    // learns how much text/time signal to inject.
    p.txt_w0 = Tensor::zeros({C, topo.d_text});
    p.txt_b0 = Tensor::zeros({C});
    p.txt_w1 = Tensor::zeros({C, topo.d_text});
    p.txt_b1 = Tensor::zeros({C});
    p.txt_w2 = Tensor::zeros({C, topo.d_text});
    p.txt_b2 = Tensor::zeros({C});
    p.tim_w0 = Tensor::zeros({C, topo.d_time});
    p.tim_b0 = Tensor::zeros({C});
    p.tim_w1 = Tensor::zeros({C, topo.d_time});
    p.tim_b1 = Tensor::zeros({C});
    p.tim_w2 = Tensor::zeros({C, topo.d_time});
    p.tim_b2 = Tensor::zeros({C});
    p.img_conv_w = he_conv(topo.d_img, 3);
    p.img_conv_b = Tensor::zeros({topo.d_img});
    p.img_w0 = Tensor::zeros({C, topo.d_img});
    p.img_b0 = Tensor::zeros({C});
    p.img_w1 = Tensor::zeros({C, topo.d_img});
    p.img_b1 = Tensor::zeros({C});
    p.img_w2 = Tensor::zeros({C, topo.d_img});
    p.img_b2 = Tensor::zeros({C});
    return p;
}

std::vector<Tensor*> ModelParams::all() {
    return {&conv_in_w, &conv_in_b, &blk1_w,  &blk1_b,  &blk2_w,     &blk2_b, &conv_out_w,
            &conv_out_b, &embed,    &txt_w0,  &txt_b0,  &txt_w1,     &txt_b1, &txt_w2,
            &txt_b2,     &tim_w0,   &tim_b0,  &tim_w1,  &tim_b1,     &tim_w2, &tim_b2,
            &img_conv_w, &img_conv_b, &img_w0, &img_b0, &img_w1,     &img_b1, &img_w2,
            &img_b2};
}

std::vector<const Tensor*> ModelParams::all() const {
    return {&conv_in_w, &conv_in_b, &blk1_w,  &blk1_b,  &blk2_w,     &blk2_b, &conv_out_w,
            &conv_out_b, &embed,    &txt_w0,  &txt_b0,  &txt_w1,     &txt_b1, &txt_w2,
            &txt_b2,     &tim_w0,   &tim_b0,  &tim_w1,  &tim_b1,     &tim_w2, &tim_b2,
            &img_conv_w, &img_conv_b, &img_w0, &img_b0, &img_w1,     &img_b1, &img_w2,
            &img_b2};
}

std::size_t ModelParams::total_params() const {
    std::size_t n = 0;
    for (const Tensor* t : all()) n += t->numel();
    return n;
}

void ModelParams::ensure_grads() {
    for (Tensor* t : all()) t->ensure_grad();
}

void ModelParams::zero_grads() {
    for (Tensor* t : all()) t->zero_grad();
}

std::vector<float> sinusoidal_time_embedding(int t, int dim) {
    if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("time embedding dim must be even and >= 2");
    const int half = dim / 2;
    std::vector<float> e(static_cast<std::size_t>(dim));
    for (int i = 0; i < half; ++i) {
        const double freq = std::pow(10000.0, -static_cast<double>(i) / half);
        e[static_cast<std::size_t>(i)] = static_cast<float>(std::sin(t * freq));
        e[static_cast<std::size_t>(half + i)] = static_cast<float>(std::cos(t * freq));
    }
    return e;
}

namespace {

template <typename Real>
inline Real sigmoid_r(Real x) {
    return Real(1) / (Real(1) + std::exp(-x));
}

// y[o,:,:] += sum_i w[o,i,:,:] (*) x[i,:,:], zero-padded, same-size, 3x3
// taps spread by `dil`. Weights stay float; activations are Real so the same
// code serves the training path (float) and the finite-difference reference
// (double).
template <typename Real>
void conv3x3_fwd(const float* w, int out_c, int in_c, int h, int wd, int dil, const Real* x, Real* y) {
    for (int o = 0; o < out_c; ++o)
        for (int i = 0; i < in_c; ++i)
            for (int ky = 0; ky < 3; ++ky) {
                const int oy = (ky - 1) * dil;
                const int yy0 = std::max(0, -oy);
                const int yy1 = std::min(h, h - oy);
                for (int kx = 0; kx < 3; ++kx) {
                    const Real wv = static_cast<Real>(w[((static_cast<std::size_t>(o) * in_c + i) * 3 + ky) * 3 + kx]);
                    const int ox = (kx - 1) * dil;
                    const int xx0 = std::max(0, -ox);
                    const int xx1 = std::min(wd, wd - ox);
                    const int span = xx1 - xx0;
                    for (int yy = yy0; yy < yy1; ++yy) {
                        const Real* src = &x[(static_cast<std::size_t>(i) * h + yy + oy) * wd + xx0 + ox];
                        Real* dst = &y[(static_cast<std::size_t>(o) * h + yy) * wd + xx0];
                        for (int xx = 0; xx < span; ++xx) dst[xx] += wv * src[xx];
                    }
                }
            }
}

// bias[c] = conv_b[c] + txt_w[c,:].text + txt_b[c] + tim_w[c,:].time
//         + tim_b[c] + img_w[c,:].img + img_b[c]
template <typename Real>
std::vector<Real> site_bias(const float* conv_b, const float* txt_w, const float* txt_b, const float* tim_w,
                            const float* tim_b, const float* img_w, const float* img_b, int C, int dt, int dm,
                            int di, const Real* text_emb, const Real* t_emb, const Real* img_emb) {
    std::vector<Real> bias(static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c) {
        Real v = static_cast<Real>(conv_b[c]) + static_cast<Real>(txt_b[c]) + static_cast<Real>(tim_b[c]) +
                 static_cast<Real>(img_b[c]);
        for (int k = 0; k < dt; ++k) v += static_cast<Real>(txt_w[static_cast<std::size_t>(c) * dt + k]) * text_emb[k];
        for (int k = 0; k < dm; ++k) v += static_cast<Real>(tim_w[static_cast<std::size_t>(c) * dm + k]) * t_emb[k];
        for (int k = 0; k < di; ++k) v += static_cast<Real>(img_w[static_cast<std::size_t>(c) * di + k]) * img_emb[k];
        bias[static_cast<std::size_t>(c)] = v;
    }
    return bias;
}

template <typename Real>
void add_channel_bias(Real* t, int c_n, std::size_t plane, const std::vector<Real>& bias) {
    for (int c = 0; c < c_n; ++c) {
        Real* p = t + static_cast<std::size_t>(c) * plane;
        const Real b = bias[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < plane; ++i) p[i] += b;
    }
}

template <typename Real>
void silu_fwd(const Real* pre, Real* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = pre[i] * sigmoid_r(pre[i]);
}

constexpr float kSquashLo = -0.1f;
constexpr float kSquashScale = 1.2f;

// The residual blocks dilate their taps so the four-conv stack's receptive
// field spans a 16x16 field end to end: a trigger patch in one corner must
// be able to steer output pixels in the opposite corner. The stack's reach
// is 1+4+8+1 = 14 pixels per axis, enough to connect any pixel pair whose
// Chebyshev distance is at most 14.
constexpr int kBlk1Dil = 4;
constexpr int kBlk2Dil = 8;

template <typename Real>
struct FwdState {
    std::vector<Real> text_emb, t_emb, img_emb;
    std::vector<Real> x_in;
    std::vector<Real> img_pre;
    std::vector<Real> h0_pre, h0;
    std::vector<Real> b1_pre, b1_act, h1;
    std::vector<Real> b2_pre, b2_act, h2;
    std::vector<Real> out_pre, y;
};

template <typename Real>
void run_forward(const ModelParams& p, const Tensor& x_t, int t, const Tensor& cond, const std::vector<int>& tokens,
                 FwdState<Real>& s) {
    const int h = x_t.shape[1];
    const int wd = x_t.shape[2];
    const int C = p.topo.hidden;
    const std::size_t plane = static_cast<std::size_t>(h) * wd;

    s.text_emb.assign(static_cast<std::size_t>(p.topo.d_text), Real(0));
    if (!tokens.empty()) {
        for (int tok : tokens)
            for (int k = 0; k < p.topo.d_text; ++k)
                s.text_emb[static_cast<std::size_t>(k)] +=
                    static_cast<Real>(p.embed.data[static_cast<std::size_t>(tok) * p.topo.d_text + k]);
        const Real inv = Real(1) / static_cast<Real>(tokens.size());
        for (Real& v : s.text_emb) v *= inv;
    }
    const std::vector<float> t_emb_f = sinusoidal_time_embedding(t, p.topo.d_time);
    s.t_emb.assign(t_emb_f.begin(), t_emb_f.end());

    s.x_in.assign(6 * plane, Real(0));
    for (std::size_t i = 0; i < 3 * plane; ++i) s.x_in[i] = static_cast<Real>(x_t.data[i]);
    for (std::size_t i = 0; i < 3 * plane; ++i) s.x_in[3 * plane + i] = static_cast<Real>(cond.data[i]);

    // Conditioning-image summary: conv, SiLU, then global mean pool. Reads
    // only the noise-free cond half of the input.
    const int di = p.topo.d_img;
    s.img_pre.assign(static_cast<std::size_t>(di) * plane, Real(0));
    conv3x3_fwd(p.img_conv_w.data.data(), di, 3, h, wd, 1, s.x_in.data() + 3 * plane, s.img_pre.data());
    {
        std::vector<Real> cb(static_cast<std::size_t>(di));
        for (int c = 0; c < di; ++c) cb[static_cast<std::size_t>(c)] = static_cast<Real>(p.img_conv_b.data[static_cast<std::size_t>(c)]);
        add_channel_bias(s.img_pre.data(), di, plane, cb);
    }
    s.img_emb.assign(static_cast<std::size_t>(di), Real(0));
    const Real inv_plane = Real(1) / static_cast<Real>(plane);
    for (int c = 0; c < di; ++c) {
        const Real* pp = &s.img_pre[static_cast<std::size_t>(c) * plane];
        Real acc = Real(0);
        for (std::size_t i = 0; i < plane; ++i) acc += pp[i] * sigmoid_r(pp[i]);
        s.img_emb[static_cast<std::size_t>(c)] = acc * inv_plane;
    }

    const std::size_t hidden_n = static_cast<std::size_t>(C) * plane;
    s.h0_pre.assign(hidden_n, Real(0));
    conv3x3_fwd(p.conv_in_w.data.data(), C, 6, h, wd, 1, s.x_in.data(), s.h0_pre.data());
    add_channel_bias(s.h0_pre.data(), C, plane,
                     site_bias(p.conv_in_b.data.data(), p.txt_w0.data.data(), p.txt_b0.data.data(),
                               p.tim_w0.data.data(), p.tim_b0.data.data(), p.img_w0.data.data(),
                               p.img_b0.data.data(), C, p.topo.d_text, p.topo.d_time, di, s.text_emb.data(),
                               s.t_emb.data(), s.img_emb.data()));
    s.h0.assign(hidden_n, Real(0));
    silu_fwd(s.h0_pre.data(), s.h0.data(), hidden_n);

    s.b1_pre.assign(hidden_n, Real(0));
    conv3x3_fwd(p.blk1_w.data.data(), C, C, h, wd, kBlk1Dil, s.h0.data(), s.b1_pre.data());
    add_channel_bias(s.b1_pre.data(), C, plane,
                     site_bias(p.blk1_b.data.data(), p.txt_w1.data.data(), p.txt_b1.data.data(),
                               p.tim_w1.data.data(), p.tim_b1.data.data(), p.img_w1.data.data(),
                               p.img_b1.data.data(), C, p.topo.d_text, p.topo.d_time, di, s.text_emb.data(),
                               s.t_emb.data(), s.img_emb.data()));
    s.b1_act.assign(hidden_n, Real(0));
    silu_fwd(s.b1_pre.data(), s.b1_act.data(), hidden_n);
    s.h1 = s.h0;
    for (std::size_t i = 0; i < hidden_n; ++i) s.h1[i] += s.b1_act[i];

    s.b2_pre.assign(hidden_n, Real(0));
    conv3x3_fwd(p.blk2_w.data.data(), C, C, h, wd, kBlk2Dil, s.h1.data(), s.b2_pre.data());
    add_channel_bias(s.b2_pre.data(), C, plane,
                     site_bias(p.blk2_b.data.data(), p.txt_w2.data.data(), p.txt_b2.data.data(),
                               p.tim_w2.data.data(), p.tim_b2.data.data(), p.img_w2.data.data(),
                               p.img_b2.data.data(), C, p.topo.d_text, p.topo.d_time, di, s.text_emb.data(),
                               s.t_emb.data(), s.img_emb.data()));
    s.b2_act.assign(hidden_n, Real(0));
    silu_fwd(s.b2_pre.data(), s.b2_act.data(), hidden_n);
    s.h2 = s.h1;
    for (std::size_t i = 0; i < hidden_n; ++i) s.h2[i] += s.b2_act[i];

    s.out_pre.assign(3 * plane, Real(0));
    conv3x3_fwd(p.conv_out_w.data.data(), 3, C, h, wd, 1, s.h2.data(), s.out_pre.data());
    {
        std::vector<Real> ob(3);
        for (int c = 0; c < 3; ++c) ob[static_cast<std::size_t>(c)] = static_cast<Real>(p.conv_out_b.data[static_cast<std::size_t>(c)]);
        add_channel_bias(s.out_pre.data(), 3, plane, ob);
    }
    s.y.assign(3 * plane, Real(0));
    for (std::size_t i = 0; i < 3 * plane; ++i)
        s.y[i] = static_cast<Real>(kSquashLo) + static_cast<Real>(kSquashScale) * sigmoid_r(s.out_pre[i]);
}

void check_apply_args(const ModelParams& params, const Tensor& x_t, const Tensor& cond,
                      const std::vector<int>& tokens) {
    if (x_t.shape.size() != 3 || x_t.shape[0] != 3) throw std::invalid_argument("model_apply: x_t must be [3,H,W]");
    if (cond.shape != x_t.shape) throw std::invalid_argument("model_apply: cond shape mismatch");
    for (int tok : tokens)
        if (tok < 0 || tok >= params.topo.vocab) throw std::invalid_argument("model_apply: token id out of range");
}

// dX += W^T (*) dY and dW += X (*) dY, mirroring conv3x3_fwd's taps.
void conv3x3_bwd(const Tensor& w, const std::vector<float>& x, const std::vector<float>& dy, Tensor& w_grad,
                 std::vector<float>& dx, int h, int wd, int dil) {
    const int out_c = w.shape[0];
    const int in_c = w.shape[1];
    for (int o = 0; o < out_c; ++o)
        for (int i = 0; i < in_c; ++i)
            for (int ky = 0; ky < 3; ++ky) {
                const int oy = (ky - 1) * dil;
                const int yy0 = std::max(0, -oy);
                const int yy1 = std::min(h, h - oy);
                for (int kx = 0; kx < 3; ++kx) {
                    const std::size_t wi = ((static_cast<std::size_t>(o) * in_c + i) * 3 + ky) * 3 + kx;
                    const float wv = w.data[wi];
                    const int ox = (kx - 1) * dil;
                    const int xx0 = std::max(0, -ox);
                    const int xx1 = std::min(wd, wd - ox);
                    const int span = xx1 - xx0;
                    double wacc = 0.0;
                    for (int yy = yy0; yy < yy1; ++yy) {
                        const std::size_t src_off = (static_cast<std::size_t>(i) * h + yy + oy) * wd + xx0 + ox;
                        const std::size_t out_off = (static_cast<std::size_t>(o) * h + yy) * wd + xx0;
                        const float* src = &x[src_off];
                        float* dsrc = &dx[src_off];
                        const float* dout = &dy[out_off];
                        float acc = 0.0f;
                        for (int xx = 0; xx < span; ++xx) {
                            dsrc[xx] += wv * dout[xx];
                            acc += src[xx] * dout[xx];
                        }
                        wacc += acc;
                    }
                    w_grad.grad[wi] += static_cast<float>(wacc);
                }
            }
}

// d(silu)/dx = s + x*s*(1-s), s = sigmoid(x).
void silu_bwd(const std::vector<float>& pre, const std::vector<float>& dout, std::vector<float>& dpre) {
    for (std::size_t i = 0; i < pre.size(); ++i) {
        const float x = pre[i];
        const float s = sigmoid_r(x);
        dpre[i] += dout[i] * (s + x * s * (1.0f - s));
    }
}

std::vector<float> channel_sums(const std::vector<float>& t, int c_n, std::size_t plane) {
    std::vector<float> sums(static_cast<std::size_t>(c_n));
    for (int c = 0; c < c_n; ++c) {
        const float* p = &t[static_cast<std::size_t>(c) * plane];
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += p[i];
        sums[static_cast<std::size_t>(c)] = static_cast<float>(acc);
    }
    return sums;
}

// Distributes per-channel bias gradients into the conv bias, the text/time
// and image-summary projections, and the shared text/image upstream grads.
void site_bias_bwd(const std::vector<float>& dbias, Tensor& conv_b, Tensor& txt_w, Tensor& txt_b, Tensor& tim_w,
                   Tensor& tim_b, Tensor& img_w, Tensor& img_b, const std::vector<float>& text_emb,
                   const std::vector<float>& t_emb, const std::vector<float>& img_emb, std::vector<float>& dtext,
                   std::vector<float>& dimg) {
    const int C = conv_b.shape[0];
    const int dt = txt_w.shape[1];
    const int dm = tim_w.shape[1];
    const int di = img_w.shape[1];
    for (int c = 0; c < C; ++c) {
        const float g = dbias[static_cast<std::size_t>(c)];
        conv_b.grad[static_cast<std::size_t>(c)] += g;
        txt_b.grad[static_cast<std::size_t>(c)] += g;
        tim_b.grad[static_cast<std::size_t>(c)] += g;
        img_b.grad[static_cast<std::size_t>(c)] += g;
        for (int k = 0; k < dt; ++k) {
            txt_w.grad[static_cast<std::size_t>(c) * dt + k] += g * text_emb[static_cast<std::size_t>(k)];
            dtext[static_cast<std::size_t>(k)] += g * txt_w.data[static_cast<std::size_t>(c) * dt + k];
        }
        for (int k = 0; k < dm; ++k)
            tim_w.grad[static_cast<std::size_t>(c) * dm + k] += g * t_emb[static_cast<std::size_t>(k)];
        for (int k = 0; k < di; ++k) {
            img_w.grad[static_cast<std::size_t>(c) * di + k] += g * img_emb[static_cast<std::size_t>(k)];
            dimg[static_cast<std::size_t>(k)] += g * img_w.data[static_cast<std::size_t>(c) * di + k];
        }
    }
}

Tensor from_vec(std::vector<float>&& v, std::vector<int> shape) {
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::move(v);
    return t;
}

}  // namespace

Tensor model_apply(const ModelParams& params, const Tensor& x_t, int t, const Tensor& cond,
                   const std::vector<int>& tokens, ForwardCtx* ctx) {
    check_apply_args(params, x_t, cond, tokens);
    const int h = x_t.shape[1];
    const int wd = x_t.shape[2];
    const int C = params.topo.hidden;

    FwdState<float> s;
    run_forward(params, x_t, t, cond, tokens, s);
    Tensor y = from_vec(std::vector<float>(s.y), {3, h, wd});

    if (ctx) {
        ctx->recorded = true;
        ctx->t = t;
        ctx->tokens = tokens;
        ctx->t_emb = std::move(s.t_emb);
        ctx->text_emb = std::move(s.text_emb);
        ctx->img_emb = std::move(s.img_emb);
        ctx->x_in = from_vec(std::move(s.x_in), {6, h, wd});
        ctx->img_pre = from_vec(std::move(s.img_pre), {params.topo.d_img, h, wd});
        ctx->h0_pre = from_vec(std::move(s.h0_pre), {C, h, wd});
        ctx->h0 = from_vec(std::move(s.h0), {C, h, wd});
        ctx->b1_pre = from_vec(std::move(s.b1_pre), {C, h, wd});
        ctx->b1_act = from_vec(std::move(s.b1_act), {C, h, wd});
        ctx->h1 = from_vec(std::move(s.h1), {C, h, wd});
        ctx->b2_pre = from_vec(std::move(s.b2_pre), {C, h, wd});
        ctx->b2_act = from_vec(std::move(s.b2_act), {C, h, wd});
        ctx->h2 = from_vec(std::move(s.h2), {C, h, wd});
        ctx->out_pre = from_vec(std::move(s.out_pre), {3, h, wd});
        ctx->y = from_vec(std::move(s.y), {3, h, wd});
    }
    return y;
}

std::vector<double> model_apply_ref(const ModelParams& params, const Tensor& x_t, int t, const Tensor& cond,
                                    const std::vector<int>& tokens) {
    check_apply_args(params, x_t, cond, tokens);
    FwdState<double> s;
    run_forward(params, x_t, t, cond, tokens, s);
    return s.y;
}

void model_backward(ModelParams& params, const ForwardCtx& ctx, const Tensor& dy) {
    if (!ctx.recorded) throw std::logic_error("model_backward: no recorded forward pass");
    if (dy.shape != ctx.y.shape) throw std::invalid_argument("model_backward: dy shape mismatch");
    params.ensure_grads();
    const int h = ctx.y.shape[1];
    const int wd = ctx.y.shape[2];
    const int C = params.topo.hidden;
    const std::size_t plane = static_cast<std::size_t>(h) * wd;
    const std::size_t hidden_n = static_cast<std::size_t>(C) * plane;

    // Back through the scaled sigmoid: s = (y - lo)/scale.
    std::vector<float> dout_pre(3 * plane);
    for (std::size_t i = 0; i < dout_pre.size(); ++i) {
        const float s = (ctx.y.data[i] - kSquashLo) / kSquashScale;
        dout_pre[i] = dy.data[i] * kSquashScale * s * (1.0f - s);
    }
    {
        const auto sums = channel_sums(dout_pre, 3, plane);
        for (int c = 0; c < 3; ++c) params.conv_out_b.grad[static_cast<std::size_t>(c)] += sums[static_cast<std::size_t>(c)];
    }

    std::vector<float> dh2(hidden_n, 0.0f);
    conv3x3_bwd(params.conv_out_w, ctx.h2.data, dout_pre, params.conv_out_w, dh2, h, wd, 1);

    std::vector<float> dtext(static_cast<std::size_t>(params.topo.d_text), 0.0f);
    const int di = params.topo.d_img;
    std::vector<float> dimg(static_cast<std::size_t>(di), 0.0f);

    // h2 = h1 + silu(b2_pre); b2_pre = conv(h1) + biases.
    std::vector<float> db2_pre(hidden_n, 0.0f);
    silu_bwd(ctx.b2_pre.data, dh2, db2_pre);
    site_bias_bwd(channel_sums(db2_pre, C, plane), params.blk2_b, params.txt_w2, params.txt_b2, params.tim_w2,
                  params.tim_b2, params.img_w2, params.img_b2, ctx.text_emb, ctx.t_emb, ctx.img_emb, dtext, dimg);
    std::vector<float> dh1 = dh2;  // residual path
    conv3x3_bwd(params.blk2_w, ctx.h1.data, db2_pre, params.blk2_w, dh1, h, wd, kBlk2Dil);

    std::vector<float> db1_pre(hidden_n, 0.0f);
    silu_bwd(ctx.b1_pre.data, dh1, db1_pre);
    site_bias_bwd(channel_sums(db1_pre, C, plane), params.blk1_b, params.txt_w1, params.txt_b1, params.tim_w1,
                  params.tim_b1, params.img_w1, params.img_b1, ctx.text_emb, ctx.t_emb, ctx.img_emb, dtext, dimg);
    std::vector<float> dh0 = dh1;  // residual path
    conv3x3_bwd(params.blk1_w, ctx.h0.data, db1_pre, params.blk1_w, dh0, h, wd, kBlk1Dil);

    std::vector<float> dh0_pre(hidden_n, 0.0f);
    silu_bwd(ctx.h0_pre.data, dh0, dh0_pre);
    site_bias_bwd(channel_sums(dh0_pre, C, plane), params.conv_in_b, params.txt_w0, params.txt_b0, params.tim_w0,
                  params.tim_b0, params.img_w0, params.img_b0, ctx.text_emb, ctx.t_emb, ctx.img_emb, dtext, dimg);
    std::vector<float> dx_in(6 * plane, 0.0f);
    conv3x3_bwd(params.conv_in_w, ctx.x_in.data, dh0_pre, params.conv_in_w, dx_in, h, wd, 1);

    // Image summary: mean pool spreads each channel's gradient evenly, then
    // SiLU and the summary conv run backward over the cond half of x_in.
    {
        const std::size_t img_n = static_cast<std::size_t>(di) * plane;
        std::vector<float> dimg_act(img_n);
        const float inv_plane = 1.0f / static_cast<float>(plane);
        for (int c = 0; c < di; ++c)
            std::fill_n(dimg_act.begin() + static_cast<std::size_t>(c) * plane, plane,
                        dimg[static_cast<std::size_t>(c)] * inv_plane);
        std::vector<float> dimg_pre(img_n, 0.0f);
        silu_bwd(ctx.img_pre.data, dimg_act, dimg_pre);
        const auto sums = channel_sums(dimg_pre, di, plane);
        for (int c = 0; c < di; ++c) params.img_conv_b.grad[static_cast<std::size_t>(c)] += sums[static_cast<std::size_t>(c)];
        const std::vector<float> cond_x(ctx.x_in.data.begin() + 3 * plane, ctx.x_in.data.end());
        std::vector<float> dcond(3 * plane, 0.0f);
        conv3x3_bwd(params.img_conv_w, cond_x, dimg_pre, params.img_conv_w, dcond, h, wd, 1);
    }

    // Mean token embedding: each token gets an equal share.
    if (!ctx.tokens.empty()) {
        const float inv = 1.0f / static_cast<float>(ctx.tokens.size());
        for (int tok : ctx.tokens)
            for (int k = 0; k < params.topo.d_text; ++k)
                params.embed.grad[static_cast<std::size_t>(tok) * params.topo.d_text + k] +=
                    dtext[static_cast<std::size_t>(k)] * inv;
    }
}

namespace {

void write_u32(std::ofstream& f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    f.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open for writing: " + path.string());
    write_u32(f, static_cast<std::uint32_t>(params.topo.hidden));
    write_u32(f, static_cast<std::uint32_t>(params.topo.vocab));
    write_u32(f, static_cast<std::uint32_t>(params.topo.d_text));
    write_u32(f, static_cast<std::uint32_t>(params.topo.d_time));
    write_u32(f, static_cast<std::uint32_t>(params.topo.d_img));
    for (const Tensor* t : params.all())
        for (float v : t->data) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            write_u32(f, bits);
        }
    if (!f) throw std::runtime_error("checkpoint: write failed: " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open: " + path.string());
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 20) throw std::runtime_error("checkpoint: truncated header: " + path.string());
    Topology topo;
    topo.hidden = static_cast<int>(read_u32(&buf[0]));
    topo.vocab = static_cast<int>(read_u32(&buf[4]));
    topo.d_text = static_cast<int>(read_u32(&buf[8]));
    topo.d_time = static_cast<int>(read_u32(&buf[12]));
    topo.d_img = static_cast<int>(read_u32(&buf[16]));
    if (topo.hidden < 1 || topo.hidden > 4096 || topo.vocab < 1 || topo.vocab > 100000 || topo.d_text < 2 ||
        topo.d_text > 4096 || topo.d_time < 2 || topo.d_time > 4096 || topo.d_img < 1 || topo.d_img > 4096)
        throw std::runtime_error("checkpoint: implausible topology header: " + path.string());
    ModelParams p = ModelParams::init(topo, 0);
    const std::size_t expect = 20 + 4 * p.total_params();
    if (buf.size() != expect)
        throw std::runtime_error("checkpoint: size mismatch in " + path.string() + " (expected " +
                                 std::to_string(expect) + " bytes, got " + std::to_string(buf.size()) + ")");
    std::size_t off = 20;
    for (Tensor* t : p.all())
        for (float& v : t->data) {
            const std::uint32_t bits = read_u32(&buf[off]);
            std::memcpy(&v, &bits, 4);
            off += 4;
        }
    return p;
}

AdamState AdamState::init(const ModelParams& params, double lr) {
    AdamState st;
    st.lr = lr;
    for (const Tensor* t : params.all()) {
        st.m.emplace_back(t->numel(), 0.0f);
        st.v.emplace_back(t->numel(), 0.0f);
    }
    return st;
}

void adam_step(ModelParams& params, AdamState& state) {
    const auto tensors = params.all();
    if (state.m.size() != tensors.size()) throw std::invalid_argument("adam_step: state does not match params");
    for (const Tensor* t : tensors)
        if (t->grad.size() != t->data.size()) throw std::invalid_argument("adam_step: missing gradients");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
        Tensor& t = *tensors[ti];
        auto& m = state.m[ti];
        auto& v = state.v[ti];
        for (std::size_t i = 0; i < t.data.size(); ++i) {
            const double g = t.grad[i];
            const double mi = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            const double vi = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            m[i] = static_cast<float>(mi);
            v[i] = static_cast<float>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            t.data[i] = static_cast<float>(t.data[i] - state.lr * mhat / (std::sqrt(vhat) + state.eps));
        }
    }
}

double clip_grad_norm(ModelParams& params, double max_norm) {
    double sq = 0.0;
    for (Tensor* t : params.all()) {
        if (t->grad.size() != t->data.size()) throw std::invalid_argument("clip_grad_norm: missing gradients");
        for (float g : t->grad) sq += static_cast<double>(g) * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const float scale = static_cast<float>(max_norm / norm);
        for (Tensor* t : params.all())
            for (float& g : t->grad) g *= scale;
    }
    return norm;
}

GradCheckResult grad_check(ModelParams& params, const std::function<double(ModelParams&)>& loss_fn,
                           const std::function<void(ModelParams&)>& grad_fn, double eps, int n_coords,
                           std::uint64_t seed) {
    if (eps <= 0.0) throw std::invalid_argument("grad_check: eps must be positive");
    params.zero_grads();
    grad_fn(params);
    std::vector<std::pair<Tensor*, std::size_t>> coords;
    for (Tensor* t : params.all())
        for (std::size_t i = 0; i < t->numel(); ++i) coords.emplace_back(t, i);

    Rng rng(seed);
    GradCheckResult res;
    const int n = std::min<int>(n_coords, static_cast<int>(coords.size()));
    for (int k = 0; k < n; ++k) {
        const auto [t, i] = coords[rng.uniform_int(coords.size())];
        const float saved = t->data[i];
        const float analytic = t->grad[i];
        const float vp = saved + static_cast<float>(eps);
        const float vm = saved - static_cast<float>(eps);
        t->data[i] = vp;
        const double lp = loss_fn(params);
        t->data[i] = vm;
        const double lm = loss_fn(params);
        t->data[i] = saved;
        // Divide by the perturbation actually applied after float rounding.
        const double numeric = (lp - lm) / (static_cast<double>(vp) - static_cast<double>(vm));
        const double denom = std::max({std::abs(static_cast<double>(analytic)), std::abs(numeric), 1e-3});
        const double rel = std::abs(analytic - numeric) / denom;
        res.max_rel_err = std::max(res.max_rel_err, rel);
        ++res.checked;
    }
    return res;
}

}  // namespace editlab
