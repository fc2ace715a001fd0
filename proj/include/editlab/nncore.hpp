#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "editlab/image.hpp"

namespace editlab {

// Dense float tensor, row-major. Feature maps use CHW layout so the
// innermost convolution loops run over contiguous rows.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;
    std::vector<float> grad;  // empty until ensure_grad

    static Tensor zeros(std::vector<int> shape);
    std::size_t numel() const { return data.size(); }
    void ensure_grad();
    void zero_grad();
};

std::size_t shape_numel(const std::vector<int>& shape);

Tensor image_to_chw(const Image& img);  // [3,H,W]
Image chw_to_image(const Tensor& t);    // clamps to [0,1]

struct Topology {
    int hidden = 16;
    int vocab = 22;
    int d_text = 8;
    int d_time = 8;
    int d_img = 8;

    bool operator==(const Topology& o) const = default;
};

// Denoiser parameters, in declaration order (checkpoint order):
// stem conv (6->C), two residual 3x3 blocks (C->C, dilations 4 and 8 so the
// stack's receptive field covers the whole image), head conv (C->3),
// token embedding table, per-site text/time projections that produce
// per-channel biases (three conditioning sites: stem, block 1, block 2),
// and a conditioning-image summary: a small conv over the conditioning
// image is pooled to a d_img vector and projected to the same three bias
// sites, giving image-wide cues a path that does not contend with the
// local painting kernels.
struct ModelParams {
    Topology topo;
    Tensor conv_in_w, conv_in_b;
    Tensor blk1_w, blk1_b;
    Tensor blk2_w, blk2_b;
    Tensor conv_out_w, conv_out_b;
    Tensor embed;
    Tensor txt_w0, txt_b0, txt_w1, txt_b1, txt_w2, txt_b2;
    Tensor tim_w0, tim_b0, tim_w1, tim_b1, tim_w2, tim_b2;
    Tensor img_conv_w, img_conv_b;
    Tensor img_w0, img_b0, img_w1, img_b1, img_w2, img_b2;

    static ModelParams init(const Topology& topo, std::uint64_t seed);
    std::vector<Tensor*> all();
    std::vector<const Tensor*> all() const;
    std::size_t total_params() const;
    void ensure_grads();
    void zero_grads();
};

std::vector<float> sinusoidal_time_embedding(int t, int dim);

// Saved activations of one forward pass; consumed by model_backward.
struct ForwardCtx {
    bool recorded = false;
    int t = 0;
    std::vector<int> tokens;
    std::vector<float> t_emb;
    std::vector<float> text_emb;
    std::vector<float> img_emb;
    Tensor x_in;
    Tensor img_pre;
    Tensor h0_pre, h0;
    Tensor b1_pre, b1_act, h1;
    Tensor b2_pre, b2_act, h2;
    Tensor out_pre, y;
};

// Runs the denoiser. x_t and cond are centered [3,H,W] fields (values may
// leave [0,1]); the output is an image-space [3,H,W] prediction squashed
// to (-0.1, 1.1) by a scaled sigmoid. Pass ctx to record activations for
// a later backward pass.
Tensor model_apply(const ModelParams& params, const Tensor& x_t, int t, const Tensor& cond,
                   const std::vector<int>& tokens, ForwardCtx* ctx = nullptr);

// Same forward pass evaluated in double precision. Finite-difference
// gradient checks need this: single-precision evaluation noise divided by a
// small step otherwise swamps the quantity being measured.
std::vector<double> model_apply_ref(const ModelParams& params, const Tensor& x_t, int t, const Tensor& cond,
                                    const std::vector<int>& tokens);

// Accumulates d(loss)/d(params) into params.*.grad given d(loss)/d(output).
// Throws if ctx was never recorded.
void model_backward(ModelParams& params, const ForwardCtx& ctx, const Tensor& dy);

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

struct AdamState {
    double lr = 2e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long step = 0;
    std::vector<std::vector<float>> m, v;

    static AdamState init(const ModelParams& params, double lr);
};

// Bias-corrected adaptive-moment update. Throws if any gradient is missing.
void adam_step(ModelParams& params, AdamState& state);

// Scales all gradients so their global L2 norm is at most max_norm.
// Returns the pre-clip norm.
double clip_grad_norm(ModelParams& params, double max_norm);

struct GradCheckResult {
    double max_rel_err = 0.0;
    int checked = 0;
};

// Central finite differences against analytic gradients on a random subset
// of coordinates. loss_fn must be a pure function of the parameter values;
// grad_fn must populate fresh gradients. eps must be positive.
GradCheckResult grad_check(ModelParams& params, const std::function<double(ModelParams&)>& loss_fn,
                           const std::function<void(ModelParams&)>& grad_fn, double eps, int n_coords,
                           std::uint64_t seed);

}  // namespace editlab
