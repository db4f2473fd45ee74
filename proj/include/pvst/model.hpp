#pragma once

#include "pvst/geometry.hpp"
#include "pvst/ops.hpp"
#include "pvst/rendering.hpp"

#include <map>
#include <string>
#include <vector>

namespace pvst {

// Layer widths of the pretext network. Defaults are the reference
// configuration; the gradient-check suite instantiates a miniature copy.
struct ModelDims {
  // Stand-in point backbone: shared MLPs {64,128,256}, then FC 256 -> 1024
  // over the channel-wise max for the global codeword.
  int backbone_h1 = 64;
  int backbone_h2 = 128;
  int point_feat = 256;    // D_e
  int global_feat = 1024;  // D_g

  // Viewpoint indicator: per-angle FC stacks {64,128}; indicator is their
  // concatenation (D_i = 2 * view_feat).
  int view_h = 64;
  int view_feat = 128;

  // View-conditioned fusion: M_e and F_g lift to fuse_feat; M_f maps the
  // (2*fuse_feat + D_i)-wide concatenation back to fuse_feat (D_v).
  int fuse_feat = 1024;

  // Visibility scoring MLP widths (final layer linear, sigmoid outside).
  int score_h1 = 256;
  int score_h2 = 128;

  // View-specific codeword: FC stack {codeword, codeword}.
  int codeword = 2048;

  // Translation head: FC to reshape_ch * reshape_hw^2, reshape, conv stem,
  // two residual blocks, channel lift, three output blocks {out_c1, out_c2, 1}.
  int reshape_ch = 8;
  int reshape_hw = 32;
  int stem = 32;
  int res1 = 64;
  int res2 = 128;
  int mid = 512;
  int out_c1 = 128;
  int out_c2 = 64;
  int image_size = 128;

  int indicator() const { return 2 * view_feat; }       // D_i
  int fuse_in() const { return 2 * fuse_feat + indicator(); }
  int pool_in() const { return fuse_feat + indicator(); }
  int lift() const { return reshape_ch * reshape_hw * reshape_hw; }
  // Number of parameter-free 2x upsampling stages.
  int upsample_stages() const;
};

void validate(const ModelDims& d);

// Closed-form parameter count for the given widths.
long parameter_count(const ModelDims& d);

enum class PoolingVariant { kAvs, kAvsUnsupervised, kMax, kAvg, kGtVis };

PoolingVariant pooling_variant_from_name(const std::string& name);
std::string to_string(PoolingVariant v);

struct LossWeights {
  Scalar vis = 1.0, depth = 1.0, sil = 1.0, cont = 1.0;
};

// Named, ordered parameter groups. Iteration order is fixed by `order` so
// optimizer updates and checkpoints are deterministic.
struct PretextParams {
  ModelDims dims;
  std::map<std::string, Tensor> tensors;
  std::vector<std::string> order;

  const Tensor& at(const std::string& name) const;
  long total_parameters() const;
};

// Kaiming-style uniform fan-in init, zero biases, seed-deterministic.
PretextParams init_params(const ModelDims& dims, std::uint64_t seed);

// Shares parameter storage onto a tape so one backward pass yields gradients
// for every group.
PretextParams bind_to_tape(const PretextParams& params, Tape& tape);

struct BackboneOut {
  Tensor e;  // [N, D_e]
  Tensor g;  // [D_g]
};

Tensor points_tensor(const Points& cloud);

// Shared per-point MLPs for E; global codeword from FC over the channel max.
BackboneOut backbone_forward(const Tensor& pts, const PretextParams& p);
BackboneOut backbone_forward(const Points& cloud, const PretextParams& p);

// v = F_phi(lat) (+) F_lambda(lon), angles in radians. [D_i]
Tensor encode_viewpoint(const Viewpoint& view, const PretextParams& p);

// E_v = M_f(M_e(E) (+) F_g(g) (+) v), ReLU-terminated. [N, D_v]
Tensor fuse_view_conditioned(const Tensor& e, const Tensor& g, const Tensor& v,
                             const PretextParams& p);

// S_v = sigmoid(M_s(E_v)). [N], entries strictly in (0, 1).
Tensor predict_visibility_scores(const Tensor& ev, const PretextParams& p);

// Mean absolute difference between scores and the binary ground truth.
Tensor visibility_constraint(const Tensor& sv, const VisibilityMask& gt);

// g_v = F_s(MP(S_v * E_v) (+) v). [codeword]
Tensor avs_pool(const Tensor& ev, const Tensor& sv, const Tensor& v,
                const PretextParams& p);

// Variant-aware pooling: kMax/kAvg skip masking, kGtVis masks with the ground
// truth, kAvs/kAvsUnsupervised mask with predicted scores.
Tensor pool_codeword(const Tensor& ev, const Tensor& sv, const VisibilityMask& gt,
                     const Tensor& v, const PretextParams& p, PoolingVariant variant);

struct TranslatedImages {
  Tensor depth, sil, cont;  // [H, W], entries strictly in (0, 1)
};

TranslatedImages translate_images(const Tensor& gv, const PretextParams& p);

struct LossBreakdown {
  Tensor total;
  Scalar vis = 0, depth = 0, sil = 0, cont = 0;
};

// L = w_v C_v + w_d L1(I_d) + w_s BCE(I_s) + w_c BCE(I_c); the C_v term is
// dropped for kAvsUnsupervised and absent for kMax/kAvg/kGtVis.
LossBreakdown overall_loss(const TranslatedImages& pred, const RenderTarget& target,
                           const Tensor& sv, const LossWeights& w,
                           PoolingVariant variant);

// One full pretext pass for a (cloud, view, target) sample.
struct PretextForward {
  Tensor e, g, v, ev, sv, gv;
  TranslatedImages images;
  LossBreakdown loss;
};

PretextForward pretext_forward(const Points& cloud, const Viewpoint& view,
                               const RenderTarget& target, const PretextParams& p,
                               PoolingVariant variant, const LossWeights& w);

// Forward up to the visibility scores only (evaluation path).
Tensor forward_scores(const Points& cloud, const Viewpoint& view,
                      const PretextParams& p);

}  // namespace pvst
