#include "pvst/model.hpp"

#include "pvst/rng.hpp"

#include <cmath>

namespace pvst {

int ModelDims::upsample_stages() const {
  int stages = 0, size = reshape_hw;
  while (size < image_size && stages <= 3) {
    size *= 2;
    ++stages;
  }
  return stages;
}

void validate(const ModelDims& d) {
  for (int v : {d.backbone_h1, d.backbone_h2, d.point_feat, d.global_feat, d.view_h,
                d.view_feat, d.fuse_feat, d.score_h1, d.score_h2, d.codeword,
                d.reshape_ch, d.reshape_hw, d.stem, d.res1, d.res2, d.mid, d.out_c1,
                d.out_c2, d.image_size})
    if (v <= 0) throw ConfigError("model dims: non-positive width");
  const int stages = d.upsample_stages();
  if (stages < 1 || stages > 3 || d.reshape_hw << stages != d.image_size)
    throw ConfigError("model dims: image size " + std::to_string(d.image_size) +
                      " must be reshape_hw * 2^k for k in 1..3");
}

PoolingVariant pooling_variant_from_name(const std::string& name) {
  if (name == "avs") return PoolingVariant::kAvs;
  if (name == "avs-unsupervised") return PoolingVariant::kAvsUnsupervised;
  if (name == "max") return PoolingVariant::kMax;
  if (name == "avg") return PoolingVariant::kAvg;
  if (name == "gt-vis") return PoolingVariant::kGtVis;
  throw ConfigError("unknown pooling variant '" + name + "'");
}

std::string to_string(PoolingVariant v) {
  switch (v) {
    case PoolingVariant::kAvs:
      return "avs";
    case PoolingVariant::kAvsUnsupervised:
      return "avs-unsupervised";
    case PoolingVariant::kMax:
      return "max";
    case PoolingVariant::kAvg:
      return "avg";
    case PoolingVariant::kGtVis:
      return "gt-vis";
  }
  throw ConfigError("invalid pooling variant");
}

const Tensor& PretextParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end())
    throw ContractError("params: missing parameter group '" + name + "'");
  return it->second;
}

long PretextParams::total_parameters() const {
  long n = 0;
  for (const auto& name : order) n += at(name).size();
  return n;
}

namespace {

// Walks every parameter group in declaration order.
template <typename F>
void for_each_param(const ModelDims& d, F&& visit) {
  auto fc = [&](const std::string& prefix, int in, int out) {
    visit(prefix + ".w", Shape{in, out}, in);
    visit(prefix + ".b", Shape{out}, in);
  };
  auto conv = [&](const std::string& prefix, int co, int ci, int k) {
    visit(prefix + ".k", Shape{co, ci, k, k}, ci * k * k);
    visit(prefix + ".b", Shape{co}, ci * k * k);
  };

  fc("backbone.l1", 3, d.backbone_h1);
  fc("backbone.l2", d.backbone_h1, d.backbone_h2);
  fc("backbone.l3", d.backbone_h2, d.point_feat);
  fc("backbone.g", d.point_feat, d.global_feat);

  fc("view.phi.l1", 1, d.view_h);
  fc("view.phi.l2", d.view_h, d.view_feat);
  fc("view.lam.l1", 1, d.view_h);
  fc("view.lam.l2", d.view_h, d.view_feat);

  fc("fuse.me", d.point_feat, d.fuse_feat);
  fc("fuse.fg", d.global_feat, d.fuse_feat);
  fc("fuse.mf", d.fuse_in(), d.fuse_feat);

  fc("score.l1", d.fuse_feat, d.score_h1);
  fc("score.l2", d.score_h1, d.score_h2);
  fc("score.l3", d.score_h2, 1);

  fc("pool.fs1", d.pool_in(), d.codeword);
  fc("pool.fs2", d.codeword, d.codeword);

  fc("head.fc", d.codeword, d.lift());
  conv("head.stem", d.stem, d.reshape_ch, 3);
  conv("head.res1.c1", d.res1, d.stem, 3);
  conv("head.res1.c2", d.res1, d.res1, 3);
  if (d.stem != d.res1) conv("head.res1.skip", d.res1, d.stem, 1);
  conv("head.res2.c1", d.res2, d.res1, 3);
  conv("head.res2.c2", d.res2, d.res2, 3);
  if (d.res1 != d.res2) conv("head.res2.skip", d.res2, d.res1, 1);
  conv("head.mid", d.mid, d.res2, 1);
  for (const char* head : {"head.depth", "head.sil", "head.cont"}) {
    conv(std::string(head) + ".c1", d.out_c1, d.mid, 1);
    conv(std::string(head) + ".c2", d.out_c2, d.out_c1, 1);
    conv(std::string(head) + ".c3", 1, d.out_c2, 3);
  }
}

}  // namespace

long parameter_count(const ModelDims& d) {
  long n = 0;
  for_each_param(d, [&](const std::string&, const Shape& s, int) { n += shape_size(s); });
  return n;
}

PretextParams init_params(const ModelDims& dims, std::uint64_t seed) {
  validate(dims);
  PretextParams p;
  p.dims = dims;
  Rng rng(Rng::mix(seed, 0x494e4954ULL));
  for_each_param(dims, [&](const std::string& name, const Shape& shape, int fan_in) {
    Tensor t = Tensor::zeros(shape);
    if (name.back() == 'w' || name.back() == 'k') {
      const Scalar bound = std::sqrt(6.0 / fan_in);
      rng.fill_uniform(t.mutable_data(), -bound, bound);
    }
    p.tensors.emplace(name, std::move(t));
    p.order.push_back(name);
  });
  return p;
}

PretextParams bind_to_tape(const PretextParams& params, Tape& tape) {
  PretextParams bound;
  bound.dims = params.dims;
  bound.order = params.order;
  for (const auto& name : params.order)
    bound.tensors.emplace(name, tape.leaf(params.at(name)));
  return bound;
}

namespace {

Tensor fc_relu(const Tensor& x, const PretextParams& p, const std::string& prefix) {
  return relu(bias_add(matmul(x, p.at(prefix + ".w")), p.at(prefix + ".b")));
}

Tensor fc_linear(const Tensor& x, const PretextParams& p, const std::string& prefix) {
  return bias_add(matmul(x, p.at(prefix + ".w")), p.at(prefix + ".b"));
}

Tensor conv_bias(const Tensor& x, const PretextParams& p, const std::string& prefix) {
  return bias_add(conv2d(x, p.at(prefix + ".k")), p.at(prefix + ".b"));
}

}  // namespace

Tensor points_tensor(const Points& cloud) {
  Vec flat(cloud.size());
  Eigen::Map<Points>(flat.data(), cloud.rows(), 3) = cloud;
  return Tensor({static_cast<int>(cloud.rows()), 3}, std::move(flat));
}

BackboneOut backbone_forward(const Tensor& pts, const PretextParams& p) {
  if (pts.rank() != 2 || pts.dim(1) != 3)
    throw ShapeError("backbone: expected [N,3] points, got " + shape_str(pts.shape()));
  if (pts.dim(0) < 8)
    throw InsufficientPointsError("backbone: need at least 8 points, got " +
                                  std::to_string(pts.dim(0)));
  BackboneOut out;
  Tensor h = fc_relu(pts, p, "backbone.l1");
  h = fc_relu(h, p, "backbone.l2");
  out.e = fc_relu(h, p, "backbone.l3");
  Tensor pooled = reshape(max_over_points(out.e), {1, p.dims.point_feat});
  out.g = reshape(fc_relu(pooled, p, "backbone.g"), {p.dims.global_feat});
  return out;
}

BackboneOut backbone_forward(const Points& cloud, const PretextParams& p) {
  return backbone_forward(points_tensor(cloud), p);
}

Tensor encode_viewpoint(const Viewpoint& view, const PretextParams& p) {
  validate(view);
  const Scalar lat = view.lat_deg * M_PI / 180.0;
  const Scalar lon = view.lon_deg * M_PI / 180.0;
  Tensor phi = Tensor({1, 1}, Vec::Constant(1, lat));
  Tensor lam = Tensor({1, 1}, Vec::Constant(1, lon));
  Tensor f_phi = fc_linear(fc_relu(phi, p, "view.phi.l1"), p, "view.phi.l2");
  Tensor f_lam = fc_linear(fc_relu(lam, p, "view.lam.l1"), p, "view.lam.l2");
  return concat({reshape(f_phi, {p.dims.view_feat}), reshape(f_lam, {p.dims.view_feat})});
}

Tensor fuse_view_conditioned(const Tensor& e, const Tensor& g, const Tensor& v,
                             const PretextParams& p) {
  Tensor me = fc_relu(e, p, "fuse.me");
  Tensor fg = reshape(fc_relu(reshape(g, {1, p.dims.global_feat}), p, "fuse.fg"),
                      {p.dims.fuse_feat});
  Tensor cat = concat({me, fg, v});
  return fc_relu(cat, p, "fuse.mf");
}

Tensor predict_visibility_scores(const Tensor& ev, const PretextParams& p) {
  Tensor h = fc_relu(ev, p, "score.l1");
  h = fc_relu(h, p, "score.l2");
  Tensor logits = fc_linear(h, p, "score.l3");  // final layer linear
  return reshape(sigmoid(logits), {ev.dim(0)});
}

Tensor visibility_constraint(const Tensor& sv, const VisibilityMask& gt) {
  if (sv.rank() != 1 || sv.dim(0) != static_cast<int>(gt.size()))
    throw ShapeError("visibility constraint: scores " + shape_str(sv.shape()) +
                     " vs mask length " + std::to_string(gt.size()));
  Vec target(static_cast<long>(gt.size()));
  for (size_t i = 0; i < gt.size(); ++i)
    target[static_cast<long>(i)] = gt[i] ? 1.0 : 0.0;
  return l1_loss(sv, Tensor({sv.dim(0)}, std::move(target)));
}

namespace {

Tensor fs_codeword(const Tensor& pooled, const Tensor& v, const PretextParams& p) {
  Tensor cat = reshape(concat({pooled, v}), {1, p.dims.pool_in()});
  Tensor h = fc_relu(cat, p, "pool.fs1");
  return reshape(fc_linear(h, p, "pool.fs2"), {p.dims.codeword});
}

}  // namespace

Tensor avs_pool(const Tensor& ev, const Tensor& sv, const Tensor& v,
                const PretextParams& p) {
  Tensor masked = cmul(sv, ev);
  return fs_codeword(max_over_points(masked), v, p);
}

Tensor pool_codeword(const Tensor& ev, const Tensor& sv, const VisibilityMask& gt,
                     const Tensor& v, const PretextParams& p, PoolingVariant variant) {
  switch (variant) {
    case PoolingVariant::kAvs:
    case PoolingVariant::kAvsUnsupervised:
      return avs_pool(ev, sv, v, p);
    case PoolingVariant::kMax:
      return fs_codeword(max_over_points(ev), v, p);
    case PoolingVariant::kAvg:
      return fs_codeword(mean_over_points(ev), v, p);
    case PoolingVariant::kGtVis: {
      if (static_cast<int>(gt.size()) != ev.dim(0))
        throw ShapeError("gt-vis pooling: mask length " + std::to_string(gt.size()) +
                         " vs " + std::to_string(ev.dim(0)) + " points");
      Vec scores(static_cast<long>(gt.size()));
      for (size_t i = 0; i < gt.size(); ++i)
        scores[static_cast<long>(i)] = gt[i] ? 1.0 : 0.0;
      return avs_pool(ev, Tensor({ev.dim(0)}, std::move(scores)), v, p);
    }
  }
  throw ConfigError("invalid pooling variant");
}

namespace {

Tensor resblock(const Tensor& x, const PretextParams& p, const std::string& prefix,
                bool project_skip) {
  Tensor h = relu(conv_bias(x, p, prefix + ".c1"));
  h = conv_bias(h, p, prefix + ".c2");
  Tensor skip = project_skip ? conv_bias(x, p, prefix + ".skip") : x;
  return relu(weighted_sum({h, skip}, {1.0, 1.0}));
}

Tensor output_block(const Tensor& x, const PretextParams& p, const std::string& prefix,
                    int image_size) {
  Tensor h = relu(conv_bias(x, p, prefix + ".c1"));
  h = relu(conv_bias(h, p, prefix + ".c2"));
  h = conv_bias(h, p, prefix + ".c3");
  return reshape(sigmoid(h), {image_size, image_size});
}

}  // namespace

TranslatedImages translate_images(const Tensor& gv, const PretextParams& p) {
  const ModelDims& d = p.dims;
  if (gv.rank() != 1 || gv.dim(0) != d.codeword)
    throw ShapeError("translate: codeword " + shape_str(gv.shape()) + " vs expected [" +
                     std::to_string(d.codeword) + "]");
  const int stages = d.upsample_stages();

  Tensor x = fc_relu(reshape(gv, {1, d.codeword}), p, "head.fc");
  x = reshape(x, {d.reshape_ch, d.reshape_hw, d.reshape_hw});
  x = relu(conv_bias(x, p, "head.stem"));
  x = resblock(x, p, "head.res1", d.stem != d.res1);
  if (stages >= 2) x = upsample2x(x);
  x = resblock(x, p, "head.res2", d.res1 != d.res2);
  x = upsample2x(x);
  if (stages >= 3) x = upsample2x(x);
  x = relu(conv_bias(x, p, "head.mid"));

  TranslatedImages out;
  out.depth = output_block(x, p, "head.depth", d.image_size);
  out.sil = output_block(x, p, "head.sil", d.image_size);
  out.cont = output_block(x, p, "head.cont", d.image_size);
  return out;
}

namespace {

Tensor image_tensor(const Image& img) {
  Vec flat(img.size());
  Eigen::Map<Image>(flat.data(), img.rows(), img.cols()) = img;
  return Tensor({static_cast<int>(img.rows()), static_cast<int>(img.cols())},
                std::move(flat));
}

}  // namespace

LossBreakdown overall_loss(const TranslatedImages& pred, const RenderTarget& target,
                           const Tensor& sv, const LossWeights& w,
                           PoolingVariant variant) {
  LossBreakdown out;
  Tensor ld = l1_loss(pred.depth, image_tensor(target.depth));
  Tensor ls = bce_loss(pred.sil, image_tensor(target.sil));
  Tensor lc = bce_loss(pred.cont, image_tensor(target.cont));
  out.depth = ld.value();
  out.sil = ls.value();
  out.cont = lc.value();

  if (variant == PoolingVariant::kAvs) {
    Tensor cv = visibility_constraint(sv, target.vis);
    out.vis = cv.value();
    out.total = weighted_sum({cv, ld, ls, lc}, {w.vis, w.depth, w.sil, w.cont});
  } else {
    out.total = weighted_sum({ld, ls, lc}, {w.depth, w.sil, w.cont});
  }
  return out;
}

PretextForward pretext_forward(const Points& cloud, const Viewpoint& view,
                               const RenderTarget& target, const PretextParams& p,
                               PoolingVariant variant, const LossWeights& w) {
  PretextForward f;
  BackboneOut bb = backbone_forward(cloud, p);
  f.e = bb.e;
  f.g = bb.g;
  f.v = encode_viewpoint(view, p);
  f.ev = fuse_view_conditioned(f.e, f.g, f.v, p);
  if (variant == PoolingVariant::kAvs || variant == PoolingVariant::kAvsUnsupervised)
    f.sv = predict_visibility_scores(f.ev, p);
  f.gv = pool_codeword(f.ev, f.sv, target.vis, f.v, p, variant);
  f.images = translate_images(f.gv, p);
  f.loss = overall_loss(f.images, target, f.sv, w, variant);
  return f;
}

Tensor forward_scores(const Points& cloud, const Viewpoint& view,
                      const PretextParams& p) {
  BackboneOut bb = backbone_forward(cloud, p);
  Tensor v = encode_viewpoint(view, p);
  Tensor ev = fuse_view_conditioned(bb.e, bb.g, v, p);
  return predict_visibility_scores(ev, p);
}

}  // namespace pvst
