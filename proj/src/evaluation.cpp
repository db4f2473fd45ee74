#include "pvst/evaluation.hpp"

#include "pvst/adam.hpp"
#include "pvst/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace pvst {

CodewordSet extract_codewords(const DatasetManifest& manifest,
                              const std::string& data_dir,
                              const PretextParams& params) {
  CodewordSet out;
  out.features = Mat(static_cast<Eigen::Index>(manifest.entries.size()),
                     params.dims.global_feat);
  out.labels.reserve(manifest.entries.size());
  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    const Points cloud = load_xyz(data_dir + "/" + e.path);
    const BackboneOut bb = backbone_forward(cloud, params);
    out.features.row(static_cast<Eigen::Index>(i)) = bb.g.data().transpose();
    out.labels.push_back(static_cast<int>(shape_class_from_name(e.label)));
    out.ids.push_back(e.id);
  }
  return out;
}

ProbeResult linear_probe(const Mat& train_x, const std::vector<int>& train_y,
                         const Mat& test_x, const std::vector<int>& test_y,
                         const ProbeConfig& config) {
  if (train_x.rows() != static_cast<Eigen::Index>(train_y.size()) ||
      test_x.rows() != static_cast<Eigen::Index>(test_y.size()))
    throw ShapeError("probe: feature/label count mismatch");
  if (train_x.rows() == 0 || test_x.rows() == 0)
    throw ShapeError("probe: empty feature set");

  const std::set<int> classes(train_y.begin(), train_y.end());
  if (classes.size() < 2)
    throw DegenerateLabelsError("probe: need at least two classes, got " +
                                std::to_string(classes.size()));
  int k = 0;
  for (int c : train_y) k = std::max(k, c + 1);
  for (int c : test_y) k = std::max(k, c + 1);

  // Standardize with train statistics.
  const Eigen::RowVectorXd mean = train_x.colwise().mean();
  Eigen::RowVectorXd stdev =
      ((train_x.rowwise() - mean).array().square().colwise().mean()).sqrt();
  for (Eigen::Index j = 0; j < stdev.size(); ++j)
    if (stdev[j] < 1e-12) stdev[j] = 1.0;
  const Mat xtr = (train_x.rowwise() - mean).array().rowwise() / stdev.array();
  const Mat xte = (test_x.rowwise() - mean).array().rowwise() / stdev.array();

  const Eigen::Index n = xtr.rows(), d = xtr.cols();
  Mat onehot = Mat::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) onehot(i, train_y[static_cast<size_t>(i)]) = 1.0;

  Rng rng(Rng::mix(config.seed, 0x70726f6265ULL));
  Tensor w = Tensor::zeros({static_cast<int>(d), k});
  rng.fill_uniform(w.mutable_data(), -0.01, 0.01);
  Tensor b = Tensor::zeros({k});
  AdamState w_state(w.size(), config.learning_rate);
  AdamState b_state(b.size(), config.learning_rate);

  Mat logits(n, k), probs(n, k);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    logits.noalias() = xtr * w.mat();
    logits.rowwise() += b.data().transpose();
    probs = (logits.colwise() - logits.rowwise().maxCoeff()).array().exp();
    probs.array().colwise() /= probs.rowwise().sum().array();

    const Mat delta = (probs - onehot) / static_cast<Scalar>(n);
    Mat gw = xtr.transpose() * delta;
    Vec gb = delta.colwise().sum().transpose();
    adam_step(w, Eigen::Map<const Vec>(gw.data(), gw.size()), w_state);
    adam_step(b, gb, b_state);
  }

  Mat test_logits = xte * w.mat();
  test_logits.rowwise() += b.data().transpose();

  ProbeResult result;
  result.confusion = Eigen::MatrixXi::Zero(k, k);
  long correct = 0;
  for (Eigen::Index i = 0; i < xte.rows(); ++i) {
    Eigen::Index pred = 0;
    test_logits.row(i).maxCoeff(&pred);
    const int truth = test_y[static_cast<size_t>(i)];
    result.confusion(truth, static_cast<int>(pred)) += 1;
    if (static_cast<int>(pred) == truth) ++correct;
  }
  result.oacc = static_cast<Scalar>(correct) / static_cast<Scalar>(xte.rows());
  result.per_class = Vec::Zero(k);
  for (int c = 0; c < k; ++c) {
    const int row_total = result.confusion.row(c).sum();
    result.per_class[c] =
        row_total > 0 ? static_cast<Scalar>(result.confusion(c, c)) / row_total : 0.0;
  }
  return result;
}

std::vector<Scalar> default_visibility_thresholds() {
  std::vector<Scalar> t;
  for (int i = 0; i <= 12; ++i) t.push_back(0.20 + 0.05 * i);
  return t;
}

std::vector<VisibilityPoint> visibility_accuracy(const DatasetManifest& manifest,
                                                 const std::string& data_dir,
                                                 const RenderCache& cache,
                                                 const std::string& cache_dir,
                                                 const PretextParams& params,
                                                 const std::vector<Scalar>& thresholds) {
  std::vector<long> agree(thresholds.size(), 0);
  long total = 0;

  std::map<std::string, const ManifestEntry*> by_id;
  for (const auto& e : manifest.entries) by_id[e.id] = &e;

  std::map<std::string, Points> loaded;
  for (const auto& ce : cache.entries) {
    const auto it = by_id.find(ce.id);
    if (it == by_id.end()) continue;
    auto cloud_it = loaded.find(ce.id);
    if (cloud_it == loaded.end())
      cloud_it = loaded.emplace(ce.id, load_xyz(data_dir + "/" + it->second->path)).first;

    const VisibilityMask gt = load_mask(cache_dir + "/" + ce.vis_path);
    const Tensor scores = forward_scores(cloud_it->second, ce.view, params);
    if (scores.dim(0) != static_cast<int>(gt.size()))
      throw ShapeError("visibility_accuracy: mask length mismatch for " + ce.id);

    const Vec& s = scores.data();
    for (long i = 0; i < s.size(); ++i) {
      for (size_t t = 0; t < thresholds.size(); ++t) {
        const int pred = s[i] >= thresholds[t] ? 1 : 0;
        if (pred == gt[static_cast<size_t>(i)]) ++agree[t];
      }
    }
    total += s.size();
  }

  std::vector<VisibilityPoint> out;
  for (size_t t = 0; t < thresholds.size(); ++t)
    out.push_back({thresholds[t],
                   total > 0 ? static_cast<Scalar>(agree[t]) / static_cast<Scalar>(total)
                             : 0.0});
  return out;
}

Scalar nrerr(const Vec3& predicted, const Vec3& reference) {
  const Scalar np = predicted.norm(), nr = reference.norm();
  if (np < 1e-300 || nr < 1e-300)
    throw DegenerateVectorError("nrerr: zero-norm normal vector");
  const Scalar cosine = std::abs(predicted.dot(reference)) / (np * nr);
  return 1.0 - std::min(1.0, cosine);
}

}  // namespace pvst
