#pragma once

#include "pvst/data.hpp"
#include "pvst/model.hpp"

#include <string>
#include <vector>

namespace pvst {

struct CodewordSet {
  Mat features;             // one global codeword per cloud
  std::vector<int> labels;  // class indices
  std::vector<std::string> ids;
};

// Frozen-backbone feature extraction (no tape, parameters untouched).
CodewordSet extract_codewords(const DatasetManifest& manifest,
                              const std::string& data_dir, const PretextParams& params);

struct ProbeConfig {
  int epochs = 500;
  Scalar learning_rate = 1e-2;
  std::uint64_t seed = 0;
};

struct ProbeResult {
  Scalar oacc = 0.0;
  Vec per_class;            // per-class accuracy
  Eigen::MatrixXi confusion;  // rows: true class, cols: predicted
};

// Linear softmax classifier trained full-batch with Adam on standardized
// features. Throws DegenerateLabelsError with fewer than two training classes.
ProbeResult linear_probe(const Mat& train_x, const std::vector<int>& train_y,
                         const Mat& test_x, const std::vector<int>& test_y,
                         const ProbeConfig& config = {});

// Default binarization thresholds 0.20 .. 0.80, step 0.05.
std::vector<Scalar> default_visibility_thresholds();

struct VisibilityPoint {
  Scalar threshold = 0.0;
  Scalar oacc = 0.0;
};

// Per-threshold agreement between binarized predicted scores and the cached
// ground-truth masks, pooled over all points of all (cloud, view) pairs.
std::vector<VisibilityPoint> visibility_accuracy(
    const DatasetManifest& manifest, const std::string& data_dir,
    const RenderCache& cache, const std::string& cache_dir,
    const PretextParams& params,
    const std::vector<Scalar>& thresholds = default_visibility_thresholds());

// Unoriented normal error: 1 - |a.b| / (|a||b|), in [0, 1].
Scalar nrerr(const Vec3& predicted, const Vec3& reference);

}  // namespace pvst
