#pragma once

#include "pvst/geometry.hpp"
#include "pvst/rendering.hpp"
#include "pvst/types.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace pvst {

enum class ShapeClass { kSphere, kCube, kCylinder, kCone, kTorus };

inline constexpr int kNumShapeClasses = 5;

const std::string& shape_class_name(ShapeClass c);
ShapeClass shape_class_from_name(const std::string& name);

// One procedural cloud plus the generator transform needed to map points back
// into the pre-rotation frame (cloud = (surface * rotation^T - center) / scale
// ... applied as rotate, then center, then scale).
struct ShapeSample {
  std::string id;
  ShapeClass label = ShapeClass::kSphere;
  Points cloud;  // normalized to the unit sphere
  std::uint64_t seed = 0;
  Mat3 rotation = Mat3::Identity();
  Vec3 center = Vec3::Zero();   // centroid removed after rotation
  Scalar scale = 1.0;           // max norm after centering
  std::array<Scalar, 3> dims{}; // class-specific size parameters
};

// Uniform-area surface sampling with per-sample random dimensions and a
// uniform random rotation; the result is unit-sphere normalized.
ShapeSample generate_sample(ShapeClass label, std::uint64_t seed, int n_points,
                            const std::string& id);

struct ManifestEntry {
  std::string id;
  std::string label;
  std::string path;  // relative to the manifest directory
  std::uint64_t seed = 0;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::string split = "train";
  std::uint64_t seed = 0;
};

// Writes per_class clouds of every class under dir plus dir/manifest.tsv.
DatasetManifest generate_dataset(const std::string& dir, std::uint64_t seed,
                                 int per_class, int n_points,
                                 const std::string& split = "train", int jobs = 1);

void save_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::string& path);

// ASCII "x y z" per line, written with 9 significant digits.
void save_xyz(const std::string& path, const Points& cloud);
Points load_xyz(const std::string& path);

// One ASCII line of N space-separated {0,1} flags.
void save_mask(const std::string& path, const VisibilityMask& mask);
VisibilityMask load_mask(const std::string& path);

struct RenderCacheEntry {
  std::string id;
  int view_index = 0;
  Viewpoint view;
  std::string depth_path, sil_path, cont_path, vis_path;  // relative to cache dir
};

struct RenderCache {
  std::vector<RenderCacheEntry> entries;
  std::vector<std::string> failures;  // "<id>: <reason>"
  int views_per_cloud = 8;
  int image_size = 128;
  std::uint64_t seed = 0;
};

// Renders views_per_cloud seed-determined targets per cloud into dir and
// writes dir/index.tsv. Per-sample failures are recorded and skipped.
RenderCache prepare_render_cache(const DatasetManifest& manifest,
                                 const std::string& data_dir, const std::string& dir,
                                 int views_per_cloud, int image_size,
                                 std::uint64_t seed, int jobs = 1);

RenderCache load_render_cache(const std::string& dir);

RenderTarget load_render_target(const std::string& cache_dir,
                                const RenderCacheEntry& entry);

}  // namespace pvst
