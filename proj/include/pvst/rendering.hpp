#pragma once

#include "pvst/geometry.hpp"
#include "pvst/types.hpp"

#include <string>
#include <vector>

namespace pvst {

// Pinhole camera for ground-truth rendering. Depth values are remapped
// linearly from [near, far] so nearer surfaces store larger values:
// stored = 1 - 0.9 * clamp((z - near) / (far - near), 0, 1), background 0.
struct CameraIntrinsics {
  Scalar fov_v_deg = 70.0;
  int height = 128;
  int width = 128;
  Scalar near = 1.0;  // view distance - 1
  Scalar far = 3.0;   // view distance + 1

  static CameraIntrinsics for_view(const Viewpoint& view, int size = 128);
};

void validate(const CameraIntrinsics& k);

struct Projected {
  std::vector<int> row, col;     // integer pixel coordinates
  Vec depth;                     // camera-space depth along the view axis
  std::vector<std::uint8_t> valid;
};

// Perspective projection of a normalized cloud; points behind the camera or
// outside the image are flagged invalid.
Projected project_points(const Points& cloud, const Viewpoint& view,
                         const CameraIntrinsics& intr);

// Z-buffer splatting over disks of radius splat_px; ties keep the lowest
// point index. Empty views yield an all-background image.
Image render_depth(const Points& cloud, const Viewpoint& view,
                   const CameraIntrinsics& intr, int splat_px = 2);

// Pixel = 1 iff depth > 0.
Image silhouette_from_depth(const Image& depth);

// Gaussian 5x5 (sigma 1) -> Sobel -> non-maximum suppression -> double
// threshold at (low, high) * max gradient -> 8-connected hysteresis -> one
// 3x3 dilation pass.
Image canny_contour(const Image& depth, Scalar low_ratio = 0.1,
                    Scalar high_ratio = 0.2);

// Binary dilation with a full 3x3 structuring element.
Image dilate3x3(const Image& mask);

// Ground truth for one (cloud, view) pair: mutually consistent depth,
// silhouette, contour, and HPR visibility mask.
struct RenderTarget {
  Image depth, sil, cont;
  VisibilityMask vis;
};

RenderTarget make_render_target(const Points& cloud, const Viewpoint& view,
                                const CameraIntrinsics& intr);

// Splat radius scaled with resolution (2 px at 128).
int splat_radius_for(int height);

// Binary PGM ("P5"). Binary images store maxval 255 (0 -> 0, 1 -> 255); depth
// images store maxval 65535 big-endian with value = round(depth * 65535).
enum class ImageKind { kBinary, kDepth };

void write_image(const std::string& path, const Image& img, ImageKind kind);

// Values are returned in [0, 1]: payload / maxval.
Image read_image(const std::string& path);

}  // namespace pvst
