#pragma once

#include "pvst/types.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace pvst {

// Camera parameterization: latitude/longitude on a sphere of fixed radius
// around the object centroid, z as the pole axis.
struct Viewpoint {
  Scalar lat_deg = 0.0;   // [-90, 90]
  Scalar lon_deg = 0.0;   // [0, 360)
  Scalar distance = 2.0;  // > 1, camera strictly outside the unit sphere
};

void validate(const Viewpoint& v);

// (d cos(lat) cos(lon), d cos(lat) sin(lon), d sin(lat)).
Vec3 camera_position(const Viewpoint& v);

// Right-handed look-at basis: forward points at the origin, up is world z
// projected orthogonally to the view axis (world x for near-pole views).
struct CameraFrame {
  Vec3 position;
  Vec3 right, up, forward;
};

CameraFrame camera_frame(const Viewpoint& v);

// Rows of (x right, y up, z forward-depth) in the camera frame.
Points to_camera(const Points& pts, const CameraFrame& frame);

// Centers on the centroid and scales so the farthest point has norm 1.
// Throws DegenerateCloudError when all points coincide.
Points normalize_unit_sphere(const Points& cloud);

// Deterministic viewpoints: lon uniform in [0,360), lat uniform in [-75,75],
// distance 2.
std::vector<Viewpoint> sample_viewpoints(std::uint64_t seed, int count = 8);

struct ConvexHull3D {
  std::vector<int> vertices;              // ascending indices into the input
  std::vector<std::array<int, 3>> faces;  // triangles, outward orientation
};

// Quickhull. Tolerance scales with the bounding-box diagonal; inputs that are
// coincident/collinear/coplanar within it throw DegenerateHullError (after one
// deterministic jitter retry).
ConvexHull3D convex_hull_3d(const Points& pts);

inline constexpr Scalar kHullEpsScale = 1e-9;

using VisibilityMask = std::vector<std::uint8_t>;

// Hidden point removal: spherical flipping about the camera with radius
// rho * max||p||, then convex-hull membership of the flipped set plus the
// camera origin. Clouds of up to three points are fully visible.
//
// The useful flip radius is bounded by sampling density: once the flipped
// surface's facet sag exceeds the scene depth range, everything becomes a
// hull vertex. rho in [3, 25] tracks exact convex visibility best for desk
// point counts (128 to 4096); the default sits mid-plateau.
VisibilityMask hpr_visibility(const Points& cloud, const Viewpoint& view,
                              Scalar rho = 12.0);

// Z-buffer splat oracle used to cross-check hpr_visibility in tests. A point
// is visible iff it owns at least one pixel of its splat disk within
// depth_tol of the buffer minimum. Ties go to the lowest point index.
VisibilityMask oracle_visibility(const Points& cloud, const Viewpoint& view,
                                 int resolution = 512, int splat_px = 1,
                                 Scalar depth_tol = 0.01);

}  // namespace pvst
