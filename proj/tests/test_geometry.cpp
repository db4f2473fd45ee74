#include "pvst/data.hpp"
#include "pvst/geometry.hpp"
#include "pvst/rng.hpp"

#include <Eigen/Geometry>
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

using namespace pvst;

namespace {

Points uniform_sphere(int n, std::uint64_t seed) {
  Rng rng(seed);
  Points pts(n, 3);
  for (int i = 0; i < n; ++i) {
    const Scalar z = rng.uniform(-1.0, 1.0);
    const Scalar theta = rng.uniform(0.0, 2.0 * M_PI);
    const Scalar r = std::sqrt(std::max(0.0, 1.0 - z * z));
    pts.row(i) << r * std::cos(theta), r * std::sin(theta), z;
  }
  return pts;
}

Points random_ball(int n, std::uint64_t seed) {
  Rng rng(seed);
  Points pts(n, 3);
  for (int i = 0; i < n; ++i) {
    Vec3 p;
    do {
      p = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    } while (p.norm() > 1.0);
    pts.row(i) = p.transpose();
  }
  return pts;
}

// Axis-aligned cube surface in canonical position, scaled into the unit ball.
Points cube_surface(int n, std::uint64_t seed) {
  Rng rng(seed);
  Points pts(n, 3);
  for (int i = 0; i < n; ++i) {
    const int axis = static_cast<int>(rng.below(3));
    const Scalar sgn = rng.uniform() < 0.5 ? -1.0 : 1.0;
    Vec3 p(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    p[axis] = sgn;
    pts.row(i) = p.transpose() / std::sqrt(3.0);
  }
  return pts;
}

long count_ones(const VisibilityMask& m) {
  long c = 0;
  for (auto b : m) c += b;
  return c;
}

}  // namespace

TEST_CASE("normalize_unit_sphere is idempotent") {
  const Points cloud = normalize_unit_sphere(random_ball(100, 3));
  const Points again = normalize_unit_sphere(cloud);
  CHECK((cloud - again).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(std::abs(cloud.rowwise().norm().maxCoeff() - 1.0) < 1e-9);
  CHECK(cloud.colwise().mean().norm() < 1e-9);
}

TEST_CASE("normalize_unit_sphere on the [0,2]^3 cube corners") {
  Points corners(8, 3);
  int r = 0;
  for (int x : {0, 2})
    for (int y : {0, 2})
      for (int z : {0, 2}) corners.row(r++) << x, y, z;
  const Points out = normalize_unit_sphere(corners);
  // Centroid (1,1,1) removed; all corners sit at distance sqrt(3) and get
  // scaled by 1/sqrt(3) onto the unit sphere.
  for (int i = 0; i < 8; ++i)
    CHECK(out.row(i).norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((out.row(0) - Eigen::RowVector3d(-1, -1, -1) / std::sqrt(3.0)).norm() < 1e-12);
}

TEST_CASE("normalize_unit_sphere rejects a repeated point") {
  Points same(5, 3);
  same.setConstant(0.7);
  CHECK_THROWS_AS(normalize_unit_sphere(same), DegenerateCloudError);
}

TEST_CASE("camera_position convention") {
  CHECK((camera_position({0, 0, 2}) - Vec3(2, 0, 0)).norm() < 1e-12);
  CHECK((camera_position({90, 123, 2}) - Vec3(0, 0, 2)).norm() < 1e-9);
  CHECK((camera_position({0, 90, 2}) - Vec3(0, 2, 0)).norm() < 1e-12);
}

TEST_CASE("viewpoint validation") {
  CHECK_THROWS_AS(camera_position({95, 0, 2}), ConfigError);
  CHECK_THROWS_AS(camera_position({0, 360, 2}), ConfigError);
  CHECK_THROWS_AS(camera_position({0, 0, 0.5}), ConfigError);
}

TEST_CASE("sample_viewpoints is deterministic and in range") {
  const auto a = sample_viewpoints(42, 8);
  const auto b = sample_viewpoints(42, 8);
  REQUIRE(a.size() == 8);
  for (size_t i = 0; i < 8; ++i) {
    CHECK(a[i].lat_deg == b[i].lat_deg);
    CHECK(a[i].lon_deg == b[i].lon_deg);
    CHECK(a[i].distance == 2.0);
  }
  const auto one = sample_viewpoints(7, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].lat_deg >= -75.0);
  CHECK(one[0].lat_deg <= 75.0);
  CHECK(one[0].lon_deg >= 0.0);
  CHECK(one[0].lon_deg < 360.0);
}

TEST_CASE("sample_viewpoints statistics over 10k draws") {
  const auto views = sample_viewpoints(1234, 10000);
  Scalar lat_sum = 0;
  std::array<int, 8> lon_bins{};
  for (const auto& v : views) {
    lat_sum += v.lat_deg;
    ++lon_bins[static_cast<size_t>(v.lon_deg / 45.0)];
  }
  CHECK(std::abs(lat_sum / 10000.0) < 2.0);
  for (int count : lon_bins) CHECK(std::abs(count / 10000.0 - 0.125) < 0.03);
}

TEST_CASE("hull of a tetrahedron keeps all four points") {
  Points pts(4, 3);
  pts << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1;
  const ConvexHull3D hull = convex_hull_3d(pts);
  CHECK(hull.vertices == std::vector<int>{0, 1, 2, 3});
  CHECK(hull.faces.size() == 4);
}

TEST_CASE("hull excludes the cube centroid") {
  Points pts(9, 3);
  int r = 0;
  for (int x : {-1, 1})
    for (int y : {-1, 1})
      for (int z : {-1, 1}) pts.row(r++) << x, y, z;
  pts.row(8) << 0, 0, 0;
  const ConvexHull3D hull = convex_hull_3d(pts);
  CHECK(hull.vertices.size() == 8);
  for (int v : hull.vertices) CHECK(v != 8);
}

TEST_CASE("hull rejects coplanar and collinear inputs") {
  Points plane(6, 3);
  Rng rng(5);
  for (int i = 0; i < 6; ++i)
    plane.row(i) << rng.uniform(-1, 1), rng.uniform(-1, 1), 0.25;
  CHECK_THROWS_AS(convex_hull_3d(plane), DegenerateHullError);

  Points line(5, 3);
  for (int i = 0; i < 5; ++i) line.row(i) << i * 0.3, i * 0.6, -i * 0.2;
  CHECK_THROWS_AS(convex_hull_3d(line), DegenerateHullError);

  CHECK_THROWS_AS(convex_hull_3d(Points(2, 3)), DegenerateHullError);
}

TEST_CASE("hull invariants on random ball clouds") {
  for (std::uint64_t seed : {11u, 22u, 33u}) {
    const Points pts = random_ball(200, seed);
    const ConvexHull3D hull = convex_hull_3d(pts);

    // Euler characteristic of the closed triangulated surface.
    std::set<std::pair<int, int>> edges;
    for (const auto& f : hull.faces)
      for (int s = 0; s < 3; ++s) {
        const int a = f[static_cast<size_t>(s)];
        const int b = f[static_cast<size_t>((s + 1) % 3)];
        edges.insert({std::min(a, b), std::max(a, b)});
      }
    const long v = static_cast<long>(hull.vertices.size());
    const long e = static_cast<long>(edges.size());
    const long f = static_cast<long>(hull.faces.size());
    CHECK(v - e + f == 2);

    // Containment: every input point on or below every face plane.
    const Scalar diag = (pts.colwise().maxCoeff() - pts.colwise().minCoeff()).norm();
    const Scalar eps = kHullEpsScale * diag;
    Scalar worst = -1e30;
    for (const auto& face : hull.faces) {
      const Vec3 a = pts.row(face[0]).transpose();
      const Vec3 n = (Vec3(pts.row(face[1]).transpose()) - a)
                         .cross(Vec3(pts.row(face[2]).transpose()) - a)
                         .normalized();
      for (Eigen::Index i = 0; i < pts.rows(); ++i)
        worst = std::max(worst, n.dot(pts.row(i).transpose() - a));
    }
    CHECK(worst <= eps);

    // Outward orientation: the centroid sits strictly below each face.
    const Vec3 centroid = pts.colwise().mean().transpose();
    for (const auto& face : hull.faces) {
      const Vec3 a = pts.row(face[0]).transpose();
      const Vec3 n = (Vec3(pts.row(face[1]).transpose()) - a)
                         .cross(Vec3(pts.row(face[2]).transpose()) - a);
      CHECK(n.dot(centroid - a) < 0.0);
    }
  }
}

TEST_CASE("hpr marks a single point visible") {
  Points one(1, 3);
  one << 0.1, -0.2, 0.05;
  const VisibilityMask m = hpr_visibility(one, {10, 20, 2});
  REQUIRE(m.size() == 1);
  CHECK(m[0] == 1);
}

TEST_CASE("hpr visible fraction on the unit sphere matches the tangent cap") {
  // Tangency at d=2: cos(theta) = 1/2, cap fraction (1 - cos 60deg)/2 = 0.25.
  const Points sphere = uniform_sphere(2048, 7);
  for (std::uint64_t vs : {5u, 17u}) {
    for (const auto& view : sample_viewpoints(vs, 2)) {
      const VisibilityMask m = hpr_visibility(sphere, view);
      const Scalar fraction = static_cast<Scalar>(count_ones(m)) / 2048.0;
      CHECK(fraction > 0.20);
      CHECK(fraction < 0.30);
    }
  }
}

TEST_CASE("hpr agrees with the z-buffer oracle on sphere and cube") {
  const Points sphere = uniform_sphere(2048, 7);
  const Points cube = cube_surface(2048, 123);
  for (const auto& view : sample_viewpoints(5, 3)) {
    // Oracle parameters track point spacing: a coarse buffer suits the
    // smooth sphere, a fine buffer with wide splats suits flat faces seen
    // at grazing angles.
    const VisibilityMask hs = hpr_visibility(sphere, view);
    const VisibilityMask os = oracle_visibility(sphere, view, 32, 3, 0.20);
    long agree = 0;
    for (size_t i = 0; i < hs.size(); ++i) agree += hs[i] == os[i];
    CHECK(static_cast<Scalar>(agree) / 2048.0 >= 0.90);

    const VisibilityMask hc = hpr_visibility(cube, view);
    const VisibilityMask oc = oracle_visibility(cube, view, 144, 7, 0.15);
    agree = 0;
    for (size_t i = 0; i < hc.size(); ++i) agree += hc[i] == oc[i];
    CHECK(static_cast<Scalar>(agree) / 2048.0 >= 0.90);
  }
}

TEST_CASE("hpr is invariant to point permutation") {
  const Points cloud = normalize_unit_sphere(random_ball(400, 9));
  const Viewpoint view{33, 140, 2};
  const VisibilityMask base = hpr_visibility(cloud, view);

  Rng rng(4);
  const std::vector<int> perm = rng.permutation(400);
  Points shuffled(400, 3);
  for (int i = 0; i < 400; ++i) shuffled.row(i) = cloud.row(perm[static_cast<size_t>(i)]);
  const VisibilityMask permuted = hpr_visibility(shuffled, view);
  for (int i = 0; i < 400; ++i)
    CHECK(permuted[static_cast<size_t>(i)] ==
          base[static_cast<size_t>(perm[static_cast<size_t>(i)])]);
}

TEST_CASE("hpr is invariant under matching rigid rotation of cloud and camera") {
  const Points cloud = normalize_unit_sphere(random_ball(300, 21));
  const Viewpoint view{18, 40, 2};
  const VisibilityMask base = hpr_visibility(cloud, view);

  // A 90-degree turn about z permutes coordinates exactly; the camera
  // follows by shifting longitude.
  Points rotated(cloud.rows(), 3);
  for (Eigen::Index i = 0; i < cloud.rows(); ++i)
    rotated.row(i) << -cloud(i, 1), cloud(i, 0), cloud(i, 2);
  const Viewpoint turned{18, 130, 2};
  const VisibilityMask rot = hpr_visibility(rotated, turned);
  CHECK(rot == base);
}

TEST_CASE("oracle z-buffer semantics") {
  // Two points projecting to the same pixel: the nearer one wins.
  Points two(2, 3);
  two << 0.5, 0, 0, -0.5, 0, 0;  // camera at (2,0,0)
  const Viewpoint view{0, 0, 2};
  const VisibilityMask m = oracle_visibility(two, view, 64, 1, 0.01);
  CHECK(m[0] == 1);
  CHECK(m[1] == 0);

  Points one(1, 3);
  one << 0, 0.1, -0.2;
  const VisibilityMask single = oracle_visibility(one, view, 64, 1, 0.01);
  CHECK(single[0] == 1);
}

TEST_CASE("oracle visible fraction on a dense sphere") {
  // Dense enough that splats close the front surface at this resolution.
  const Points sphere = uniform_sphere(16384, 99);
  const Viewpoint view{25, 210, 2};
  const VisibilityMask m = oracle_visibility(sphere, view, 96, 2, 0.05);
  const Scalar fraction = static_cast<Scalar>(count_ones(m)) / 16384.0;
  CHECK(fraction > 0.20);
  CHECK(fraction < 0.30);
}
