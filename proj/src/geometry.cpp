#include "pvst/geometry.hpp"

#include "pvst/rng.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <unordered_set>

namespace pvst {

void validate(const Viewpoint& v) {
  if (!(v.lat_deg >= -90.0 && v.lat_deg <= 90.0))
    throw ConfigError("viewpoint: latitude " + std::to_string(v.lat_deg) +
                      " outside [-90, 90]");
  if (!(v.lon_deg >= 0.0 && v.lon_deg < 360.0))
    throw ConfigError("viewpoint: longitude " + std::to_string(v.lon_deg) +
                      " outside [0, 360)");
  if (!(v.distance > 1.0))
    throw ConfigError("viewpoint: distance " + std::to_string(v.distance) +
                      " must exceed 1");
}

Vec3 camera_position(const Viewpoint& v) {
  validate(v);
  const Scalar lat = v.lat_deg * M_PI / 180.0;
  const Scalar lon = v.lon_deg * M_PI / 180.0;
  return {v.distance * std::cos(lat) * std::cos(lon),
          v.distance * std::cos(lat) * std::sin(lon),
          v.distance * std::sin(lat)};
}

CameraFrame camera_frame(const Viewpoint& v) {
  CameraFrame f;
  f.position = camera_position(v);
  f.forward = -f.position.normalized();
  Vec3 up = Vec3::UnitZ() - Vec3::UnitZ().dot(f.forward) * f.forward;
  if (up.norm() < 1e-9)
    up = Vec3::UnitX() - Vec3::UnitX().dot(f.forward) * f.forward;
  f.up = up.normalized();
  f.right = f.forward.cross(f.up);
  return f;
}

Points to_camera(const Points& pts, const CameraFrame& frame) {
  Points out(pts.rows(), 3);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const Vec3 q = pts.row(i).transpose() - frame.position;
    out(i, 0) = q.dot(frame.right);
    out(i, 1) = q.dot(frame.up);
    out(i, 2) = q.dot(frame.forward);
  }
  return out;
}

Points normalize_unit_sphere(const Points& cloud) {
  if (cloud.rows() < 1) throw DegenerateCloudError("normalize: empty cloud");
  if (!cloud.allFinite()) throw NumericalError("normalize: non-finite coordinates");
  const Eigen::RowVector3d centroid = cloud.colwise().mean();
  Points centered = cloud.rowwise() - centroid;
  const Scalar max_norm = centered.rowwise().norm().maxCoeff();
  if (max_norm < 1e-12)
    throw DegenerateCloudError("normalize: all points coincide");
  return centered / max_norm;
}

std::vector<Viewpoint> sample_viewpoints(std::uint64_t seed, int count) {
  if (count < 1) throw ConfigError("sample_viewpoints: count must be positive");
  Rng rng(Rng::mix(seed, 0x56494557ULL));
  std::vector<Viewpoint> views;
  views.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    Viewpoint v;
    v.lat_deg = rng.uniform(-75.0, 75.0);
    v.lon_deg = rng.uniform(0.0, 360.0);
    if (v.lon_deg >= 360.0) v.lon_deg = 0.0;
    v.distance = 2.0;
    views.push_back(v);
  }
  return views;
}

// ---------------------------------------------------------------------------
// Quickhull

namespace {

struct QhFace {
  std::array<int, 3> v;
  std::array<int, 3> nb;  // neighbor across edge (v[i], v[(i+1)%3])
  Vec3 n;
  Scalar d = 0;
  std::vector<int> outside;
  int far_point = -1;
  Scalar far_dist = 0;
  bool dead = false;
};

struct QhBuilder {
  const Points& pts;
  Scalar eps;
  std::vector<QhFace> faces;
  Vec3 interior;

  explicit QhBuilder(const Points& p, Scalar eps_) : pts(p), eps(eps_) {}

  Scalar dist(const QhFace& f, int i) const {
    return f.n.dot(pts.row(i).transpose()) - f.d;
  }

  void set_plane(QhFace& f) {
    const Vec3 a = pts.row(f.v[0]).transpose();
    const Vec3 b = pts.row(f.v[1]).transpose();
    const Vec3 c = pts.row(f.v[2]).transpose();
    Vec3 n = (b - a).cross(c - a);
    const Scalar norm = n.norm();
    if (norm < 1e-300) throw DegenerateHullError("hull: degenerate face");
    f.n = n / norm;
    f.d = f.n.dot(a);
  }

  // Selects a maximally spread initial simplex; returns false when the input
  // is coincident/collinear/coplanar within eps.
  bool init_simplex() {
    const Eigen::Index m = pts.rows();
    std::array<int, 6> extremes{};
    for (int axis = 0; axis < 3; ++axis) {
      Eigen::Index lo = 0, hi = 0;
      for (Eigen::Index i = 1; i < m; ++i) {
        if (pts(i, axis) < pts(lo, axis)) lo = i;
        if (pts(i, axis) > pts(hi, axis)) hi = i;
      }
      extremes[static_cast<size_t>(2 * axis)] = static_cast<int>(lo);
      extremes[static_cast<size_t>(2 * axis + 1)] = static_cast<int>(hi);
    }
    int e0 = extremes[0], e1 = extremes[1];
    Scalar best = -1;
    for (int a : extremes)
      for (int b : extremes) {
        const Scalar d2 = (pts.row(a) - pts.row(b)).squaredNorm();
        if (d2 > best) {
          best = d2;
          e0 = a;
          e1 = b;
        }
      }
    if (std::sqrt(best) < eps) return false;

    const Vec3 a = pts.row(e0).transpose();
    const Vec3 ab = pts.row(e1).transpose() - a;
    const Scalar ab_len = ab.norm();
    int e2 = -1;
    best = -1;
    for (Eigen::Index i = 0; i < m; ++i) {
      const Scalar d = (Vec3(pts.row(i).transpose()) - a).cross(ab).norm() / ab_len;
      if (d > best) {
        best = d;
        e2 = static_cast<int>(i);
      }
    }
    if (best < eps) return false;

    QhFace base;
    base.v = {e0, e1, e2};
    set_plane(base);
    int e3 = -1;
    best = -1;
    for (Eigen::Index i = 0; i < m; ++i) {
      const Scalar d = std::abs(dist(base, static_cast<int>(i)));
      if (d > best) {
        best = d;
        e3 = static_cast<int>(i);
      }
    }
    if (best < eps) return false;

    interior = (pts.row(e0) + pts.row(e1) + pts.row(e2) + pts.row(e3)).transpose() / 4.0;
    const std::array<std::array<int, 3>, 4> tris = {{{e0, e1, e2},
                                                     {e0, e1, e3},
                                                     {e0, e2, e3},
                                                     {e1, e2, e3}}};
    for (const auto& t : tris) {
      QhFace f;
      f.v = t;
      set_plane(f);
      if (f.n.dot(interior) > f.d) {
        std::swap(f.v[1], f.v[2]);
        set_plane(f);
      }
      faces.push_back(std::move(f));
    }
    link_all();

    std::vector<char> used(static_cast<size_t>(m), 0);
    for (int e : {e0, e1, e2, e3}) used[static_cast<size_t>(e)] = 1;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (used[static_cast<size_t>(i)]) continue;
      assign_point(static_cast<int>(i));
    }
    return true;
  }

  void link_all() {
    std::map<std::pair<int, int>, std::pair<int, int>> edges;  // (a,b) -> (face, slot)
    for (size_t fi = 0; fi < faces.size(); ++fi)
      for (int s = 0; s < 3; ++s) {
        const int a = faces[fi].v[static_cast<size_t>(s)];
        const int b = faces[fi].v[static_cast<size_t>((s + 1) % 3)];
        edges[{a, b}] = {static_cast<int>(fi), s};
      }
    for (auto& [edge, slot] : edges) {
      const auto rev = edges.find({edge.second, edge.first});
      if (rev == edges.end()) throw DegenerateHullError("hull: open edge");
      faces[static_cast<size_t>(slot.first)].nb[static_cast<size_t>(slot.second)] =
          rev->second.first;
    }
  }

  void assign_point(int p) {
    for (size_t fi = 0; fi < faces.size(); ++fi) {
      QhFace& f = faces[fi];
      if (f.dead) continue;
      const Scalar d = dist(f, p);
      if (d > eps) {
        f.outside.push_back(p);
        if (d > f.far_dist) {
          f.far_dist = d;
          f.far_point = p;
        }
        return;
      }
    }
  }

  void run() {
    std::vector<int> pending;
    for (size_t fi = 0; fi < faces.size(); ++fi)
      if (!faces[fi].outside.empty()) pending.push_back(static_cast<int>(fi));

    long guard = 64 + 16 * pts.rows();
    while (!pending.empty()) {
      if (--guard < 0) throw DegenerateHullError("hull: failed to converge");
      const int fi = pending.back();
      pending.pop_back();
      if (faces[static_cast<size_t>(fi)].dead ||
          faces[static_cast<size_t>(fi)].outside.empty())
        continue;
      const int apex = faces[static_cast<size_t>(fi)].far_point;

      // Flood the faces the apex sees.
      std::vector<int> visible{fi};
      std::vector<char> seen(faces.size(), 0);
      seen[static_cast<size_t>(fi)] = 1;
      struct Horizon {
        int a, b, hidden, hidden_slot;
      };
      std::vector<Horizon> horizon;
      for (size_t k = 0; k < visible.size(); ++k) {
        const int cur = visible[k];
        for (int s = 0; s < 3; ++s) {
          const int nb = faces[static_cast<size_t>(cur)].nb[static_cast<size_t>(s)];
          if (seen[static_cast<size_t>(nb)]) continue;
          if (dist(faces[static_cast<size_t>(nb)], apex) > eps) {
            seen[static_cast<size_t>(nb)] = 1;
            visible.push_back(nb);
          } else {
            const int a = faces[static_cast<size_t>(cur)].v[static_cast<size_t>(s)];
            const int b =
                faces[static_cast<size_t>(cur)].v[static_cast<size_t>((s + 1) % 3)];
            int hidden_slot = -1;
            for (int t = 0; t < 3; ++t)
              if (faces[static_cast<size_t>(nb)].v[static_cast<size_t>(t)] == b &&
                  faces[static_cast<size_t>(nb)].v[static_cast<size_t>((t + 1) % 3)] == a)
                hidden_slot = t;
            if (hidden_slot < 0) throw DegenerateHullError("hull: broken adjacency");
            horizon.push_back({a, b, nb, hidden_slot});
          }
        }
      }

      std::vector<int> orphans;
      for (int v : visible) {
        auto& f = faces[static_cast<size_t>(v)];
        f.dead = true;
        for (int p : f.outside)
          if (p != apex) orphans.push_back(p);
        f.outside.clear();
      }

      // One new face per horizon edge, stitched to the hidden side and to the
      // sibling faces along the apex edges.
      std::map<std::pair<int, int>, std::pair<int, int>> apex_edges;
      std::vector<int> created;
      for (const Horizon& hz : horizon) {
        QhFace f;
        f.v = {hz.a, hz.b, apex};
        set_plane(f);
        if (f.n.dot(interior) > f.d) {
          std::swap(f.v[1], f.v[2]);
          set_plane(f);
        }
        const int id = static_cast<int>(faces.size());
        // Locate the horizon edge slot after any orientation fix.
        int slot_ab = -1;
        for (int s = 0; s < 3; ++s)
          if (f.v[static_cast<size_t>(s)] == hz.a &&
              f.v[static_cast<size_t>((s + 1) % 3)] == hz.b)
            slot_ab = s;
        if (slot_ab < 0) throw DegenerateHullError("hull: lost horizon edge");
        f.nb[static_cast<size_t>(slot_ab)] = hz.hidden;
        faces[static_cast<size_t>(hz.hidden)].nb[static_cast<size_t>(hz.hidden_slot)] = id;
        faces.push_back(std::move(f));
        created.push_back(id);
        for (int s = 0; s < 3; ++s) {
          if (s == slot_ab) continue;
          const int a = faces.back().v[static_cast<size_t>(s)];
          const int b = faces.back().v[static_cast<size_t>((s + 1) % 3)];
          const auto rev = apex_edges.find({b, a});
          if (rev != apex_edges.end()) {
            faces[static_cast<size_t>(id)].nb[static_cast<size_t>(s)] = rev->second.first;
            faces[static_cast<size_t>(rev->second.first)]
                .nb[static_cast<size_t>(rev->second.second)] = id;
          } else {
            apex_edges[{a, b}] = {id, s};
          }
        }
      }

      for (int p : orphans) {
        Scalar best = eps;
        int best_face = -1;
        for (int id : created) {
          const Scalar d = dist(faces[static_cast<size_t>(id)], p);
          if (d > best) {
            best = d;
            best_face = id;
          }
        }
        if (best_face >= 0) {
          auto& f = faces[static_cast<size_t>(best_face)];
          f.outside.push_back(p);
          if (best > f.far_dist) {
            f.far_dist = best;
            f.far_point = p;
          }
        }
      }
      for (int id : created)
        if (!faces[static_cast<size_t>(id)].outside.empty()) pending.push_back(id);
    }
  }

  ConvexHull3D result() const {
    ConvexHull3D hull;
    std::unordered_set<int> verts;
    for (const QhFace& f : faces) {
      if (f.dead) continue;
      hull.faces.push_back(f.v);
      for (int v : f.v) verts.insert(v);
    }
    hull.vertices.assign(verts.begin(), verts.end());
    std::sort(hull.vertices.begin(), hull.vertices.end());
    return hull;
  }
};

}  // namespace

ConvexHull3D convex_hull_3d(const Points& pts) {
  if (pts.rows() < 4)
    throw DegenerateHullError("hull: need at least 4 points, got " +
                              std::to_string(pts.rows()));
  if (!pts.allFinite()) throw NumericalError("hull: non-finite coordinates");
  const Vec3 lo = pts.colwise().minCoeff().transpose();
  const Vec3 hi = pts.colwise().maxCoeff().transpose();
  const Scalar diag = (hi - lo).norm();
  const Scalar eps = kHullEpsScale * diag;

  QhBuilder builder(pts, eps);
  if (builder.init_simplex()) {
    builder.run();
    return builder.result();
  }

  // Deterministic jitter retry for nearly-degenerate inputs.
  Points jittered = pts;
  Rng rng(0x9e3779b97f4a7c15ULL);
  for (Eigen::Index i = 0; i < jittered.size(); ++i)
    jittered.data()[i] += rng.uniform(-1.0, 1.0) * 1e-9;
  QhBuilder retry(jittered, eps);
  if (!retry.init_simplex())
    throw DegenerateHullError("hull: points are coplanar or collinear within tolerance");
  retry.run();
  return retry.result();
}

// ---------------------------------------------------------------------------
// Visibility

namespace {

struct CoordKey {
  std::uint64_t x, y, z;
  bool operator==(const CoordKey&) const = default;
};

struct CoordHash {
  size_t operator()(const CoordKey& k) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint64_t w : {k.x, k.y, k.z}) {
      h ^= w;
      h *= 0x100000001b3ULL;
    }
    return static_cast<size_t>(h);
  }
};

CoordKey key_of(const Points& pts, Eigen::Index row) {
  CoordKey k;
  std::memcpy(&k.x, &pts(row, 0), 8);
  std::memcpy(&k.y, &pts(row, 1), 8);
  std::memcpy(&k.z, &pts(row, 2), 8);
  return k;
}

}  // namespace

VisibilityMask hpr_visibility(const Points& cloud, const Viewpoint& view, Scalar rho) {
  validate(view);
  const Eigen::Index n = cloud.rows();
  if (n < 1) throw DegenerateCloudError("hpr: empty cloud");
  if (n <= 3) return VisibilityMask(static_cast<size_t>(n), 1);

  const Vec3 cam = camera_position(view);
  Points q = cloud.rowwise() - cam.transpose();
  Vec norms = q.rowwise().norm();
  if (norms.minCoeff() < 1e-12)
    throw ContractError("hpr: camera coincides with a cloud point");
  const Scalar radius = rho * norms.maxCoeff();

  Points flipped(n + 1, 3);
  for (Eigen::Index i = 0; i < n; ++i)
    flipped.row(i) = q.row(i) * (2.0 * radius / norms[i] - 1.0);
  flipped.row(n).setZero();  // camera origin closes the hull from behind

  const ConvexHull3D hull = convex_hull_3d(flipped);

  std::unordered_set<CoordKey, CoordHash> vertex_coords;
  for (int v : hull.vertices)
    if (v < n) vertex_coords.insert(key_of(flipped, v));

  VisibilityMask mask(static_cast<size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i)
    if (vertex_coords.count(key_of(flipped, i))) mask[static_cast<size_t>(i)] = 1;
  return mask;
}

VisibilityMask oracle_visibility(const Points& cloud, const Viewpoint& view,
                                 int resolution, int splat_px, Scalar depth_tol) {
  validate(view);
  const Eigen::Index n = cloud.rows();
  VisibilityMask mask(static_cast<size_t>(n), 0);
  if (n == 0) return mask;

  const CameraFrame frame = camera_frame(view);
  const Points cam = to_camera(cloud, frame);
  const Scalar focal =
      (static_cast<Scalar>(resolution) / 2.0) / std::tan(70.0 * M_PI / 360.0);

  std::vector<int> rows(static_cast<size_t>(n)), cols(static_cast<size_t>(n));
  std::vector<char> valid(static_cast<size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar z = cam(i, 2);
    if (z <= 1e-9) continue;
    const int c = static_cast<int>(std::floor(resolution / 2.0 + focal * cam(i, 0) / z));
    const int r = static_cast<int>(std::floor(resolution / 2.0 - focal * cam(i, 1) / z));
    if (r < 0 || r >= resolution || c < 0 || c >= resolution) continue;
    rows[static_cast<size_t>(i)] = r;
    cols[static_cast<size_t>(i)] = c;
    valid[static_cast<size_t>(i)] = 1;
  }

  Mat zbuf = Mat::Constant(resolution, resolution,
                           std::numeric_limits<Scalar>::infinity());
  const int rad = splat_px;
  const int rad2 = splat_px * splat_px;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!valid[static_cast<size_t>(i)]) continue;
    const Scalar z = cam(i, 2);
    for (int dr = -rad; dr <= rad; ++dr)
      for (int dc = -rad; dc <= rad; ++dc) {
        if (dr * dr + dc * dc > rad2) continue;
        const int r = rows[static_cast<size_t>(i)] + dr;
        const int c = cols[static_cast<size_t>(i)] + dc;
        if (r < 0 || r >= resolution || c < 0 || c >= resolution) continue;
        if (z < zbuf(r, c)) zbuf(r, c) = z;
      }
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    if (!valid[static_cast<size_t>(i)]) continue;
    const Scalar z = cam(i, 2);
    bool vis = false;
    for (int dr = -rad; dr <= rad && !vis; ++dr)
      for (int dc = -rad; dc <= rad && !vis; ++dc) {
        if (dr * dr + dc * dc > rad2) continue;
        const int r = rows[static_cast<size_t>(i)] + dr;
        const int c = cols[static_cast<size_t>(i)] + dc;
        if (r < 0 || r >= resolution || c < 0 || c >= resolution) continue;
        if (z <= zbuf(r, c) + depth_tol) vis = true;
      }
    if (vis) mask[static_cast<size_t>(i)] = 1;
  }
  return mask;
}

}  // namespace pvst
