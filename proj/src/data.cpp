#include "pvst/data.hpp"

#include "pvst/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace pvst {

namespace fs = std::filesystem;

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

const std::array<std::string, kNumShapeClasses> kClassNames = {
    "sphere", "cube", "cylinder", "cone", "torus"};

}  // namespace

const std::string& shape_class_name(ShapeClass c) {
  return kClassNames[static_cast<size_t>(c)];
}

ShapeClass shape_class_from_name(const std::string& name) {
  for (int i = 0; i < kNumShapeClasses; ++i)
    if (kClassNames[static_cast<size_t>(i)] == name) return static_cast<ShapeClass>(i);
  throw ConfigError("unknown shape class '" + name + "'");
}

namespace {

Vec3 sample_sphere(Rng& rng, const std::array<Scalar, 3>&) {
  const Scalar z = rng.uniform(-1.0, 1.0);
  const Scalar theta = rng.uniform(0.0, 2.0 * M_PI);
  const Scalar r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(theta), r * std::sin(theta), z};
}

Vec3 sample_cube(Rng& rng, const std::array<Scalar, 3>& d) {
  const Scalar hx = d[0], hy = d[1], hz = d[2];
  const std::array<Scalar, 3> face_area = {hy * hz, hx * hz, hx * hy};
  const Scalar total = 2.0 * (face_area[0] + face_area[1] + face_area[2]);
  Scalar pick = rng.uniform(0.0, total);
  int axis = 0;
  for (; axis < 2; ++axis) {
    if (pick < 2.0 * face_area[static_cast<size_t>(axis)]) break;
    pick -= 2.0 * face_area[static_cast<size_t>(axis)];
  }
  const Scalar sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
  Vec3 p = {rng.uniform(-hx, hx), rng.uniform(-hy, hy), rng.uniform(-hz, hz)};
  p[axis] = sign * d[static_cast<size_t>(axis)];
  return p;
}

Vec3 sample_cylinder(Rng& rng, const std::array<Scalar, 3>& d) {
  const Scalar r = d[0], hh = d[1];
  const Scalar side = 2.0 * M_PI * r * 2.0 * hh;
  const Scalar cap = M_PI * r * r;
  const Scalar pick = rng.uniform(0.0, side + 2.0 * cap);
  const Scalar theta = rng.uniform(0.0, 2.0 * M_PI);
  if (pick < side)
    return {r * std::cos(theta), r * std::sin(theta), rng.uniform(-hh, hh)};
  const Scalar rr = r * std::sqrt(rng.uniform());
  const Scalar z = pick < side + cap ? hh : -hh;
  return {rr * std::cos(theta), rr * std::sin(theta), z};
}

Vec3 sample_cone(Rng& rng, const std::array<Scalar, 3>& d) {
  const Scalar r = d[0], h = d[1];
  const Scalar slant = std::sqrt(r * r + h * h);
  const Scalar lateral = M_PI * r * slant;
  const Scalar base = M_PI * r * r;
  const Scalar pick = rng.uniform(0.0, lateral + base);
  const Scalar theta = rng.uniform(0.0, 2.0 * M_PI);
  if (pick < lateral) {
    const Scalar t = std::sqrt(rng.uniform());  // area grows with distance from apex
    return {t * r * std::cos(theta), t * r * std::sin(theta), h * (1.0 - t)};
  }
  const Scalar rr = r * std::sqrt(rng.uniform());
  return {rr * std::cos(theta), rr * std::sin(theta), 0.0};
}

Vec3 sample_torus(Rng& rng, const std::array<Scalar, 3>& d) {
  const Scalar major = d[0], minor = d[1];
  const Scalar theta = rng.uniform(0.0, 2.0 * M_PI);
  Scalar phi;
  // Rejection keeps the area element (major + minor cos phi) uniform.
  for (;;) {
    phi = rng.uniform(0.0, 2.0 * M_PI);
    const Scalar accept = (major + minor * std::cos(phi)) / (major + minor);
    if (rng.uniform() < accept) break;
  }
  const Scalar ring = major + minor * std::cos(phi);
  return {ring * std::cos(theta), ring * std::sin(theta), minor * std::sin(phi)};
}

std::array<Scalar, 3> draw_dims(ShapeClass c, Rng& rng) {
  switch (c) {
    case ShapeClass::kSphere:
      return {1.0, 0.0, 0.0};
    case ShapeClass::kCube:
      return {rng.uniform(0.5, 1.0), rng.uniform(0.5, 1.0), rng.uniform(0.5, 1.0)};
    case ShapeClass::kCylinder:
      return {rng.uniform(0.4, 1.0), rng.uniform(0.3, 1.2), 0.0};
    case ShapeClass::kCone:
      return {rng.uniform(0.5, 1.0), rng.uniform(0.6, 2.0), 0.0};
    case ShapeClass::kTorus:
      return {1.0, rng.uniform(0.15, 0.45), 0.0};
  }
  throw ConfigError("invalid shape class");
}

Vec3 sample_surface(ShapeClass c, Rng& rng, const std::array<Scalar, 3>& d) {
  switch (c) {
    case ShapeClass::kSphere:
      return sample_sphere(rng, d);
    case ShapeClass::kCube:
      return sample_cube(rng, d);
    case ShapeClass::kCylinder:
      return sample_cylinder(rng, d);
    case ShapeClass::kCone:
      return sample_cone(rng, d);
    case ShapeClass::kTorus:
      return sample_torus(rng, d);
  }
  throw ConfigError("invalid shape class");
}

Mat3 random_rotation(Rng& rng) {
  // Shoemake's uniform quaternion.
  const Scalar u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
  const Scalar a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const Scalar x = a * std::sin(2.0 * M_PI * u2);
  const Scalar y = a * std::cos(2.0 * M_PI * u2);
  const Scalar z = b * std::sin(2.0 * M_PI * u3);
  const Scalar w = b * std::cos(2.0 * M_PI * u3);
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
      2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
      2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
  return r;
}

}  // namespace

ShapeSample generate_sample(ShapeClass label, std::uint64_t seed, int n_points,
                            const std::string& id) {
  if (n_points < 1) throw ConfigError("generate_sample: need at least one point");
  ShapeSample s;
  s.id = id;
  s.label = label;
  s.seed = seed;
  Rng rng(seed);
  s.dims = draw_dims(label, rng);

  Points raw(n_points, 3);
  for (int i = 0; i < n_points; ++i)
    raw.row(i) = sample_surface(label, rng, s.dims).transpose();

  s.rotation = random_rotation(rng);
  Points rotated = raw * s.rotation.transpose();
  s.center = rotated.colwise().mean().transpose();
  Points centered = rotated.rowwise() - s.center.transpose();
  s.scale = centered.rowwise().norm().maxCoeff();
  if (s.scale < 1e-12) throw DegenerateCloudError("generate_sample: degenerate cloud");
  s.cloud = centered / s.scale;
  return s;
}

// ---------------------------------------------------------------------------
// XYZ and mask files

void save_xyz(const std::string& path, const Points& cloud) {
  std::ofstream f(path);
  if (!f) throw IoError("save_xyz: cannot open " + path);
  char line[128];
  for (Eigen::Index i = 0; i < cloud.rows(); ++i) {
    std::snprintf(line, sizeof(line), "%.9g %.9g %.9g\n", cloud(i, 0), cloud(i, 1),
                  cloud(i, 2));
    f << line;
  }
  if (!f) throw IoError("save_xyz: short write to " + path);
}

Points load_xyz(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("load_xyz: cannot open " + path);
  std::vector<std::array<Scalar, 3>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    std::istringstream is(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (is >> tok) tokens.push_back(tok);
    if (tokens.empty()) continue;
    if (tokens.size() != 3)
      throw ParseError("load_xyz: expected 3 fields at " + path + ":" +
                       std::to_string(line_no));
    std::array<Scalar, 3> row{};
    for (int k = 0; k < 3; ++k) {
      char* end = nullptr;
      row[static_cast<size_t>(k)] = std::strtod(tokens[static_cast<size_t>(k)].c_str(), &end);
      if (end == nullptr || *end != '\0')
        throw ParseError("load_xyz: non-numeric token '" + tokens[static_cast<size_t>(k)] +
                         "' at " + path + ":" + std::to_string(line_no));
    }
    rows.push_back(row);
  }
  if (rows.empty()) throw EmptyCloudError("load_xyz: no points in " + path);
  Points cloud(static_cast<Eigen::Index>(rows.size()), 3);
  for (size_t i = 0; i < rows.size(); ++i)
    for (int k = 0; k < 3; ++k)
      cloud(static_cast<Eigen::Index>(i), k) = rows[i][static_cast<size_t>(k)];
  return cloud;
}

void save_mask(const std::string& path, const VisibilityMask& mask) {
  std::ofstream f(path);
  if (!f) throw IoError("save_mask: cannot open " + path);
  for (size_t i = 0; i < mask.size(); ++i)
    f << (i ? " " : "") << (mask[i] ? 1 : 0);
  f << "\n";
  if (!f) throw IoError("save_mask: short write to " + path);
}

VisibilityMask load_mask(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("load_mask: cannot open " + path);
  VisibilityMask mask;
  std::string tok;
  while (f >> tok) {
    if (tok == "0")
      mask.push_back(0);
    else if (tok == "1")
      mask.push_back(1);
    else
      throw ParseError("load_mask: bad flag '" + tok + "' in " + path);
  }
  if (mask.empty()) throw FormatError("load_mask: empty mask in " + path);
  return mask;
}

// ---------------------------------------------------------------------------
// Dataset generation and manifests

void save_manifest(const std::string& path, const DatasetManifest& manifest) {
  std::ofstream f(path);
  if (!f) throw IoError("save_manifest: cannot open " + path);
  f << "# split=" << manifest.split << " seed=" << manifest.seed << "\n";
  f << "# columns: id\tlabel\tpath\tseed\n";
  for (const auto& e : manifest.entries)
    f << e.id << "\t" << e.label << "\t" << e.path << "\t" << e.seed << "\n";
  if (!f) throw IoError("save_manifest: short write to " + path);
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("load_manifest: cannot open " + path);
  DatasetManifest m;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream is(line.substr(1));
      std::string tok;
      while (is >> tok) {
        if (tok.rfind("split=", 0) == 0) m.split = tok.substr(6);
        if (tok.rfind("seed=", 0) == 0) m.seed = std::stoull(tok.substr(5));
      }
      continue;
    }
    std::istringstream is(line);
    ManifestEntry e;
    std::string seed_str;
    if (!std::getline(is, e.id, '\t') || !std::getline(is, e.label, '\t') ||
        !std::getline(is, e.path, '\t') || !std::getline(is, seed_str))
      throw ParseError("load_manifest: malformed line '" + line + "' in " + path);
    e.seed = std::stoull(seed_str);
    m.entries.push_back(std::move(e));
  }
  return m;
}

namespace {

// Runs fn(i) for i in [0, n) across `jobs` threads. Exceptions propagate.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(static_cast<size_t>(jobs));
  for (int t = 0; t < jobs; ++t) {
    threads.emplace_back([&, t] {
      try {
        for (int i = t; i < n; i += jobs) fn(i);
      } catch (...) {
        errors[static_cast<size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);
}

}  // namespace

DatasetManifest generate_dataset(const std::string& dir, std::uint64_t seed,
                                 int per_class, int n_points, const std::string& split,
                                 int jobs) {
  if (per_class < 1) throw ConfigError("generate_dataset: per_class must be positive");
  if (n_points < 1) throw ConfigError("generate_dataset: n_points must be positive");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("generate_dataset: cannot create " + dir);

  DatasetManifest manifest;
  manifest.split = split;
  manifest.seed = seed;
  const std::uint64_t split_seed = Rng::mix(seed, fnv1a(split));

  const int total = kNumShapeClasses * per_class;
  manifest.entries.resize(static_cast<size_t>(total));
  parallel_for(total, jobs, [&](int idx) {
    const int c = idx / per_class;
    const int i = idx % per_class;
    const auto label = static_cast<ShapeClass>(c);
    char suffix[16];
    std::snprintf(suffix, sizeof(suffix), "_%04d", i);
    const std::string id = shape_class_name(label) + suffix;
    const std::uint64_t sample_seed =
        Rng::mix(split_seed, (static_cast<std::uint64_t>(c) << 32) |
                                 static_cast<std::uint64_t>(i));
    const ShapeSample sample = generate_sample(label, sample_seed, n_points, id);
    const std::string file = id + ".xyz";
    save_xyz(dir + "/" + file, sample.cloud);
    manifest.entries[static_cast<size_t>(idx)] = {id, shape_class_name(label), file,
                                                  sample_seed};
  });

  save_manifest(dir + "/manifest.tsv", manifest);
  return manifest;
}

// ---------------------------------------------------------------------------
// Render cache

namespace {

std::string view_stem(const std::string& id, int k) {
  return id + "_v" + std::to_string(k);
}

}  // namespace

RenderCache prepare_render_cache(const DatasetManifest& manifest,
                                 const std::string& data_dir, const std::string& dir,
                                 int views_per_cloud, int image_size,
                                 std::uint64_t seed, int jobs) {
  if (views_per_cloud < 1)
    throw ConfigError("prepare_render_cache: views_per_cloud must be positive");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("prepare_render_cache: cannot create " + dir);

  RenderCache cache;
  cache.views_per_cloud = views_per_cloud;
  cache.image_size = image_size;
  cache.seed = seed;

  const int n = static_cast<int>(manifest.entries.size());
  std::vector<std::vector<RenderCacheEntry>> entries(static_cast<size_t>(n));
  std::vector<std::vector<std::string>> failures(static_cast<size_t>(n));

  parallel_for(n, jobs, [&](int i) {
    const ManifestEntry& me = manifest.entries[static_cast<size_t>(i)];
    Points cloud;
    try {
      cloud = load_xyz(data_dir + "/" + me.path);
    } catch (const Error& e) {
      failures[static_cast<size_t>(i)].push_back(me.id + ": " + e.what());
      return;
    }
    const auto views =
        sample_viewpoints(Rng::mix(seed, fnv1a(me.id)), views_per_cloud);
    for (int k = 0; k < views_per_cloud; ++k) {
      try {
        const auto intr = CameraIntrinsics::for_view(views[static_cast<size_t>(k)],
                                                     image_size);
        const RenderTarget target =
            make_render_target(cloud, views[static_cast<size_t>(k)], intr);
        RenderCacheEntry e;
        e.id = me.id;
        e.view_index = k;
        e.view = views[static_cast<size_t>(k)];
        const std::string stem = view_stem(me.id, k);
        e.depth_path = stem + "_depth.pgm";
        e.sil_path = stem + "_sil.pgm";
        e.cont_path = stem + "_cont.pgm";
        e.vis_path = stem + "_vis.txt";
        write_image(dir + "/" + e.depth_path, target.depth, ImageKind::kDepth);
        write_image(dir + "/" + e.sil_path, target.sil, ImageKind::kBinary);
        write_image(dir + "/" + e.cont_path, target.cont, ImageKind::kBinary);
        save_mask(dir + "/" + e.vis_path, target.vis);
        entries[static_cast<size_t>(i)].push_back(std::move(e));
      } catch (const Error& e) {
        failures[static_cast<size_t>(i)].push_back(me.id + "_v" + std::to_string(k) +
                                                   ": " + e.what());
      }
    }
  });

  for (int i = 0; i < n; ++i) {
    for (auto& e : entries[static_cast<size_t>(i)]) cache.entries.push_back(std::move(e));
    for (auto& f : failures[static_cast<size_t>(i)])
      cache.failures.push_back(std::move(f));
  }

  std::ofstream index(dir + "/index.tsv");
  if (!index) throw IoError("prepare_render_cache: cannot open index in " + dir);
  index << "# views=" << views_per_cloud << " image_size=" << image_size
        << " seed=" << seed << "\n";
  index << "# columns: id\tview\tlat\tlon\tdistance\tdepth\tsil\tcont\tvis\n";
  char num[64];
  for (const auto& e : cache.entries) {
    index << e.id << "\t" << e.view_index << "\t";
    std::snprintf(num, sizeof(num), "%.17g\t%.17g\t%.17g", e.view.lat_deg,
                  e.view.lon_deg, e.view.distance);
    index << num << "\t" << e.depth_path << "\t" << e.sil_path << "\t" << e.cont_path
          << "\t" << e.vis_path << "\n";
  }
  if (!index) throw IoError("prepare_render_cache: short write to index");
  return cache;
}

RenderCache load_render_cache(const std::string& dir) {
  std::ifstream f(dir + "/index.tsv");
  if (!f) throw IoError("load_render_cache: cannot open " + dir + "/index.tsv");
  RenderCache cache;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream is(line.substr(1));
      std::string tok;
      while (is >> tok) {
        if (tok.rfind("views=", 0) == 0) cache.views_per_cloud = std::stoi(tok.substr(6));
        if (tok.rfind("image_size=", 0) == 0) cache.image_size = std::stoi(tok.substr(11));
        if (tok.rfind("seed=", 0) == 0) cache.seed = std::stoull(tok.substr(5));
      }
      continue;
    }
    std::istringstream is(line);
    RenderCacheEntry e;
    std::string view_str, lat, lon, dist;
    if (!std::getline(is, e.id, '\t') || !std::getline(is, view_str, '\t') ||
        !std::getline(is, lat, '\t') || !std::getline(is, lon, '\t') ||
        !std::getline(is, dist, '\t') || !std::getline(is, e.depth_path, '\t') ||
        !std::getline(is, e.sil_path, '\t') || !std::getline(is, e.cont_path, '\t') ||
        !std::getline(is, e.vis_path))
      throw ParseError("load_render_cache: malformed line '" + line + "'");
    e.view_index = std::stoi(view_str);
    e.view.lat_deg = std::strtod(lat.c_str(), nullptr);
    e.view.lon_deg = std::strtod(lon.c_str(), nullptr);
    e.view.distance = std::strtod(dist.c_str(), nullptr);
    cache.entries.push_back(std::move(e));
  }
  return cache;
}

RenderTarget load_render_target(const std::string& cache_dir,
                                const RenderCacheEntry& entry) {
  RenderTarget t;
  t.depth = read_image(cache_dir + "/" + entry.depth_path);
  t.sil = read_image(cache_dir + "/" + entry.sil_path);
  t.cont = read_image(cache_dir + "/" + entry.cont_path);
  t.vis = load_mask(cache_dir + "/" + entry.vis_path);
  return t;
}

}  // namespace pvst
