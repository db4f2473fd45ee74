#include "pvst/rendering.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>

namespace pvst {

CameraIntrinsics CameraIntrinsics::for_view(const Viewpoint& view, int size) {
  CameraIntrinsics k;
  k.height = size;
  k.width = size;
  k.near = view.distance - 1.0;
  k.far = view.distance + 1.0;
  validate(k);
  return k;
}

void validate(const CameraIntrinsics& k) {
  if (!(k.fov_v_deg > 0.0 && k.fov_v_deg < 180.0))
    throw ConfigError("intrinsics: fov " + std::to_string(k.fov_v_deg) +
                      " outside (0, 180)");
  if (k.height < 8 || k.width < 8)
    throw ConfigError("intrinsics: image size must be at least 8x8");
  if (!(k.far > k.near)) throw ConfigError("intrinsics: far must exceed near");
}

Projected project_points(const Points& cloud, const Viewpoint& view,
                         const CameraIntrinsics& intr) {
  validate(intr);
  const Eigen::Index n = cloud.rows();
  Projected out;
  out.row.assign(static_cast<size_t>(n), 0);
  out.col.assign(static_cast<size_t>(n), 0);
  out.depth = Vec::Zero(n);
  out.valid.assign(static_cast<size_t>(n), 0);

  const CameraFrame frame = camera_frame(view);
  const Points cam = to_camera(cloud, frame);
  const Scalar focal =
      (static_cast<Scalar>(intr.height) / 2.0) / std::tan(intr.fov_v_deg * M_PI / 360.0);

  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar z = cam(i, 2);
    out.depth[i] = z;
    if (z <= 1e-9) continue;  // behind the camera
    const Scalar fc = intr.width / 2.0 + focal * cam(i, 0) / z;
    const Scalar fr = intr.height / 2.0 - focal * cam(i, 1) / z;
    const int c = static_cast<int>(std::floor(fc));
    const int r = static_cast<int>(std::floor(fr));
    if (r < 0 || r >= intr.height || c < 0 || c >= intr.width) continue;
    out.row[static_cast<size_t>(i)] = r;
    out.col[static_cast<size_t>(i)] = c;
    out.valid[static_cast<size_t>(i)] = 1;
  }
  return out;
}

int splat_radius_for(int height) { return std::max(1, (2 * height) / 128); }

Image render_depth(const Points& cloud, const Viewpoint& view,
                   const CameraIntrinsics& intr, int splat_px) {
  if (splat_px < 0) throw ConfigError("render_depth: negative splat radius");
  const Projected pr = project_points(cloud, view, intr);

  Mat zbuf = Mat::Constant(intr.height, intr.width,
                           std::numeric_limits<Scalar>::infinity());
  const int rad2 = splat_px * splat_px;
  for (Eigen::Index i = 0; i < cloud.rows(); ++i) {
    if (!pr.valid[static_cast<size_t>(i)]) continue;
    const Scalar z = pr.depth[i];
    for (int dr = -splat_px; dr <= splat_px; ++dr)
      for (int dc = -splat_px; dc <= splat_px; ++dc) {
        if (dr * dr + dc * dc > rad2) continue;
        const int r = pr.row[static_cast<size_t>(i)] + dr;
        const int c = pr.col[static_cast<size_t>(i)] + dc;
        if (r < 0 || r >= intr.height || c < 0 || c >= intr.width) continue;
        if (z < zbuf(r, c)) zbuf(r, c) = z;
      }
  }

  Image img = Image::Zero(intr.height, intr.width);
  const Scalar range = intr.far - intr.near;
  for (int r = 0; r < intr.height; ++r)
    for (int c = 0; c < intr.width; ++c) {
      const Scalar z = zbuf(r, c);
      if (!std::isfinite(z)) continue;
      const Scalar t = std::clamp((z - intr.near) / range, 0.0, 1.0);
      img(r, c) = 1.0 - 0.9 * t;
    }
  return img;
}

Image silhouette_from_depth(const Image& depth) {
  return (depth.array() > 0.0).cast<Scalar>();
}

Image dilate3x3(const Image& mask) {
  const int h = static_cast<int>(mask.rows()), w = static_cast<int>(mask.cols());
  Image out = Image::Zero(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      if (mask(r, c) <= 0.0) continue;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr >= 0 && rr < h && cc >= 0 && cc < w) out(rr, cc) = 1.0;
        }
    }
  return out;
}

namespace {

// 5x5 Gaussian blur, sigma 1, clamped borders.
Image gaussian5(const Image& src) {
  static const std::array<Scalar, 5> k = [] {
    std::array<Scalar, 5> g{};
    Scalar sum = 0;
    for (int i = 0; i < 5; ++i) {
      g[static_cast<size_t>(i)] = std::exp(-0.5 * (i - 2) * (i - 2));
      sum += g[static_cast<size_t>(i)];
    }
    for (auto& v : g) v /= sum;
    return g;
  }();

  const int h = static_cast<int>(src.rows()), w = static_cast<int>(src.cols());
  Image tmp(h, w), out(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      Scalar acc = 0;
      for (int i = -2; i <= 2; ++i)
        acc += k[static_cast<size_t>(i + 2)] * src(r, std::clamp(c + i, 0, w - 1));
      tmp(r, c) = acc;
    }
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      Scalar acc = 0;
      for (int i = -2; i <= 2; ++i)
        acc += k[static_cast<size_t>(i + 2)] * tmp(std::clamp(r + i, 0, h - 1), c);
      out(r, c) = acc;
    }
  return out;
}

}  // namespace

Image canny_contour(const Image& depth, Scalar low_ratio, Scalar high_ratio) {
  if (!(low_ratio > 0.0 && low_ratio < high_ratio && high_ratio <= 1.0))
    throw ConfigError("canny: need 0 < low < high <= 1");
  const int h = static_cast<int>(depth.rows()), w = static_cast<int>(depth.cols());
  const Image smooth = gaussian5(depth);

  Image gx = Image::Zero(h, w), gy = Image::Zero(h, w), mag = Image::Zero(h, w);
  auto at = [&](int r, int c) {
    return smooth(std::clamp(r, 0, h - 1), std::clamp(c, 0, w - 1));
  };
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      gx(r, c) = at(r - 1, c + 1) + 2 * at(r, c + 1) + at(r + 1, c + 1) -
                 at(r - 1, c - 1) - 2 * at(r, c - 1) - at(r + 1, c - 1);
      gy(r, c) = at(r + 1, c - 1) + 2 * at(r + 1, c) + at(r + 1, c + 1) -
                 at(r - 1, c - 1) - 2 * at(r - 1, c) - at(r - 1, c + 1);
      mag(r, c) = std::hypot(gx(r, c), gy(r, c));
    }

  const Scalar max_mag = mag.maxCoeff();
  if (max_mag <= 0.0) return Image::Zero(h, w);

  // Non-maximum suppression with 4-direction quantization.
  Image thin = Image::Zero(h, w);
  auto mag_at = [&](int r, int c) {
    return (r >= 0 && r < h && c >= 0 && c < w) ? mag(r, c) : 0.0;
  };
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const Scalar m = mag(r, c);
      if (m <= 0.0) continue;
      Scalar angle = std::atan2(gy(r, c), gx(r, c)) * 180.0 / M_PI;
      if (angle < 0) angle += 180.0;
      Scalar n1, n2;
      if (angle < 22.5 || angle >= 157.5) {
        n1 = mag_at(r, c - 1);
        n2 = mag_at(r, c + 1);
      } else if (angle < 67.5) {
        n1 = mag_at(r - 1, c + 1);
        n2 = mag_at(r + 1, c - 1);
      } else if (angle < 112.5) {
        n1 = mag_at(r - 1, c);
        n2 = mag_at(r + 1, c);
      } else {
        n1 = mag_at(r - 1, c - 1);
        n2 = mag_at(r + 1, c + 1);
      }
      if (m >= n1 && m >= n2) thin(r, c) = m;
    }

  const Scalar lo = low_ratio * max_mag, hi = high_ratio * max_mag;
  Image edges = Image::Zero(h, w);
  std::vector<std::pair<int, int>> stack;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (thin(r, c) >= hi) {
        edges(r, c) = 1.0;
        stack.emplace_back(r, c);
      }
  while (!stack.empty()) {
    const auto [r, c] = stack.back();
    stack.pop_back();
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        const int rr = r + dr, cc = c + dc;
        if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
        if (edges(rr, cc) > 0.0 || thin(rr, cc) < lo) continue;
        edges(rr, cc) = 1.0;
        stack.emplace_back(rr, cc);
      }
  }

  return dilate3x3(edges);
}

RenderTarget make_render_target(const Points& cloud, const Viewpoint& view,
                                const CameraIntrinsics& intr) {
  RenderTarget t;
  t.depth = render_depth(cloud, view, intr, splat_radius_for(intr.height));
  t.sil = silhouette_from_depth(t.depth);
  t.cont = canny_contour(t.depth);
  t.vis = hpr_visibility(cloud, view);
  return t;
}

// ---------------------------------------------------------------------------
// Binary PGM

void write_image(const std::string& path, const Image& img, ImageKind kind) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("write_image: cannot open " + path);
  const int h = static_cast<int>(img.rows()), w = static_cast<int>(img.cols());
  const int maxval = kind == ImageKind::kBinary ? 255 : 65535;
  f << "P5\n" << w << " " << h << "\n" << maxval << "\n";
  if (kind == ImageKind::kBinary) {
    std::vector<unsigned char> buf(static_cast<size_t>(h) * w);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        buf[static_cast<size_t>(r) * w + c] = img(r, c) > 0.0 ? 255 : 0;
    f.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  } else {
    std::vector<unsigned char> buf(static_cast<size_t>(h) * w * 2);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const auto v = static_cast<unsigned>(std::lround(img(r, c) * 65535.0));
        buf[2 * (static_cast<size_t>(r) * w + c)] = static_cast<unsigned char>(v >> 8);
        buf[2 * (static_cast<size_t>(r) * w + c) + 1] = static_cast<unsigned char>(v & 0xff);
      }
    f.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  }
  if (!f) throw IoError("write_image: short write to " + path);
}

namespace {

// Reads one PGM header token, skipping whitespace and # comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

int pgm_int(std::istream& in, const std::string& path) {
  const std::string tok = pgm_token(in);
  if (tok.empty()) throw FormatError("read_image: truncated header in " + path);
  for (char c : tok)
    if (!std::isdigit(static_cast<unsigned char>(c)))
      throw FormatError("read_image: bad header token '" + tok + "' in " + path);
  return std::stoi(tok);
}

}  // namespace

Image read_image(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("read_image: cannot open " + path);
  char magic[2];
  f.read(magic, 2);
  if (!f || magic[0] != 'P' || magic[1] != '5')
    throw FormatError("read_image: bad magic in " + path);
  const int w = pgm_int(f, path);
  const int h = pgm_int(f, path);
  const int maxval = pgm_int(f, path);
  if (w <= 0 || h <= 0 || (maxval != 255 && maxval != 65535))
    throw FormatError("read_image: unsupported PGM geometry in " + path);

  const size_t bytes = static_cast<size_t>(h) * w * (maxval == 255 ? 1 : 2);
  std::vector<unsigned char> buf(bytes);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
  if (static_cast<size_t>(f.gcount()) != bytes)
    throw FormatError("read_image: truncated payload in " + path);

  Image img(h, w);
  if (maxval == 255) {
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        img(r, c) = buf[static_cast<size_t>(r) * w + c] / 255.0;
  } else {
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const size_t i = 2 * (static_cast<size_t>(r) * w + c);
        img(r, c) = ((buf[i] << 8) | buf[i + 1]) / 65535.0;
      }
  }
  return img;
}

}  // namespace pvst
