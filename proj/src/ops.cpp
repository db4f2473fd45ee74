#include "pvst/ops.hpp"

#include <algorithm>
#include <cmath>

namespace pvst {

namespace {

Tape* common_tape(std::initializer_list<const Tensor*> ins) {
  Tape* t = nullptr;
  for (const Tensor* x : ins) {
    if (x->tape() == nullptr) continue;
    if (t == nullptr)
      t = x->tape();
    else if (t != x->tape())
      throw ContractError("primitive: inputs live on different tapes");
  }
  return t;
}

Tape* common_tape(const std::vector<Tensor>& ins) {
  Tape* t = nullptr;
  for (const Tensor& x : ins) {
    if (x.tape() == nullptr) continue;
    if (t == nullptr)
      t = x.tape();
    else if (t != x.tape())
      throw ContractError("primitive: inputs live on different tapes");
  }
  return t;
}

void assert_finite(const Vec& v, const char* op) {
  if (!v.allFinite()) throw NumericalError(std::string(op) + ": non-finite output");
}

Tensor finish(Shape shape, Vec data, Tape* tape, std::vector<int> parents,
              Tape::BackwardFn fn, const char* op) {
  assert_finite(data, op);
  Tensor out(std::move(shape), std::move(data));
  if (tape != nullptr) {
    const int id = tape->record(std::move(parents), out.shape(), std::move(fn));
    tape->bind(out, id);
  }
  return out;
}

Eigen::Map<Mat> as_mat(Vec& v, int rows, int cols) { return {v.data(), rows, cols}; }
Eigen::Map<const Mat> as_mat(const Vec& v, int rows, int cols) {
  return {v.data(), rows, cols};
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Vec out(static_cast<long>(m) * n);
  as_mat(out, m, n).noalias() = a.mat() * b.mat();

  Tape* tape = common_tape({&a, &b});
  Tape::BackwardFn fn;
  if (tape) {
    Tensor as = a, bs = b;
    fn = [as, bs, m, k, n](const Vec& gout, const std::vector<Vec*>& gin) {
      auto g = as_mat(gout, m, n);
      if (gin[0]) as_mat(*gin[0], m, k).noalias() += g * bs.mat().transpose();
      if (gin[1]) as_mat(*gin[1], k, n).noalias() += as.mat().transpose() * g;
    };
  }
  return finish({m, n}, std::move(out), tape, {a.node(), b.node()}, std::move(fn),
                "matmul");
}

Tensor bias_add(const Tensor& x, const Tensor& b) {
  if (b.rank() != 1) throw ShapeError("bias-add: bias must be rank 1, got " + shape_str(b.shape()));
  int rows, cols;
  bool per_channel;
  if (x.rank() == 2 && x.dim(1) == b.dim(0)) {
    rows = x.dim(0);
    cols = x.dim(1);
    per_channel = false;
  } else if (x.rank() == 3 && x.dim(0) == b.dim(0)) {
    rows = x.dim(0);
    cols = x.dim(1) * x.dim(2);
    per_channel = true;
  } else {
    throw ShapeError("bias-add: incompatible shapes " + shape_str(x.shape()) + " + " +
                     shape_str(b.shape()));
  }

  Vec out(x.size());
  if (per_channel)
    as_mat(out, rows, cols) = x.mat(rows, cols).colwise() + b.data();
  else
    as_mat(out, rows, cols) = x.mat(rows, cols).rowwise() + b.data().transpose();

  Tape* tape = common_tape({&x, &b});
  Tape::BackwardFn fn;
  if (tape) {
    fn = [rows, cols, per_channel](const Vec& gout, const std::vector<Vec*>& gin) {
      if (gin[0]) *gin[0] += gout;
      if (gin[1]) {
        auto g = as_mat(gout, rows, cols);
        if (per_channel)
          *gin[1] += g.rowwise().sum();
        else
          *gin[1] += g.colwise().sum().transpose();
      }
    };
  }
  return finish(x.shape(), std::move(out), tape, {x.node(), b.node()}, std::move(fn),
                "bias-add");
}

Tensor relu(const Tensor& x) {
  Vec out = x.data().cwiseMax(0.0);
  Tape* tape = common_tape({&x});
  Tape::BackwardFn fn;
  if (tape) {
    Tensor xs = x;
    fn = [xs](const Vec& gout, const std::vector<Vec*>& gin) {
      if (gin[0])
        gin[0]->array() += gout.array() * (xs.data().array() > 0.0).cast<Scalar>();
    };
  }
  return finish(x.shape(), std::move(out), tape, {x.node()}, std::move(fn), "relu");
}

Tensor sigmoid(const Tensor& x) {
  Vec out = (1.0 + (-x.data().array()).exp()).inverse();
  Tape* tape = common_tape({&x});
  Tape::BackwardFn fn;
  if (tape) {
    Vec y = out;
    fn = [y](const Vec& gout, const std::vector<Vec*>& gin) {
      if (gin[0]) gin[0]->array() += gout.array() * y.array() * (1.0 - y.array());
    };
  }
  return finish(x.shape(), std::move(out), tape, {x.node()}, std::move(fn), "sigmoid");
}

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("channel-concat: no inputs");
  int rows = -1;
  long total_cols = 0;
  for (const Tensor& p : parts) {
    if (p.rank() == 1) {
      total_cols += p.dim(0);
    } else if (p.rank() == 2) {
      if (rows >= 0 && p.dim(0) != rows)
        throw ShapeError("channel-concat: row mismatch " + std::to_string(rows) +
                         " vs " + std::to_string(p.dim(0)));
      rows = p.dim(0);
      total_cols += p.dim(1);
    } else {
      throw ShapeError("channel-concat: rank must be 1 or 2, got " +
                       shape_str(p.shape()));
    }
  }

  const bool matrix_out = rows >= 0;
  const int n = matrix_out ? rows : 1;
  const int c_total = static_cast<int>(total_cols);
  Vec out(static_cast<long>(n) * c_total);
  {
    auto o = as_mat(out, n, c_total);
    int col = 0;
    for (const Tensor& p : parts) {
      const int c = p.rank() == 1 ? p.dim(0) : p.dim(1);
      if (p.rank() == 2)
        o.middleCols(col, c) = p.mat();
      else
        o.middleCols(col, c) = p.data().transpose().replicate(n, 1);
      col += c;
    }
  }

  Tape* tape = common_tape(parts);
  Tape::BackwardFn fn;
  std::vector<int> parents(parts.size());
  std::vector<std::pair<int, int>> slots(parts.size());  // (col offset, width)
  std::vector<char> is_vec(parts.size());
  {
    int col = 0;
    for (size_t i = 0; i < parts.size(); ++i) {
      parents[i] = parts[i].node();
      const int c = parts[i].rank() == 1 ? parts[i].dim(0) : parts[i].dim(1);
      slots[i] = {col, c};
      is_vec[i] = parts[i].rank() == 1 ? 1 : 0;
      col += c;
    }
  }
  if (tape) {
    fn = [slots, is_vec, n, c_total](const Vec& gout, const std::vector<Vec*>& gin) {
      auto g = as_mat(gout, n, c_total);
      for (size_t i = 0; i < gin.size(); ++i) {
        if (!gin[i]) continue;
        const auto [col, c] = slots[i];
        if (is_vec[i])
          *gin[i] += g.middleCols(col, c).colwise().sum().transpose();
        else
          as_mat(*gin[i], n, c).noalias() += g.middleCols(col, c);
      }
    };
  }
  Shape out_shape = matrix_out ? Shape{n, c_total} : Shape{c_total};
  return finish(std::move(out_shape), std::move(out), tape, std::move(parents),
                std::move(fn), "channel-concat");
}

Tensor cmul(const Tensor& s, const Tensor& x) {
  const bool same = s.shape() == x.shape();
  const bool row_scale =
      !same && x.rank() == 2 &&
      ((s.rank() == 1 && s.dim(0) == x.dim(0)) ||
       (s.rank() == 2 && s.dim(0) == x.dim(0) && s.dim(1) == 1));
  if (!same && !row_scale)
    throw ShapeError("cmul: incompatible shapes " + shape_str(s.shape()) + " * " +
                     shape_str(x.shape()));

  Vec out(x.size());
  if (same) {
    out = s.data().cwiseProduct(x.data());
  } else {
    const int n = x.dim(0), c = x.dim(1);
    as_mat(out, n, c) = x.mat().array().colwise() * s.data().array();
  }

  Tape* tape = common_tape({&s, &x});
  Tape::BackwardFn fn;
  if (tape) {
    Tensor ss = s, xs = x;
    fn = [ss, xs, same](const Vec& gout, const std::vector<Vec*>& gin) {
      if (same) {
        if (gin[0]) gin[0]->array() += gout.array() * xs.data().array();
        if (gin[1]) gin[1]->array() += gout.array() * ss.data().array();
      } else {
        const int n = xs.dim(0), c = xs.dim(1);
        auto g = as_mat(gout, n, c);
        if (gin[0])
          *gin[0] += (g.array() * xs.mat().array()).rowwise().sum().matrix();
        if (gin[1])
          as_mat(*gin[1], n, c).array() += g.array().colwise() * ss.data().array();
      }
    };
  }
  return finish(x.shape(), std::move(out), tape, {s.node(), x.node()}, std::move(fn),
                "cmul");
}

Tensor max_over_points(const Tensor& x) {
  if (x.rank() != 2)
    throw ShapeError("max-points: expected rank 2, got " + shape_str(x.shape()));
  const int n = x.dim(0), c = x.dim(1);
  auto m = x.mat();
  Vec out(c);
  std::vector<int> arg(static_cast<size_t>(c), 0);
  for (int j = 0; j < c; ++j) {
    Scalar best = m(0, j);
    int bi = 0;
    for (int i = 1; i < n; ++i)
      if (m(i, j) > best) {
        best = m(i, j);
        bi = i;
      }
    out[j] = best;
    arg[static_cast<size_t>(j)] = bi;
  }

  Tape* tape = common_tape({&x});
  Tape::BackwardFn fn;
  if (tape) {
    fn = [arg, n, c](const Vec& gout, const std::vector<Vec*>& gin) {
      if (!gin[0]) return;
      auto g = as_mat(*gin[0], n, c);
      for (int j = 0; j < c; ++j) g(arg[static_cast<size_t>(j)], j) += gout[j];
    };
  }
  return finish({c}, std::move(out), tape, {x.node()}, std::move(fn), "max-points");
}

Tensor mean_over_points(const Tensor& x) {
  if (x.rank() != 2)
    throw ShapeError("mean-points: expected rank 2, got " + shape_str(x.shape()));
  const int n = x.dim(0), c = x.dim(1);
  Vec out = x.mat().colwise().mean().transpose();

  Tape* tape = common_tape({&x});
  Tape::BackwardFn fn;
  if (tape) {
    fn = [n, c](const Vec& gout, const std::vector<Vec*>& gin) {
      if (!gin[0]) return;
      as_mat(*gin[0], n, c).rowwise() += (gout / Scalar(n)).transpose();
    };
  }
  return finish({c}, std::move(out), tape, {x.node()}, std::move(fn), "mean-points");
}

namespace {

// im2col for 3x3 / pad 1 kernels: [Ci,H,W] -> [Ci*9, H*W].
void im2col3(const Vec& x, int ci, int h, int w, Mat& cols) {
  cols.setZero();
  for (int c = 0; c < ci; ++c) {
    auto img = as_mat(x, ci, h * w).row(c);
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        auto dst = cols.row((c * 3 + ky) * 3 + kx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          const int x0 = std::max(0, 1 - kx);
          const int x1 = std::min(w, w + 1 - kx);
          for (int xx = x0; xx < x1; ++xx)
            dst[y * w + xx] = img[sy * w + xx + kx - 1];
        }
      }
  }
}

// Transpose scatter of im2col3: accumulates cols-layout gradients into gx.
void col2im3(const Mat& cols, int ci, int h, int w, Vec& gx) {
  for (int c = 0; c < ci; ++c) {
    auto img = as_mat(gx, ci, h * w).row(c);
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        auto src = cols.row((c * 3 + ky) * 3 + kx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          const int x0 = std::max(0, 1 - kx);
          const int x1 = std::min(w, w + 1 - kx);
          for (int xx = x0; xx < x1; ++xx)
            img[sy * w + xx + kx - 1] += src[y * w + xx];
        }
      }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernel) {
  if (x.rank() != 3 || kernel.rank() != 4)
    throw ShapeError("conv2d: expected [Ci,H,W] and [Co,Ci,kh,kw], got " +
                     shape_str(x.shape()) + " and " + shape_str(kernel.shape()));
  const int ci = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int co = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(1) != ci)
    throw ShapeError("conv2d: input channels " + std::to_string(ci) +
                     " vs kernel channels " + std::to_string(kernel.dim(1)));
  if (kh != kw || (kh != 1 && kh != 3))
    throw ShapeError("conv2d: kernel must be 1x1 or 3x3, got " +
                     std::to_string(kh) + "x" + std::to_string(kw));

  const int hw = h * w;
  Vec out(static_cast<long>(co) * hw);
  if (kh == 1) {
    as_mat(out, co, hw).noalias() = kernel.mat(co, ci) * x.mat(ci, hw);
  } else {
    Mat cols(ci * 9, hw);
    im2col3(x.data(), ci, h, w, cols);
    as_mat(out, co, hw).noalias() = kernel.mat(co, ci * 9) * cols;
  }

  Tape* tape = common_tape({&x, &kernel});
  Tape::BackwardFn fn;
  if (tape) {
    Tensor xs = x, ks = kernel;
    fn = [xs, ks, ci, h, w, co, kh](const Vec& gout, const std::vector<Vec*>& gin) {
      const int hw = h * w;
      auto g = as_mat(gout, co, hw);
      if (kh == 1) {
        if (gin[1]) as_mat(*gin[1], co, ci).noalias() += g * xs.mat(ci, hw).transpose();
        if (gin[0])
          as_mat(*gin[0], ci, hw).noalias() += ks.mat(co, ci).transpose() * g;
      } else {
        Mat cols(ci * 9, hw);
        im2col3(xs.data(), ci, h, w, cols);
        if (gin[1]) as_mat(*gin[1], co, ci * 9).noalias() += g * cols.transpose();
        if (gin[0]) {
          Mat dcols = ks.mat(co, ci * 9).transpose() * g;
          col2im3(dcols, ci, h, w, *gin[0]);
        }
      }
    };
  }
  return finish({co, h, w}, std::move(out), tape, {x.node(), kernel.node()},
                std::move(fn), "conv2d");
}

namespace {

// Half-pixel-center source coordinates for one 2x-upsampled axis.
struct Lerp {
  std::vector<int> lo, hi;
  std::vector<Scalar> t;
};

Lerp lerp_axis(int src, int dst) {
  Lerp l;
  l.lo.resize(static_cast<size_t>(dst));
  l.hi.resize(static_cast<size_t>(dst));
  l.t.resize(static_cast<size_t>(dst));
  for (int i = 0; i < dst; ++i) {
    const Scalar s = (i + 0.5) / 2.0 - 0.5;
    Scalar fl = std::floor(s);
    Scalar tt = s - fl;
    int lo = static_cast<int>(fl);
    int hi = lo + 1;
    if (lo < 0) {
      lo = 0;
      hi = 0;
      tt = 0.0;
    }
    if (hi > src - 1) {
      hi = src - 1;
      if (lo > src - 1) lo = src - 1;
      if (lo == hi) tt = 0.0;
    }
    l.lo[static_cast<size_t>(i)] = lo;
    l.hi[static_cast<size_t>(i)] = hi;
    l.t[static_cast<size_t>(i)] = tt;
  }
  return l;
}

}  // namespace

Tensor upsample2x(const Tensor& x) {
  if (x.rank() != 3)
    throw ShapeError("upsample2x: expected [C,H,W], got " + shape_str(x.shape()));
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int oh = 2 * h, ow = 2 * w;
  const Lerp ry = lerp_axis(h, oh), rx = lerp_axis(w, ow);

  Vec out(static_cast<long>(c) * oh * ow);
  {
    const Scalar* src = x.data().data();
    Scalar* dst = out.data();
    for (int ch = 0; ch < c; ++ch) {
      const Scalar* sp = src + static_cast<long>(ch) * h * w;
      Scalar* dp = dst + static_cast<long>(ch) * oh * ow;
      for (int i = 0; i < oh; ++i) {
        const int y0 = ry.lo[static_cast<size_t>(i)], y1 = ry.hi[static_cast<size_t>(i)];
        const Scalar ty = ry.t[static_cast<size_t>(i)];
        for (int j = 0; j < ow; ++j) {
          const int x0 = rx.lo[static_cast<size_t>(j)], x1 = rx.hi[static_cast<size_t>(j)];
          const Scalar tx = rx.t[static_cast<size_t>(j)];
          const Scalar v00 = sp[y0 * w + x0], v01 = sp[y0 * w + x1];
          const Scalar v10 = sp[y1 * w + x0], v11 = sp[y1 * w + x1];
          dp[i * ow + j] = (1 - ty) * ((1 - tx) * v00 + tx * v01) +
                           ty * ((1 - tx) * v10 + tx * v11);
        }
      }
    }
  }

  Tape* tape = common_tape({&x});
  Tape::BackwardFn fn;
  if (tape) {
    fn = [ry, rx, c, h, w, oh, ow](const Vec& gout, const std::vector<Vec*>& gin) {
      if (!gin[0]) return;
      const Scalar* gp = gout.data();
      Scalar* gx = gin[0]->data();
      for (int ch = 0; ch < c; ++ch) {
        Scalar* sp = gx + static_cast<long>(ch) * h * w;
        const Scalar* dp = gp + static_cast<long>(ch) * oh * ow;
        for (int i = 0; i < oh; ++i) {
          const int y0 = ry.lo[static_cast<size_t>(i)], y1 = ry.hi[static_cast<size_t>(i)];
          const Scalar ty = ry.t[static_cast<size_t>(i)];
          for (int j = 0; j < ow; ++j) {
            const int x0 = rx.lo[static_cast<size_t>(j)], x1 = rx.hi[static_cast<size_t>(j)];
            const Scalar tx = rx.t[static_cast<size_t>(j)];
            const Scalar g = dp[i * ow + j];
            sp[y0 * w + x0] += (1 - ty) * (1 - tx) * g;
            sp[y0 * w + x1] += (1 - ty) * tx * g;
            sp[y1 * w + x0] += ty * (1 - tx) * g;
            sp[y1 * w + x1] += ty * tx * g;
          }
        }
      }
    };
  }
  return finish({c, oh, ow}, std::move(out), tape, {x.node()}, std::move(fn),
                "upsample2x");
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size())
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                     shape_str(shape));
  Vec out = x.data();
  Tape* tape = common_tape({&x});
  Tape::BackwardFn fn;
  if (tape) {
    fn = [](const Vec& gout, const std::vector<Vec*>& gin) {
      if (gin[0]) *gin[0] += gout;
    };
  }
  return finish(std::move(shape), std::move(out), tape, {x.node()}, std::move(fn),
                "reshape");
}

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape())
    throw ShapeError("l1-loss: shape mismatch " + shape_str(pred.shape()) + " vs " +
                     shape_str(target.shape()));
  const Scalar n = static_cast<Scalar>(pred.size());
  Vec out(1);
  out[0] = (pred.data() - target.data()).cwiseAbs().sum() / n;

  Tape* tape = common_tape({&pred, &target});
  Tape::BackwardFn fn;
  if (tape) {
    Vec sgn = (pred.data() - target.data()).array().sign().matrix();
    fn = [sgn, n](const Vec& gout, const std::vector<Vec*>& gin) {
      if (gin[0]) *gin[0] += (gout[0] / n) * sgn;
      if (gin[1]) *gin[1] -= (gout[0] / n) * sgn;
    };
  }
  return finish({}, std::move(out), tape, {pred.node(), target.node()}, std::move(fn),
                "l1-loss");
}

Tensor bce_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape())
    throw ShapeError("bce-loss: shape mismatch " + shape_str(pred.shape()) + " vs " +
                     shape_str(target.shape()));
  const Scalar n = static_cast<Scalar>(pred.size());
  Arr pc = pred.data().array().min(1.0 - kBceEps).max(kBceEps);
  Vec out(1);
  out[0] = (-target.data().array() * pc.log() -
            (1.0 - target.data().array()) * (1.0 - pc).log())
               .sum() /
           n;

  Tape* tape = common_tape({&pred, &target});
  Tape::BackwardFn fn;
  if (tape) {
    Tensor ps = pred, ts = target;
    fn = [ps, ts, pc, n](const Vec& gout, const std::vector<Vec*>& gin) {
      if (gin[0]) {
        // Clamped coordinates are saturated: no gradient there.
        Arr inside = (ps.data().array() > kBceEps && ps.data().array() < 1.0 - kBceEps)
                         .cast<Scalar>();
        gin[0]->array() +=
            (gout[0] / n) * inside * (pc - ts.data().array()) / (pc * (1.0 - pc));
      }
      if (gin[1])
        gin[1]->array() += (gout[0] / n) * ((1.0 - pc).log() - pc.log());
    };
  }
  return finish({}, std::move(out), tape, {pred.node(), target.node()}, std::move(fn),
                "bce-loss");
}

Tensor weighted_sum(const std::vector<Tensor>& terms, const std::vector<Scalar>& weights) {
  if (terms.empty() || terms.size() != weights.size())
    throw ShapeError("weighted-sum: need matching term/weight counts, got " +
                     std::to_string(terms.size()) + "/" + std::to_string(weights.size()));
  for (const Tensor& t : terms)
    if (t.shape() != terms[0].shape())
      throw ShapeError("weighted-sum: shape mismatch " + shape_str(t.shape()) + " vs " +
                       shape_str(terms[0].shape()));

  Vec out = Vec::Zero(terms[0].size());
  for (size_t i = 0; i < terms.size(); ++i) out += weights[i] * terms[i].data();

  Tape* tape = common_tape(terms);
  Tape::BackwardFn fn;
  std::vector<int> parents(terms.size());
  for (size_t i = 0; i < terms.size(); ++i) parents[i] = terms[i].node();
  if (tape) {
    fn = [weights](const Vec& gout, const std::vector<Vec*>& gin) {
      for (size_t i = 0; i < gin.size(); ++i)
        if (gin[i]) *gin[i] += weights[i] * gout;
    };
  }
  return finish(terms[0].shape(), std::move(out), tape, std::move(parents),
                std::move(fn), "weighted-sum");
}

namespace {

void need(const std::vector<Tensor>& inputs, size_t n, const char* op) {
  if (inputs.size() != n)
    throw ShapeError(std::string(op) + ": expected " + std::to_string(n) +
                     " inputs, got " + std::to_string(inputs.size()));
}

const std::vector<std::pair<std::string, Primitive>>& name_table() {
  static const std::vector<std::pair<std::string, Primitive>> table = {
      {"matmul", Primitive::kMatmul},
      {"bias-add", Primitive::kBiasAdd},
      {"relu", Primitive::kRelu},
      {"sigmoid", Primitive::kSigmoid},
      {"channel-concat", Primitive::kConcat},
      {"cmul", Primitive::kCmul},
      {"max-points", Primitive::kMaxOverPoints},
      {"mean-points", Primitive::kMeanOverPoints},
      {"conv2d", Primitive::kConv2d},
      {"upsample2x", Primitive::kUpsample2x},
      {"reshape", Primitive::kReshape},
      {"l1-loss", Primitive::kL1Loss},
      {"bce-loss", Primitive::kBceLoss},
      {"weighted-sum", Primitive::kWeightedSum},
  };
  return table;
}

}  // namespace

Tensor apply_primitive(Primitive kind, const std::vector<Tensor>& inputs,
                       const PrimitiveAttrs& attrs) {
  switch (kind) {
    case Primitive::kMatmul:
      need(inputs, 2, "matmul");
      return matmul(inputs[0], inputs[1]);
    case Primitive::kBiasAdd:
      need(inputs, 2, "bias-add");
      return bias_add(inputs[0], inputs[1]);
    case Primitive::kRelu:
      need(inputs, 1, "relu");
      return relu(inputs[0]);
    case Primitive::kSigmoid:
      need(inputs, 1, "sigmoid");
      return sigmoid(inputs[0]);
    case Primitive::kConcat:
      return concat(inputs);
    case Primitive::kCmul:
      need(inputs, 2, "cmul");
      return cmul(inputs[0], inputs[1]);
    case Primitive::kMaxOverPoints:
      need(inputs, 1, "max-points");
      return max_over_points(inputs[0]);
    case Primitive::kMeanOverPoints:
      need(inputs, 1, "mean-points");
      return mean_over_points(inputs[0]);
    case Primitive::kConv2d:
      need(inputs, 2, "conv2d");
      return conv2d(inputs[0], inputs[1]);
    case Primitive::kUpsample2x:
      need(inputs, 1, "upsample2x");
      return upsample2x(inputs[0]);
    case Primitive::kReshape:
      need(inputs, 1, "reshape");
      return reshape(inputs[0], attrs.shape);
    case Primitive::kL1Loss:
      need(inputs, 2, "l1-loss");
      return l1_loss(inputs[0], inputs[1]);
    case Primitive::kBceLoss:
      need(inputs, 2, "bce-loss");
      return bce_loss(inputs[0], inputs[1]);
    case Primitive::kWeightedSum:
      return weighted_sum(inputs, attrs.weights);
  }
  throw UnsupportedPrimitive("apply_primitive: unknown primitive id " +
                             std::to_string(static_cast<int>(kind)));
}

Primitive primitive_from_name(const std::string& name) {
  for (const auto& [n, p] : name_table())
    if (n == name) return p;
  throw UnsupportedPrimitive("unknown primitive '" + name + "'");
}

const std::vector<std::string>& primitive_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [n, p] : name_table()) v.push_back(n);
    return v;
  }();
  return names;
}

}  // namespace pvst
