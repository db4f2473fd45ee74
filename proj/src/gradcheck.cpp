#include "pvst/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace pvst {

FdReport finite_difference_check(const ScalarFn& f, const std::vector<Tensor>& params,
                                 Scalar step, Scalar tol,
                                 const std::vector<std::string>& names, int max_coords,
                                 std::uint64_t coord_seed) {
  if (!(step > 0.0)) throw ContractError("finite_difference_check: step must be positive");
  if (params.empty()) throw ContractError("finite_difference_check: no parameters");

  // Two baseline evaluations must agree bit-for-bit.
  const Scalar base1 = f(params).value();
  const Scalar base2 = f(params).value();
  if (std::memcmp(&base1, &base2, sizeof(Scalar)) != 0)
    throw DeterminismError("finite_difference_check: function is not deterministic");

  Tape tape;
  std::vector<Tensor> bound;
  bound.reserve(params.size());
  for (const Tensor& p : params) bound.push_back(tape.leaf(p));
  const Tensor loss = f(bound);
  const GradientMap grads = tape.backward(loss);

  (void)coord_seed;
  FdReport report;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    const long n = params[pi].size();
    const Vec& analytic = grads.at(bound[pi]);
    std::vector<long> coords;
    if (max_coords <= 0 || n <= max_coords) {
      coords.resize(static_cast<size_t>(n));
      for (long i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
    } else {
      // Verify where there is signal: central differences cannot resolve
      // coordinates whose gradient sits below the roundoff floor of the
      // loss evaluation.
      std::vector<long> order(static_cast<size_t>(n));
      for (long i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
      std::stable_sort(order.begin(), order.end(), [&](long a, long b) {
        return std::abs(analytic[a]) > std::abs(analytic[b]);
      });
      coords.assign(order.begin(), order.begin() + max_coords);
    }
    FdEntry entry;
    entry.name = pi < names.size() ? names[pi] : "param" + std::to_string(pi);
    for (long j : coords) {
      std::vector<Tensor> work = params;
      Vec& data = work[pi].mutable_data();
      const Scalar orig = data[j];
      data[j] = orig + step;
      const Scalar plus = f(work).value();
      data[j] = orig - step;
      const Scalar minus = f(work).value();
      data[j] = orig;

      const Scalar fd = (plus - minus) / (2.0 * step);
      const Scalar a = analytic[j];
      const Scalar rel = std::abs(a - fd) / std::max(1e-12, std::abs(a) + std::abs(fd));
#ifdef PVST_GRADCHECK_DEBUG
      if (rel >= tol) {
        std::fprintf(stderr, "[fd] %s coord %ld analytic=%.9e fd=%.9e", entry.name.c_str(),
                     j, a, fd);
        for (Scalar s2 : {1e-4, 1e-5, 1e-7}) {
          std::vector<Tensor> w2 = params;
          Vec& d2 = w2[pi].mutable_data();
          d2[j] = orig + s2;
          const Scalar p2 = f(w2).value();
          d2[j] = orig - s2;
          const Scalar m2 = f(w2).value();
          std::fprintf(stderr, " fd(%.0e)=%.9e", s2, (p2 - m2) / (2 * s2));
        }
        std::fprintf(stderr, "\n");
      }
#endif
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    entry.pass = entry.max_rel_err < tol;
    report.worst = std::max(report.worst, entry.max_rel_err);
    report.pass = report.pass && entry.pass;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace pvst
