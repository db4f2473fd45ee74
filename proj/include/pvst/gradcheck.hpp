#pragma once

#include "pvst/tensor.hpp"

#include <functional>
#include <string>
#include <vector>

namespace pvst {

// Scalar-valued function of the parameter list. Called with tape-bound
// tensors for the analytic pass and with plain tensors for every
// finite-difference evaluation; it must be deterministic.
using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

struct FdEntry {
  std::string name;
  Scalar max_rel_err = 0.0;
  bool pass = true;
};

struct FdReport {
  std::vector<FdEntry> entries;
  Scalar worst = 0.0;
  bool pass = true;
};

// Central finite differences against tape gradients. Relative error is
// |a - b| / max(1e-12, |a| + |b|); the check passes iff every parameter stays
// below tol. max_coords > 0 restricts each parameter to a deterministic
// coordinate subsample.
FdReport finite_difference_check(const ScalarFn& f, const std::vector<Tensor>& params,
                                 Scalar step = 1e-6, Scalar tol = 1e-4,
                                 const std::vector<std::string>& names = {},
                                 int max_coords = 0, std::uint64_t coord_seed = 0);

}  // namespace pvst
