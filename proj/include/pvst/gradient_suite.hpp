#pragma once

#include "pvst/gradcheck.hpp"

#include <string>
#include <vector>

namespace pvst {

struct SuiteEntry {
  std::string name;
  Scalar max_rel_err = 0.0;
  bool pass = true;
};

struct SuiteReport {
  std::vector<SuiteEntry> entries;
  bool pass = true;
  Scalar seconds = 0.0;
};

// Finite-difference checks for every catalog primitive and for each stage of
// the pretext network (viewpoint encoding, fusion, scoring, constraint,
// pooling, translation, overall objective) on randomized small shapes, one
// run per seed. Composite stages use a miniature copy of the architecture.
SuiteReport run_gradient_suite(int seeds = 20, Scalar step = 1e-6, Scalar tol = 1e-4);

}  // namespace pvst
