#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

namespace pvst {

// 64-bit floats everywhere. Gradient checks and bit-exact checkpoint
// round-trips are defined on this representation.
using Scalar = double;

using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Arr = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

// N x 3 point sets, one point per row.
using Points = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;

// H x W images. Depth images live in {0} u [0.1, 1]; binary images in {0, 1}.
using Image = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Shape = std::vector<int>;

inline long shape_size(const Shape& s) {
  long n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s);

// ---------------------------------------------------------------------------
// Error taxonomy. Everything derives from Error so the CLI can map families
// to exit codes.

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operand extents do not satisfy an operation's shape rule.
struct ShapeError : Error {
  using Error::Error;
};

// apply_primitive was handed an id outside the catalog.
struct UnsupportedPrimitive : Error {
  using Error::Error;
};

// An operation's calling contract was violated (non-scalar loss, reused tape).
struct ContractError : Error {
  using Error::Error;
};

struct NoTapeError : Error {
  using Error::Error;
};

struct DeterminismError : Error {
  using Error::Error;
};

// NaN/Inf surfaced where only finite values are allowed.
struct NumericalError : Error {
  using Error::Error;
};

struct DegenerateCloudError : Error {
  using Error::Error;
};

struct EmptyCloudError : Error {
  using Error::Error;
};

struct DegenerateHullError : Error {
  using Error::Error;
};

struct DegenerateLabelsError : Error {
  using Error::Error;
};

struct DegenerateVectorError : Error {
  using Error::Error;
};

struct InsufficientPointsError : Error {
  using Error::Error;
};

// Malformed on-disk artifacts (PGM/XYZ/checkpoint headers and payloads).
struct FormatError : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

struct ArchitectureMismatchError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace pvst
