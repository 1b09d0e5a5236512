#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fusion {

struct FusionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad input (unknown axis, malformed spec, shape mismatch).
struct InvalidSpec : FusionError {
  using FusionError::FusionError;
};

// Numerical failure (rank deficiency, positivity breach, non-decomposable input).
struct NumericFailure : FusionError {
  using FusionError::FusionError;
};

// Malformed input text (JSON, CLI arguments).
struct ParseError : FusionError {
  using FusionError::FusionError;
};

// Model-level validation failure (alignment broken, invariant violated).
struct ValidationFailure : FusionError {
  using FusionError::FusionError;
};

struct Axis {
  std::string name;
  std::vector<std::string> levels;
};

// Ordered product of named categorical axes. Cells are enumerated row-major
// over the declared axis order: the LAST axis varies fastest. This order is
// fixed so that every matrix and serialized table is reproducible bit-for-bit.
class AxisSet {
 public:
  AxisSet() = default;
  explicit AxisSet(std::vector<Axis> axes);

  std::size_t cell_count() const { return total_; }
  std::size_t axis_count() const { return axes_.size(); }
  const std::vector<Axis>& axes() const { return axes_; }
  const Axis& axis(std::size_t i) const { return axes_[i]; }

  bool has_axis(const std::string& name) const;
  std::size_t axis_index(const std::string& name) const;  // throws InvalidSpec

  std::size_t flatten(const std::vector<std::size_t>& multi) const;
  std::vector<std::size_t> unflatten(std::size_t cell) const;

  // Coordinate of `axis` within `cell`.
  std::size_t coord(std::size_t cell, std::size_t axis) const;

  // Sub-product in the requested name order (which may permute axes).
  AxisSet subset(const std::vector<std::string>& names) const;

  std::size_t level_index(const std::string& axis, const std::string& level) const;

  std::string cell_label(std::size_t cell) const;  // "X=0,Y=1"

  bool same_as(const AxisSet& other) const;  // names, levels and order all equal

  std::vector<std::string> axis_names() const;

 private:
  std::vector<Axis> axes_;
  std::vector<std::size_t> strides_;
  std::size_t total_ = 1;
};

// Precomputed map from cells of `full` to cells of `sub` (axes matched by
// name; `sub` may permute). Shared by marginals, expansions and conditionals.
class Projection {
 public:
  Projection(const AxisSet& full, const AxisSet& sub);
  std::size_t operator()(std::size_t full_cell) const { return map_[full_cell]; }
  const std::vector<std::size_t>& map() const { return map_; }

 private:
  std::vector<std::size_t> map_;
};

}  // namespace fusion
