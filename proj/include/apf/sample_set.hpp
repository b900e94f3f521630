#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "apf/pfcore.hpp"

namespace apf {

// Multiplicative factors on the nominal injections. The absolute box for a
// component is [min(l x, u x), max(l x, u x)] so negative injections (loads)
// keep a well-ordered interval.
struct OperatingRange {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static OperatingRange scalar(Eigen::Index n, double lower, double upper);

  // Raises kValidation on size mismatch or lower > upper.
  void validate(Eigen::Index n) const;
  void box(const Eigen::VectorXd& nominal, Eigen::VectorXd& lo, Eigen::VectorXd& hi) const;

  bool operator==(const OperatingRange&) const = default;
};

struct SampleSet {
  Eigen::MatrixXd xs;     // M x n injections
  Eigen::MatrixXd betas;  // M x quantities.size()
  std::vector<QuantityOfInterest> quantities;
  int skipped = 0;
  std::uint64_t seed = 0;

  Eigen::Index size() const { return xs.rows(); }
  // Column of `q` in betas; raises kUnknownQuantity.
  Eigen::Index column_of(const QuantityOfInterest& q) const;
  Eigen::VectorXd beta(const QuantityOfInterest& q) const { return betas.col(column_of(q)); }

  // Appends the given rows of `other`, which must carry the same quantities.
  void append_rows(const SampleSet& other, const std::vector<Eigen::Index>& rows);
};

}  // namespace apf
