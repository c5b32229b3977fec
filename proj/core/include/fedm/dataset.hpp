#pragma once

#include "fedm/common.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>

namespace fedm {

/// One site's observations: outcomes `y` (n) and covariates `z` (n x p).
/// Immutable after construction.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::string label, Vector y, Matrix z);

  const std::string& label() const noexcept { return label_; }
  const Vector& y() const noexcept { return y_; }
  const Matrix& z() const noexcept { return z_; }
  Index size() const noexcept { return y_.size(); }
  Index dim() const noexcept { return z_.cols(); }

  Dataset with_label(std::string label) const;
  /// Rows reordered so that row i of the result is row perm[i] of this.
  Dataset permuted(std::span<const Index> perm) const;

 private:
  std::string label_;
  Vector y_;
  Matrix z_;
};

/// CSV with header `y,z1,...,zp`. Throws DataError naming the offending line.
Dataset read_csv(std::istream& in, std::string label);
Dataset read_csv(const std::filesystem::path& path, std::string label = "");

void write_csv(std::ostream& out, const Dataset& data);
void write_csv(const std::filesystem::path& path, const Dataset& data);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double x);

}  // namespace fedm
