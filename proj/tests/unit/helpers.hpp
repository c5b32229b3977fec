#pragma once

#include "fedm/common.hpp"
#include "fedm/random.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace fedm::test {

inline Matrix random_pd(Index d, std::uint64_t seed, double min_eig = 0.5) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal;
  Matrix m(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) m(i, j) = normal(rng);
  }
  return m * m.transpose() / static_cast<double>(d) + min_eig * Matrix::Identity(d, d);
}

inline Vector random_vector(Index d, std::uint64_t seed, double scale = 1.0) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(d);
  for (Index i = 0; i < d; ++i) v(i) = normal(rng);
  return v;
}

/// A fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("fedm_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fedm::test
