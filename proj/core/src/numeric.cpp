#include "fedm/numeric.hpp"

#include <boost/math/distributions/normal.hpp>

#include <sstream>

namespace fedm {

Matrix symmetrize(const Matrix& m) {
  if (m.rows() != m.cols()) throw ConfigError("symmetrize: matrix is not square");
  Matrix out = m;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = i + 1; j < m.cols(); ++j) {
      const double avg = 0.5 * (m(i, j) + m(j, i));
      out(i, j) = avg;
      out(j, i) = avg;
    }
  }
  return out;
}

PsdRepair clip_to_psd(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetric);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("eigen-decomposition failed during PSD repair");
  }
  PsdRepair out;
  out.min_eigenvalue = symmetric.size() == 0 ? 0.0 : eig.eigenvalues().minCoeff();
  if (out.min_eigenvalue >= 0.0) {
    out.matrix = symmetric;
    return out;
  }
  const Vector clipped = eig.eigenvalues().cwiseMax(0.0);
  out.matrix = symmetrize(eig.eigenvectors() * clipped.asDiagonal() *
                          eig.eigenvectors().transpose());
  out.adjusted = true;
  return out;
}

double min_eigenvalue(const Matrix& symmetric) {
  if (symmetric.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetric, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

double operator_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

Vector least_squares(const Matrix& design, const Vector& response,
                     std::span<const std::string> column_names) {
  const Index rows = design.rows();
  const Index cols = design.cols();
  if (response.size() != rows) {
    throw ConfigError("least_squares: response length does not match design rows");
  }
  if (rows <= cols) {
    std::ostringstream os;
    os << "least_squares: " << rows << " points for " << cols
       << " coefficients; need more points than coefficients";
    throw NumericalError(os.str());
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  // Relative threshold on the pivots; a column whose pivot falls below it is
  // (numerically) a combination of the others.
  qr.setThreshold(1e-10);
  if (qr.rank() < cols) {
    std::ostringstream os;
    os << "least_squares: design is rank deficient (rank " << qr.rank() << " of " << cols
       << "); deficient columns:";
    const auto& perm = qr.colsPermutation().indices();
    for (Index k = qr.rank(); k < cols; ++k) {
      const Index c = perm(k);
      os << ' ';
      if (static_cast<std::size_t>(c) < column_names.size()) {
        os << column_names[static_cast<std::size_t>(c)];
      } else {
        os << c;
      }
    }
    throw NumericalError(os.str());
  }
  return qr.solve(response);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("normal_quantile: p must lie in (0,1)");
  if (p == 0.5) return 0.0;
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

Vector upper_triangle(const Matrix& m) {
  const Index d = m.rows();
  Vector out(triangle_size(d));
  Index k = 0;
  for (Index u = 0; u < d; ++u) {
    for (Index v = u; v < d; ++v) out(k++) = m(u, v);
  }
  return out;
}

std::vector<std::string> upper_triangle_labels(Index d, std::string_view prefix) {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(triangle_size(d)));
  for (Index u = 0; u < d; ++u) {
    for (Index v = u; v < d; ++v) {
      out.push_back(std::string(prefix) + "(" + std::to_string(u + 1) + "," +
                    std::to_string(v + 1) + ")");
    }
  }
  return out;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace fedm
