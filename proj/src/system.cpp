#include "wkb/system.hpp"

#include <cmath>

namespace wkb {

Mat LinearizedSystem::dA(int i, const Vec& v) const {
  if (i < 0 || i > d) throw Error(ErrorCode::DimensionMismatch, "dA index out of range");
  if (v.size() != N) throw Error(ErrorCode::DimensionMismatch, "dA direction size");
  if (i == 0) return Mat::Zero(N, N);
  return dA_fn(i, v);
}

Mat LinearizedSystem::dAtilde(int i, const Vec& v) const {
  if (i < 0 || i >= d) throw Error(ErrorCode::DimensionMismatch, "dAtilde index out of range");
  return AdInv * dA(i, v) - AdInv * dA(d, v) * AdInv * A[i];
}

Mat LinearizedSystem::Asym(const Vec& eta, double xi) const {
  if (eta.size() != d - 1) throw Error(ErrorCode::DimensionMismatch, "Asym eta size");
  Mat M = xi * A[d];
  for (int i = 1; i < d; ++i) M += eta[i - 1] * A[i];
  return M;
}

Mat LinearizedSystem::Lsym(double tau, const Vec& eta, double xi) const {
  return tau * Mat::Identity(N, N) + Asym(eta, xi);
}

Mat LinearizedSystem::Ltilde(double tau, const Vec& eta, double xi) const {
  return AdInv * Lsym(tau, eta, xi);
}

LinearizedSystem linearize(const HyperbolicSystem& system, double fd_step) {
  if (fd_step <= 0) throw Error(ErrorCode::ParameterOutOfRange, "fd_step must be positive");
  LinearizedSystem lin;
  lin.d = system.d;
  lin.N = system.N;
  lin.m = system.m;
  lin.B = system.B;
  lin.zetas = system.zetas;

  const Vec zero = Vec::Zero(system.N);
  lin.A.resize(system.d + 1);
  lin.A[0] = Mat::Identity(system.N, system.N);
  for (int i = 1; i <= system.d; ++i) {
    Mat Ai = system.coeffs(i, zero);
    if (Ai.rows() != system.N || Ai.cols() != system.N)
      throw Error(ErrorCode::DimensionMismatch, "coefficient matrix size");
    if (!Ai.allFinite())
      throw Error(ErrorCode::NonFiniteCoefficient, "A_" + std::to_string(i) + "(0)");
    lin.A[i] = Ai;
  }

  const Mat& Ad = lin.A[system.d];
  double det = Ad.determinant();
  double scale = std::pow(Ad.norm(), system.N);
  if (std::abs(det) < 1e-12 * std::max(scale, 1e-300))
    throw Error(ErrorCode::SingularNormalMatrix, "det A_d(0) = " + fmt_g17(det));
  lin.AdInv = Ad.inverse();

  lin.Atilde.resize(system.d);
  for (int i = 0; i < system.d; ++i) lin.Atilde[i] = lin.AdInv * lin.A[i];

  if (system.diffs) {
    lin.dA_fn = system.diffs;
  } else {
    auto coeffs = system.coeffs;
    double h = fd_step;
    lin.dA_fn = [coeffs, h](int i, const Vec& v) -> Mat {
      Mat plus = coeffs(i, (h * v).eval());
      Mat minus = coeffs(i, (-h * v).eval());
      if (!plus.allFinite() || !minus.allFinite())
        throw Error(ErrorCode::NonFiniteCoefficient, "finite-difference stencil");
      return (plus - minus) / (2.0 * h);
    };
  }
  return lin;
}

Mat apply_L1_tilde(const LinearizedSystem& lin, const Vec& v, const Vec& zeta) {
  if (zeta.size() != lin.d) throw Error(ErrorCode::DimensionMismatch, "zeta size");
  if (v.size() != lin.N) throw Error(ErrorCode::DimensionMismatch, "v size");
  Mat M = Mat::Zero(lin.N, lin.N);
  for (int i = 0; i < lin.d; ++i) M += zeta[i] * lin.dAtilde(i, v);
  return M;
}

Vec lattice_frequency(const LinearizedSystem& lin, const VecI& n) {
  if (n.size() != lin.m) throw Error(ErrorCode::DimensionMismatch, "lattice tuple size");
  Vec z = Vec::Zero(lin.d);
  for (int j = 0; j < lin.m; ++j) z += static_cast<double>(n[j]) * lin.zetas[j];
  return z;
}

void validate_system(const HyperbolicSystem& system, double tol) {
  if (system.d < 2) throw Error(ErrorCode::ParameterOutOfRange, "d >= 2 required");
  if (system.N < 1) throw Error(ErrorCode::ParameterOutOfRange, "N >= 1 required");
  if (system.m < 2) throw Error(ErrorCode::ParameterOutOfRange, "m >= 2 required");
  const Vec zero = Vec::Zero(system.N);
  Mat Ad = system.coeffs(system.d, zero);
  double det = Ad.determinant();
  if (std::abs(det) < 1e-12 * std::max(std::pow(Ad.norm(), system.N), 1e-300))
    throw Error(ErrorCode::SingularNormalMatrix, "boundary is characteristic");

  // rank B must match the number of positive eigenvalues of A_d(0)
  Eigen::EigenSolver<Mat> es(Ad);
  int p = 0;
  for (int i = 0; i < system.N; ++i)
    if (es.eigenvalues()[i].real() > 0) ++p;
  Eigen::ColPivHouseholderQR<Mat> qr(system.B);
  qr.setThreshold(tol);
  if (qr.rank() != system.B.rows())
    throw Error(ErrorCode::ParameterOutOfRange, "B is rank deficient");
  if (system.B.rows() != p)
    throw Error(ErrorCode::ParameterOutOfRange,
                "rank B = " + std::to_string(system.B.rows()) +
                    " but A_d(0) has " + std::to_string(p) + " positive eigenvalues");

  if (static_cast<int>(system.zetas.size()) != system.m)
    throw Error(ErrorCode::DimensionMismatch, "zetas count");
  for (const Vec& z : system.zetas) {
    if (z.size() != system.d) throw Error(ErrorCode::DimensionMismatch, "zeta size");
    if (z.norm() < tol) throw Error(ErrorCode::ZeroFrequency, "zero boundary frequency");
  }
  // pairwise non-proportionality over Q: q zeta_i - p zeta_j != 0 for small p, q
  for (int i = 0; i < system.m; ++i)
    for (int j = i + 1; j < system.m; ++j)
      for (int q = 1; q <= 16; ++q)
        for (int p = -16; p <= 16; ++p) {
          if (p == 0) continue;
          Vec diff = q * system.zetas[i] - p * system.zetas[j];
          double ref = std::hypot(q * system.zetas[i].norm(), p * system.zetas[j].norm());
          if (diff.norm() <= tol * ref)
            throw Error(ErrorCode::ParameterOutOfRange,
                        "boundary frequencies proportional over Q");
        }
}

}  // namespace wkb
