#pragma once

#include <functional>
#include <vector>

#include "wkb/util.hpp"

namespace wkb {

// Quasilinear system u_t + sum_i A_i(u) d_i u = 0 on {x_d > 0} with linear
// boundary condition B u = eps g on {x_d = 0}. Coefficients are functions of
// the perturbation u around the equilibrium (u = 0).
struct HyperbolicSystem {
  int d = 0;  // space dimension (>= 2)
  int N = 0;  // system size
  int m = 0;  // number of boundary phases (>= 2)
  // A_i(u) for i = 1..d (A_0 = identity by convention).
  std::function<Mat(int, const Vec&)> coeffs;
  // Optional analytic differential dA_i(0).v for i = 1..d; empty => finite
  // differences of coeffs.
  std::function<Mat(int, const Vec&)> diffs;
  Mat B;                   // M x N, maximal rank
  std::vector<Vec> zetas;  // m boundary frequencies in R^d, slot 0 = tau
};

// Frozen linearization at u = 0 together with the first-order coefficient
// differentials used by the WKB cascade.
class LinearizedSystem {
 public:
  int d = 0, N = 0, m = 0;
  std::vector<Mat> A;       // A[i] = A_i(0), i = 0..d, A[0] = I
  Mat AdInv;                // A_d(0)^{-1}
  std::vector<Mat> Atilde;  // Atilde[i] = A_d^{-1} A_i(0), i = 0..d-1
  Mat B;
  std::vector<Vec> zetas;

  // dA_i(0).v, i = 0..d (zero for i = 0).
  Mat dA(int i, const Vec& v) const;
  // dAtilde_i(0).v = Ad^{-1} dA_i.v - Ad^{-1} (dA_d.v) Ad^{-1} A_i, i = 0..d-1.
  Mat dAtilde(int i, const Vec& v) const;

  // A(eta, xi) = sum_i eta_i A_i(0) + xi A_d(0), eta in R^{d-1}.
  Mat Asym(const Vec& eta, double xi) const;
  // L(0, alpha) = tau I + A(eta, xi).
  Mat Lsym(double tau, const Vec& eta, double xi) const;
  // Ltilde(0, alpha) = Ad^{-1} L(0, alpha).
  Mat Ltilde(double tau, const Vec& eta, double xi) const;

  std::function<Mat(int, const Vec&)> dA_fn;  // i = 1..d
};

// Builds the linearization; differentials fall back to central finite
// differences of the coefficient provider with step fd_step.
LinearizedSystem linearize(const HyperbolicSystem& system, double fd_step = 1e-6);

// L1tilde(v, zeta) = sum_{i=0}^{d-1} zeta^i dAtilde_i(0).v  (zeta slot 0 = tau).
Mat apply_L1_tilde(const LinearizedSystem& lin, const Vec& v, const Vec& zeta);

// Lattice frequency n . zeta = sum_j n_j zeta_j in R^d.
Vec lattice_frequency(const LinearizedSystem& lin, const VecI& n);

// Validates HyperbolicSystem invariants (noncharacteristic boundary, rank of
// B, pairwise Q-independence heuristics of the zetas). Throws on violation.
void validate_system(const HyperbolicSystem& system, double tol = 1e-10);

}  // namespace wkb
