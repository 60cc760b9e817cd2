#pragma once

#include <array>

#include "wkb/system.hpp"

namespace wkb {

// 2D isentropic Euler around V0 = (v0, 0, u0), subsonic incoming normal
// velocity 0 < u0 < c0. All closed forms below are used as oracles for the
// generic modules.
struct EulerParams {
  double v0 = 1.0;
  double c0 = 1.0;
  double M = 0.8660254037844386;  // Mach number u0/c0, default sqrt(3)/2
  double delta = 1.1040895136738123;  // 2^{1/7}
  double eta0 = 1.0;
  double kappa = 1.0;  // sound-speed law c(v) = c0 (v0/v)^kappa

  double u0() const { return M * c0; }
  double cprime0() const { return -kappa * c0 / v0; }
  double sgap() const { return std::sqrt(c0 * c0 - u0() * u0()); }
  // Glancing-line slopes p/q = K_-, K_+ of the lattice zeta_{p,q}.
  double Kminus() const {
    double s = std::sqrt(1.0 - M * M);
    return (s - delta) / (1.0 - s);
  }
  double Kplus() const {
    double s = std::sqrt(1.0 - M * M);
    return -(s + delta) / (1.0 + s);
  }
};

enum class EulerRegion { Hyperbolic, Glancing, Mixed };

struct EulerRoots {
  EulerRegion region;
  Cplx xi1, xi2;  // acoustic pair (real in H, conjugate pair in EH)
  double xi3;     // linear branch, -tau/u0
};

// Coefficient matrices A_1, A_2 at V0 + u, analytic differentials, the
// strictly dissipative B, and the two boundary frequencies zeta^1, zeta^delta.
HyperbolicSystem build_euler(const EulerParams& params);

// tau_1 < tau_2 < tau_3 at (eta, xi).
std::array<double, 3> closed_form_tau(const EulerParams& params, double eta, double xi);

// Roots xi of det L(0,(tau,eta,xi)) = 0 and the region of zeta = (tau,eta).
EulerRoots closed_form_xi(const EulerParams& params, double tau, double eta);

// Region of the lattice point zeta_{p,q} = p zeta^1 + q zeta^delta together
// with the sign of tau (+1/-1, 0 inside the mixed region).
struct EulerRegionTag {
  EulerRegion region;
  int tau_sign;
};
EulerRegionTag region_classify(const EulerParams& params, long p, long q);

// Resonance coefficient of the linear alpha_3 family,
// alpha_3(zeta_{p,q}) + alpha_3(zeta_{r,s}) = alpha_3(zeta_{p+r,q+s}).
double euler_gamma(const EulerParams& params, long p, long q, long r, long s);

// Exact distance from zeta_{p,q} (or a raw (tau,eta) point) to the two
// glancing lines |tau| = sqrt(c0^2-u0^2) |eta|.
double euler_glancing_distance(const EulerParams& params, long p, long q);
double euler_glancing_distance_point(const EulerParams& params, double tau, double eta);

// tau_{p,q} = c0 eta0 (p + delta q), eta_{p,q} = eta0 (p + q).
inline double euler_tau_pq(const EulerParams& params, double p, double q) {
  return params.c0 * params.eta0 * (p + params.delta * q);
}
inline double euler_eta_pq(const EulerParams& params, double p, double q) {
  return params.eta0 * (p + q);
}

}  // namespace wkb
