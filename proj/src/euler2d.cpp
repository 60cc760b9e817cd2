#include "wkb/euler2d.hpp"

#include <cmath>

namespace wkb {

namespace {

double sign(double x) { return x >= 0 ? 1.0 : -1.0; }

Mat euler_A1(const EulerParams& p, const Vec& u) {
  double v = p.v0 + u[0];
  double u1 = u[1];
  double c = p.c0 * std::pow(p.v0 / v, p.kappa);
  Mat A(3, 3);
  A << u1, -v, 0.0,
      -c * c / v, u1, 0.0,
      0.0, 0.0, u1;
  return A;
}

Mat euler_A2(const EulerParams& p, const Vec& u) {
  double v = p.v0 + u[0];
  double u2 = p.u0() + u[2];
  double c = p.c0 * std::pow(p.v0 / v, p.kappa);
  Mat A(3, 3);
  A << u2, 0.0, -v,
      0.0, u2, 0.0,
      -c * c / v, 0.0, u2;
  return A;
}

}  // namespace

HyperbolicSystem build_euler(const EulerParams& params) {
  if (!(params.v0 > 0) || !(params.c0 > 0) || !(params.M > 0) || !(params.M < 1))
    throw Error(ErrorCode::ParameterOutOfRange, "need v0, c0 > 0 and 0 < M < 1");
  if (!(params.delta > 1))
    throw Error(ErrorCode::ParameterOutOfRange, "need delta > 1");
  if (!(params.eta0 > 0))
    throw Error(ErrorCode::ParameterOutOfRange, "need eta0 > 0");

  HyperbolicSystem sys;
  sys.d = 2;
  sys.N = 3;
  sys.m = 2;
  EulerParams p = params;
  sys.coeffs = [p](int i, const Vec& u) -> Mat {
    if (u.size() != 3) throw Error(ErrorCode::DimensionMismatch, "euler state size");
    if (i == 1) return euler_A1(p, u);
    if (i == 2) return euler_A2(p, u);
    throw Error(ErrorCode::DimensionMismatch, "euler coefficient index");
  };
  // d/ds [c(v0+s w_v)^2/(v0+s w_v)] at s=0 = -(2 kappa + 1) c0^2/v0^2 * w_v
  double gprime = -(2.0 * p.kappa + 1.0) * p.c0 * p.c0 / (p.v0 * p.v0);
  sys.diffs = [p, gprime](int i, const Vec& w) -> Mat {
    Mat D = Mat::Zero(3, 3);
    if (i == 1) {
      D(0, 0) = w[1];
      D(1, 1) = w[1];
      D(2, 2) = w[1];
      D(0, 1) = -w[0];
      D(1, 0) = -gprime * w[0];
    } else if (i == 2) {
      D(0, 0) = w[2];
      D(1, 1) = w[2];
      D(2, 2) = w[2];
      D(0, 2) = -w[0];
      D(2, 0) = -gprime * w[0];
    } else {
      throw Error(ErrorCode::DimensionMismatch, "euler differential index");
    }
    return D;
  };
  sys.B = Mat(2, 3);
  sys.B << 0.0, p.v0, 0.0,
      -p.u0(), 0.0, p.v0;
  sys.zetas.resize(2);
  sys.zetas[0] = Vec(2);
  sys.zetas[0] << p.c0 * p.eta0, p.eta0;
  sys.zetas[1] = Vec(2);
  sys.zetas[1] << p.c0 * p.delta * p.eta0, p.eta0;
  return sys;
}

std::array<double, 3> closed_form_tau(const EulerParams& params, double eta, double xi) {
  double r = std::hypot(eta, xi);
  if (r == 0) throw Error(ErrorCode::ZeroFrequency, "closed_form_tau at origin");
  double u0 = params.u0();
  return {-u0 * xi - params.c0 * r, -u0 * xi, -u0 * xi + params.c0 * r};
}

EulerRoots closed_form_xi(const EulerParams& params, double tau, double eta) {
  if (tau == 0 && eta == 0)
    throw Error(ErrorCode::ZeroFrequency, "closed_form_xi at origin");
  double u0 = params.u0();
  double c0 = params.c0;
  double gap2 = c0 * c0 - u0 * u0;
  double disc = tau * tau - eta * eta * gap2;
  EulerRoots out;
  out.xi3 = -tau / u0;
  if (disc > 0) {
    out.region = EulerRegion::Hyperbolic;
    double root = sign(tau) * c0 * std::sqrt(disc);
    out.xi1 = (tau * u0 + root) / gap2;
    out.xi2 = (tau * u0 - root) / gap2;
  } else if (disc == 0) {
    out.region = EulerRegion::Glancing;
    out.xi1 = out.xi2 = tau * u0 / gap2;
  } else {
    out.region = EulerRegion::Mixed;
    Cplx root = Cplx(0.0, sign(tau) * c0 * std::sqrt(-disc));
    out.xi1 = (tau * u0 + root) / gap2;
    out.xi2 = (tau * u0 - root) / gap2;
  }
  return out;
}

EulerRegionTag region_classify(const EulerParams& params, long p, long q) {
  if (p == 0 && q == 0) throw Error(ErrorCode::ZeroFrequency, "zero lattice point");
  double tau = euler_tau_pq(params, static_cast<double>(p), static_cast<double>(q));
  if (q == 0) return {EulerRegion::Hyperbolic, p > 0 ? 1 : -1};
  double x = static_cast<double>(p) / static_cast<double>(q);
  double Kp = params.Kplus();
  double Km = params.Kminus();
  if (x == Kp || x == Km)
    throw Error(ErrorCode::ExactGlancing,
                "p/q equals a glancing slope at (" + std::to_string(p) + "," +
                    std::to_string(q) + ")");
  // zeta_{p,q} and zeta_{-p,-q} lie in the same region; only sign(tau) flips.
  if (x > Kp) return {EulerRegion::Hyperbolic, tau > 0 ? 1 : -1};
  if (x < Km) return {EulerRegion::Hyperbolic, tau > 0 ? 1 : -1};
  return {EulerRegion::Mixed, tau > 0 ? 1 : (tau < 0 ? -1 : 0)};
}

double euler_gamma(const EulerParams& params, long p, long q, long r, long s) {
  if ((p == 0 && q == 0) || (r == 0 && s == 0) || (p + r == 0 && q + s == 0))
    throw Error(ErrorCode::ZeroFrequency, "gamma with a zero frequency");
  double u0 = params.u0();
  double tpq = euler_tau_pq(params, p, q), epq = euler_eta_pq(params, p, q);
  double trs = euler_tau_pq(params, r, s), ers = euler_eta_pq(params, r, s);
  double tsum = euler_tau_pq(params, p + r, q + s), esum = euler_eta_pq(params, p + r, q + s);
  double num = (tpq * ers - trs * epq) * (tsum * trs + u0 * u0 * esum * ers);
  double den = std::pow(u0, 4) * std::sqrt(epq * epq + tpq * tpq / (u0 * u0)) *
               std::sqrt(ers * ers + trs * trs / (u0 * u0)) *
               std::sqrt(esum * esum + tsum * tsum / (u0 * u0));
  return -num / den;
}

double euler_glancing_distance_point(const EulerParams& params, double tau, double eta) {
  double s = params.sgap();
  double den = std::sqrt(1.0 + s * s);
  double d1 = std::abs(tau - s * eta) / den;
  double d2 = std::abs(tau + s * eta) / den;
  return std::min(d1, d2);
}

double euler_glancing_distance(const EulerParams& params, long p, long q) {
  return euler_glancing_distance_point(params,
                                       euler_tau_pq(params, p, q),
                                       euler_eta_pq(params, p, q));
}

}  // namespace wkb
