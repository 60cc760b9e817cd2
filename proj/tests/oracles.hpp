#pragma once

// Independent test oracles. Everything here is deliberately written against
// the definitions (finite differences, characteristics, exact integer
// arithmetic) rather than against the library code paths it checks.

#include <cmath>
#include <functional>
#include <set>
#include <tuple>
#include <vector>

#include "wkb/euler2d.hpp"
#include "wkb/solver.hpp"

namespace oracles {

using namespace wkb;

// Central finite difference of a coefficient provider in direction v.
inline Mat fd_differential(const std::function<Mat(int, const Vec&)>& coeffs, int i,
                           const Vec& v, double h) {
  return (coeffs(i, (h * v).eval()) - coeffs(i, (-h * v).eval())) / (2.0 * h);
}

// Finite difference of tau_k along a direction in (eta, xi).
inline double fd_tau_derivative(const LinearizedSystem& lin, const Vec& eta, double xi,
                                int k, const Vec& dir, double h) {
  auto tau_at = [&](double s) {
    Vec e = eta + s * dir.head(lin.d - 1);
    double x = xi + s * dir[lin.d - 1];
    Mat A = lin.Asym(e, x);
    Eigen::EigenSolver<Mat> es(A, false);
    std::vector<double> t(lin.N);
    for (int i = 0; i < lin.N; ++i) t[i] = -es.eigenvalues()[i].real();
    std::sort(t.begin(), t.end());
    return t[k];
  };
  return (tau_at(h) - tau_at(-h)) / (2.0 * h);
}

// Smooth compact bump matching the forcing profile in solver.cpp.
inline double bump(double s) {
  if (std::abs(s) >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - s * s));
}

// Method-of-characteristics solution of X S + gamma S dTheta S = 0 with
// boundary data h(t, y, Theta) at x = 0: the implicit relation
// S = h(t - a x, y - b x, Theta - gamma S x) solved pointwise (pre-shock).
struct BurgersCharacteristicsOracle {
  double a = 1.0, b = 0.0, gamma = 0.0;
  std::function<double(double, double, double)> h;        // boundary data
  std::function<double(double, double, double)> h_theta;  // its Theta derivative

  double eval(double t, double y, double theta, double x) const {
    double ts = t - a * x, ys = y - b * x;
    double s = h(ts, ys, theta);
    for (int it = 0; it < 200; ++it) {
      double f = s - h(ts, ys, theta - gamma * s * x);
      double fp = 1.0 + gamma * x * h_theta(ts, ys, theta - gamma * s * x);
      double step = f / fp;
      s -= step;
      if (std::abs(step) < 1e-14) break;
    }
    return s;
  }
};

inline long gcd_l(long a, long b) {
  a = std::labs(a);
  b = std::labs(b);
  while (b) {
    long t = a % b;
    a = b;
    b = t;
  }
  return a;
}

// Canonical deduplication key for one resonance triple, mirroring the
// normalization used by enumerate_resonances (coprime lambdas, lr > 0,
// p/q slot order by (direction, branch, lambda)).
using TripleKey = std::tuple<long, std::vector<int>, int, long, std::vector<int>, int, long,
                             std::vector<int>, int>;

inline TripleKey make_key(long lp, VecI np, int bp, long lq, VecI nq, int bq, long lr,
                          const VecI& nr, int br) {
  long g = gcd_l(gcd_l(lp, lq), lr);
  lp /= g;
  lq /= g;
  lr /= g;
  if (lr < 0) {
    lp = -lp;
    lq = -lq;
    lr = -lr;
  }
  auto vec = [](const VecI& v) { return std::vector<int>(v.data(), v.data() + v.size()); };
  auto pa = std::make_tuple(vec(np), bp, lp);
  auto pb = std::make_tuple(vec(nq), bq, lq);
  if (pb < pa) std::swap(pa, pb);
  return {std::get<2>(pa), std::get<0>(pa), std::get<1>(pa), std::get<2>(pb),
          std::get<0>(pb), std::get<1>(pb), lr, vec(nr), br};
}

// Exact count of the alpha3-family resonances of the Euler lattice: the
// branch is linear in zeta, so lambda_p alpha3(n_p) + lambda_q alpha3(n_q)
// is an alpha3 resonance for every non-collinear pair with nonzero sum.
// Pure integer arithmetic, no floating point.
inline long euler_alpha3_count(int box, int harmonic_bound) {
  std::vector<VecI> dirs;
  for (int p = -box; p <= box; ++p)
    for (int q = -box; q <= box; ++q) {
      if (p == 0 && q == 0) continue;
      long g = gcd_l(p, q);
      int first = p != 0 ? p : q;
      if (first < 0) continue;  // canonical representative only
      if (g != 1) continue;
      VecI n(2);
      n << p, q;
      dirs.push_back(n);
    }
  struct SM {
    int dir;
    long lambda;
  };
  std::vector<SM> scaled;
  for (std::size_t d = 0; d < dirs.size(); ++d)
    for (long l = -harmonic_bound; l <= harmonic_bound; ++l)
      if (l != 0) scaled.push_back({static_cast<int>(d), l});
  std::set<TripleKey> seen;
  for (std::size_t i = 0; i < scaled.size(); ++i)
    for (std::size_t j = i + 1; j < scaled.size(); ++j) {
      if (scaled[i].dir == scaled[j].dir) continue;  // collinear: self family
      VecI v = static_cast<int>(scaled[i].lambda) * dirs[scaled[i].dir] +
               static_cast<int>(scaled[j].lambda) * dirs[scaled[j].dir];
      if (v.isZero()) continue;
      long g = gcd_l(v[0], v[1]);
      int first = v[0] != 0 ? v[0] : v[1];
      long lr = first > 0 ? g : -g;
      VecI nr = v / static_cast<int>(lr);
      seen.insert(make_key(scaled[i].lambda, dirs[scaled[i].dir], 0, scaled[j].lambda,
                           dirs[scaled[j].dir], 0, lr, nr, 0));
    }
  return static_cast<long>(seen.size());
}

}  // namespace oracles
