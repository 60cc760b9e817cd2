#include "wkb/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace wkb {

namespace {

// Largest-modulus entry rotated to be real positive, ties at the lowest index.
void fix_phase(Vec& v) {
  int best = 0;
  double mag = std::abs(v[0]);
  for (int i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > mag) {
      mag = std::abs(v[i]);
      best = i;
    }
  }
  if (v[best] < 0) v = -v;
}

}  // namespace

EigenStructure eigen_structure(const LinearizedSystem& lin, const Vec& eta, double xi,
                               const SpectralTol& tol) {
  double scale = std::hypot(eta.norm(), xi);
  if (scale == 0) throw Error(ErrorCode::ZeroFrequency, "eigen_structure at (eta,xi)=0");

  Mat A = lin.Asym(eta, xi);
  Eigen::EigenSolver<Mat> solver(A);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorCode::ComplexSpectrum, "eigenvalue iteration failed");

  CVec ev = solver.eigenvalues();
  for (int i = 0; i < lin.N; ++i)
    if (std::abs(ev[i].imag()) > tol.imag * std::max(scale, A.norm()))
      throw Error(ErrorCode::ComplexSpectrum,
                  "imaginary eigenvalue part " + fmt_g17(ev[i].imag()));

  // taus are the negatives of the eigenvalues of A(eta, xi), sorted ascending
  std::vector<int> order(lin.N);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return -ev[a].real() < -ev[b].real(); });

  EigenStructure es;
  es.eta = eta;
  es.xi = xi;
  es.taus = Vec(lin.N);
  es.rights = Mat(lin.N, lin.N);
  for (int k = 0; k < lin.N; ++k) {
    es.taus[k] = -ev[order[k]].real();
    CVec col = solver.eigenvectors().col(order[k]);
    // real eigenvector up to a global phase
    int big = 0;
    for (int i = 1; i < lin.N; ++i)
      if (std::abs(col[i]) > std::abs(col[big])) big = i;
    Cplx phase = col[big] / std::abs(col[big]);
    Vec r = (col / phase).real();
    r.normalize();
    fix_phase(r);
    es.rights.col(k) = r;
  }

  for (int k = 0; k + 1 < lin.N; ++k)
    if (es.taus[k + 1] - es.taus[k] < tol.gap * scale)
      throw Error(ErrorCode::EigenvalueCollision,
                  "eigenvalue gap " + fmt_g17(es.taus[k + 1] - es.taus[k]) + " at |.|=" +
                      fmt_g17(scale));

  es.lefts = es.rights.inverse();
  es.pi.resize(lin.N);
  es.pi_tilde.resize(lin.N);
  for (int k = 0; k < lin.N; ++k) {
    es.pi[k] = es.rights.col(k) * es.lefts.row(k);
    es.pi_tilde[k] = lin.AdInv * es.pi[k] * lin.A[lin.d];
  }
  return es;
}

Vec group_velocity(const EigenStructure& es, const LinearizedSystem& lin, int k) {
  if (k < 0 || k >= lin.N) throw Error(ErrorCode::DimensionMismatch, "branch index");
  Vec r = es.rights.col(k);
  Vec l = es.lefts.row(k).transpose();
  double lr = l.dot(r);
  if (std::abs(lr) < 1e-12)
    throw Error(ErrorCode::DegenerateBranch, "left/right normalization failed");
  // d tau_k . (deta, dxi) = -(l . A(deta,dxi) r) / (l . r)
  Vec g(lin.d);
  for (int i = 1; i < lin.d; ++i) g[i - 1] = -l.dot(lin.A[i] * r) / lr;
  g[lin.d - 1] = -l.dot(lin.A[lin.d] * r) / lr;
  return g;
}

FrequencyClass classify_frequency(const LinearizedSystem& lin, const Vec& alpha,
                                  const SpectralTol& tol) {
  if (alpha.size() != lin.d + 1) throw Error(ErrorCode::DimensionMismatch, "alpha size");
  FrequencyClass out;
  if (alpha.norm() == 0) {
    out.tag = FreqTag::Zero;
    return out;
  }
  double tau = alpha[0];
  Vec eta = alpha.segment(1, lin.d - 1);
  double xi = alpha[lin.d];
  double scale = std::hypot(eta.norm(), xi);
  if (scale == 0) {
    out.tag = FreqTag::Noncharacteristic;  // L(0,alpha) = tau I, tau != 0
    return out;
  }
  EigenStructure es = eigen_structure(lin, eta, xi, tol);
  int best = -1;
  double dist = std::numeric_limits<double>::infinity();
  for (int k = 0; k < lin.N; ++k) {
    double dk = std::abs(tau - es.taus[k]);
    if (dk < dist) {
      dist = dk;
      best = k;
    }
  }
  if (dist > tol.charac * scale) {
    out.tag = FreqTag::Noncharacteristic;
    return out;
  }
  out.branch = best;
  Vec g = group_velocity(es, lin, best);
  out.dxitau = g[lin.d - 1];
  if (std::abs(out.dxitau) < tol.glancing)
    out.tag = FreqTag::Glancing;
  else
    out.tag = out.dxitau < 0 ? FreqTag::Incoming : FreqTag::Outgoing;
  out.near_glancing =
      std::abs(out.dxitau) >= tol.glancing && std::abs(out.dxitau) < tol.near_glancing;
  return out;
}

FrequencyOps frequency_operators(const LinearizedSystem& lin, const Vec& alpha,
                                 const SpectralTol& tol) {
  if (alpha.size() != lin.d + 1) throw Error(ErrorCode::DimensionMismatch, "alpha size");
  FrequencyOps out;
  int N = lin.N;
  if (alpha.norm() == 0) {
    out.pi = out.pi_tilde = out.Q = Mat::Identity(N, N);
    return out;
  }
  double tau = alpha[0];
  Vec eta = alpha.segment(1, lin.d - 1);
  double xi = alpha[lin.d];
  double scale = std::hypot(eta.norm(), xi);
  if (scale == 0) {
    out.pi = out.pi_tilde = Mat::Zero(N, N);
    out.Q = Mat::Identity(N, N) / tau;
    return out;
  }
  EigenStructure es = eigen_structure(lin, eta, xi, tol);
  std::vector<int> hits;
  for (int k = 0; k < N; ++k)
    if (std::abs(tau - es.taus[k]) <= tol.charac * scale) hits.push_back(k);
  if (hits.size() > 1)
    throw Error(ErrorCode::NearCharacteristicAmbiguity,
                "tau lies in the band of several branches");
  if (hits.empty()) {
    out.pi = out.pi_tilde = Mat::Zero(N, N);
    out.Q = Mat::Zero(N, N);
    for (int j = 0; j < N; ++j) out.Q += es.pi[j] / (tau - es.taus[j]);
    return out;
  }
  int k = hits[0];
  out.characteristic = true;
  out.branch = k;
  out.pi = es.pi[k];
  out.pi_tilde = es.pi_tilde[k];
  out.Q = Mat::Zero(N, N);
  // L(0,alpha) = sum_j (tau - tau_j) pi_j, partial inverse skips branch k.
  for (int j = 0; j < N; ++j) {
    if (j == k) continue;
    out.Q += es.pi[j] / (tau - es.taus[j]);
  }
  return out;
}

double velocity_bound(const LinearizedSystem& lin, int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw Error(ErrorCode::ParameterOutOfRange, "n_samples >= 1");
  Rng rng(seed);
  double vmax = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    Vec u = rng.unit_vector(lin.d);
    Vec eta = u.head(lin.d - 1);
    double xi = u[lin.d - 1];
    EigenStructure es;
    try {
      es = eigen_structure(lin, eta, xi);
    } catch (const Error&) {
      continue;  // glancing-adjacent collision points contribute nothing new
    }
    for (int k = 0; k < lin.N; ++k)
      vmax = std::max(vmax, group_velocity(es, lin, k).norm());
  }
  return 1.05 * vmax;
}

double LaxReport::max() const {
  double r = std::max(resid_time, resid_polarized);
  for (double x : resid_tan) r = std::max(r, x);
  return r;
}

LaxReport verify_lax(const EigenStructure& es, const LinearizedSystem& lin, int k,
                     const SpectralTol& tol) {
  Vec g = group_velocity(es, lin, k);
  double dxitau = g[lin.d - 1];
  if (std::abs(dxitau) < tol.glancing)
    throw Error(ErrorCode::GlancingBranch, "Lax identities need a non-glancing branch");
  LaxReport rep;
  const Mat& pit = es.pi_tilde[k];
  const Mat& pi = es.pi[k];
  rep.resid_time = (pit * lin.Atilde[0] * pi + (1.0 / dxitau) * pit * pi).norm();
  rep.resid_tan.resize(lin.d - 1);
  for (int i = 1; i < lin.d; ++i)
    rep.resid_tan[i - 1] =
        (pit * lin.Atilde[i] * pi - (g[i - 1] / dxitau) * pit * pi).norm();
  Vec E = es.rights.col(k);
  rep.resid_polarized = (pit * E + dxitau * (lin.AdInv * E)).norm();
  return rep;
}

HyperbolicityReport check_strict_hyperbolicity(const LinearizedSystem& lin, int n_samples,
                                               std::uint64_t seed, const SpectralTol& tol) {
  Rng rng(seed);
  HyperbolicityReport rep;
  rep.min_gap = std::numeric_limits<double>::infinity();
  rep.worst_point = Vec::Zero(lin.d);
  for (int s = 0; s < n_samples; ++s) {
    Vec u = rng.unit_vector(lin.d);
    Mat A = lin.Asym(u.head(lin.d - 1), u[lin.d - 1]);
    Eigen::EigenSolver<Mat> solver(A);
    std::vector<double> taus(lin.N);
    for (int i = 0; i < lin.N; ++i) taus[i] = -solver.eigenvalues()[i].real();
    std::sort(taus.begin(), taus.end());
    for (int i = 0; i + 1 < lin.N; ++i) {
      double gap = taus[i + 1] - taus[i];
      if (gap < rep.min_gap) {
        rep.min_gap = gap;
        rep.worst_point = u;
      }
    }
  }
  if (lin.N == 1) rep.min_gap = std::numeric_limits<double>::infinity();
  rep.pass = rep.min_gap > tol.gap;
  return rep;
}

}  // namespace wkb
