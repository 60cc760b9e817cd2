#include "wkb/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <unsupported/Eigen/MatrixFunctions>

namespace wkb {

CMat boundary_symbol(const LinearizedSystem& lin, Cplx sigma, const Vec& eta) {
  if (eta.size() != lin.d - 1) throw Error(ErrorCode::DimensionMismatch, "eta size");
  CMat S = sigma * CMat::Identity(lin.N, lin.N);
  for (int j = 1; j < lin.d; ++j) S += Cplx(eta[j - 1], 0.0) * lin.A[j].cast<Cplx>();
  return Cplx(0.0, -1.0) * lin.AdInv.cast<Cplx>() * S;
}

namespace {

struct Cluster {
  Cplx mean;
  std::vector<int> members;
};

std::vector<Cluster> cluster_eigenvalues(const CVec& xs, double tol) {
  std::vector<int> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (xs[a].real() != xs[b].real()) return xs[a].real() < xs[b].real();
    return xs[a].imag() < xs[b].imag();
  });
  std::vector<Cluster> out;
  for (int idx : order) {
    if (!out.empty() && std::abs(xs[idx] - out.back().mean) <= tol) {
      auto& c = out.back();
      c.members.push_back(idx);
      Cplx s = 0;
      for (int k : c.members) s += xs[k];
      c.mean = s / static_cast<double>(c.members.size());
    } else {
      out.push_back({xs[idx], {idx}});
    }
  }
  return out;
}

}  // namespace

StableDecomposition decompose_stable(const LinearizedSystem& lin, const Vec& zeta,
                                     const SpectralTol& tol) {
  if (zeta.size() != lin.d) throw Error(ErrorCode::DimensionMismatch, "zeta size");
  double scale = zeta.norm();
  if (scale == 0) throw Error(ErrorCode::ZeroFrequency, "decompose_stable at zeta = 0");
  const int N = lin.N;
  double tau = zeta[0];
  Vec eta = zeta.segment(1, lin.d - 1);

  // A(zeta) = i M with M = -Ad^{-1}(tau I + sum eta_j A_j); eigenvalues of M
  // are the xi roots of det L(0,(zeta,xi)) = 0.
  Mat M = -(tau * lin.AdInv + lin.AdInv * (lin.Asym(eta, 0.0)));
  Eigen::EigenSolver<Mat> solver(M);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorCode::DefectiveElliptic, "eigenvalue iteration failed");
  CVec xs = solver.eigenvalues();

  double band = std::max(tol.charac * scale, 1e-13);
  auto clusters = cluster_eigenvalues(xs, 1e-8 * std::max(1.0, scale));

  StableDecomposition dec;
  dec.zeta = zeta;
  dec.Acal = boundary_symbol(lin, Cplx(tau, 0.0), eta);
  dec.T = CMat(N, N);
  dec.col_root.resize(N);
  dec.mu_decay = std::numeric_limits<double>::infinity();

  int col = 0;
  for (const auto& c : clusters) {
    RootInfo info;
    info.xi = c.mean;
    info.mult = static_cast<int>(c.members.size());
    bool real_root = std::abs(c.mean.imag()) <= band;
    if (real_root) {
      if (info.mult > 1)
        throw Error(ErrorCode::GlancingFrequency,
                    "multiple real xi root at tau=" + fmt_g17(tau));
      Vec alpha(lin.d + 1);
      alpha[0] = tau;
      alpha.segment(1, lin.d - 1) = eta;
      alpha[lin.d] = c.mean.real();
      FrequencyClass fc = classify_frequency(lin, alpha, tol);
      if (fc.tag == FreqTag::Glancing)
        throw Error(ErrorCode::GlancingFrequency, "glancing root at tau=" + fmt_g17(tau));
      if (fc.tag != FreqTag::Incoming && fc.tag != FreqTag::Outgoing)
        throw Error(ErrorCode::NearCharacteristicAmbiguity,
                    "real xi root failed characteristic classification");
      info.cls = fc.tag == FreqTag::Incoming ? RootClass::Incoming : RootClass::Outgoing;
      info.branch = fc.branch;
      info.dxitau = fc.dxitau;
    } else {
      info.cls = c.mean.imag() > 0 ? RootClass::EllipticStable : RootClass::EllipticUnstable;
      if (info.cls == RootClass::EllipticStable)
        dec.mu_decay = std::min(dec.mu_decay, c.mean.imag());
    }

    int root_idx = static_cast<int>(dec.roots.size());
    if (info.mult == 1) {
      dec.T.col(col) = solver.eigenvectors().col(c.members[0]);
      dec.col_root[col] = root_idx;
      ++col;
    } else {
      // generalized eigenspace ker (M - mu I)^mult via SVD
      CMat P = CMat::Identity(N, N);
      CMat Mc = M.cast<Cplx>() - c.mean * CMat::Identity(N, N);
      for (int k = 0; k < info.mult; ++k) P = Mc * P;
      Eigen::JacobiSVD<CMat> svd(P, Eigen::ComputeFullV);
      int nullity = 0;
      double smax = svd.singularValues()[0];
      for (int k = 0; k < N; ++k)
        if (svd.singularValues()[k] <= 1e-8 * std::max(smax, 1.0)) ++nullity;
      if (nullity != info.mult)
        throw Error(ErrorCode::DefectiveElliptic,
                    "generalized eigenspace dimension " + std::to_string(nullity) +
                        " for multiplicity " + std::to_string(info.mult));
      for (int k = 0; k < info.mult; ++k) {
        dec.T.col(col) = svd.matrixV().col(N - info.mult + k);
        dec.col_root[col] = root_idx;
        ++col;
      }
    }
    dec.roots.push_back(info);
  }

  Eigen::FullPivLU<CMat> lu(dec.T);
  if (!lu.isInvertible())
    throw Error(ErrorCode::DefectiveElliptic, "eigenbasis is singular");
  dec.Tinv = lu.inverse();

  dec.root_proj.resize(dec.roots.size());
  for (std::size_t r = 0; r < dec.roots.size(); ++r) {
    CMat sel = CMat::Zero(N, N);
    for (int cidx = 0; cidx < N; ++cidx)
      if (dec.col_root[cidx] == static_cast<int>(r)) sel(cidx, cidx) = 1.0;
    dec.root_proj[r] = dec.T * sel * dec.Tinv;
  }

  dec.Pi_e_minus = CMat::Zero(N, N);
  dec.Pi_e_plus = CMat::Zero(N, N);
  std::vector<CVec> stable_cols;
  for (std::size_t r = 0; r < dec.roots.size(); ++r) {
    switch (dec.roots[r].cls) {
      case RootClass::Incoming:
        dec.incoming.push_back(static_cast<int>(r));
        break;
      case RootClass::EllipticStable:
        dec.elliptic_stable.push_back(static_cast<int>(r));
        dec.Pi_e_minus += dec.root_proj[r];
        break;
      case RootClass::EllipticUnstable:
        dec.Pi_e_plus += dec.root_proj[r];
        break;
      case RootClass::Outgoing:
        break;
    }
  }
  for (int cidx = 0; cidx < N; ++cidx) {
    RootClass cls = dec.roots[dec.col_root[cidx]].cls;
    if (cls == RootClass::Incoming || cls == RootClass::EllipticStable)
      stable_cols.push_back(dec.T.col(cidx));
  }
  dec.p = static_cast<int>(stable_cols.size());

  Eigen::EigenSolver<Mat> ad(lin.A[lin.d]);
  int p_ad = 0;
  for (int i = 0; i < N; ++i)
    if (ad.eigenvalues()[i].real() > 0) ++p_ad;
  if (dec.p != p_ad)
    throw Error(ErrorCode::DimensionMismatch,
                "dim E_- = " + std::to_string(dec.p) + " but A_d has " +
                    std::to_string(p_ad) + " positive eigenvalues");

  CMat S(N, dec.p);
  for (int k = 0; k < dec.p; ++k) S.col(k) = stable_cols[k];
  Eigen::HouseholderQR<CMat> qr(S);
  dec.Eminus = qr.householderQ() * CMat::Identity(N, dec.p);
  return dec;
}

StableBasis stable_basis(const LinearizedSystem& lin, Cplx sigma, const Vec& eta,
                         const SpectralTol& tol) {
  double gamma = -sigma.imag();
  if (gamma < 0) throw Error(ErrorCode::ParameterOutOfRange, "need Im sigma <= 0");
  const int N = lin.N;
  if (gamma == 0) {
    Vec zeta(lin.d);
    zeta[0] = sigma.real();
    zeta.segment(1, lin.d - 1) = eta;
    StableDecomposition dec = decompose_stable(lin, zeta, tol);
    StableBasis out;
    out.Q = dec.Eminus;
    out.n_stable = dec.p;
    return out;
  }
  CMat Acal = boundary_symbol(lin, sigma, eta);
  Eigen::ComplexEigenSolver<CMat> solver(Acal);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorCode::DefectiveElliptic, "eigenvalue iteration failed");
  std::vector<int> stable;
  for (int i = 0; i < N; ++i)
    if (solver.eigenvalues()[i].real() < 0) stable.push_back(i);
  // deterministic column order
  std::sort(stable.begin(), stable.end(), [&](int a, int b) {
    Cplx ea = solver.eigenvalues()[a], eb = solver.eigenvalues()[b];
    if (ea.real() != eb.real()) return ea.real() < eb.real();
    return ea.imag() < eb.imag();
  });
  CMat S(N, stable.size());
  for (std::size_t k = 0; k < stable.size(); ++k)
    S.col(k) = solver.eigenvectors().col(stable[k]);
  Eigen::HouseholderQR<CMat> qr(S);
  StableBasis out;
  out.Q = qr.householderQ() * CMat::Identity(N, static_cast<int>(stable.size()));
  out.n_stable = static_cast<int>(stable.size());
  return out;
}

LopatinskiiReport lopatinskii_scan(const LinearizedSystem& lin, const Mat& B, int n_samples,
                                   const std::vector<double>& gammas, double kl_tol,
                                   std::uint64_t seed, const SpectralTol& tol) {
  LopatinskiiReport rep;
  rep.min_det = std::numeric_limits<double>::infinity();
  rep.worst_zeta = Vec::Zero(lin.d);
  Rng rng(seed);
  int per_gamma = std::max(1, n_samples / std::max<int>(1, gammas.size()));
  for (double gamma : gammas) {
    for (int s = 0; s < per_gamma; ++s) {
      Vec u = rng.unit_vector(lin.d);  // direction in (tau, eta)
      double r = std::sqrt(std::max(0.0, 1.0 - std::min(gamma * gamma, 1.0)));
      double tau = r * u[0];
      Vec eta = r * u.segment(1, lin.d - 1);
      if (gamma == 0.0 && std::hypot(tau, eta.norm()) < 1e-12) continue;
      ++rep.samples;
      StableBasis sb;
      try {
        sb = stable_basis(lin, Cplx(tau, -gamma), eta, tol);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::GlancingFrequency ||
            e.code() == ErrorCode::NearCharacteristicAmbiguity ||
            e.code() == ErrorCode::EigenvalueCollision) {
          ++rep.skipped_glancing;
          continue;
        }
        throw;
      }
      if (sb.n_stable != B.rows())
        throw Error(ErrorCode::DimensionMismatch,
                    "dim E_- != rank B in Lopatinskii scan");
      Cplx det = (B.cast<Cplx>() * sb.Q).determinant();
      double a = std::abs(det);
      if (a < rep.min_det) {
        rep.min_det = a;
        rep.worst_zeta = Vec(lin.d);
        rep.worst_zeta[0] = tau;
        rep.worst_zeta.segment(1, lin.d - 1) = eta;
        rep.worst_gamma = gamma;
      }
    }
  }
  rep.pass = rep.min_det > kl_tol;
  return rep;
}

DissipativeReport strictly_dissipative_check(const LinearizedSystem& lin, const Mat& B,
                                             const Mat& S, double tol) {
  DissipativeReport rep;
  Eigen::SelfAdjointEigenSolver<Mat> se(0.5 * (S + S.transpose()));
  if (se.eigenvalues().minCoeff() <= 0)
    throw Error(ErrorCode::NotASymmetrizer, "S is not positive definite");
  rep.symmetry_resid = (S - S.transpose()).norm();
  for (int i = 1; i <= lin.d; ++i) {
    Mat SA = S * lin.A[i];
    rep.symmetry_resid = std::max(rep.symmetry_resid, (SA - SA.transpose()).norm());
  }
  if (rep.symmetry_resid > tol * std::max(1.0, S.norm()))
    throw Error(ErrorCode::NotASymmetrizer,
                "S A_i asymmetric, residual " + fmt_g17(rep.symmetry_resid));

  Eigen::FullPivLU<Mat> lu(B);
  lu.setThreshold(1e-12);
  Mat K = lu.kernel();  // N x dim ker B
  rep.margin = -std::numeric_limits<double>::infinity();
  bool pass = K.cols() > 0;
  for (int c = 0; c < K.cols(); ++c) {
    Vec E = K.col(c).normalized();
    double val = E.dot(S * lin.A[lin.d] * E);
    rep.margin = std::max(rep.margin, val);
    if (val >= 0) pass = false;
  }
  rep.pass = pass;
  return rep;
}

double dissipative_form(const LinearizedSystem& lin, const Mat& S, const Vec& E) {
  return E.dot(S * lin.A[lin.d] * E);
}

CVec boundary_solve(const StableDecomposition& dec, const Mat& B, const CVec& g) {
  if (B.cols() != dec.Eminus.rows() || g.size() != B.rows())
    throw Error(ErrorCode::DimensionMismatch, "boundary_solve shapes");
  CMat R = B.cast<Cplx>() * dec.Eminus;  // p x p
  Eigen::JacobiSVD<CMat> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  double smin = svd.singularValues()[svd.singularValues().size() - 1];
  double smax = svd.singularValues()[0];
  if (smin <= 0 || smax / smin > 1e10)
    throw Error(ErrorCode::IllConditioned,
                "restricted boundary matrix condition " + fmt_g17(smax / std::max(smin, 1e-300)));
  CVec c = svd.solve(g);
  return dec.Eminus * c;
}

CMat evanescent_propagator(const StableDecomposition& dec, double t, bool stable_variant) {
  if (stable_variant && t < 0)
    throw Error(ErrorCode::ParameterOutOfRange, "stable variant needs t >= 0");
  if (!stable_variant && t > 0)
    throw Error(ErrorCode::ParameterOutOfRange, "complementary variant needs t <= 0");
  const int N = static_cast<int>(dec.T.rows());
  // restriction of A(zeta) to the eigenbasis, block-diagonal up to rounding
  CMat D = dec.Tinv * dec.Acal * dec.T;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      if (dec.col_root[i] != dec.col_root[j]) D(i, j) = 0.0;
  CMat E = (t * D).exp();
  CMat sel = CMat::Zero(N, N);
  for (int c = 0; c < N; ++c) {
    bool es = dec.roots[dec.col_root[c]].cls == RootClass::EllipticStable;
    if (es == stable_variant) sel(c, c) = 1.0;
  }
  return dec.T * (E * sel) * dec.Tinv;
}

}  // namespace wkb
