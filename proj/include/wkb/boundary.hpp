#pragma once

#include "wkb/spectral.hpp"

namespace wkb {

// A(zeta) = -i Ad^{-1} (sigma I + sum_j eta_j A_j(0)), sigma = tau - i gamma.
CMat boundary_symbol(const LinearizedSystem& lin, Cplx sigma, const Vec& eta);

enum class RootClass { Incoming, Outgoing, EllipticStable, EllipticUnstable };

struct RootInfo {
  Cplx xi;
  int mult = 1;
  RootClass cls = RootClass::Incoming;
  int branch = -1;      // tau branch for real roots
  double dxitau = 0.0;  // for real roots
};

// Spectral decomposition of A(zeta) at a real, non-glancing zeta = (tau, eta):
// classified roots, the stable subspace E_-(zeta), and the projectors
// attached to the decomposition of C^N.
struct StableDecomposition {
  Vec zeta;  // (tau, eta) in R^d
  std::vector<RootInfo> roots;
  std::vector<CMat> root_proj;        // spectral projector per root
  std::vector<int> incoming;          // indices into roots
  std::vector<int> elliptic_stable;   // indices into roots
  CMat Eminus;                        // N x p orthonormal basis of E_-(zeta)
  CMat Pi_e_minus;                    // projector onto the elliptic stable part
  CMat Pi_e_plus;                     // projector onto the elliptic unstable part
  CMat Acal;                          // A(zeta)
  CMat T, Tinv;                       // full eigenbasis, columns grouped by root
  std::vector<int> col_root;          // root index per column of T
  double mu_decay = 0.0;              // min Im xi over elliptic-stable roots
  int p = 0;

  // Projector from C^N onto ker L(0,(zeta,xi_j)) for an incoming root,
  // according to the A(zeta) spectral decomposition.
  const CMat& Pi_j(int incoming_pos) const { return root_proj[incoming[incoming_pos]]; }
};

StableDecomposition decompose_stable(const LinearizedSystem& lin, const Vec& zeta,
                                     const SpectralTol& tol = {});

// Orthonormal basis of E_-(sigma, eta) for gamma = -Im sigma >= 0. For
// gamma > 0 the stable subspace of A(zeta); for gamma = 0 delegates to
// decompose_stable. Also returns the count of eigenvalues with negative real
// part (Hersh check).
struct StableBasis {
  CMat Q;  // N x p orthonormal
  int n_stable = 0;
};
StableBasis stable_basis(const LinearizedSystem& lin, Cplx sigma, const Vec& eta,
                         const SpectralTol& tol = {});

struct LopatinskiiReport {
  double min_det = 0.0;
  Vec worst_zeta;      // (tau, eta)
  double worst_gamma = 0.0;
  int skipped_glancing = 0;
  int samples = 0;
  bool pass = false;
};

LopatinskiiReport lopatinskii_scan(const LinearizedSystem& lin, const Mat& B, int n_samples,
                                   const std::vector<double>& gammas = {0.0, 0.01, 0.1, 1.0},
                                   double kl_tol = 1e-3, std::uint64_t seed = 13,
                                   const SpectralTol& tol = {});

struct DissipativeReport {
  bool pass = false;
  double margin = 0.0;          // max over kernel generators of E^T S A_d E
  double symmetry_resid = 0.0;  // worst |S A_i - (S A_i)^T|
};

// S must be a Friedrichs symmetrizer: SPD with S A_i symmetric; boundary is
// strictly dissipative when E^T S A_d E < 0 on ker B.
DissipativeReport strictly_dissipative_check(const LinearizedSystem& lin, const Mat& B,
                                             const Mat& S, double tol = 1e-9);

// The quadratic form E^T S A_d E itself (scale-dependent).
double dissipative_form(const LinearizedSystem& lin, const Mat& S, const Vec& E);

// Unique w in E_-(zeta) with B w = g.
CVec boundary_solve(const StableDecomposition& dec, const Mat& B, const CVec& g);

// e^{t A(zeta)} Pi^e_{C^N} for t >= 0 (stable variant) or
// e^{t A(zeta)} (I - Pi^e_{C^N}) for t <= 0.
CMat evanescent_propagator(const StableDecomposition& dec, double t, bool stable_variant = true);

}  // namespace wkb
