#pragma once

#include <optional>

#include "wkb/system.hpp"

namespace wkb {

// Tolerance knobs shared by the spectral and lattice layers. Defaults follow
// the values pinned in the README.
struct SpectralTol {
  double gap = 1e-7;            // strict-hyperbolicity gap, relative to |(eta,xi)|
  double imag = 1e-9;           // allowed imaginary part of eigenvalues
  double charac = 1e-9;         // characteristic detection band, relative
  double glancing = 1e-8;       // |d_xi tau| below this marks glancing
  double near_glancing = 1e-5;  // reporting band
};

// Eigen-structure of A(eta, xi): branches tau_1 < ... < tau_N with
// (tau_k I + A(eta,xi)) E_k = 0, spectral projectors pi_k and the modified
// projectors pitilde_k = Ad^{-1} pi_k Ad.
struct EigenStructure {
  Vec eta;
  double xi = 0.0;
  Vec taus;     // sorted ascending
  Mat rights;   // columns E_k, unit, deterministic phase
  Mat lefts;    // rows l_k = rows of rights^{-1} (l_k . E_j = delta_kj)
  std::vector<Mat> pi;
  std::vector<Mat> pi_tilde;
};

EigenStructure eigen_structure(const LinearizedSystem& lin, const Vec& eta, double xi,
                               const SpectralTol& tol = {});

enum class FreqTag { Zero, Noncharacteristic, Incoming, Outgoing, Glancing };

struct FrequencyClass {
  FreqTag tag = FreqTag::Noncharacteristic;
  int branch = -1;               // valid when characteristic
  double dxitau = 0.0;           // valid when characteristic
  bool near_glancing = false;
};

// alpha = (tau, eta, xi) packed as a (1+d)-vector.
FrequencyClass classify_frequency(const LinearizedSystem& lin, const Vec& alpha,
                                  const SpectralTol& tol = {});

struct FrequencyOps {
  Mat pi, pi_tilde;
  Mat Q;
  bool characteristic = false;
  int branch = -1;
};

// (pi_alpha, pitilde_alpha, Q_alpha) with Q_alpha L(0,alpha) = I - pi_alpha.
FrequencyOps frequency_operators(const LinearizedSystem& lin, const Vec& alpha,
                                 const SpectralTol& tol = {});

// grad_{eta,xi} tau_k via the eigenvalue perturbation formula.
Vec group_velocity(const EigenStructure& es, const LinearizedSystem& lin, int k);

// V* = 1.05 * max over sampled unit sphere of max_k |grad tau_k|.
double velocity_bound(const LinearizedSystem& lin, int n_samples, std::uint64_t seed = 7);

struct LaxReport {
  double resid_time;           // pitilde A0tilde pi + (1/dxitau) pitilde pi
  std::vector<double> resid_tan;  // per tangential direction i
  double resid_polarized;      // pitilde E + dxitau Ad^{-1} E
  double max() const;
};

LaxReport verify_lax(const EigenStructure& es, const LinearizedSystem& lin, int k,
                     const SpectralTol& tol = {});

struct HyperbolicityReport {
  double min_gap = 0.0;  // relative eigenvalue gap on the unit sphere
  Vec worst_point;
  bool pass = false;
};

HyperbolicityReport check_strict_hyperbolicity(const LinearizedSystem& lin, int n_samples,
                                               std::uint64_t seed = 11,
                                               const SpectralTol& tol = {});

}  // namespace wkb
