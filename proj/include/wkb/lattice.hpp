#pragma once

#include <map>
#include <set>

#include "wkb/boundary.hpp"

namespace wkb {

// Canonical lattice direction: coprime entries, first nonzero entry positive.
struct NormalizedDirection {
  VecI n0;
  long lambda = 0;
};
NormalizedDirection normalize_direction(const VecI& n);

// A characteristic direction lifted from the primitive lattice direction n0:
// root xi0 of det L(0,(n0.zeta, xi)) with its branch, class, polarization
// vector E(n0, xi0) and the projected vector pitilde E. The same E is reused
// for every harmonic lambda (n0, xi0) -> (lambda n0, lambda xi0).
struct ModeKey {
  VecI n0;
  Vec zeta;        // n0 . zeta in R^d
  double xi0 = 0;
  int branch = -1;
  FreqTag cls = FreqTag::Incoming;
  double dxitau = 0;
  Vec E;           // unit, deterministic phase
  Vec pitE;        // pitilde_(n0.zeta, xi0) E
  Mat pit;         // pitilde projector at the lifted frequency
};

struct EllipticRootSummary {
  Cplx xi;
  bool stable = false;
};

struct LiftResult {
  std::vector<ModeKey> modes;  // real roots, sorted by xi0
  std::vector<EllipticRootSummary> elliptic;
};

LiftResult lift_direction(const LinearizedSystem& lin, const VecI& n0,
                          const SpectralTol& tol = {});

// Distance from zeta to the glancing set, generic mode: the glancing manifold
// is sampled by locating the zeros of d_xi tau_k per eta direction.
class GlancingManifold {
 public:
  GlancingManifold(const LinearizedSystem& lin, int n_eta_samples = 256,
                   int n_xi_grid = 4000, double xi_range = 50.0);
  double distance(const Vec& zeta) const;  // zeta = (tau, eta)
  // (eta unit, xi*, branch) triples located on the manifold
  struct GlancingPoint {
    Vec eta;
    double xi;
    int branch;
  };
  const std::vector<GlancingPoint>& points() const { return points_; }

 private:
  std::vector<Vec> line_dirs_;  // unit directions of glancing rays in zeta space
  std::vector<GlancingPoint> points_;
};

using GlancingDistanceFn = std::function<double(const Vec&)>;

struct SmallDivisorFit {
  double c = 0.0;
  double a1 = 0.0;
  int exact_hits = 0;   // lattice points on the glancing set
  int n_records = 0;    // points on the lower envelope used in the fit
  double min_distance = 0.0;
};

SmallDivisorFit small_divisor_fit(const LinearizedSystem& lin, int box_radius,
                                  const GlancingDistanceFn& dist,
                                  const SpectralTol& tol = {});

struct GroupVelocityBoundReport {
  double best_C = 0.0;  // largest C with |d_xi tau| >= C dist^{1/2}/|zeta|^{1/2}
  int violations = 0;   // points where the bound degenerates (dist = 0)
  int n_points = 0;
};

GroupVelocityBoundReport group_velocity_lower_bound_check(
    const LinearizedSystem& lin, int box_radius, const GlancingDistanceFn& dist,
    const SpectralTol& tol = {});

struct GammaResult {
  Cplx gamma;
  double collinearity_residual = 0.0;
};

// Gamma for the resonance lambda_p(alpha_p) + lambda_q(alpha_q) =
// lambda_r(alpha_r): projection of L1tilde(E_p, lambda_q n_q.zeta) E_q onto
// pitilde_r E_r.
GammaResult gamma_coefficient(const LinearizedSystem& lin, const ModeKey& p, long lp,
                              const ModeKey& q, long lq, const ModeKey& r, long lr);

// Per-theta_j components: gamma with q-frequency zeta_j, so that
// gamma(lambda_q) = sum_j (lambda_q n_q)_j K[j]. Used to assemble both the
// spectral symbol (i lambda) and the skew finite-difference symbol
// (i sin(lambda h)/h).
Vec gamma_components(const LinearizedSystem& lin, const ModeKey& p, const ModeKey& q,
                     const ModeKey& r);

struct Resonance {
  long lp = 0, lq = 0, lr = 0;
  int p_mode = -1, q_mode = -1, r_mode = -1;  // indices into ResonanceSet::modes
  Cplx gamma_pq, gamma_pr;
  Vec K1, K2;  // gamma components for the (p,q) and (q,p) orderings
  int type = 0;  // 1, 2, or 0 for self-interaction
  double residual = 0.0;
  bool self = false;
  bool exact = false;  // integer-certified on a linear branch
};

struct ResonanceSet {
  std::vector<ModeKey> modes;  // deduplicated, canonical order
  std::vector<char> in_box;    // direction of modes[i] lies inside the box
  std::vector<Resonance> list;
  std::vector<Resonance> near_misses;
  std::map<std::pair<std::vector<int>, double>, int> mode_index;  // internal
  int box_radius = 0;
  int harmonic_bound = 0;
  double res_tol = 0.0;
};

ResonanceSet enumerate_resonances(const LinearizedSystem& lin, int box_radius,
                                  int harmonic_bound, double res_tol = 1e-9,
                                  const SpectralTol& tol = {}, int threads = 0);

// Type classification against |Gamma_pq + Gamma_pr| <= C0 |(lp n_p, lp xi_p)|.
int classify_resonance_type(const Resonance& res, const ResonanceSet& set, double C0);

// C0 calibration: max(2 max |G_pq+G_pr|/|alpha_p|, 2 / min |pitilde E| over
// resonant incoming directions).
double calibrate_C0(const ResonanceSet& set);

struct Partition {
  std::set<int> F_inc_res;   // mode ids
  std::set<int> F_out_res;
  std::set<int> nonresonant; // incoming, non resonant
  double min_pitE = 0.0;     // over F_inc_res
};

Partition partition_frequency_sets(const ResonanceSet& set, double C0);

struct AssumptionOptions {
  int box_radius = 6;
  int harmonic_bound = 6;
  double res_tol = 1e-9;
  double C0 = -1.0;  // < 0: calibrate
  int hyp_samples = 1000;
  int kl_samples = 2000;
  double kl_tol = 1e-3;
  double a1_max = 1.7;
  GlancingDistanceFn glancing_distance;  // empty: generic sampled manifold
  std::uint64_t seed = 17;
};

CheckReport check_assumptions(const LinearizedSystem& lin, const AssumptionOptions& opt,
                              const SpectralTol& tol = {});

}  // namespace wkb
