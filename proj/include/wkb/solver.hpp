#pragma once

#include <functional>
#include <map>
#include <span>

#include "wkb/lattice.hpp"

namespace wkb {

// Discretization of the slow variables (t, y, x_d): t in [0, T] (nt points),
// y periodic on [-Ly/2, Ly/2) (ny points), x_d in [0, Xd] (nx points, the
// marching direction).
struct SlowGrid {
  double T = 1.0, Ly = 4.0, Xd = 1.0;
  int nt = 64, ny = 32, nx = 48;
  double cfl = 0.9;

  double dt() const { return T / (nt - 1); }
  double dy() const { return Ly / ny; }
  double dx() const { return Xd / (nx - 1); }
  double t(int i) const { return i * dt(); }
  double y(int j) const { return -0.5 * Ly + j * dy(); }
  double x(int k) const { return k * dx(); }
};

// C-infinity cutoff: 1 on [0, V*T], 0 on [2 V*T, inf), monotone between.
std::function<double(double)> cutoff_beta(double T, double Vstar);
// C-infinity lift: 1 at 0, supported in [0, support].
std::function<double(double)> cutoff_chi(double support);

// Transport data of one incoming mode in the x_d marching frame:
// d_x sigma = -a d_t sigma - b . grad_y sigma - couplings. For incoming modes
// a = -1/dxitau > 0.
struct SolverMode {
  ModeKey key;
  double a = 0.0;
  Vec b;             // (1/dxitau) grad_eta tau
  double gamma_self = 0.0;
  Vec K_self;        // per-theta_j components of gamma_self
};

SolverMode make_solver_mode(const LinearizedSystem& lin, const ModeKey& key);

// Complex amplitude field sigma_{lambda, mode}(t, y, x_d), lambda = 1..L
// stored, negative harmonics implied by conjugation (reality) and the zero
// harmonic structurally absent (zero mean).
class Field {
 public:
  Field() = default;
  Field(const SlowGrid& g, int n_modes, int L, bool reality = true);

  const SlowGrid& grid() const { return g_; }
  int n_modes() const { return n_modes_; }
  int L() const { return L_; }
  bool reality() const { return reality_; }

  std::size_t slab_size() const { return static_cast<std::size_t>(n_modes_) * L_ * g_.ny * g_.nt; }
  Cplx* slab(int ix) { return data_.data() + slab_size() * ix; }
  const Cplx* slab(int ix) const { return data_.data() + slab_size() * ix; }

  std::size_t idx(int m, int l, int iy, int it) const {
    return ((static_cast<std::size_t>(m) * L_ + (l - 1)) * g_.ny + iy) * g_.nt + it;
  }
  Cplx& at(int ix, int m, int l, int iy, int it) { return slab(ix)[idx(m, l, iy, it)]; }
  Cplx at(int ix, int m, int l, int iy, int it) const { return slab(ix)[idx(m, l, iy, it)]; }
  // signed harmonic accessor (conjugate for negative lambda, 0 beyond L)
  Cplx get(int ix, int m, int l_signed, int iy, int it) const;

  double l2_norm() const;  // sqrt(sum |sigma|^2 dt dy dx), stored harmonics only

 private:
  SlowGrid g_;
  int n_modes_ = 0, L_ = 0;
  bool reality_ = true;
  std::vector<Cplx> data_;
};

// Boundary data with the same (mode, lambda, y, t) layout as one slab.
using BoundarySlab = std::vector<Cplx>;

// Compactly supported C-infinity bump forcing profile per boundary harmonic n:
// G_n(t, y) = amplitude * B((t-t0)/wt) * B((y-y0)/wy), zero for t <= 0.
struct ForcingMode {
  VecI n;
  CVec amplitude;  // size M
  double t0 = 0.4, wt = 0.3, y0 = 0.0, wy = 1.0;
};

struct BoundaryForcing {
  int M = 0;
  std::vector<ForcingMode> comps;  // canonical n (first nonzero entry > 0)

  // G_n(t,y) including the conjugate pairing G_{-n} = conj(G_n).
  CVec eval(const VecI& n, double t, double y) const;
  double l2_norm_sq(const SlowGrid& g) const;  // sum over +-n of |G_n|_{L^2}^2
};

BoundaryForcing make_forcing(int M, const std::vector<ForcingMode>& comps,
                             const SlowGrid& g);

// The resonant marching system: mode set, transport coefficients, self
// coefficients and the quadratic couplings drawn from the resonance list.
struct ResonantSystem {
  SlowGrid g;
  int L = 8;
  std::vector<SolverMode> modes;
  struct Term {
    int out = 0;           // output mode index
    long lp = 0, lq = 0, lr = 0;
    int pm = 0, qm = 0;
    Vec K1, K2;            // gamma components for (p,q) and (q,p) ordering
  };
  std::vector<std::vector<Term>> terms;  // per output mode
  double Vstar = 1.0;
  std::function<double(double)> beta;    // cutoff multiplying the couplings
  bool use_skew_fd = false;
  double skew_h = 1e-3;
  int threads = 0;

  // i (theta-derivative symbol) applied to the integer harmonic vector v.
  double symbol(double v) const;
};

// Builds the resonant system for the given mode ids of a ResonanceSet.
ResonantSystem make_resonant_system(const LinearizedSystem& lin, const ResonanceSet& set,
                                    const std::vector<int>& mode_ids, const SlowGrid& g,
                                    int L, double Vstar);

// Enforces dx <= cfl * min |dxitau| * dt for the active modes.
void check_cfl(const ResonantSystem& sys);

// One linearized march: transport + couplings with frozen coefficient field V
// (V = nullptr decouples into independent transport equations) and source F
// (may be nullptr). Boundary slab h prescribes sigma at x_d = 0.
Field solve_linearized_resonant(const ResonantSystem& sys, const Field* V, const Field* F,
                                const BoundarySlab& h);

struct PicardTrace {
  std::vector<double> updates;
  int iterations = 0;
};

struct ResonantSolveResult {
  Field U;
  PicardTrace picard;
};

// Picard fixed point of the linearized solves, bounded-high/contracting-low.
ResonantSolveResult solve_resonant_system(const ResonantSystem& sys, const BoundarySlab& h,
                                          double picard_tol = 1e-8, int max_iter = 50);

struct BurgersResult {
  Field S;  // single mode
  int max_slab_iterations = 0;
};

// Per-mode Burgers march (transport + self-interaction), slab-local Picard.
BurgersResult solve_burgers_mode(const SolverMode& mode, double gamma_self,
                                 const BoundarySlab& h, const SlowGrid& g, int L,
                                 double picard_tol = 1e-8, int max_iter = 50,
                                 int threads = 0);

// --- boundary traces ----------------------------------------------------

struct EvanescentTrace {
  VecI n;                   // forcing harmonic
  CVec vec;                 // Pi^e_- (B|E_-)^{-1} amplitude
  ForcingMode shape;        // scalar (t,y) profile parameters
  double mu = 0.0;          // min elliptic decay rate of A(n.zeta)
};

struct TraceBundle {
  // per solver mode: scalar boundary amplitude per harmonic lambda in [1, L]
  std::map<int, std::vector<CMat>> mode_traces;  // mode id -> L matrices (ny x nt)
  std::vector<EvanescentTrace> evanescent;
  double osc_norm_sq = 0.0;  // resonant + per-mode scalar trace mass
  double ev_norm_sq = 0.0;
  double forcing_norm_sq = 0.0;
};

TraceBundle boundary_traces(const LinearizedSystem& lin, const Mat& B,
                            const BoundaryForcing& G, const ResonanceSet& set,
                            const std::vector<int>& mode_ids, const SlowGrid& g, int L,
                            const SpectralTol& tol = {});

// Packs mode traces into a boundary slab for the given mode ordering.
BoundarySlab pack_boundary(const TraceBundle& traces, const std::vector<int>& mode_ids,
                           const SlowGrid& g, int L);

// --- evanescent part -----------------------------------------------------

struct EvanescentPart {
  struct Comp {
    VecI n;
    StableDecomposition dec;
    CVec vec;
    ForcingMode shape;
    double mu = 0.0;
  };
  std::vector<Comp> comps;
  double chi_support = 1.0;

  // U^ev_n(t, y, x_d, psi_d) for one component (complex; the -n partner is
  // the conjugate).
  CVec eval_component(int comp, double t, double y, double xd, double psi) const;
};

EvanescentPart assemble_evanescent(const LinearizedSystem& lin, const Mat& B,
                                   const BoundaryForcing& G, double chi_support,
                                   const SpectralTol& tol = {});

// --- diagnostics ----------------------------------------------------------

// (2 pi)^m sum over modes/harmonics of the discrete L^2(omega_T) pairing at
// slab ix; conjugate harmonics included when the fields carry reality.
double incoming_inner_product(const Field& U, const Field& V, int ix, int m_phases);

struct FiniteSpeedReport {
  double leakage = 0.0;  // mass fraction outside {x_d <= V* t + 2 dx}
  double total = 0.0;
};
FiniteSpeedReport finite_speed_check(const Field& U, double Vstar, int m_phases);

struct EnergyReport {
  std::vector<double> energy;   // <U,U>_inc per slab
  std::vector<double> slabC;    // per-slab constant
  double C = 0.0;               // max over slabs
};
EnergyReport energy_diagnostic(const Field& U, const Field* V, const Field* F, int m_phases);

// Would-be lambda = 0 self-interaction source (must vanish by antisymmetry).
double zero_mode_defect(const ResonantSystem& sys, const Field& U, int ix);

// --- assembled leading profile -------------------------------------------

struct LeadingProfile {
  const LinearizedSystem* lin = nullptr;
  double epsilon = 1e-2;
  std::vector<const Field*> osc_fields;                 // resonant + Burgers
  std::vector<std::vector<SolverMode>> osc_modes;       // mode list per field
  const EvanescentPart* evanescent = nullptr;

  // u^app(t, y, x_d) = eps U1(z, z'.zeta/eps, x_d/eps); real N-vector.
  Vec eval(double t, double y_first, double xd) const;
};

// Phase-aliasing guard: largest phase increment per output cell must stay
// below pi.
void check_epsilon_guard(const LinearizedSystem& lin, const SlowGrid& g, double epsilon);

}  // namespace wkb
