#include "wkb/solver.hpp"

#include <algorithm>
#include <cmath>

namespace wkb {

namespace {

double ramp01(double s) {
  // exp(-1/s) partition ramp: 0 for s <= 0, 1 for s >= 1
  auto phi = [](double x) { return x > 0 ? std::exp(-1.0 / x) : 0.0; };
  double a = phi(s), b = phi(1.0 - s);
  return a / (a + b);
}

double bump(double s) {
  // C-infinity, compact support [-1, 1], bump(0) = 1
  if (std::abs(s) >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - s * s));
}

}  // namespace

std::function<double(double)> cutoff_beta(double T, double Vstar) {
  if (!(T > 0) || !(Vstar > 0))
    throw Error(ErrorCode::ParameterOutOfRange, "cutoff_beta needs T, V* > 0");
  double a = Vstar * T, b = 2.0 * Vstar * T;
  return [a, b](double x) { return 1.0 - ramp01((x - a) / (b - a)); };
}

std::function<double(double)> cutoff_chi(double support) {
  if (!(support > 0)) throw Error(ErrorCode::ParameterOutOfRange, "chi support > 0");
  double a = 0.5 * support, b = support;
  return [a, b](double x) { return x <= 0 ? 1.0 : 1.0 - ramp01((x - a) / (b - a)); };
}

SolverMode make_solver_mode(const LinearizedSystem& lin, const ModeKey& key) {
  if (key.cls != FreqTag::Incoming)
    throw Error(ErrorCode::ParameterOutOfRange, "solver modes must be incoming");
  SolverMode sm;
  sm.key = key;
  Vec eta = key.zeta.segment(1, lin.d - 1);
  EigenStructure es = eigen_structure(lin, eta, key.xi0);
  Vec g = group_velocity(es, lin, key.branch);
  double dxitau = g[lin.d - 1];
  sm.a = -1.0 / dxitau;
  sm.b = g.head(lin.d - 1) / dxitau;
  sm.K_self = gamma_components(lin, key, key, key);
  sm.gamma_self = 0.0;
  for (int j = 0; j < lin.m; ++j) sm.gamma_self += key.n0[j] * sm.K_self[j];
  return sm;
}

Field::Field(const SlowGrid& g, int n_modes, int L, bool reality)
    : g_(g), n_modes_(n_modes), L_(L), reality_(reality) {
  data_.assign(slab_size() * g.nx, Cplx(0.0, 0.0));
}

Cplx Field::get(int ix, int m, int l_signed, int iy, int it) const {
  if (l_signed == 0) return 0.0;
  int l = std::abs(l_signed);
  if (l > L_) return 0.0;
  Cplx v = at(ix, m, l, iy, it);
  return l_signed > 0 ? v : std::conj(v);
}

double Field::l2_norm() const {
  double s = 0.0;
  for (const Cplx& z : data_) s += std::norm(z);
  return std::sqrt(s * g_.dt() * g_.dy() * g_.dx());
}

CVec BoundaryForcing::eval(const VecI& n, double t, double y) const {
  CVec out = CVec::Zero(M);
  for (const ForcingMode& c : comps) {
    double w = bump((t - c.t0) / c.wt) * bump((y - c.y0) / c.wy);
    if (w == 0.0) continue;
    if ((c.n - n).isZero()) out += w * c.amplitude;
    if ((c.n + n).isZero()) out += w * c.amplitude.conjugate();
  }
  return out;
}

double BoundaryForcing::l2_norm_sq(const SlowGrid& g) const {
  double s = 0.0;
  for (const ForcingMode& c : comps) {
    double mass = 0.0;
    for (int it = 0; it < g.nt; ++it)
      for (int iy = 0; iy < g.ny; ++iy) {
        double w = bump((g.t(it) - c.t0) / c.wt) * bump((g.y(iy) - c.y0) / c.wy);
        mass += w * w;
      }
    s += 2.0 * c.amplitude.squaredNorm() * mass * g.dt() * g.dy();
  }
  return s;
}

BoundaryForcing make_forcing(int M, const std::vector<ForcingMode>& comps,
                             const SlowGrid& g) {
  BoundaryForcing f;
  f.M = M;
  for (ForcingMode c : comps) {
    if (c.n.isZero()) throw Error(ErrorCode::ZeroVector, "forcing harmonic n = 0");
    if (c.amplitude.size() != M)
      throw Error(ErrorCode::DimensionMismatch, "forcing amplitude size");
    int first = 0;
    while (c.n[first] == 0) ++first;
    if (c.n[first] < 0) {
      c.n = -c.n;
      c.amplitude = c.amplitude.conjugate();
    }
    if (!(c.wt > 0) || !(c.wy > 0))
      throw Error(ErrorCode::ParameterOutOfRange, "forcing bump widths must be positive");
    if (c.t0 - c.wt < 0)
      throw Error(ErrorCode::ParameterOutOfRange,
                  "forcing must vanish for t <= 0 (t0 - wt < 0)");
    if (c.y0 - c.wy <= -0.5 * g.Ly || c.y0 + c.wy >= 0.5 * g.Ly)
      throw Error(ErrorCode::ParameterOutOfRange,
                  "forcing support must stay away from the y wrap");
    f.comps.push_back(c);
  }
  return f;
}

double ResonantSystem::symbol(double v) const {
  if (!use_skew_fd) return v;
  return std::sin(skew_h * v) / skew_h;
}

ResonantSystem make_resonant_system(const LinearizedSystem& lin, const ResonanceSet& set,
                                    const std::vector<int>& mode_ids, const SlowGrid& g,
                                    int L, double Vstar) {
  if (lin.d != 2)
    throw Error(ErrorCode::DimensionMismatch, "profile solver handles d = 2 grids");
  ResonantSystem sys;
  sys.g = g;
  sys.L = L;
  sys.Vstar = Vstar;
  sys.beta = cutoff_beta(g.T, Vstar);
  std::map<int, int> id_to_local;
  for (std::size_t i = 0; i < mode_ids.size(); ++i) {
    sys.modes.push_back(make_solver_mode(lin, set.modes[mode_ids[i]]));
    id_to_local[mode_ids[i]] = static_cast<int>(i);
  }
  sys.terms.resize(mode_ids.size());
  for (const Resonance& r : set.list) {
    if (r.self) continue;
    auto po = id_to_local.find(r.p_mode);
    auto qo = id_to_local.find(r.q_mode);
    auto ro = id_to_local.find(r.r_mode);
    if (po == id_to_local.end() || qo == id_to_local.end() || ro == id_to_local.end())
      continue;  // coupling leaves the truncated mode set
    ResonantSystem::Term t;
    t.out = ro->second;
    t.pm = po->second;
    t.qm = qo->second;
    t.lp = r.lp;
    t.lq = r.lq;
    t.lr = r.lr;
    t.K1 = r.K1;
    t.K2 = r.K2;
    sys.terms[t.out].push_back(t);
  }
  return sys;
}

void check_cfl(const ResonantSystem& sys) {
  for (const SolverMode& m : sys.modes) {
    double lim = sys.g.cfl * std::abs(1.0 / m.a) * sys.g.dt();
    if (sys.g.dx() > lim)
      throw Error(ErrorCode::CFLViolation,
                  "dx = " + fmt_g17(sys.g.dx()) + " exceeds cfl |dxitau| dt = " + fmt_g17(lim));
  }
}

namespace {

// One quadratic contribution to an output (mode, lambda) row:
// i * coef * omega(m_w, l_w) * sigma(m_s, l_s).
struct Contrib {
  double coef;
  int m_w, l_w, m_s, l_s;
};

struct Prepared {
  int M, L, ny, nt;
  std::size_t row_len;
  std::vector<std::vector<Contrib>> rows;  // per (m*L + l - 1)
  double max_abs_coef = 0.0;
};

Prepared prepare(const ResonantSystem& sys) {
  Prepared P;
  P.M = static_cast<int>(sys.modes.size());
  P.L = sys.L;
  P.ny = sys.g.ny;
  P.nt = sys.g.nt;
  P.row_len = static_cast<std::size_t>(P.ny) * P.nt;
  P.rows.resize(static_cast<std::size_t>(P.M) * P.L);
  const int L = sys.L;
  for (int m = 0; m < P.M; ++m) {
    const SolverMode& sm = sys.modes[m];
    for (int l = 1; l <= L; ++l) {
      auto& row = P.rows[m * L + (l - 1)];
      for (int l2 = -L; l2 <= L; ++l2) {
        if (l2 == 0) continue;
        int l1 = l - l2;
        if (l1 == 0 || l1 < -L || l1 > L) continue;
        double coef = 0.0;
        for (int j = 0; j < sm.K_self.size(); ++j)
          coef += sys.symbol(static_cast<double>(l2) * sm.key.n0[j]) * sm.K_self[j];
        row.push_back({coef, m, l1, m, l2});
      }
    }
  }
  for (int out = 0; out < P.M; ++out) {
    for (const auto& t : sys.terms[out]) {
      const SolverMode& pmode = sys.modes[t.pm];
      const SolverMode& qmode = sys.modes[t.qm];
      for (long ell = 1; ell * t.lr <= L; ++ell) {
        long lo = ell * t.lr;
        long lpp = ell * t.lp, lqq = ell * t.lq;
        if (std::labs(lpp) > L || std::labs(lqq) > L) continue;
        double G1 = 0.0, G2 = 0.0;
        for (int j = 0; j < t.K1.size(); ++j) {
          G1 += sys.symbol(static_cast<double>(lqq) * qmode.key.n0[j]) * t.K1[j];
          G2 += sys.symbol(static_cast<double>(lpp) * pmode.key.n0[j]) * t.K2[j];
        }
        auto& row = P.rows[out * L + (static_cast<int>(lo) - 1)];
        row.push_back({G1, t.pm, static_cast<int>(lpp), t.qm, static_cast<int>(lqq)});
        row.push_back({G2, t.qm, static_cast<int>(lqq), t.pm, static_cast<int>(lpp)});
      }
    }
  }
  for (const auto& row : P.rows) {
    double s = 0.0;
    for (const auto& c : row) s += std::abs(c.coef);
    P.max_abs_coef = std::max(P.max_abs_coef, s);
  }
  return P;
}

inline const Cplx* row_ptr(const Cplx* slab, int m, int l, int ny, int nt, int L) {
  return slab + (static_cast<std::size_t>(m) * L + (l - 1)) * ny * nt;
}

// out += i * coef * w * s over one (ny*nt) row, with optional conjugations.
void accumulate_pair(Cplx* out, double coef, const Cplx* w, bool wc, const Cplx* s, bool sc,
                     std::size_t n) {
  for (std::size_t p = 0; p < n; ++p) {
    Cplx a = wc ? std::conj(w[p]) : w[p];
    Cplx b = sc ? std::conj(s[p]) : s[p];
    Cplx prod = a * b;
    out[p] += Cplx(-coef * prod.imag(), coef * prod.real());
  }
}

// Reaction right-hand side on one slab:
// out = -b . D_y sigma - beta * (quadratic couplings with coefficient omega) + f
void reaction_rhs(const ResonantSystem& sys, const Prepared& P, const Cplx* sigma,
                  const Cplx* omega, const Cplx* f, double beta, Cplx* out) {
  const int M = P.M, L = P.L, ny = P.ny, nt = P.nt;
  const double dy = sys.g.dy();
  parallel_for(static_cast<std::size_t>(M) * L, [&](std::size_t rowid) {
    int m = static_cast<int>(rowid) / L;
    int l = static_cast<int>(rowid) % L + 1;
    Cplx* o = out + rowid * P.row_len;
    const Cplx* srow = row_ptr(sigma, m, l, ny, nt, L);
    const double bcoef = sys.modes[m].b.size() ? sys.modes[m].b[0] : 0.0;
    // centered y derivative, periodic
    for (int iy = 0; iy < ny; ++iy) {
      const Cplx* up = srow + ((iy + 1) % ny) * nt;
      const Cplx* dn = srow + ((iy + ny - 1) % ny) * nt;
      Cplx* orow = o + static_cast<std::size_t>(iy) * nt;
      double c = -bcoef / (2.0 * dy);
      for (int it = 0; it < nt; ++it) orow[it] = c * (up[it] - dn[it]);
    }
    if (omega && beta != 0.0) {
      for (const Contrib& c : P.rows[rowid]) {
        const Cplx* w = row_ptr(omega, c.m_w, std::abs(c.l_w), ny, nt, L);
        const Cplx* s = row_ptr(sigma, c.m_s, std::abs(c.l_s), ny, nt, L);
        accumulate_pair(o, -beta * c.coef, w, c.l_w < 0, s, c.l_s < 0, P.row_len);
      }
    }
    if (f) {
      const Cplx* frow = f + rowid * P.row_len;
      for (std::size_t p = 0; p < P.row_len; ++p) o[p] += frow[p];
    }
  }, sys.threads);
}

// Semi-Lagrangian shift in t by a*dx (linear interpolation; equals the
// first-order upwind step for shifts below one cell, exact on aligned grids).
void shift_t(const ResonantSystem& sys, const Cplx* in, Cplx* out) {
  const int M = static_cast<int>(sys.modes.size());
  const int L = sys.L, ny = sys.g.ny, nt = sys.g.nt;
  const double dt = sys.g.dt(), dx = sys.g.dx();
  parallel_for(static_cast<std::size_t>(M) * L, [&](std::size_t rowid) {
    int m = static_cast<int>(rowid) / L;
    double s = sys.modes[m].a * dx / dt;
    int k = static_cast<int>(std::floor(s));
    double fr = s - k;
    const Cplx* irow = in + rowid * static_cast<std::size_t>(ny) * nt;
    Cplx* orow = out + rowid * static_cast<std::size_t>(ny) * nt;
    for (int iy = 0; iy < ny; ++iy) {
      const Cplx* iv = irow + static_cast<std::size_t>(iy) * nt;
      Cplx* ov = orow + static_cast<std::size_t>(iy) * nt;
      for (int it = 0; it < nt; ++it) {
        int j0 = it - k, j1 = it - k - 1;
        Cplx v0 = j0 >= 0 && j0 < nt ? iv[j0] : Cplx(0, 0);
        Cplx v1 = j1 >= 0 && j1 < nt ? iv[j1] : Cplx(0, 0);
        ov[it] = (1.0 - fr) * v0 + fr * v1;
      }
    }
  }, sys.threads);
}

double slab_max_abs(const Cplx* s, std::size_t n) {
  double m = 0.0;
  for (std::size_t p = 0; p < n; ++p) m = std::max(m, std::abs(s[p]));
  return m;
}

}  // namespace

Field solve_linearized_resonant(const ResonantSystem& sys, const Field* V, const Field* F,
                                const BoundarySlab& h) {
  check_cfl(sys);
  const int M = static_cast<int>(sys.modes.size());
  Field U(sys.g, M, sys.L, true);
  if (h.size() != U.slab_size())
    throw Error(ErrorCode::GridMismatch, "boundary slab size");
  std::copy(h.begin(), h.end(), U.slab(0));

  Prepared P = prepare(sys);
  const std::size_t S = U.slab_size();
  std::vector<Cplx> shifted(S), k1(S), mid(S), k2(S);
  const double dx = sys.g.dx();
  for (int ix = 0; ix + 1 < sys.g.nx; ++ix) {
    double x0 = sys.g.x(ix), x1 = sys.g.x(ix + 1);
    shift_t(sys, U.slab(ix), shifted.data());
    const Cplx* V0 = V ? V->slab(ix) : nullptr;
    const Cplx* V1 = V ? V->slab(ix + 1) : nullptr;
    const Cplx* F0 = F ? F->slab(ix) : nullptr;
    const Cplx* F1 = F ? F->slab(ix + 1) : nullptr;
    if (V) {
      double wmax = std::max(slab_max_abs(V0, S), slab_max_abs(V1, S));
      if (P.max_abs_coef * wmax * dx > 4.0)
        throw Error(ErrorCode::UnboundedCoupling,
                    "per-step resonance operator norm " +
                        fmt_g17(P.max_abs_coef * wmax * dx));
    }
    reaction_rhs(sys, P, shifted.data(), V0, F0, sys.beta(x0), k1.data());
    for (std::size_t p = 0; p < S; ++p) mid[p] = shifted[p] + dx * k1[p];
    reaction_rhs(sys, P, mid.data(), V1, F1, sys.beta(x1), k2.data());
    Cplx* out = U.slab(ix + 1);
    for (std::size_t p = 0; p < S; ++p)
      out[p] = shifted[p] + 0.5 * dx * (k1[p] + k2[p]);
  }
  return U;
}

ResonantSolveResult solve_resonant_system(const ResonantSystem& sys, const BoundarySlab& h,
                                          double picard_tol, int max_iter) {
  const int M = static_cast<int>(sys.modes.size());
  Field V(sys.g, M, sys.L, true);
  for (int ix = 0; ix < sys.g.nx; ++ix) std::copy(h.begin(), h.end(), V.slab(ix));

  ResonantSolveResult res;
  double prev_update = std::numeric_limits<double>::infinity();
  int grow = 0;
  for (int it = 0; it < max_iter; ++it) {
    Field U = solve_linearized_resonant(sys, &V, nullptr, h);
    double diff = 0.0, ref = 0.0;
    const std::size_t n = U.slab_size() * sys.g.nx;
    const Cplx* a = U.slab(0);
    const Cplx* b = V.slab(0);
    for (std::size_t p = 0; p < n; ++p) {
      diff += std::norm(a[p] - b[p]);
      ref += std::norm(a[p]);
    }
    double update = std::sqrt(diff) / std::max(std::sqrt(ref), 1e-300);
    if (ref == 0.0) update = 0.0;
    res.picard.updates.push_back(update);
    res.picard.iterations = it + 1;
    V = std::move(U);
    if (update <= picard_tol) {
      res.U = std::move(V);
      return res;
    }
    if (update > prev_update * 1.2)
      ++grow;
    else
      grow = 0;
    if (grow >= 3 || update > 1e6)
      throw Error(ErrorCode::PicardDivergence,
                  "update " + fmt_g17(update) + " after " + std::to_string(it + 1) +
                      " iterations");
    prev_update = update;
  }
  throw Error(ErrorCode::PicardDivergence,
              "no contraction to " + fmt_g17(picard_tol) + " within " +
                  std::to_string(max_iter) + " iterations");
}

BurgersResult solve_burgers_mode(const SolverMode& mode, double gamma_self,
                                 const BoundarySlab& h, const SlowGrid& g, int L,
                                 double picard_tol, int max_iter, int threads) {
  ResonantSystem sys;
  sys.g = g;
  sys.L = L;
  sys.modes = {mode};
  sys.modes[0].gamma_self = gamma_self;
  // single-phase spectral symbol: coefficient l2 * gamma_self
  sys.modes[0].K_self = Vec::Ones(1) * gamma_self;
  sys.modes[0].key.n0 = VecI::Ones(1);
  sys.terms.resize(1);
  sys.Vstar = std::abs(1.0 / mode.a);
  sys.beta = [](double) { return 1.0; };
  sys.threads = threads;
  check_cfl(sys);

  Field S(g, 1, L, true);
  if (h.size() != S.slab_size()) throw Error(ErrorCode::GridMismatch, "boundary slab size");
  std::copy(h.begin(), h.end(), S.slab(0));

  Prepared P = prepare(sys);
  const std::size_t n = S.slab_size();
  std::vector<Cplx> shifted(n), k1(n), mid(n), k2(n), cur(n), next(n);
  const double dx = g.dx();
  BurgersResult out;
  for (int ix = 0; ix + 1 < g.nx; ++ix) {
    double maxs = slab_max_abs(S.slab(ix), n);
    double guard = static_cast<double>(L) * maxs * std::abs(gamma_self) * (g.Xd - g.x(ix));
    if (guard > 0.5)
      throw Error(ErrorCode::ShockProximity, "gradient guard " + fmt_g17(guard));

    shift_t(sys, S.slab(ix), shifted.data());
    reaction_rhs(sys, P, shifted.data(), S.slab(ix), nullptr, 1.0, k1.data());
    for (std::size_t p = 0; p < n; ++p) mid[p] = shifted[p] + dx * k1[p];
    // slab-local Picard on the stage-2 coefficient
    std::copy(mid.begin(), mid.end(), cur.begin());
    int iters = 0;
    while (true) {
      reaction_rhs(sys, P, mid.data(), cur.data(), nullptr, 1.0, k2.data());
      double diff = 0.0, ref = 0.0;
      for (std::size_t p = 0; p < n; ++p) {
        next[p] = shifted[p] + 0.5 * dx * (k1[p] + k2[p]);
        diff += std::norm(next[p] - cur[p]);
        ref += std::norm(next[p]);
      }
      std::swap(cur, next);
      ++iters;
      if (ref == 0.0 || std::sqrt(diff) <= picard_tol * std::max(std::sqrt(ref), 1e-300))
        break;
      if (iters >= max_iter)
        throw Error(ErrorCode::PicardDivergence,
                    "slab fixed point stalled at x = " + fmt_g17(g.x(ix)));
    }
    out.max_slab_iterations = std::max(out.max_slab_iterations, iters);
    std::copy(cur.begin(), cur.end(), S.slab(ix + 1));
  }
  out.S = std::move(S);
  return out;
}

TraceBundle boundary_traces(const LinearizedSystem& lin, const Mat& B,
                            const BoundaryForcing& G, const ResonanceSet& set,
                            const std::vector<int>& mode_ids, const SlowGrid& g, int L,
                            const SpectralTol& tol) {
  TraceBundle tb;
  tb.forcing_norm_sq = G.l2_norm_sq(g);

  auto has_harmonic = [&](const VecI& n) {
    for (const ForcingMode& c : G.comps)
      if ((c.n - n).isZero() || (c.n + n).isZero()) return true;
    return false;
  };

  for (int mid : mode_ids) {
    const ModeKey& mk = set.modes[mid];
    std::vector<CMat> lam_traces(L);
    for (int l = 1; l <= L; ++l) lam_traces[l - 1] = CMat::Zero(g.ny, g.nt);
    for (int l = 1; l <= L; ++l) {
      VecI n = l * mk.n0;
      if (!has_harmonic(n)) continue;
      Vec zeta = lattice_frequency(lin, n);
      StableDecomposition dec = decompose_stable(lin, zeta, tol);
      // incoming root matching l * xi0
      double target = l * mk.xi0;
      int best = -1;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < dec.incoming.size(); ++r) {
        double dd = std::abs(dec.roots[dec.incoming[r]].xi.real() - target);
        if (dd < bd) {
          bd = dd;
          best = static_cast<int>(r);
        }
      }
      if (best < 0) continue;
      CMat Wmat = dec.Eminus * (B.cast<Cplx>() * dec.Eminus).inverse();
      Eigen::RowVectorXcd row = mk.E.cast<Cplx>().transpose() * (dec.Pi_j(best) * Wmat);
      for (int iy = 0; iy < g.ny; ++iy)
        for (int it = 0; it < g.nt; ++it) {
          CVec gn = G.eval(n, g.t(it), g.y(iy));
          lam_traces[l - 1](iy, it) = (row * gn)(0, 0);
        }
    }
    double mass = 0.0;
    for (int l = 1; l <= L; ++l) mass += lam_traces[l - 1].squaredNorm();
    tb.osc_norm_sq += 2.0 * mass * g.dt() * g.dy();
    tb.mode_traces[mid] = std::move(lam_traces);
  }

  for (const ForcingMode& c : G.comps) {
    Vec zeta = lattice_frequency(lin, c.n);
    StableDecomposition dec = decompose_stable(lin, zeta, tol);
    CMat Wmat = dec.Eminus * (B.cast<Cplx>() * dec.Eminus).inverse();
    EvanescentTrace ev;
    ev.n = c.n;
    ev.vec = dec.Pi_e_minus * (Wmat * c.amplitude);
    ev.shape = c;
    ev.mu = std::isfinite(dec.mu_decay) ? dec.mu_decay : 0.0;
    double mass = 0.0;
    for (int it = 0; it < g.nt; ++it)
      for (int iy = 0; iy < g.ny; ++iy) {
        double w = bump((g.t(it) - c.t0) / c.wt) * bump((g.y(iy) - c.y0) / c.wy);
        mass += w * w;
      }
    tb.ev_norm_sq += 2.0 * ev.vec.squaredNorm() * mass * g.dt() * g.dy();
    tb.evanescent.push_back(std::move(ev));
  }
  return tb;
}

BoundarySlab pack_boundary(const TraceBundle& traces, const std::vector<int>& mode_ids,
                           const SlowGrid& g, int L) {
  BoundarySlab h(static_cast<std::size_t>(mode_ids.size()) * L * g.ny * g.nt, Cplx(0, 0));
  for (std::size_t m = 0; m < mode_ids.size(); ++m) {
    auto it = traces.mode_traces.find(mode_ids[m]);
    if (it == traces.mode_traces.end()) continue;
    for (int l = 1; l <= L; ++l)
      for (int iy = 0; iy < g.ny; ++iy)
        for (int itt = 0; itt < g.nt; ++itt)
          h[((m * L + (l - 1)) * g.ny + iy) * g.nt + itt] = it->second[l - 1](iy, itt);
  }
  return h;
}

EvanescentPart assemble_evanescent(const LinearizedSystem& lin, const Mat& B,
                                   const BoundaryForcing& G, double chi_support,
                                   const SpectralTol& tol) {
  EvanescentPart part;
  part.chi_support = chi_support;
  for (const ForcingMode& c : G.comps) {
    Vec zeta = lattice_frequency(lin, c.n);
    EvanescentPart::Comp comp;
    comp.n = c.n;
    comp.dec = decompose_stable(lin, zeta, tol);
    CMat Wmat = comp.dec.Eminus * (B.cast<Cplx>() * comp.dec.Eminus).inverse();
    comp.vec = comp.dec.Pi_e_minus * (Wmat * c.amplitude);
    comp.shape = c;
    comp.mu = std::isfinite(comp.dec.mu_decay) ? comp.dec.mu_decay : 0.0;
    part.comps.push_back(std::move(comp));
  }
  return part;
}

CVec EvanescentPart::eval_component(int comp, double t, double y, double xd,
                                    double psi) const {
  const Comp& c = comps[comp];
  double chi = cutoff_chi(chi_support)(xd);
  double w = bump((t - c.shape.t0) / c.shape.wt) * bump((y - c.shape.y0) / c.shape.wy);
  if (chi == 0.0 || w == 0.0) return CVec::Zero(c.vec.size());
  CMat prop = evanescent_propagator(c.dec, psi, true);
  return chi * w * (prop * c.vec);
}

double incoming_inner_product(const Field& U, const Field& V, int ix, int m_phases) {
  if (U.n_modes() != V.n_modes() || U.L() != V.L() || U.grid().nt != V.grid().nt ||
      U.grid().ny != V.grid().ny)
    throw Error(ErrorCode::GridMismatch, "incoming_inner_product fields");
  const std::size_t n = U.slab_size();
  const Cplx* a = U.slab(ix);
  const Cplx* b = V.slab(ix);
  Cplx s = 0.0;
  for (std::size_t p = 0; p < n; ++p) s += std::conj(a[p]) * b[p];
  double factor = U.reality() && V.reality() ? 2.0 : 1.0;
  double tw = std::pow(2.0 * M_PI, m_phases) * U.grid().dt() * U.grid().dy();
  return factor * tw * s.real();
}

FiniteSpeedReport finite_speed_check(const Field& U, double Vstar, int m_phases) {
  FiniteSpeedReport rep;
  const SlowGrid& g = U.grid();
  double leak = 0.0, total = 0.0;
  for (int ix = 0; ix < g.nx; ++ix) {
    const Cplx* s = U.slab(ix);
    for (int m = 0; m < U.n_modes(); ++m)
      for (int l = 1; l <= U.L(); ++l)
        for (int iy = 0; iy < g.ny; ++iy)
          for (int it = 0; it < g.nt; ++it) {
            double v = std::norm(s[U.idx(m, l, iy, it)]);
            total += v;
            if (g.x(ix) > Vstar * g.t(it) + 2.0 * g.dx()) leak += v;
          }
  }
  (void)m_phases;
  rep.total = total;
  rep.leakage = total > 0 ? leak / total : 0.0;
  return rep;
}

EnergyReport energy_diagnostic(const Field& U, const Field* V, const Field* F,
                               int m_phases) {
  EnergyReport rep;
  const SlowGrid& g = U.grid();
  rep.energy.resize(g.nx);
  for (int ix = 0; ix < g.nx; ++ix)
    rep.energy[ix] = incoming_inner_product(U, U, ix, m_phases);
  double vnorm = 0.0;
  if (V)
    for (int ix = 0; ix < g.nx; ++ix)
      vnorm = std::max(vnorm, std::sqrt(std::max(0.0, incoming_inner_product(*V, *V, ix, m_phases))));
  rep.slabC.assign(g.nx - 1, 0.0);
  rep.C = 0.0;
  for (int ix = 0; ix + 1 < g.nx; ++ix) {
    double d = (rep.energy[ix + 1] - rep.energy[ix]) / g.dx();
    double fterm = F ? incoming_inner_product(*F, *F, ix, m_phases) : 0.0;
    double denom = fterm + (1.0 + vnorm) * rep.energy[ix];
    rep.slabC[ix] = denom > 1e-300 ? std::max(0.0, d) / denom : 0.0;
    rep.C = std::max(rep.C, rep.slabC[ix]);
  }
  return rep;
}

double zero_mode_defect(const ResonantSystem& sys, const Field& U, int ix) {
  double worst = 0.0;
  const SlowGrid& g = sys.g;
  for (std::size_t m = 0; m < sys.modes.size(); ++m) {
    const SolverMode& sm = sys.modes[m];
    for (int iy = 0; iy < g.ny; ++iy)
      for (int it = 0; it < g.nt; ++it) {
        Cplx acc = 0.0;
        for (int l2 = -sys.L; l2 <= sys.L; ++l2) {
          if (l2 == 0) continue;
          double coef = 0.0;
          for (int j = 0; j < sm.K_self.size(); ++j)
            coef += sys.symbol(static_cast<double>(l2) * sm.key.n0[j]) * sm.K_self[j];
          Cplx w = U.get(ix, static_cast<int>(m), -l2, iy, it);
          Cplx s = U.get(ix, static_cast<int>(m), l2, iy, it);
          acc += Cplx(0.0, coef) * w * s;
        }
        worst = std::max(worst, std::abs(acc));
      }
  }
  return worst;
}

Vec LeadingProfile::eval(double t, double y_first, double xd) const {
  const LinearizedSystem& L = *lin;
  Vec theta(L.m);
  for (int j = 0; j < L.m; ++j)
    theta[j] = (t * L.zetas[j][0] + y_first * L.zetas[j][1]) / epsilon;
  double psi = xd / epsilon;
  Vec u = Vec::Zero(L.N);
  for (std::size_t fidx = 0; fidx < osc_fields.size(); ++fidx) {
    const Field& F = *osc_fields[fidx];
    const SlowGrid& g = F.grid();
    int it = static_cast<int>(std::lround(t / g.dt()));
    int iy = static_cast<int>(std::lround((y_first + 0.5 * g.Ly) / g.dy()));
    int ix = static_cast<int>(std::lround(xd / g.dx()));
    if (it < 0 || it >= g.nt || ix < 0 || ix >= g.nx)
      throw Error(ErrorCode::GridMismatch, "evaluation point off the field grid");
    iy = ((iy % g.ny) + g.ny) % g.ny;
    for (std::size_t m = 0; m < osc_modes[fidx].size(); ++m) {
      const SolverMode& sm = osc_modes[fidx][m];
      double phase = sm.key.xi0 * psi;
      for (int j = 0; j < L.m; ++j) phase += sm.key.n0[j] * theta[j];
      for (int l = 1; l <= F.L(); ++l) {
        Cplx amp = F.at(ix, static_cast<int>(m), l, iy, it);
        double c = std::cos(l * phase), s = std::sin(l * phase);
        u += 2.0 * (amp.real() * c - amp.imag() * s) * sm.key.E;
      }
    }
  }
  if (evanescent) {
    for (std::size_t cidx = 0; cidx < evanescent->comps.size(); ++cidx) {
      CVec val = evanescent->eval_component(static_cast<int>(cidx), t, y_first, xd, psi);
      double phase = 0.0;
      for (int j = 0; j < L.m; ++j) phase += evanescent->comps[cidx].n[j] * theta[j];
      Cplx ph(std::cos(phase), std::sin(phase));
      for (int c = 0; c < L.N; ++c) u[c] += 2.0 * (ph * val[c]).real();
    }
  }
  return epsilon * u;
}

void check_epsilon_guard(const LinearizedSystem& lin, const SlowGrid& g, double epsilon) {
  if (!(epsilon > 0)) throw Error(ErrorCode::ParameterOutOfRange, "epsilon > 0");
  double worst = 0.0;
  for (const Vec& z : lin.zetas)
    worst = std::max(worst, std::abs(z[0]) * g.dt() + z.segment(1, lin.d - 1).norm() * g.dy());
  if (worst / epsilon > M_PI)
    throw Error(ErrorCode::EpsilonTooSmallForGrid,
                "phase step per cell " + fmt_g17(worst / epsilon) + " exceeds pi");
}

}  // namespace wkb
