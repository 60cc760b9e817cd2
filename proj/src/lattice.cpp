#include "wkb/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

namespace wkb {

namespace {

long gcd_l(long a, long b) {
  a = std::labs(a);
  b = std::labs(b);
  while (b) {
    long t = a % b;
    a = b;
    b = t;
  }
  return a;
}

std::vector<int> key_of(const VecI& n) {
  std::vector<int> k(n.size());
  for (int i = 0; i < n.size(); ++i) k[i] = n[i];
  return k;
}

// Eigenvalues tau_k of -A(eta, xi), ascending. Values only.
Vec taus_at(const LinearizedSystem& lin, const Vec& eta, double xi) {
  Mat A = lin.Asym(eta, xi);
  Eigen::EigenSolver<Mat> solver(A, false);
  Vec t(lin.N);
  for (int i = 0; i < lin.N; ++i) t[i] = -solver.eigenvalues()[i].real();
  std::sort(t.data(), t.data() + lin.N);
  return t;
}

double characteristic_residual(const LinearizedSystem& lin, double tau, const Vec& eta,
                               double xi) {
  double scale = std::sqrt(tau * tau + eta.squaredNorm() + xi * xi);
  if (scale == 0) return std::numeric_limits<double>::infinity();
  Vec t = taus_at(lin, eta, xi);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < lin.N; ++i) best = std::min(best, std::abs(tau - t[i]));
  return best / scale;
}

}  // namespace

NormalizedDirection normalize_direction(const VecI& n) {
  if (n.size() == 0 || n.isZero())
    throw Error(ErrorCode::ZeroVector, "normalize_direction of zero tuple");
  long g = 0;
  for (int i = 0; i < n.size(); ++i) g = gcd_l(g, n[i]);
  int first = 0;
  while (n[first] == 0) ++first;
  long lambda = n[first] > 0 ? g : -g;
  NormalizedDirection out;
  out.n0 = VecI(n.size());
  for (int i = 0; i < n.size(); ++i) out.n0[i] = static_cast<int>(n[i] / lambda);
  out.lambda = lambda;
  return out;
}

LiftResult lift_direction(const LinearizedSystem& lin, const VecI& n0,
                          const SpectralTol& tol) {
  Vec zeta = lattice_frequency(lin, n0);
  if (zeta.norm() < 1e-14)
    throw Error(ErrorCode::ZeroFrequency, "direction maps to zero boundary frequency");
  double tau = zeta[0];
  Vec eta = zeta.segment(1, lin.d - 1);

  Mat M = -(tau * lin.AdInv + lin.AdInv * lin.Asym(eta, 0.0));
  Eigen::EigenSolver<Mat> solver(M);
  CVec xs = solver.eigenvalues();
  double band = std::max(tol.charac * zeta.norm(), 1e-13);

  LiftResult out;
  for (int i = 0; i < lin.N; ++i) {
    if (std::abs(xs[i].imag()) > band) {
      out.elliptic.push_back({xs[i], xs[i].imag() > 0});
      continue;
    }
    double xi = xs[i].real();
    EigenStructure es = eigen_structure(lin, eta, xi, tol);
    int k = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int b = 0; b < lin.N; ++b) {
      double dkb = std::abs(tau - es.taus[b]);
      if (dkb < best) {
        best = dkb;
        k = b;
      }
    }
    ModeKey mk;
    mk.n0 = n0;
    mk.zeta = zeta;
    mk.xi0 = xi;
    mk.branch = k;
    Vec g = group_velocity(es, lin, k);
    mk.dxitau = g[lin.d - 1];
    if (std::abs(mk.dxitau) < tol.glancing) {
      std::string dir;
      for (int j = 0; j < n0.size(); ++j) dir += (j ? "," : "") + std::to_string(n0[j]);
      throw Error(ErrorCode::GlancingOnLattice, "direction (" + dir + ")");
    }
    mk.cls = mk.dxitau < 0 ? FreqTag::Incoming : FreqTag::Outgoing;
    mk.E = es.rights.col(k);
    mk.pit = es.pi_tilde[k];
    mk.pitE = mk.pit * mk.E;
    out.modes.push_back(mk);
  }
  std::sort(out.modes.begin(), out.modes.end(),
            [](const ModeKey& a, const ModeKey& b) { return a.xi0 < b.xi0; });
  std::sort(out.elliptic.begin(), out.elliptic.end(),
            [](const EllipticRootSummary& a, const EllipticRootSummary& b) {
              if (a.xi.real() != b.xi.real()) return a.xi.real() < b.xi.real();
              return a.xi.imag() < b.xi.imag();
            });
  return out;
}

GlancingManifold::GlancingManifold(const LinearizedSystem& lin, int n_eta_samples,
                                   int n_xi_grid, double xi_range) {
  std::vector<Vec> etas;
  if (lin.d == 2) {
    Vec e(1);
    e << 1.0;
    etas.push_back(e);
    e << -1.0;
    etas.push_back(e);
  } else {
    Rng rng(23);
    for (int s = 0; s < n_eta_samples; ++s) etas.push_back(rng.unit_vector(lin.d - 1));
  }
  for (const Vec& eta : etas) {
    for (int k = 0; k < lin.N; ++k) {
      auto dxitau = [&](double xi) {
        EigenStructure es = eigen_structure(lin, eta, xi);
        return group_velocity(es, lin, k)[lin.d - 1];
      };
      double prev_xi = -xi_range;
      double prev_f;
      try {
        prev_f = dxitau(prev_xi);
      } catch (const Error&) {
        continue;
      }
      for (int i = 1; i <= n_xi_grid; ++i) {
        double xi = -xi_range + 2.0 * xi_range * i / n_xi_grid;
        double f;
        try {
          f = dxitau(xi);
        } catch (const Error&) {
          prev_xi = xi;
          continue;
        }
        if (prev_f == 0.0 || prev_f * f < 0) {
          double lo = prev_xi, hi = xi, flo = prev_f;
          for (int it = 0; it < 80; ++it) {
            double mid = 0.5 * (lo + hi);
            double fm = dxitau(mid);
            if (flo * fm <= 0) {
              hi = mid;
            } else {
              lo = mid;
              flo = fm;
            }
          }
          double xig = 0.5 * (lo + hi);
          EigenStructure es = eigen_structure(lin, eta, xig);
          Vec dir(lin.d);
          dir[0] = es.taus[k];
          dir.segment(1, lin.d - 1) = eta;
          if (dir.norm() > 1e-12) {
            line_dirs_.push_back(dir.normalized());
            points_.push_back({eta, xig, k});
          }
        }
        prev_xi = xi;
        prev_f = f;
      }
    }
  }
}

double GlancingManifold::distance(const Vec& zeta) const {
  double best = std::numeric_limits<double>::infinity();
  for (const Vec& u : line_dirs_) {
    double proj = zeta.dot(u);
    double d = (zeta - proj * u).norm();
    best = std::min(best, d);
  }
  return best;
}

namespace {

void box_iterate(int m, int radius, const std::function<void(const VecI&)>& fn) {
  VecI n = VecI::Constant(m, -radius);
  while (true) {
    if (!n.isZero()) fn(n);
    int i = 0;
    while (i < m) {
      if (n[i] < radius) {
        ++n[i];
        break;
      }
      n[i] = -radius;
      ++i;
    }
    if (i == m) break;
  }
}

}  // namespace

SmallDivisorFit small_divisor_fit(const LinearizedSystem& lin, int box_radius,
                                  const GlancingDistanceFn& dist, const SpectralTol&) {
  if (box_radius < 2) throw Error(ErrorCode::ParameterOutOfRange, "box_radius >= 2");
  struct Point {
    double x, y;  // log |zeta|, log dist
  };
  std::vector<Point> pts;
  SmallDivisorFit fit;
  fit.min_distance = std::numeric_limits<double>::infinity();
  box_iterate(lin.m, box_radius, [&](const VecI& n) {
    Vec zeta = lattice_frequency(lin, n);
    if (zeta.norm() < 1e-14) return;
    double d = dist(zeta);
    fit.min_distance = std::min(fit.min_distance, d);
    if (d <= 1e-12 * zeta.norm()) {
      ++fit.exact_hits;
      return;
    }
    pts.push_back({std::log(zeta.norm()), std::log(d)});
  });
  if (fit.exact_hits > 0)
    throw Error(ErrorCode::GlancingOnLattice,
                std::to_string(fit.exact_hits) + " exact glancing lattice points");

  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.x < b.x; });
  // lower envelope: points setting a new running minimum of the distance
  std::vector<Point> rec;
  double running = std::numeric_limits<double>::infinity();
  for (const auto& p : pts) {
    if (p.y < running) {
      running = p.y;
      rec.push_back(p);
    }
  }
  fit.n_records = static_cast<int>(rec.size());
  if (rec.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& p : rec) {
      sx += p.x;
      sy += p.y;
      sxx += p.x * p.x;
      sxy += p.x * p.y;
    }
    double n = static_cast<double>(rec.size());
    double denom = n * sxx - sx * sx;
    double slope = denom != 0 ? (n * sxy - sx * sy) / denom : 0.0;
    fit.a1 = std::max(0.0, -slope);
  } else {
    fit.a1 = 0.0;
  }
  double c = std::numeric_limits<double>::infinity();
  for (const auto& p : pts) c = std::min(c, std::exp(p.y + fit.a1 * p.x));
  fit.c = c;
  return fit;
}

GroupVelocityBoundReport group_velocity_lower_bound_check(
    const LinearizedSystem& lin, int box_radius, const GlancingDistanceFn& dist,
    const SpectralTol& tol) {
  GroupVelocityBoundReport rep;
  rep.best_C = std::numeric_limits<double>::infinity();
  box_iterate(lin.m, box_radius, [&](const VecI& n) {
    NormalizedDirection nd = normalize_direction(n);
    if (nd.lambda != 1) return;  // one lift per primitive direction
    Vec zeta = lattice_frequency(lin, n);
    if (zeta.norm() < 1e-14) return;
    LiftResult lift = lift_direction(lin, n, tol);
    double d = dist(zeta);
    for (const ModeKey& mk : lift.modes) {
      ++rep.n_points;
      if (d <= 0) {
        ++rep.violations;
        continue;
      }
      double ratio = std::abs(mk.dxitau) * std::sqrt(zeta.norm()) / std::sqrt(d);
      rep.best_C = std::min(rep.best_C, ratio);
    }
  });
  return rep;
}

GammaResult gamma_coefficient(const LinearizedSystem& lin, const ModeKey& p, long lp,
                              const ModeKey& q, long lq, const ModeKey& r, long lr) {
  (void)lp;
  (void)lr;
  double pitE2 = r.pitE.squaredNorm();
  if (pitE2 < 1e-20)
    throw Error(ErrorCode::NullProjectedPolarization, "pitilde E_r below tolerance");
  Vec qfreq = static_cast<double>(lq) * q.zeta;
  Vec w = r.pit * (apply_L1_tilde(lin, p.E, qfreq) * q.E);
  double gamma = w.dot(r.pitE) / pitE2;
  double wn = w.norm();
  double resid = wn < 1e-14 ? 0.0 : (w - gamma * r.pitE).norm() / wn;
  return {Cplx(gamma, 0.0), resid};
}

Vec gamma_components(const LinearizedSystem& lin, const ModeKey& p, const ModeKey& q,
                     const ModeKey& r) {
  double pitE2 = r.pitE.squaredNorm();
  if (pitE2 < 1e-20)
    throw Error(ErrorCode::NullProjectedPolarization, "pitilde E_r below tolerance");
  Vec K(lin.m);
  for (int j = 0; j < lin.m; ++j) {
    Vec w = r.pit * (apply_L1_tilde(lin, p.E, lin.zetas[j]) * q.E);
    K[j] = w.dot(r.pitE) / pitE2;
  }
  return K;
}

namespace {

struct RawMatch {
  int s1, s2;        // scaled-mode indices
  std::vector<int> vsum;  // integer sum direction
  double xisum;
  double residual;
  bool near_miss;
};

struct ScaledMode {
  int mode;  // mode table index
  long lambda;
};

}  // namespace

ResonanceSet enumerate_resonances(const LinearizedSystem& lin, int box_radius,
                                  int harmonic_bound, double res_tol,
                                  const SpectralTol& tol, int threads) {
  if (box_radius < 1) throw Error(ErrorCode::ParameterOutOfRange, "box_radius >= 1");
  if (harmonic_bound < 1) throw Error(ErrorCode::ParameterOutOfRange, "harmonic_bound >= 1");

  ResonanceSet set;
  set.box_radius = box_radius;
  set.harmonic_bound = harmonic_bound;
  set.res_tol = res_tol;

  // canonical in-box directions, sorted lexicographically
  std::vector<VecI> dirs;
  box_iterate(lin.m, box_radius, [&](const VecI& n) {
    NormalizedDirection nd = normalize_direction(n);
    if (nd.lambda == 1) dirs.push_back(nd.n0);
  });
  std::sort(dirs.begin(), dirs.end(), [](const VecI& a, const VecI& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(),
                                        b.data() + b.size());
  });

  auto add_direction = [&](const VecI& n0) -> std::vector<int> {
    LiftResult lift = lift_direction(lin, n0, tol);
    std::vector<int> ids;
    for (const ModeKey& mk : lift.modes) {
      int id = static_cast<int>(set.modes.size());
      set.modes.push_back(mk);
      set.in_box.push_back(false);
      set.mode_index[{key_of(n0), mk.xi0}] = id;
      ids.push_back(id);
    }
    return ids;
  };

  std::map<std::vector<int>, std::vector<int>> dir_modes;
  for (const VecI& n0 : dirs) {
    auto ids = add_direction(n0);
    for (int id : ids) set.in_box[id] = true;
    dir_modes[key_of(n0)] = ids;
  }

  std::vector<ScaledMode> scaled;
  for (int mid = 0; mid < static_cast<int>(set.modes.size()); ++mid)
    for (long l = -harmonic_bound; l <= harmonic_bound; ++l)
      if (l != 0) scaled.push_back({mid, l});

  const std::size_t S = scaled.size();
  std::vector<std::vector<RawMatch>> found(S);
  parallel_for(S, [&](std::size_t i) {
    const ScaledMode& a = scaled[i];
    const ModeKey& ma = set.modes[a.mode];
    for (std::size_t j = i + 1; j < S; ++j) {
      const ScaledMode& b = scaled[j];
      if (b.mode == a.mode) continue;  // collinear: self-interaction family
      const ModeKey& mb = set.modes[b.mode];
      VecI v = a.lambda * ma.n0 + b.lambda * mb.n0;
      double xisum = a.lambda * ma.xi0 + b.lambda * mb.xi0;
      Vec zsum = static_cast<double>(a.lambda) * ma.zeta +
                 static_cast<double>(b.lambda) * mb.zeta;
      if (v.isZero() && std::abs(xisum) < 1e-12) continue;  // zero frequency
      double tau = zsum[0];
      Vec eta = zsum.segment(1, lin.d - 1);
      if (std::hypot(eta.norm(), xisum) < 1e-12) continue;  // noncharacteristic (xi A_d)
      double resid = characteristic_residual(lin, tau, eta, xisum);
      if (resid <= 10.0 * res_tol) {
        RawMatch rm;
        rm.s1 = static_cast<int>(i);
        rm.s2 = static_cast<int>(j);
        rm.vsum = key_of(v);
        rm.xisum = xisum;
        rm.residual = resid;
        rm.near_miss = resid > res_tol;
        found[i].push_back(rm);
      }
    }
  }, threads);

  // Segment test: the characteristic variety contains the straight segment
  // between the two frequencies, certifying the match on a linear branch.
  auto exact_on_linear_branch = [&](const Vec& za, double xia, const Vec& zb, double xib) {
    for (double t : {0.5, 0.25}) {
      Vec z = za + t * (zb - za);
      double xi = xia + t * (xib - xia);
      double r = characteristic_residual(lin, z[0], z.segment(1, lin.d - 1), xi);
      if (r > 1e-12) return false;
    }
    return true;
  };

  struct Key {
    long lp, lq, lr;
    int pm, qm, rm;
    bool operator<(const Key& o) const {
      return std::tie(pm, lp, qm, lq, rm, lr) < std::tie(o.pm, o.lp, o.qm, o.lq, o.rm, o.lr);
    }
  };
  std::set<Key> seen;

  for (std::size_t i = 0; i < S; ++i) {
    for (const RawMatch& rm : found[i]) {
      const ScaledMode& a = scaled[rm.s1];
      const ScaledMode& b = scaled[rm.s2];
      VecI v(lin.m);
      for (int c = 0; c < lin.m; ++c) v[c] = rm.vsum[c];
      long lp = a.lambda, lq = b.lambda, lr;
      int pm = a.mode, qm = b.mode, rmode;
      if (v.isZero()) continue;
      NormalizedDirection nd = normalize_direction(v);
      lr = nd.lambda;
      auto it = dir_modes.find(key_of(nd.n0));
      if (it == dir_modes.end()) {
        std::vector<int> ids;
        try {
          ids = add_direction(nd.n0);
        } catch (const Error& e) {
          if (e.code() == ErrorCode::GlancingOnLattice) throw;
          continue;
        }
        it = dir_modes.emplace(key_of(nd.n0), ids).first;
      }
      double xir = rm.xisum / static_cast<double>(lr);
      rmode = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int id : it->second) {
        double dd = std::abs(set.modes[id].xi0 - xir);
        if (dd < best) {
          best = dd;
          rmode = id;
        }
      }
      if (rmode < 0 || best > 1e-6 * std::max(1.0, std::abs(xir))) continue;

      long g = gcd_l(gcd_l(lp, lq), lr);
      lp /= g;
      lq /= g;
      lr /= g;
      if (lr < 0) {
        lp = -lp;
        lq = -lq;
        lr = -lr;
      }
      if (std::tie(qm, lq) < std::tie(pm, lp)) {
        std::swap(pm, qm);
        std::swap(lp, lq);
      }
      Key key{lp, lq, lr, pm, qm, rmode};
      if (!seen.insert(key).second) continue;

      Resonance res;
      res.lp = lp;
      res.lq = lq;
      res.lr = lr;
      res.p_mode = pm;
      res.q_mode = qm;
      res.r_mode = rmode;
      res.residual = rm.residual;
      res.self = false;
      const ModeKey& P = set.modes[pm];
      const ModeKey& Q = set.modes[qm];
      const ModeKey& R = set.modes[rmode];
      if (!rm.near_miss) {
        Vec za = static_cast<double>(lp) * P.zeta;
        Vec zb = static_cast<double>(lq) * Q.zeta;
        res.exact = exact_on_linear_branch(za, lp * P.xi0, zb, lq * Q.xi0);
        res.gamma_pq = gamma_coefficient(lin, P, lp, Q, lq, R, lr).gamma;
        res.gamma_pr = gamma_coefficient(lin, P, lp, R, -lr, Q, -lq).gamma;
        res.K1 = gamma_components(lin, P, Q, R);
        res.K2 = gamma_components(lin, Q, P, R);
        set.list.push_back(res);
      } else {
        set.near_misses.push_back(res);
      }
    }
  }

  // one self-interaction row per in-box mode
  for (int mid = 0; mid < static_cast<int>(set.modes.size()); ++mid) {
    if (!set.in_box[mid]) continue;
    const ModeKey& mk = set.modes[mid];
    Resonance res;
    res.lp = 1;
    res.lq = 1;
    res.lr = 2;
    res.p_mode = res.q_mode = res.r_mode = mid;
    res.self = true;
    res.exact = true;
    res.residual = 0.0;
    res.gamma_pq = gamma_coefficient(lin, mk, 1, mk, 1, mk, 2).gamma;
    res.gamma_pr = gamma_coefficient(lin, mk, 1, mk, -2, mk, -1).gamma;
    res.K1 = gamma_components(lin, mk, mk, mk);
    res.K2 = res.K1;
    set.list.push_back(res);
  }

  std::sort(set.list.begin(), set.list.end(), [](const Resonance& a, const Resonance& b) {
    return std::tie(a.p_mode, a.lp, a.q_mode, a.lq, a.r_mode, a.lr, a.self) <
           std::tie(b.p_mode, b.lp, b.q_mode, b.lq, b.r_mode, b.lr, b.self);
  });
  return set;
}

int classify_resonance_type(const Resonance& res, const ResonanceSet& set, double C0) {
  const ModeKey& P = set.modes[res.p_mode];
  double ap = std::sqrt(static_cast<double>(res.lp * res.lp) *
                        (P.n0.cast<double>().squaredNorm() + P.xi0 * P.xi0));
  double defect = std::abs(res.gamma_pq + res.gamma_pr);
  return defect <= C0 * ap ? 1 : 2;
}

double calibrate_C0(const ResonanceSet& set) {
  double max_ratio = 0.0;
  double min_pitE = std::numeric_limits<double>::infinity();
  for (const Resonance& r : set.list) {
    if (r.self) continue;
    const ModeKey& P = set.modes[r.p_mode];
    double ap = std::sqrt(static_cast<double>(r.lp * r.lp) *
                          (P.n0.cast<double>().squaredNorm() + P.xi0 * P.xi0));
    max_ratio = std::max(max_ratio, std::abs(r.gamma_pq + r.gamma_pr) / ap);
    for (int mid : {r.p_mode, r.q_mode, r.r_mode})
      min_pitE = std::min(min_pitE, set.modes[mid].pitE.norm());
  }
  double c0 = 2.0 * max_ratio;
  if (std::isfinite(min_pitE) && min_pitE > 0) c0 = std::max(c0, 2.0 / min_pitE);
  return std::max(c0, 1e-8);
}

Partition partition_frequency_sets(const ResonanceSet& set, double C0) {
  Partition part;
  for (const Resonance& r : set.list) {
    if (r.self) continue;
    const ModeKey& P = set.modes[r.p_mode];
    const ModeKey& Q = set.modes[r.q_mode];
    const ModeKey& R = set.modes[r.r_mode];
    bool all_in = P.cls == FreqTag::Incoming && Q.cls == FreqTag::Incoming &&
                  R.cls == FreqTag::Incoming;
    bool all_out = P.cls == FreqTag::Outgoing && Q.cls == FreqTag::Outgoing &&
                   R.cls == FreqTag::Outgoing;
    if (all_in) {
      part.F_inc_res.insert(r.p_mode);
      part.F_inc_res.insert(r.q_mode);
      part.F_inc_res.insert(r.r_mode);
    } else if (all_out) {
      part.F_out_res.insert(r.p_mode);
      part.F_out_res.insert(r.q_mode);
      part.F_out_res.insert(r.r_mode);
    } else {
      throw Error(ErrorCode::PartitionClosureViolation,
                  "resonance couples incoming and outgoing modes");
    }
  }
  for (int mid = 0; mid < static_cast<int>(set.modes.size()); ++mid) {
    if (set.modes[mid].cls != FreqTag::Incoming) continue;
    if (!part.F_inc_res.count(mid)) part.nonresonant.insert(mid);
  }
  part.min_pitE = std::numeric_limits<double>::infinity();
  for (int mid : part.F_inc_res)
    part.min_pitE = std::min(part.min_pitE, set.modes[mid].pitE.norm());
  (void)C0;
  return part;
}

CheckReport check_assumptions(const LinearizedSystem& lin, const AssumptionOptions& opt,
                              const SpectralTol& tol) {
  CheckReport rep;

  // A1: noncharacteristic boundary
  {
    double det = std::abs(lin.A[lin.d].determinant());
    double scale = std::max(std::pow(lin.A[lin.d].norm(), lin.N), 1e-300);
    rep.add_margin("A1_noncharacteristic_boundary", det / scale, 1e-12);
  }
  // A2: strict hyperbolicity
  {
    HyperbolicityReport h = check_strict_hyperbolicity(lin, opt.hyp_samples, opt.seed, tol);
    std::string worst = "worst (eta,xi) = (";
    for (int i = 0; i < h.worst_point.size(); ++i)
      worst += (i ? ", " : "") + fmt_g17(h.worst_point[i]);
    worst += ")";
    rep.add_margin("A2_strict_hyperbolicity_min_gap", h.min_gap, tol.gap, worst);
  }
  // A3: uniform Kreiss-Lopatinskii
  try {
    LopatinskiiReport kl = lopatinskii_scan(lin, lin.B, opt.kl_samples, {0.0, 0.01, 0.1, 1.0},
                                            opt.kl_tol, opt.seed + 1, tol);
    std::string worst = "worst zeta = (";
    for (int i = 0; i < kl.worst_zeta.size(); ++i)
      worst += (i ? ", " : "") + fmt_g17(kl.worst_zeta[i]);
    worst += "), gamma = " + fmt_g17(kl.worst_gamma) + ", skipped " +
             std::to_string(kl.skipped_glancing);
    rep.add_margin("A3_uniform_lopatinskii_min_det", kl.min_det, opt.kl_tol, worst);
  } catch (const Error& e) {
    rep.add("A3_uniform_lopatinskii_min_det", 0.0, opt.kl_tol, false, e.what());
  }

  GlancingDistanceFn dist = opt.glancing_distance;
  std::shared_ptr<GlancingManifold> manifold;
  if (!dist) {
    manifold = std::make_shared<GlancingManifold>(lin);
    dist = [manifold](const Vec& z) { return manifold->distance(z); };
  }

  // A4: glancing points are of order exactly two
  {
    if (!manifold) manifold = std::make_shared<GlancingManifold>(lin);
    double min_curv = std::numeric_limits<double>::infinity();
    for (const auto& gp : manifold->points()) {
      double h = 1e-4 * std::max(1.0, std::abs(gp.xi));
      auto dx = [&](double xi) {
        EigenStructure es = eigen_structure(lin, gp.eta, xi, tol);
        return group_velocity(es, lin, gp.branch)[lin.d - 1];
      };
      double dd = (dx(gp.xi + h) - dx(gp.xi - h)) / (2.0 * h);
      min_curv = std::min(min_curv, std::abs(dd));
    }
    if (manifold->points().empty()) min_curv = std::numeric_limits<double>::infinity();
    rep.add_margin("A4_glancing_order_two", min_curv, 1e-6);
  }
  // A5: boundary frequencies Z-independent over the box
  {
    double min_comb = std::numeric_limits<double>::infinity();
    box_iterate(lin.m, std::max(2, opt.box_radius), [&](const VecI& n) {
      Vec z = lattice_frequency(lin, n);
      min_comb = std::min(min_comb, z.norm() / n.cast<double>().norm());
    });
    rep.add_margin("A5_frequency_independence", min_comb, 1e-10);
  }
  // A6: no glancing point on the lattice
  {
    double min_dist = std::numeric_limits<double>::infinity();
    double min_rel = std::numeric_limits<double>::infinity();
    box_iterate(lin.m, opt.box_radius, [&](const VecI& n) {
      Vec z = lattice_frequency(lin, n);
      if (z.norm() < 1e-14) return;
      double d = dist(z);
      min_dist = std::min(min_dist, d);
      min_rel = std::min(min_rel, d / z.norm());
    });
    rep.add_margin("A6_lattice_glancing_exclusion", min_rel, 1e-12,
                   "min dist " + fmt_g17(min_dist));
  }
  // A7: small divisors
  try {
    SmallDivisorFit fit = small_divisor_fit(lin, std::max(2, opt.box_radius), dist, tol);
    rep.add_residual("A7_small_divisor_exponent", fit.a1, opt.a1_max,
                     "c = " + fmt_g17(fit.c));
  } catch (const Error& e) {
    rep.add("A7_small_divisor_exponent", -1.0, opt.a1_max, false, e.what());
  }

  // informational: fitted constant of |d_xi tau| >= C dist^{1/2}/|zeta|^{1/2}
  try {
    GroupVelocityBoundReport gv =
        group_velocity_lower_bound_check(lin, std::min(opt.box_radius, 8), dist, tol);
    rep.add("group_velocity_lower_bound_C", gv.best_C, 0.0, gv.violations == 0,
            std::to_string(gv.n_points) + " lifted modes");
  } catch (const Error& e) {
    rep.add("group_velocity_lower_bound_C", -1.0, 0.0, false, e.what());
  }
  // informational: empirical bound c1 on |e^{t A} Pi^e_-| over the box
  {
    double c1 = 0.0;
    int dirs_measured = 0;
    // the first mixed-region Euler directions appear only at radius 7
    box_iterate(lin.m, std::max(opt.box_radius, 9), [&](const VecI& n) {
      if (normalize_direction(n).lambda != 1) return;
      Vec z = lattice_frequency(lin, n);
      if (z.norm() < 1e-14) return;
      StableDecomposition dec;
      try {
        dec = decompose_stable(lin, z, tol);
      } catch (const Error&) {
        return;
      }
      if (dec.elliptic_stable.empty()) return;
      ++dirs_measured;
      for (double t : {0.0, 0.5, 1.0, 2.0, 4.0})
        c1 = std::max(c1, evanescent_propagator(dec, t, true).norm());
    });
    rep.add("evanescent_propagator_c1", c1, 0.0, std::isfinite(c1),
            std::to_string(dirs_measured) + " mixed directions");
  }

  // A8 / A9: resonance structure
  try {
    ResonanceSet set =
        enumerate_resonances(lin, opt.box_radius, opt.harmonic_bound, opt.res_tol, tol);
    int mixed = 0;
    for (const Resonance& r : set.list) {
      if (r.self) continue;
      FreqTag a = set.modes[r.p_mode].cls;
      FreqTag b = set.modes[r.q_mode].cls;
      FreqTag c = set.modes[r.r_mode].cls;
      bool same = (a == b) && (b == c);
      if (!same) ++mixed;
    }
    rep.add_residual("A8_no_incoming_outgoing_cross_resonance", mixed, 0.0);
    double C0 = opt.C0 > 0 ? opt.C0 : calibrate_C0(set);
    int type2 = 0;
    for (const Resonance& r : set.list)
      if (!r.self && classify_resonance_type(r, set, C0) == 2) ++type2;
    rep.add_residual("A9a_type2_count_in_box", type2, 0.0, "C0 = " + fmt_g17(C0));
    if (mixed == 0) {
      Partition part = partition_frequency_sets(set, C0);
      double bound = part.F_inc_res.empty() ? std::numeric_limits<double>::infinity()
                                            : part.min_pitE;
      rep.add_margin("A9b_pitilde_E_lower_bound", bound, 1.0 / C0);
    } else {
      rep.add("A9b_pitilde_E_lower_bound", 0.0, 0.0, false, "cross resonances present");
    }
  } catch (const Error& e) {
    rep.add("A8_no_incoming_outgoing_cross_resonance", -1.0, 0.0, false, e.what());
    rep.add("A9a_type2_count_in_box", -1.0, 0.0, false, e.what());
    rep.add("A9b_pitilde_E_lower_bound", -1.0, 0.0, false, e.what());
  }
  return rep;
}

}  // namespace wkb
