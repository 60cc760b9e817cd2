#include <doctest.h>

#include "oracles.hpp"
#include "wkb/euler2d.hpp"
#include "wkb/lattice.hpp"

using namespace wkb;

namespace {

LinearizedSystem euler_lin(const EulerParams& ep = EulerParams{}) {
  return linearize(build_euler(ep));
}

VecI n2(int a, int b) {
  VecI n(2);
  n << a, b;
  return n;
}

GlancingDistanceFn euler_dist(const EulerParams& ep) {
  return [ep](const Vec& z) { return euler_glancing_distance_point(ep, z[0], z[1]); };
}

// two-branch system with linear roots xi = +-tau: A_1 = 0, A_2 = diag(-1, 1)
LinearizedSystem two_branch_lin() {
  HyperbolicSystem sys;
  sys.d = 2;
  sys.N = 2;
  sys.m = 2;
  sys.coeffs = [](int i, const Vec&) -> Mat {
    Mat A = Mat::Zero(2, 2);
    if (i == 2) {
      A(0, 0) = -1.0;
      A(1, 1) = 1.0;
    }
    return A;
  };
  sys.B = Mat(1, 2);
  sys.B << 1.0, 0.0;  // p = 1 positive eigenvalue of A_2
  // tau components chosen so every box-2 direction has 3 n1 + n2 != 0
  sys.zetas.resize(2);
  sys.zetas[0] = Vec(2);
  sys.zetas[0] << 1.0, 0.25;
  sys.zetas[1] = Vec(2);
  sys.zetas[1] << 1.0 / 3.0, 1.0;
  return linearize(sys);
}

}  // namespace

TEST_CASE("normalize_direction") {
  auto a = normalize_direction(n2(-2, 4));
  CHECK(a.n0 == n2(1, -2));
  CHECK(a.lambda == -2);
  auto b = normalize_direction(n2(0, 3));
  CHECK(b.n0 == n2(0, 1));
  CHECK(b.lambda == 3);
  CHECK_THROWS_AS(normalize_direction(n2(0, 0)), Error);
  Rng rng(71);
  for (int s = 0; s < 1000; ++s) {
    VecI n = n2(rng.integer(-30, 30), rng.integer(-30, 30));
    if (n.isZero()) continue;
    auto nd = normalize_direction(n);
    CHECK((static_cast<int>(nd.lambda) * nd.n0 - n).isZero());
  }
}

TEST_CASE("lift_direction classifies hyperbolic and mixed directions") {
  EulerParams ep;
  LinearizedSystem lin = euler_lin();
  // (1, 1): hyperbolic with tau > 0
  LiftResult h = lift_direction(lin, n2(1, 1));
  CHECK(h.modes.size() == 3);
  CHECK(h.elliptic.empty());
  // (-9, 8): mixed region, one incoming real root + elliptic pair
  LiftResult m = lift_direction(lin, n2(-9, 8));
  CHECK(m.modes.size() == 1);
  CHECK(m.modes[0].cls == FreqTag::Incoming);
  CHECK(m.elliptic.size() == 2);
  // opposite direction: roots negate, classes preserved
  LiftResult hm = lift_direction(lin, n2(-1, -1));
  REQUIRE(hm.modes.size() == 3);
  for (const ModeKey& mk : h.modes) {
    double best = 1e300;
    FreqTag cls = FreqTag::Glancing;
    for (const ModeKey& nk : hm.modes)
      if (std::abs(nk.xi0 + mk.xi0) < best) {
        best = std::abs(nk.xi0 + mk.xi0);
        cls = nk.cls;
      }
    CHECK(best <= 1e-9);
    CHECK(cls == mk.cls);
  }
}

TEST_CASE("generic glancing distance matches the Euler closed form") {
  EulerParams ep;
  LinearizedSystem lin = euler_lin();
  GlancingManifold manifold(lin);
  // exactly on the glancing line
  Vec on(2);
  on << ep.sgap() * 1.7, 1.7;
  CHECK(manifold.distance(on) <= 1e-8);
  Rng rng(73);
  for (int s = 0; s < 100; ++s) {
    Vec z(2);
    z << rng.uniform(-2, 2), rng.uniform(-2, 2);
    if (z.norm() < 0.1) continue;
    double generic = manifold.distance(z);
    double exact = euler_glancing_distance_point(ep, z[0], z[1]);
    CHECK(std::abs(generic - exact) <= 1e-3 * std::max(1.0, exact));
  }
}

TEST_CASE("small divisor fit on the Euler lattice") {
  EulerParams ep;
  LinearizedSystem lin = euler_lin();
  SmallDivisorFit fit = small_divisor_fit(lin, 20, euler_dist(ep));
  CHECK(fit.exact_hits == 0);
  CHECK(fit.a1 <= 1.7);
  CHECK(fit.c > 0.0);
  // rational delta = 2: K- = 1 - 2 delta = -3 puts (-3, 1) exactly on the
  // glancing set
  EulerParams bad = ep;
  bad.delta = 2.0;
  CHECK(euler_glancing_distance(bad, -3, 1) <= 1e-14);
  LinearizedSystem blin = euler_lin(bad);
  CHECK_THROWS_AS(small_divisor_fit(blin, 4, euler_dist(bad)), Error);
}

TEST_CASE("group velocity lower bound against the glancing distance") {
  EulerParams ep;
  LinearizedSystem lin = euler_lin();
  GroupVelocityBoundReport rep = group_velocity_lower_bound_check(lin, 8, euler_dist(ep));
  CHECK(rep.violations == 0);
  CHECK(rep.best_C > 0.0);
  CHECK(rep.n_points > 0);
}

TEST_CASE("gamma_coefficient against the Euler closed form") {
  EulerParams ep;
  LinearizedSystem lin = euler_lin();
  // alpha3 triple (p,q) + (r,s) -> (p+r, q+s)
  long p = 1, q = 1, r = 2, s = -1;
  LiftResult lp_ = lift_direction(lin, n2(p, q));
  LiftResult lq_ = lift_direction(lin, n2(r, s));
  LiftResult lr_ = lift_direction(lin, n2(p + r, q + s));
  auto alpha3 = [&](const LiftResult& l, double tau) -> const ModeKey& {
    for (const ModeKey& mk : l.modes)
      if (std::abs(mk.xi0 + tau / ep.u0()) <= 1e-9 * std::max(1.0, std::abs(tau)))
        return mk;
    REQUIRE(false);
    return l.modes[0];
  };
  const ModeKey& P = alpha3(lp_, euler_tau_pq(ep, p, q));
  const ModeKey& Q = alpha3(lq_, euler_tau_pq(ep, r, s));
  const ModeKey& R = alpha3(lr_, euler_tau_pq(ep, p + r, q + s));
  GammaResult g = gamma_coefficient(lin, P, 1, Q, 1, R, 1);
  CHECK(g.collinearity_residual <= 1e-8);
  double closed = euler_gamma(ep, p, q, r, s);
  // per-direction polarization convention: compare modulo the sign product
  auto sgn = [&](const ModeKey& mk, long pp, long qq) {
    Vec ef(3);
    double eta = euler_eta_pq(ep, pp, qq);
    double xi = -euler_tau_pq(ep, pp, qq) / ep.u0();
    ef << 0.0, xi, -eta;
    ef.normalize();
    return mk.E.dot(ef) > 0 ? 1.0 : -1.0;
  };
  double sign = sgn(P, p, q) * sgn(Q, r, s) / sgn(R, p + r, q + s);
  CHECK(std::abs(g.gamma.real() * sign - closed) <= 1e-8 * std::max(1.0, std::abs(closed)));
  // self-interaction on the alpha3 branch vanishes
  GammaResult gs = gamma_coefficient(lin, P, 1, P, 1, P, 2);
  CHECK(std::abs(gs.gamma) <= 1e-12);
  // homogeneity: scaling both arguments by lambda = 3 scales gamma by 3
  GammaResult g3 = gamma_coefficient(lin, P, 3, Q, 3, R, 3);
  CHECK(std::abs(g3.gamma - 3.0 * g.gamma) <= 1e-10);
}

TEST_CASE("enumerate_resonances on the Euler lattice, harmonics below the sonic ray") {
  LinearizedSystem lin = euler_lin();
  EulerParams ep;
  ResonanceSet set = enumerate_resonances(lin, 3, 4, 1e-9);
  CHECK(set.near_misses.empty());
  long oracle = oracles::euler_alpha3_count(3, 4);
  long found = 0;
  for (const Resonance& r : set.list) {
    if (r.self) continue;
    ++found;
    // all on the linear branch xi = -tau/u0, all incoming, all exact
    for (int mid : {r.p_mode, r.q_mode, r.r_mode}) {
      const ModeKey& mk = set.modes[mid];
      CHECK(std::abs(mk.xi0 + mk.zeta[0] / ep.u0()) <= 1e-9 * std::max(1.0, mk.zeta.norm()));
      CHECK(mk.cls == FreqTag::Incoming);
    }
    CHECK(r.exact);
    CHECK(r.residual <= 1e-9);
    // type 1 for every C0 since the gamma defect cancels exactly
    CHECK(std::abs(r.gamma_pq + r.gamma_pr) <= 1e-10);
    CHECK(classify_resonance_type(r, set, 1e-6) == 1);
  }
  CHECK(found == oracle);
}

TEST_CASE("harmonics six expose the sonic-ray cross-family resonance") {
  // With M = sqrt(3)/2 the direction (1,0) sits on tau = c0 eta, where
  // xi2 = 0 and xi1 = -6 xi3 exactly; 6 a3 + a1 = 7 a2 mixes the families.
  LinearizedSystem lin = euler_lin();
  ResonanceSet set = enumerate_resonances(lin, 2, 6, 1e-9);
  int mixed = 0;
  for (const Resonance& r : set.list) {
    if (r.self) continue;
    FreqTag a = set.modes[r.p_mode].cls, b = set.modes[r.q_mode].cls,
            c = set.modes[r.r_mode].cls;
    if (a == b && b == c) continue;
    ++mixed;
    CHECK(set.modes[r.p_mode].n0 == n2(1, 0));
    CHECK(set.modes[r.q_mode].n0 == n2(1, 0));
    CHECK(set.modes[r.r_mode].n0 == n2(1, 0));
    std::set<long> lambdas{std::labs(r.lp), std::labs(r.lq), std::labs(r.lr)};
    CHECK(lambdas == std::set<long>{1, 6, 7});
  }
  CHECK(mixed == 1);
}

TEST_CASE("synthetic two-branch lattice matches an exact integer oracle") {
  LinearizedSystem lin = two_branch_lin();
  ResonanceSet set = enumerate_resonances(lin, 2, 3, 1e-9);
  // Exact oracle in integers: 3 tau(n) = 3 n1 + n2; branch s in {+1,-1} has
  // root xi = s tau. A pair resonates onto branch sr of the sum iff
  // la sa t(na) + lb sb t(nb) = sr t(v), all in integer arithmetic. Sums with
  // t(v) = 0 are degenerate (the symbol collapses) and are skipped on both
  // sides.
  auto tau3 = [](const VecI& n) { return 3L * n[0] + static_cast<long>(n[1]); };
  std::vector<VecI> dirs;
  for (int a = -2; a <= 2; ++a)
    for (int b = -2; b <= 2; ++b) {
      if (a == 0 && b == 0) continue;
      VecI n = n2(a, b);
      if (normalize_direction(n).lambda != 1) continue;
      dirs.push_back(n);
    }
  struct SM {
    VecI n;
    int s;
    long l;
  };
  std::vector<SM> scaled;
  for (const VecI& n : dirs)
    for (int s : {+1, -1})
      for (long l = -3; l <= 3; ++l)
        if (l != 0) scaled.push_back({n, s, l});
  std::set<oracles::TripleKey> seen;
  for (std::size_t i = 0; i < scaled.size(); ++i)
    for (std::size_t j = i + 1; j < scaled.size(); ++j) {
      const SM& A = scaled[i];
      const SM& B = scaled[j];
      if ((A.n - B.n).isZero() && A.s == B.s) continue;  // same mode family
      VecI v = static_cast<int>(A.l) * A.n + static_cast<int>(B.l) * B.n;
      if (v.isZero()) continue;
      long tsum = 3L * v[0] + v[1];
      if (tsum == 0) continue;  // degenerate ray
      long xisum = A.l * A.s * tau3(A.n) + B.l * B.s * tau3(B.n);
      int sr;
      if (xisum == tsum)
        sr = +1;
      else if (xisum == -tsum)
        sr = -1;
      else
        continue;
      long g = oracles::gcd_l(v[0], v[1]);
      int first = v[0] != 0 ? v[0] : v[1];
      long lr = first > 0 ? g : -g;
      VecI nr = v / static_cast<int>(lr);
      int bp = A.s > 0 ? 1 : 0, bq = B.s > 0 ? 1 : 0, br = sr > 0 ? 1 : 0;
      seen.insert(oracles::make_key(A.l, A.n, bp, B.l, B.n, bq, lr, nr, br));
    }
  long oracle = static_cast<long>(seen.size());
  long found = 0;
  for (const Resonance& r : set.list)
    if (!r.self) ++found;
  CHECK(found == oracle);
  CHECK(found > 0);
}

TEST_CASE("resonance list symmetry and monotonicity") {
  LinearizedSystem lin = euler_lin();
  ResonanceSet big = enumerate_resonances(lin, 3, 3, 1e-9);
  ResonanceSet small = enumerate_resonances(lin, 2, 2, 1e-9);
  // canonical signatures of non-self entries
  auto signature = [](const ResonanceSet& s, const Resonance& r) {
    const ModeKey& P = s.modes[r.p_mode];
    const ModeKey& Q = s.modes[r.q_mode];
    const ModeKey& R = s.modes[r.r_mode];
    return oracles::make_key(r.lp, P.n0, P.branch, r.lq, Q.n0, Q.branch, r.lr, R.n0,
                             R.branch);
  };
  std::set<oracles::TripleKey> big_keys, small_keys;
  for (const Resonance& r : big.list)
    if (!r.self) big_keys.insert(signature(big, r));
  for (const Resonance& r : small.list)
    if (!r.self) small_keys.insert(signature(small, r));
  for (const auto& k : small_keys) CHECK(big_keys.count(k) == 1);
  // closure under (p, q, r) -> (p, rbar, qbar): the rotated triple is present
  // whenever its harmonics stay within the enumerated ranges
  int rotations_checked = 0;
  for (const Resonance& r : big.list) {
    if (r.self) continue;
    const ModeKey& P = big.modes[r.p_mode];
    const ModeKey& Q = big.modes[r.q_mode];
    const ModeKey& R = big.modes[r.r_mode];
    if (std::labs(r.lr) > 3 || !big.in_box[r.r_mode]) continue;
    auto rotated = oracles::make_key(r.lp, P.n0, P.branch, -r.lr, R.n0, R.branch, -r.lq,
                                     Q.n0, Q.branch);
    CHECK(big_keys.count(rotated) == 1);
    ++rotations_checked;
  }
  CHECK(rotations_checked > 0);
}

TEST_CASE("resonance type classification") {
  LinearizedSystem lin = euler_lin();
  ResonanceSet set = enumerate_resonances(lin, 2, 3, 1e-9);
  int checked = 0;
  for (const Resonance& r : set.list) {
    if (r.self) continue;
    // symmetric under exchanging the q and r roles: the rotated triple
    // (p, rbar -> qbar) carries gammas (gamma_pr, gamma_pq), so the defect
    // |gamma_pq + gamma_pr| and the classification are unchanged
    Resonance rot = r;
    std::swap(rot.q_mode, rot.r_mode);
    long lq = rot.lq, lr = rot.lr;
    rot.lq = -lr;
    rot.lr = -lq;
    if (rot.lr < 0) {
      rot.lp = -rot.lp;
      rot.lq = -rot.lq;
      rot.lr = -rot.lr;
    }
    std::swap(rot.gamma_pq, rot.gamma_pr);
    for (double C0 : {1e-6, 1.0}) {
      CHECK(classify_resonance_type(r, set, C0) == classify_resonance_type(rot, set, C0));
    }
    if (++checked > 50) break;
  }
  CHECK(checked > 10);
  // constructed violation: defect 1000 |alpha_p| against C0 = 1 is type 2
  Resonance synth = set.list.front();
  for (const Resonance& r : set.list)
    if (!r.self) synth = r;
  const ModeKey& P = set.modes[synth.p_mode];
  double ap = std::sqrt(static_cast<double>(synth.lp * synth.lp) *
                        (P.n0.cast<double>().squaredNorm() + P.xi0 * P.xi0));
  synth.gamma_pq = Cplx(1000.0 * ap, 0.0);
  synth.gamma_pr = Cplx(0.0, 0.0);
  CHECK(classify_resonance_type(synth, set, 1.0) == 2);
}

TEST_CASE("gamma growth bounds over the box") {
  // |Gamma((n,xi),(n,xi))| <= C |n| on the resonant incoming set (the alpha3
  // family is linearly degenerate so the self gammas vanish outright), and
  // the acoustic self-interactions stay below C |n|^3.
  EulerParams ep;
  LinearizedSystem lin = euler_lin();
  ResonanceSet set = enumerate_resonances(lin, 4, 2, 1e-9);
  double worst_linear = 0.0;
  std::vector<std::pair<double, double>> acoustic;  // (log |n|, log |gamma|)
  for (const Resonance& r : set.list) {
    if (!r.self) continue;
    const ModeKey& mk = set.modes[r.p_mode];
    double n = mk.n0.cast<double>().norm();
    bool alpha3 =
        std::abs(mk.xi0 + mk.zeta[0] / ep.u0()) <= 1e-9 * std::max(1.0, mk.zeta.norm());
    if (alpha3)
      worst_linear = std::max(worst_linear, std::abs(r.gamma_pq) / n);
    else if (std::abs(r.gamma_pq) > 1e-14)
      acoustic.push_back({std::log(n), std::log(std::abs(r.gamma_pq))});
  }
  CHECK(worst_linear <= 1e-10);  // linearly degenerate branch
  // fitted growth exponent of the acoustic self gammas stays below h = 3
  REQUIRE(acoustic.size() >= 10);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto& p : acoustic) {
    sx += p.first;
    sy += p.second;
    sxx += p.first * p.first;
    sxy += p.first * p.second;
  }
  double m = static_cast<double>(acoustic.size());
  double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  CHECK(slope <= 3.0 + 0.3);
}

TEST_CASE("partition of the frequency sets") {
  EulerParams ep;
  LinearizedSystem lin = euler_lin();
  ResonanceSet set = enumerate_resonances(lin, 2, 4, 1e-9);
  double C0 = calibrate_C0(set);
  Partition part = partition_frequency_sets(set, C0);
  CHECK(part.F_out_res.empty());
  // the resonant incoming set is exactly the alpha3 family
  for (int id : part.F_inc_res) {
    const ModeKey& mk = set.modes[id];
    CHECK(std::abs(mk.xi0 + mk.zeta[0] / ep.u0()) <= 1e-9 * std::max(1.0, mk.zeta.norm()));
  }
  CHECK(part.F_inc_res.size() > 0);
  CHECK(part.min_pitE >= 1.0 / C0);
  // an empty resonance list leaves every incoming mode a singleton
  ResonanceSet empty = set;
  empty.list.clear();
  Partition p2 = partition_frequency_sets(empty, C0);
  CHECK(p2.F_inc_res.empty());
  std::size_t incoming = 0;
  for (const ModeKey& mk : empty.modes)
    if (mk.cls == FreqTag::Incoming) ++incoming;
  CHECK(p2.nonresonant.size() == incoming);
}

TEST_CASE("check_assumptions on the Euler defaults") {
  EulerParams ep;
  LinearizedSystem lin = euler_lin();
  AssumptionOptions opt;
  opt.box_radius = 3;
  opt.harmonic_bound = 4;
  opt.kl_samples = 500;
  opt.hyp_samples = 300;
  opt.glancing_distance = euler_dist(ep);
  CheckReport rep = check_assumptions(lin, opt);
  CHECK(rep.all_pass());
  // supersonic equilibrium: dim E_- no longer matches rank B
  EulerParams super = ep;
  super.M = 1.2;
  HyperbolicSystem ssys;
  ssys.d = 2;
  ssys.N = 3;
  ssys.m = 2;
  EulerParams sp = super;
  ssys.coeffs = [sp](int i, const Vec& u) {
    // same matrices as build_euler but without the subsonic guard
    double v = sp.v0 + u[0];
    double c = sp.c0 * std::pow(sp.v0 / v, sp.kappa);
    Mat A(3, 3);
    if (i == 1)
      A << u[1], -v, 0, -c * c / v, u[1], 0, 0, 0, u[1];
    else
      A << sp.u0() + u[2], 0, -v, 0, sp.u0() + u[2], 0, -c * c / v, 0, sp.u0() + u[2];
    return A;
  };
  ssys.B = Mat(2, 3);
  ssys.B << 0, sp.v0, 0, -sp.u0(), 0, sp.v0;
  ssys.zetas.resize(2);
  ssys.zetas[0] = Vec(2);
  ssys.zetas[0] << sp.c0 * sp.eta0, sp.eta0;
  ssys.zetas[1] = Vec(2);
  ssys.zetas[1] << sp.c0 * sp.delta * sp.eta0, sp.eta0;
  LinearizedSystem slin = linearize(ssys);
  AssumptionOptions sopt = opt;
  sopt.glancing_distance = {};
  sopt.box_radius = 2;
  sopt.harmonic_bound = 2;
  CheckReport srep = check_assumptions(slin, sopt);
  CHECK(!srep.all_pass());
  // rational delta = 2: the glancing-exclusion item fails
  EulerParams bad = ep;
  bad.delta = 2.0;
  LinearizedSystem blin = euler_lin(bad);
  AssumptionOptions bopt = opt;
  bopt.glancing_distance = euler_dist(bad);
  CheckReport brep = check_assumptions(blin, bopt);
  CHECK(!brep.all_pass());
  bool glancing_failed = false;
  for (const auto& c : brep.checks)
    if (c.name.find("glancing_exclusion") != std::string::npos && !c.pass)
      glancing_failed = true;
  for (const auto& c : brep.checks)
    if (c.name.find("small_divisor") != std::string::npos && !c.pass)
      glancing_failed = true;
  CHECK(glancing_failed);
}

TEST_CASE("near misses are separated from matches") {
  LinearizedSystem lin = euler_lin();
  ResonanceSet set = enumerate_resonances(lin, 3, 3, 1e-9);
  for (const Resonance& r : set.list)
    if (!r.self) CHECK(r.residual <= 1e-9);
  for (const Resonance& r : set.near_misses) CHECK(r.residual > 1e-9);
}
