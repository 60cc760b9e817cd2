#include <doctest.h>

#include "oracles.hpp"
#include "wkb/euler2d.hpp"
#include "wkb/spectral.hpp"

using namespace wkb;

namespace {

LinearizedSystem euler_lin() { return linearize(build_euler(EulerParams{})); }

// scalar transport: N = 1, A_1 = 0, A_2 = 1
LinearizedSystem scalar_lin() {
  HyperbolicSystem sys;
  sys.d = 2;
  sys.N = 1;
  sys.m = 2;
  sys.coeffs = [](int i, const Vec&) {
    Mat A(1, 1);
    A << (i == 1 ? 0.0 : 1.0);
    return A;
  };
  sys.B = Mat(1, 1);
  sys.B << 1.0;
  sys.zetas.resize(2);
  sys.zetas[0] = Vec(2);
  sys.zetas[0] << 1.0, 0.0;
  sys.zetas[1] = Vec(2);
  sys.zetas[1] << 0.0, 1.0;
  return linearize(sys);
}

Vec alpha_of(double tau, double eta, double xi) {
  Vec a(3);
  a << tau, eta, xi;
  return a;
}

}  // namespace

TEST_CASE("eigen_structure matches the Euler closed form") {
  EulerParams ep;
  LinearizedSystem lin = euler_lin();
  Vec eta(1);
  eta << 0.0;
  EigenStructure es = eigen_structure(lin, eta, 1.0);
  CHECK(es.taus[0] == doctest::Approx(-ep.u0() - ep.c0).epsilon(1e-13));
  CHECK(es.taus[1] == doctest::Approx(-ep.u0()).epsilon(1e-13));
  CHECK(es.taus[2] == doctest::Approx(-ep.u0() + ep.c0).epsilon(1e-13));
  Rng rng(31);
  double worst = 0.0;
  for (int s = 0; s < 1000; ++s) {
    Vec u = rng.unit_vector(2);
    EigenStructure e = eigen_structure(lin, u.head(1), u[1]);
    auto t = closed_form_tau(ep, u[0], u[1]);
    for (int k = 0; k < 3; ++k) worst = std::max(worst, std::abs(e.taus[k] - t[k]));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("eigen_structure positive homogeneity") {
  LinearizedSystem lin = euler_lin();
  Rng rng(37);
  Vec u = rng.unit_vector(2);
  EigenStructure a = eigen_structure(lin, u.head(1), u[1]);
  EigenStructure b = eigen_structure(lin, (2.0 * u.head(1)).eval(), 2.0 * u[1]);
  CHECK((b.taus - 2.0 * a.taus).norm() <= 1e-12);
  for (int k = 0; k < 3; ++k) CHECK((b.pi[k] - a.pi[k]).norm() <= 1e-10);
}

TEST_CASE("eigen_structure is bitwise deterministic") {
  LinearizedSystem lin = euler_lin();
  Vec eta(1);
  eta << 0.7;
  EigenStructure a = eigen_structure(lin, eta, -0.4);
  EigenStructure b = eigen_structure(lin, eta, -0.4);
  CHECK((a.rights - b.rights).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.taus - b.taus).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("eigen_structure rejects collisions") {
  // A(eta, xi) = xi I has a repeated eigenvalue everywhere
  HyperbolicSystem sys;
  sys.d = 2;
  sys.N = 2;
  sys.m = 2;
  sys.coeffs = [](int i, const Vec&) -> Mat {
    if (i == 1) return Mat::Zero(2, 2);
    return Mat::Identity(2, 2);
  };
  sys.B = Mat::Identity(2, 2);
  sys.zetas.resize(2);
  sys.zetas[0] = Vec(2);
  sys.zetas[0] << 1.0, 0.0;
  sys.zetas[1] = Vec(2);
  sys.zetas[1] << 0.0, 1.0;
  LinearizedSystem lin = linearize(sys);
  Vec eta(1);
  eta << 0.3;
  CHECK_THROWS_AS(eigen_structure(lin, eta, 1.0), Error);
}

TEST_CASE("frequency_operators at zero, noncharacteristic and characteristic points") {
  LinearizedSystem lin = euler_lin();
  FrequencyOps z = frequency_operators(lin, Vec::Zero(3));
  CHECK((z.pi - Mat::Identity(3, 3)).norm() == 0.0);
  CHECK((z.Q - Mat::Identity(3, 3)).norm() == 0.0);

  Vec alpha = alpha_of(10.0, 0.4, 0.9);  // far from every branch
  FrequencyOps nc = frequency_operators(lin, alpha);
  CHECK(!nc.characteristic);
  CHECK(nc.pi.norm() == 0.0);
  Mat L = lin.Lsym(alpha[0], alpha.segment(1, 1), alpha[2]);
  CHECK((nc.Q * L - Mat::Identity(3, 3)).norm() <= 1e-10);

  Vec eta(1);
  eta << 0.4;
  EigenStructure es = eigen_structure(lin, eta, 0.9);
  Vec ac = alpha_of(es.taus[1], 0.4, 0.9);
  FrequencyOps ch = frequency_operators(lin, ac);
  CHECK(ch.characteristic);
  Mat Lc = lin.Lsym(ac[0], eta, 0.9);
  CHECK((ch.Q * Lc - (Mat::Identity(3, 3) - ch.pi)).norm() <= 1e-10);
  CHECK((Lc * ch.Q - (Mat::Identity(3, 3) - ch.pi)).norm() <= 1e-10);
}

TEST_CASE("projector algebra invariants") {
  LinearizedSystem lin = euler_lin();
  Rng rng(41);
  for (int s = 0; s < 100; ++s) {
    Vec u = rng.unit_vector(2);
    EigenStructure es = eigen_structure(lin, u.head(1), u[1]);
    int k = rng.integer(0, 2);
    Vec alpha = alpha_of(es.taus[k], u[0], u[1]);
    // pi_{lambda alpha} = pi_alpha for lambda != 0, including negatives
    double lam = rng.uniform(0.2, 3.0) * (rng.integer(0, 1) ? 1.0 : -1.0);
    FrequencyOps a = frequency_operators(lin, alpha);
    FrequencyOps b = frequency_operators(lin, (lam * alpha).eval());
    CHECK((a.pi - b.pi).norm() <= 1e-10);
    CHECK((a.pi_tilde - b.pi_tilde).norm() <= 1e-10);
    // kernel/range identities
    Mat L = lin.Lsym(alpha[0], u.head(1), u[1]);
    CHECK((L * a.pi).norm() <= 1e-10);
    CHECK((a.pi * L).norm() <= 1e-10);
    CHECK((a.pi_tilde * lin.Ltilde(alpha[0], u.head(1), u[1])).norm() <= 1e-10);
    CHECK((a.Q * L + a.pi - Mat::Identity(3, 3)).norm() <= 1e-10);
  }
}

TEST_CASE("group velocity matches the Euler formulas and finite differences") {
  EulerParams ep;
  LinearizedSystem lin = euler_lin();
  Vec eta(1);
  eta << 0.83;
  EigenStructure es = eigen_structure(lin, eta, -0.41);
  // branch 2 (index 1): tau2 = -u0 xi so grad = (0, -u0) exactly
  Vec g = group_velocity(es, lin, 1);
  CHECK(std::abs(g[0]) <= 1e-12);
  CHECK(g[1] == doctest::Approx(-ep.u0()).epsilon(1e-12));
  // degree-0 homogeneity of the gradient
  EigenStructure es5 = eigen_structure(lin, (5.0 * eta).eval(), 5.0 * -0.41);
  CHECK((group_velocity(es5, lin, 1) - g).norm() <= 1e-12);
  // finite-difference oracle on random points and branches
  Rng rng(43);
  for (int s = 0; s < 30; ++s) {
    Vec u = rng.unit_vector(2);
    EigenStructure e = eigen_structure(lin, u.head(1), u[1]);
    int k = rng.integer(0, 2);
    Vec gv = group_velocity(e, lin, k);
    for (int dir = 0; dir < 2; ++dir) {
      Vec d = Vec::Zero(2);
      d[dir] = 1.0;
      double fd = oracles::fd_tau_derivative(lin, u.head(1), u[1], k, d, 1e-6);
      CHECK(std::abs(gv[dir] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("classify_frequency tags the Euler lifts") {
  EulerParams ep;
  LinearizedSystem lin = euler_lin();
  // zeta in H with tau > 0: alpha1 outgoing, alpha3 incoming
  double tau = 1.3, eta = 0.9;  // |tau| > sgap |eta|
  EulerRoots r = closed_form_xi(ep, tau, eta);
  REQUIRE(r.region == EulerRegion::Hyperbolic);
  CHECK(classify_frequency(lin, alpha_of(tau, eta, r.xi1.real())).tag == FreqTag::Outgoing);
  CHECK(classify_frequency(lin, alpha_of(tau, eta, r.xi2.real())).tag == FreqTag::Incoming);
  CHECK(classify_frequency(lin, alpha_of(tau, eta, r.xi3)).tag == FreqTag::Incoming);
  CHECK(classify_frequency(lin, alpha_of(5.0, eta, 0.01)).tag == FreqTag::Noncharacteristic);
}

TEST_CASE("velocity_bound") {
  EulerParams ep;
  LinearizedSystem lin = euler_lin();
  double v = velocity_bound(lin, 2000, 7);
  CHECK(std::abs(v / 1.05 - (ep.u0() + ep.c0)) <= 0.01 * (ep.u0() + ep.c0));
  // scaling the coefficients doubles the bound
  HyperbolicSystem sys2 = build_euler(ep);
  auto base = sys2.coeffs;
  sys2.coeffs = [base](int i, const Vec& u) { return (2.0 * base(i, u)).eval(); };
  sys2.diffs = nullptr;
  LinearizedSystem lin2 = linearize(sys2);
  double v2 = velocity_bound(lin2, 2000, 7);
  CHECK(v2 == doctest::Approx(2.0 * v).epsilon(1e-9));
  // scalar system A(eta, xi) = xi: grad tau = (0, -1)
  CHECK(velocity_bound(scalar_lin(), 50, 7) == doctest::Approx(1.05).epsilon(1e-12));
}

TEST_CASE("Lax identities") {
  EulerParams ep;
  LinearizedSystem lin = euler_lin();
  Rng rng(47);
  double worst = 0.0;
  for (int s = 0; s < 50; ++s) {
    Vec u = rng.unit_vector(2);
    EigenStructure es = eigen_structure(lin, u.head(1), u[1]);
    LaxReport rep = verify_lax(es, lin, 1);
    worst = std::max(worst, rep.max());
  }
  CHECK(worst <= 1e-10);
  // pitilde_2 E_2 = u0 A_2(V0)^{-1} E_2 since d_xi tau_2 = -u0
  Vec eta(1);
  eta << 1.37;
  EigenStructure es = eigen_structure(lin, eta, 0.52);
  Vec E2 = es.rights.col(1);
  CHECK((es.pi_tilde[1] * E2 - ep.u0() * (lin.AdInv * E2)).norm() <= 1e-10);
  // scalar transport: residuals exactly zero
  LinearizedSystem sl = scalar_lin();
  Vec seta(1);
  seta << 0.5;
  EigenStructure ses = eigen_structure(sl, seta, 1.0);
  LaxReport srep = verify_lax(ses, sl, 0);
  CHECK(srep.max() <= 1e-15);
}

TEST_CASE("strict hyperbolicity scan") {
  LinearizedSystem lin = euler_lin();
  HyperbolicityReport rep = check_strict_hyperbolicity(lin, 2000, 11);
  CHECK(rep.pass);
  // analytic gap oracle: adjacent branches differ by c0 |(eta, xi)| = c0
  CHECK(rep.min_gap == doctest::Approx(EulerParams{}.c0).epsilon(1e-10));
  // repeated-eigenvalue system fails with min gap ~ 0
  HyperbolicSystem bad;
  bad.d = 2;
  bad.N = 2;
  bad.m = 2;
  bad.coeffs = [](int i, const Vec&) -> Mat {
    if (i == 1) return Mat::Zero(2, 2);
    return Mat::Identity(2, 2);
  };
  bad.B = Mat::Identity(2, 2);
  bad.zetas.resize(2);
  bad.zetas[0] = Vec(2);
  bad.zetas[0] << 1.0, 0.0;
  bad.zetas[1] = Vec(2);
  bad.zetas[1] << 0.0, 1.0;
  HyperbolicityReport brep = check_strict_hyperbolicity(linearize(bad), 200, 11);
  CHECK(!brep.pass);
  CHECK(brep.min_gap <= 1e-12);
}

TEST_CASE("eigen completeness") {
  LinearizedSystem lin = euler_lin();
  Rng rng(53);
  for (int s = 0; s < 20; ++s) {
    Vec u = rng.unit_vector(2);
    EigenStructure es = eigen_structure(lin, u.head(1), u[1]);
    Mat acc = lin.Asym(u.head(1), u[1]);
    Mat sum = Mat::Zero(3, 3);
    for (int k = 0; k < 3; ++k) {
      acc += es.taus[k] * es.pi[k];
      sum += es.pi[k];
    }
    CHECK(acc.norm() <= 1e-9 * lin.Asym(u.head(1), u[1]).norm());
    CHECK((sum - Mat::Identity(3, 3)).norm() <= 1e-10);
  }
}
