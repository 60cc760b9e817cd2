#include "wkb/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

namespace wkb {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json report_json(const CheckReport& rep) {
  json checks = json::array();
  for (const auto& c : rep.checks) {
    json item;
    item["name"] = c.name;
    item["value"] = c.value;
    item["tolerance"] = c.tolerance;
    item["pass"] = c.pass;
    if (!c.detail.empty()) item["detail"] = c.detail;
    checks.push_back(item);
  }
  json out;
  out["checks"] = checks;
  out["pass"] = rep.all_pass();
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << text;
}

Mat json_matrix(const json& j) {
  Mat M(j.size(), j[0].size());
  for (std::size_t r = 0; r < j.size(); ++r)
    for (std::size_t c = 0; c < j[r].size(); ++c) M(r, c) = j[r][c].get<double>();
  return M;
}

std::string join_n(const VecI& n) {
  std::string s;
  for (int i = 0; i < n.size(); ++i) s += (i ? ";" : "") + std::to_string(n[i]);
  return s;
}

}  // namespace

RunConfig default_euler_config() {
  RunConfig cfg;
  ForcingMode f1;
  f1.n = VecI(2);
  f1.n << 1, 0;
  f1.amplitude = CVec(2);
  f1.amplitude << Cplx(0.03, 0.0), Cplx(0.012, 0.005);
  f1.t0 = 0.35;
  f1.wt = 0.3;
  f1.y0 = 0.0;
  f1.wy = 1.1;
  ForcingMode f2 = f1;
  f2.n << 0, 1;
  f2.amplitude << Cplx(0.02, -0.01), Cplx(0.015, 0.0);
  f2.y0 = 0.3;
  f2.wy = 1.0;
  cfg.forcing = {f1, f2};
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::ConfigParse, "cannot open config " + path);
  json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ConfigParse, e.what());
  }
  RunConfig cfg = default_euler_config();
  cfg.forcing.clear();
  try {
    if (j.contains("system")) {
      const json& s = j["system"];
      if (s.contains("builtin") && !s["builtin"].is_null())
        cfg.builtin = s["builtin"].get<std::string>();
      else if (s.contains("builtin"))
        cfg.builtin.clear();
      if (s.contains("params")) {
        const json& p = s["params"];
        if (p.contains("v0")) cfg.euler.v0 = p["v0"];
        if (p.contains("c0")) cfg.euler.c0 = p["c0"];
        if (p.contains("M")) cfg.euler.M = p["M"];
        if (p.contains("delta")) cfg.euler.delta = p["delta"];
        if (p.contains("eta0")) cfg.euler.eta0 = p["eta0"];
        if (p.contains("kappa")) cfg.euler.kappa = p["kappa"];
      }
      if (cfg.builtin.empty()) {
        HyperbolicSystem sys;
        sys.d = s.at("d").get<int>();
        sys.N = s.at("N").get<int>();
        sys.m = s.at("m").get<int>();
        sys.B = json_matrix(s.at("B"));
        for (const auto& z : s.at("zetas")) {
          Vec v(z.size());
          for (std::size_t i = 0; i < z.size(); ++i) v[i] = z[i].get<double>();
          sys.zetas.push_back(v);
        }
        std::vector<Mat> As;
        for (const auto& a : s.at("params").at("A")) As.push_back(json_matrix(a));
        if (static_cast<int>(As.size()) != sys.d)
          throw Error(ErrorCode::ConfigParse, "params.A must list d matrices");
        sys.coeffs = [As](int i, const Vec&) { return As.at(i - 1); };
        cfg.custom = sys;
      }
    }
    if (j.contains("box_radius")) cfg.box_radius = j["box_radius"];
    if (j.contains("harmonic_bound")) cfg.harmonic_bound = j["harmonic_bound"];
    if (j.contains("C0")) cfg.C0 = j["C0"].is_null() ? -1.0 : j["C0"].get<double>();
    if (j.contains("tolerances")) {
      const json& t = j["tolerances"];
      if (t.contains("res_tol")) cfg.res_tol = t["res_tol"];
      if (t.contains("kl_tol")) cfg.kl_tol = t["kl_tol"];
      if (t.contains("glancing_tol")) cfg.tol.glancing = t["glancing_tol"];
      if (t.contains("char_tol")) cfg.tol.charac = t["char_tol"];
      if (t.contains("gap_tol")) cfg.tol.gap = t["gap_tol"];
    }
    if (j.contains("grid")) {
      const json& g = j["grid"];
      if (g.contains("T")) cfg.grid.T = g["T"];
      if (g.contains("Ly")) cfg.grid.Ly = g["Ly"];
      if (g.contains("Xd")) cfg.grid.Xd = g["Xd"].is_null() ? -1.0 : g["Xd"].get<double>();
      if (g.contains("nt")) cfg.grid.nt = g["nt"];
      if (g.contains("ny")) cfg.grid.ny = g["ny"];
      if (g.contains("nx")) cfg.grid.nx = g["nx"];
      if (g.contains("cfl")) cfg.grid.cfl = g["cfl"];
    }
    if (j.contains("lambda_max")) cfg.lambda_max = j["lambda_max"];
    if (j.contains("epsilon")) cfg.epsilon = j["epsilon"];
    if (j.contains("forcing")) {
      for (const auto& fj : j["forcing"]) {
        ForcingMode fm;
        const auto& nj = fj.at("n");
        fm.n = VecI(nj.size());
        for (std::size_t i = 0; i < nj.size(); ++i) fm.n[i] = nj[i].get<int>();
        const auto& aj = fj.at("amplitude");
        if (aj[0].is_array()) {
          fm.amplitude = CVec(aj.size());
          for (std::size_t i = 0; i < aj.size(); ++i)
            fm.amplitude[static_cast<int>(i)] = Cplx(aj[i][0], aj[i][1]);
        } else {
          fm.amplitude = CVec(1);
          fm.amplitude[0] = Cplx(aj[0], aj[1]);
        }
        if (fj.contains("t0")) fm.t0 = fj["t0"];
        if (fj.contains("wt")) fm.wt = fj["wt"];
        if (fj.contains("y0")) fm.y0 = fj["y0"];
        if (fj.contains("wy")) fm.wy = fj["wy"];
        cfg.forcing.push_back(fm);
      }
    }
    if (j.contains("picard")) {
      const json& p = j["picard"];
      if (p.contains("tol")) cfg.picard_tol = p["tol"];
      if (p.contains("max_iter")) cfg.picard_max_iter = p["max_iter"];
      if (p.contains("max_halvings")) cfg.max_halvings = p["max_halvings"];
    }
    if (j.contains("use_skew_fd")) cfg.use_skew_fd = j["use_skew_fd"];
    if (j.contains("skew_h")) cfg.skew_h = j["skew_h"];
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("threads")) cfg.threads = j["threads"];
    if (j.contains("out")) cfg.out_dir = j["out"];
    if (j.contains("format")) cfg.format = j["format"];
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ConfigParse, e.what());
  }
  return cfg;
}

HyperbolicSystem build_system(const RunConfig& cfg) {
  if (cfg.builtin == "euler2d") return build_euler(cfg.euler);
  if (cfg.builtin.empty()) return cfg.custom;
  throw Error(ErrorCode::ConfigParse, "unknown builtin system " + cfg.builtin);
}

CheckReport analyze_report(const RunConfig& cfg) {
  CheckReport rep;
  HyperbolicSystem sys = build_system(cfg);
  LinearizedSystem lin;
  try {
    validate_system(sys);
    lin = linearize(sys);
  } catch (const Error& e) {
    rep.add("system_validation", 0.0, 0.0, false, e.what());
    return rep;
  }
  Rng rng(cfg.seed);
  const int n_pts = 200;

  double proj_sum = 0, proj_orth = 0, pit_sum = 0, complete = 0, qrel = 0, pitL = 0,
         lax = 0, hom = 0, phase = 0;
  bool spectrum_ok = true;
  std::string spectrum_msg;
  for (int s = 0; s < n_pts && spectrum_ok; ++s) {
    Vec u = rng.unit_vector(lin.d);
    Vec eta = u.head(lin.d - 1);
    double xi = u[lin.d - 1];
    EigenStructure es;
    try {
      es = eigen_structure(lin, eta, xi, cfg.tol);
    } catch (const Error& e) {
      spectrum_ok = false;
      spectrum_msg = e.what();
      break;
    }
    Mat sum = Mat::Zero(lin.N, lin.N), tsum = Mat::Zero(lin.N, lin.N);
    Mat comp = lin.Asym(eta, xi);
    for (int k = 0; k < lin.N; ++k) {
      sum += es.pi[k];
      tsum += es.pi_tilde[k];
      comp += es.taus[k] * es.pi[k];
      for (int kk = 0; kk < lin.N; ++kk) {
        Mat prod = es.pi[k] * es.pi[kk];
        proj_orth = std::max(proj_orth, (prod - (k == kk ? es.pi[k] : Mat::Zero(lin.N, lin.N))).norm());
      }
    }
    proj_sum = std::max(proj_sum, (sum - Mat::Identity(lin.N, lin.N)).norm());
    pit_sum = std::max(pit_sum, (tsum - Mat::Identity(lin.N, lin.N)).norm());
    complete = std::max(complete, comp.norm() / std::max(1.0, lin.Asym(eta, xi).norm()));

    int k = rng.integer(0, lin.N - 1);
    Vec alpha(lin.d + 1);
    alpha[0] = es.taus[k];
    alpha.segment(1, lin.d - 1) = eta;
    alpha[lin.d] = xi;
    FrequencyOps ops = frequency_operators(lin, alpha, cfg.tol);
    Mat Lm = lin.Lsym(alpha[0], eta, xi);
    qrel = std::max(qrel, (ops.Q * Lm - (Mat::Identity(lin.N, lin.N) - ops.pi)).norm());
    pitL = std::max(pitL, (ops.pi_tilde * lin.Ltilde(alpha[0], eta, xi)).norm());

    Vec g = group_velocity(es, lin, k);
    if (std::abs(g[lin.d - 1]) > cfg.tol.near_glancing) {
      LaxReport lr = verify_lax(es, lin, k, cfg.tol);
      lax = std::max(lax, lr.max());
    }
    // positive homogeneity and phase determinism
    EigenStructure es2 = eigen_structure(lin, (2.0 * eta).eval(), 2.0 * xi, cfg.tol);
    hom = std::max(hom, (es2.taus - 2.0 * es.taus).norm());
    hom = std::max(hom, (es2.pi[k] - es.pi[k]).norm());
    EigenStructure es3 = eigen_structure(lin, eta, xi, cfg.tol);
    phase = std::max(phase, (es3.rights - es.rights).cwiseAbs().maxCoeff());
  }
  if (!spectrum_ok) {
    rep.add("eigen_structure", 0.0, 0.0, false, spectrum_msg);
    return rep;
  }
  rep.add_residual("projector_sum_identity", proj_sum, 1e-10);
  rep.add_residual("projector_orthogonality", proj_orth, 1e-10);
  rep.add_residual("pitilde_sum_identity", pit_sum, 1e-10);
  rep.add_residual("eigen_completeness", complete, 1e-9);
  rep.add_residual("partial_inverse_relation", qrel, 1e-10);
  rep.add_residual("pitilde_annihilates_Ltilde", pitL, 1e-10);
  rep.add_residual("lax_identities", lax, 1e-10);
  rep.add_residual("homogeneity", hom, 1e-9);
  rep.add_residual("phase_determinism", phase, 0.0);

  if (cfg.builtin == "euler2d") {
    Rng rng2(cfg.seed + 1);
    double worst = 0.0;
    for (int s = 0; s < 1000; ++s) {
      Vec u = rng2.unit_vector(2);
      EigenStructure es = eigen_structure(lin, u.head(1), u[1], cfg.tol);
      auto t = closed_form_tau(cfg.euler, u[0], u[1]);
      for (int k = 0; k < 3; ++k)
        worst = std::max(worst, std::abs(es.taus[k] - t[k]) / std::max(1.0, std::abs(t[k])));
    }
    rep.add_residual("euler_closed_form_tau", worst, 1e-12);
  }
  return rep;
}

int cmd_analyze(const RunConfig& cfg) {
  CheckReport rep = analyze_report(cfg);
  json out = report_json(rep);
  write_text(fs::path(cfg.out_dir) / "verify.json", out.dump(2) + "\n");
  std::cout << out.dump(2) << "\n";
  return rep.all_pass() ? 0 : 1;
}

int cmd_verify(const RunConfig& cfg) { return cmd_analyze(cfg); }

int cmd_assumptions(const RunConfig& cfg) {
  HyperbolicSystem sys = build_system(cfg);
  CheckReport rep;
  try {
    validate_system(sys);
    LinearizedSystem lin = linearize(sys);
    AssumptionOptions opt;
    opt.box_radius = cfg.box_radius;
    opt.harmonic_bound = cfg.harmonic_bound;
    opt.res_tol = cfg.res_tol;
    opt.C0 = cfg.C0;
    opt.kl_tol = cfg.kl_tol;
    opt.seed = cfg.seed;
    if (cfg.builtin == "euler2d") {
      EulerParams ep = cfg.euler;
      opt.glancing_distance = [ep](const Vec& z) {
        return euler_glancing_distance_point(ep, z[0], z[1]);
      };
    }
    rep = check_assumptions(lin, opt, cfg.tol);
  } catch (const Error& e) {
    rep.add("system_validation", 0.0, 0.0, false, e.what());
  }
  json out = report_json(rep);
  write_text(fs::path(cfg.out_dir) / "assumptions.json", out.dump(2) + "\n");
  std::cout << out.dump(2) << "\n";
  return rep.all_pass() ? 0 : 1;
}

std::string resonances_csv(const ResonanceSet& set, double C0) {
  std::ostringstream os;
  os << "lp,lq,lr,np,xp,nq,xq,nr,xr,gamma_pq_re,gamma_pq_im,gamma_pr_re,gamma_pr_im,type,"
        "residual\n";
  for (const Resonance& r : set.list) {
    const ModeKey& P = set.modes[r.p_mode];
    const ModeKey& Q = set.modes[r.q_mode];
    const ModeKey& R = set.modes[r.r_mode];
    int type = r.self ? 0 : classify_resonance_type(r, set, C0);
    os << r.lp << "," << r.lq << "," << r.lr << "," << join_n(P.n0) << ","
       << fmt_g17(P.xi0) << "," << join_n(Q.n0) << "," << fmt_g17(Q.xi0) << ","
       << join_n(R.n0) << "," << fmt_g17(R.xi0) << "," << fmt_g17(r.gamma_pq.real()) << ","
       << fmt_g17(r.gamma_pq.imag()) << "," << fmt_g17(r.gamma_pr.real()) << ","
       << fmt_g17(r.gamma_pr.imag()) << "," << (r.self ? "self" : std::to_string(type))
       << "," << fmt_g17(r.residual) << "\n";
  }
  return os.str();
}

int cmd_resonances(const RunConfig& cfg) {
  if (cfg.box_radius < 1) {
    std::cerr << "box radius must be >= 1\n";
    return 2;
  }
  HyperbolicSystem sys = build_system(cfg);
  try {
    validate_system(sys);
    LinearizedSystem lin = linearize(sys);
    ResonanceSet set = enumerate_resonances(lin, cfg.box_radius, cfg.harmonic_bound,
                                            cfg.res_tol, cfg.tol, cfg.threads);
    double C0 = cfg.C0 > 0 ? cfg.C0 : calibrate_C0(set);
    write_text(fs::path(cfg.out_dir) / "resonances.csv", resonances_csv(set, C0));
    // near misses within 10x the tolerance, listed separately
    std::ostringstream nm;
    nm << "lp,lq,lr,np,xp,nq,xq,nr,xr,residual\n";
    for (const Resonance& r : set.near_misses) {
      const ModeKey& P = set.modes[r.p_mode];
      const ModeKey& Q = set.modes[r.q_mode];
      const ModeKey& R = set.modes[r.r_mode];
      nm << r.lp << "," << r.lq << "," << r.lr << "," << join_n(P.n0) << ","
         << fmt_g17(P.xi0) << "," << join_n(Q.n0) << "," << fmt_g17(Q.xi0) << ","
         << join_n(R.n0) << "," << fmt_g17(R.xi0) << "," << fmt_g17(r.residual) << "\n";
    }
    write_text(fs::path(cfg.out_dir) / "near_misses.csv", nm.str());

    Partition part = partition_frequency_sets(set, C0);
    json pj;
    pj["C0"] = C0;
    pj["min_pitilde_E"] = part.min_pitE;
    auto dirs = [&](const std::set<int>& ids) {
      json arr = json::array();
      for (int id : ids) {
        json e;
        e["n0"] = std::vector<int>(set.modes[id].n0.data(),
                                   set.modes[id].n0.data() + set.modes[id].n0.size());
        e["xi0"] = set.modes[id].xi0;
        arr.push_back(e);
      }
      return arr;
    };
    pj["F_inc_res"] = dirs(part.F_inc_res);
    pj["F_out_res"] = dirs(part.F_out_res);
    pj["nonresonant_count"] = part.nonresonant.size();
    pj["near_miss_count"] = set.near_misses.size();
    write_text(fs::path(cfg.out_dir) / "partition.json", pj.dump(2) + "\n");
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}

int cmd_gamma(const RunConfig& cfg) {
  HyperbolicSystem sys = build_system(cfg);
  try {
    LinearizedSystem lin = linearize(sys);
    ResonanceSet set = enumerate_resonances(lin, cfg.box_radius, cfg.harmonic_bound,
                                            cfg.res_tol, cfg.tol, cfg.threads);
    std::ostringstream os;
    os << "lp,lq,lr,np,nq,nr,gamma_pq,closed_form,abs_diff\n";
    for (const Resonance& r : set.list) {
      if (r.self) continue;
      const ModeKey& P = set.modes[r.p_mode];
      const ModeKey& Q = set.modes[r.q_mode];
      const ModeKey& R = set.modes[r.r_mode];
      double closed = std::numeric_limits<double>::quiet_NaN();
      double diff = std::numeric_limits<double>::quiet_NaN();
      if (cfg.builtin == "euler2d") {
        long pp = r.lp * P.n0[0], qq = r.lp * P.n0[1];
        long rr = r.lq * Q.n0[0], ss = r.lq * Q.n0[1];
        closed = euler_gamma(cfg.euler, pp, qq, rr, ss);
        diff = std::abs(std::abs(r.gamma_pq) - std::abs(closed));
      }
      os << r.lp << "," << r.lq << "," << r.lr << "," << join_n(P.n0) << "," << join_n(Q.n0)
         << "," << join_n(R.n0) << "," << fmt_g17(r.gamma_pq.real()) << ","
         << fmt_g17(closed) << "," << fmt_g17(diff) << "\n";
    }
    write_text(fs::path(cfg.out_dir) / "gamma.csv", os.str());
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}

SolveOutputs run_solve_pipeline(const RunConfig& cfg, bool write_files) {
  SolveOutputs out;
  HyperbolicSystem sys = build_system(cfg);
  validate_system(sys);
  LinearizedSystem lin = linearize(sys);
  double Vstar = velocity_bound(lin, 2000, cfg.seed);

  // coupling completeness within the Theta truncation needs harmonics up to lambda_max
  int hb = std::max(cfg.harmonic_bound, cfg.lambda_max);
  ResonanceSet set = enumerate_resonances(lin, cfg.box_radius, hb, cfg.res_tol, cfg.tol,
                                          cfg.threads);
  double C0 = cfg.C0 > 0 ? cfg.C0 : calibrate_C0(set);
  Partition part = partition_frequency_sets(set, C0);
  // the coupled solve is truncated to the resonant directions inside the box
  std::vector<int> res_ids;
  for (int id : part.F_inc_res)
    if (set.in_box[id]) res_ids.push_back(id);

  double T = cfg.grid.T;
  int halvings = 0;
  ResonantSolveResult rres;
  ResonantSystem rsys;
  SlowGrid g;
  TraceBundle traces;
  BoundaryForcing G;
  while (true) {
    g = cfg.grid;
    g.T = T;
    if (cfg.grid.Xd <= 0) g.Xd = 2.05 * Vstar * T;
    G = make_forcing(static_cast<int>(lin.B.rows()), cfg.forcing, g);
    check_epsilon_guard(lin, g, cfg.epsilon);

    // Burgers modes: non-resonant incoming directions carrying forcing
    std::vector<int> burgers_ids;
    for (int id : part.nonresonant) {
      const ModeKey& mk = set.modes[id];
      bool active = false;
      for (int l = 1; l <= cfg.lambda_max && !active; ++l) {
        VecI n = l * mk.n0;
        for (const ForcingMode& c : G.comps)
          if ((c.n - n).isZero() || (c.n + n).isZero()) active = true;
      }
      if (active) burgers_ids.push_back(id);
    }

    std::vector<int> all_ids = res_ids;
    all_ids.insert(all_ids.end(), burgers_ids.begin(), burgers_ids.end());
    traces = boundary_traces(lin, lin.B, G, set, all_ids, g, cfg.lambda_max, cfg.tol);

    rsys = make_resonant_system(lin, set, res_ids, g, cfg.lambda_max, Vstar);
    rsys.use_skew_fd = cfg.use_skew_fd;
    rsys.skew_h = cfg.skew_h;
    rsys.threads = cfg.threads;
    check_cfl(rsys);
    BoundarySlab h = pack_boundary(traces, res_ids, g, cfg.lambda_max);
    try {
      rres = solve_resonant_system(rsys, h, cfg.picard_tol, cfg.picard_max_iter);
      out.T_used = T;
      out.halvings = halvings;

      // non-resonant Burgers modes, independent problems
      std::vector<std::pair<int, BurgersResult>> burgers;
      for (int id : burgers_ids) {
        SolverMode sm = make_solver_mode(lin, set.modes[id]);
        BoundarySlab hb = pack_boundary(traces, {id}, g, cfg.lambda_max);
        burgers.emplace_back(id, solve_burgers_mode(sm, sm.gamma_self, hb, g,
                                                    cfg.lambda_max, cfg.picard_tol,
                                                    cfg.picard_max_iter, cfg.threads));
      }

      EvanescentPart ev = assemble_evanescent(lin, lin.B, G, std::max(1.0, 0.5 * g.Xd),
                                              cfg.tol);

      // diagnostics
      CheckReport& rep = out.diagnostics;
      FiniteSpeedReport fsr = finite_speed_check(rres.U, Vstar, lin.m);
      rep.add_residual("finite_speed_leakage", fsr.leakage, 1e-8);
      EnergyReport er = energy_diagnostic(rres.U, &rres.U, nullptr, lin.m);
      rep.add("energy_constant", er.C, 0.0, std::isfinite(er.C),
              "per-slab energy inequality constant");
      double zm = rsys.modes.empty() ? 0.0 : zero_mode_defect(rsys, rres.U, g.nx / 2);
      rep.add_residual("zero_mode_defect", zm, 1e-12);
      rep.add("picard_iterations", rres.picard.iterations, cfg.picard_max_iter,
              rres.picard.iterations <= cfg.picard_max_iter);
      double ev_rate_err = 0.0;
      for (std::size_t c = 0; c < ev.comps.size(); ++c) {
        if (ev.comps[c].mu <= 0 || ev.comps[c].vec.norm() < 1e-14) continue;
        double psi = 1.0 / ev.comps[c].mu;
        CVec v0 = ev.comps[c].vec;
        CMat prop = evanescent_propagator(ev.comps[c].dec, psi, true);
        double ratio = (prop * v0).norm() / v0.norm();
        double expected = std::exp(-ev.comps[c].mu * psi);
        ev_rate_err = std::max(ev_rate_err, std::abs(ratio - expected) / expected);
      }
      rep.add_residual("evanescent_decay_rate", ev_rate_err, 0.05);
      double trace_ratio =
          traces.forcing_norm_sq > 0
              ? (traces.osc_norm_sq + traces.ev_norm_sq) / traces.forcing_norm_sq
              : 0.0;
      rep.add("trace_splitting_constant", trace_ratio, 0.0, std::isfinite(trace_ratio));

      if (write_files) {
        fs::path dir(cfg.out_dir);
        fs::create_directories(dir);
        // mode manifest
        json manifest;
        manifest["epsilon"] = cfg.epsilon;
        manifest["T"] = g.T;
        manifest["Ly"] = g.Ly;
        manifest["Xd"] = g.Xd;
        manifest["nt"] = g.nt;
        manifest["ny"] = g.ny;
        manifest["nx"] = g.nx;
        manifest["lambda_max"] = cfg.lambda_max;
        json modes = json::array();
        for (const SolverMode& sm : rsys.modes) {
          json mj;
          mj["n0"] = std::vector<int>(sm.key.n0.data(), sm.key.n0.data() + sm.key.n0.size());
          mj["xi0"] = sm.key.xi0;
          mj["branch"] = sm.key.branch;
          mj["set"] = "resonant";
          modes.push_back(mj);
        }
        for (const auto& [id, br] : burgers) {
          json mj;
          const ModeKey& mk = set.modes[id];
          mj["n0"] = std::vector<int>(mk.n0.data(), mk.n0.data() + mk.n0.size());
          mj["xi0"] = mk.xi0;
          mj["branch"] = mk.branch;
          mj["set"] = "burgers";
          modes.push_back(mj);
        }
        manifest["modes"] = modes;
        manifest["index_order"] = {"mode", "lambda", "t", "y", "xd"};
        write_text(dir / "fields_manifest.json", manifest.dump(2) + "\n");

        // binary: one flat file per field, index order (mode, lambda, t, y, xd);
        // csv: one file per mode with columns t,y,xd,lambda,re,im
        auto write_field = [&](const Field& F, const std::string& stem) {
          if (cfg.format == "bin") {
            std::ofstream bf(dir / (stem + ".bin"), std::ios::binary);
            for (int m = 0; m < F.n_modes(); ++m)
              for (int l = 1; l <= F.L(); ++l)
                for (int it = 0; it < g.nt; ++it)
                  for (int iy = 0; iy < g.ny; ++iy)
                    for (int ix = 0; ix < g.nx; ++ix) {
                      Cplx v = F.at(ix, m, l, iy, it);
                      double re = v.real(), im = v.imag();
                      bf.write(reinterpret_cast<const char*>(&re), sizeof(double));
                      bf.write(reinterpret_cast<const char*>(&im), sizeof(double));
                    }
          } else {
            for (int m = 0; m < F.n_modes(); ++m) {
              std::ostringstream os;
              os << "t,y,xd,lambda,re,im\n";
              for (int l = 1; l <= F.L(); ++l)
                for (int it = 0; it < g.nt; ++it)
                  for (int iy = 0; iy < g.ny; ++iy)
                    for (int ix = 0; ix < g.nx; ++ix) {
                      Cplx v = F.at(ix, m, l, iy, it);
                      os << fmt_g17(g.t(it)) << "," << fmt_g17(g.y(iy)) << ","
                         << fmt_g17(g.x(ix)) << "," << l << "," << fmt_g17(v.real())
                         << "," << fmt_g17(v.imag()) << "\n";
                    }
              write_text(dir / (stem + "_m" + std::to_string(m) + ".csv"), os.str());
            }
          }
        };
        write_field(rres.U, "field_resonant");
        int bidx = 0;
        for (const auto& [id, br] : burgers) {
          write_field(br.S, "field_burgers_" + std::to_string(bidx));
          ++bidx;
        }

        json diag = report_json(out.diagnostics);
        diag["energy_per_slab"] = er.energy;
        diag["picard_updates"] = rres.picard.updates;
        diag["T_used"] = out.T_used;
        diag["halvings"] = out.halvings;
        write_text(dir / "diagnostics.json", diag.dump(2) + "\n");
      }
      return out;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::PicardDivergence) throw;
      ++halvings;
      if (halvings > cfg.max_halvings)
        throw Error(ErrorCode::NoContraction,
                    "Picard failed after " + std::to_string(halvings - 1) + " halvings");
      T *= 0.5;
    }
  }
}

int cmd_solve(const RunConfig& cfg) {
  try {
    SolveOutputs out = run_solve_pipeline(cfg, true);
    return out.diagnostics.all_pass() ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
}

int cmd_demo_euler(const RunConfig& base) {
  RunConfig cfg = base;
  cfg.builtin = "euler2d";
  if (cfg.forcing.empty()) cfg.forcing = default_euler_config().forcing;
  int rc1 = cmd_assumptions(cfg);
  int rc2 = cmd_resonances(cfg);
  int rc3 = cmd_solve(cfg);
  return rc1 || rc2 || rc3 ? 1 : 0;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"leading WKB profile toolkit for hyperbolic boundary value problems"};
  app.require_subcommand(1);

  std::string config_path, out_dir, format;
  int box = -1, harmonics = -1, threads = -1;
  double tolv = -1;
  long seed = -1;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--format", format, "field output format: csv|bin");
  app.add_option("--seed", seed, "seed for sampled sweeps");
  app.add_option("--box", box, "lattice box radius");
  app.add_option("--harmonics", harmonics, "harmonic bound");
  app.add_option("--tol", tolv, "resonance tolerance");
  app.add_option("--threads", threads, "worker threads (0 = hardware)");

  auto* analyze = app.add_subcommand("analyze", "eigen/projector/Lax verification sweep");
  auto* assumptions = app.add_subcommand("assumptions", "assumption report");
  auto* resonances = app.add_subcommand("resonances", "resonance enumeration CSV");
  auto* gamma = app.add_subcommand("gamma", "resonance coefficient table");
  auto* solve = app.add_subcommand("solve", "leading-profile solve");
  auto* demo = app.add_subcommand("demo-euler", "full Euler pipeline");
  auto* verify = app.add_subcommand("verify", "identity verification report");
  for (CLI::App* sub : {analyze, assumptions, resonances, gamma, solve, demo, verify})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  RunConfig cfg;
  try {
    cfg = config_path.empty() ? default_euler_config() : parse_config(config_path);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (!format.empty()) cfg.format = format;
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
  if (box >= 0) cfg.box_radius = box;
  if (harmonics >= 0) cfg.harmonic_bound = harmonics;
  if (tolv > 0) cfg.res_tol = tolv;
  if (threads >= 0) cfg.threads = threads;

  try {
    if (analyze->parsed()) return cmd_analyze(cfg);
    if (assumptions->parsed()) return cmd_assumptions(cfg);
    if (resonances->parsed()) return cmd_resonances(cfg);
    if (gamma->parsed()) return cmd_gamma(cfg);
    if (solve->parsed()) return cmd_solve(cfg);
    if (demo->parsed()) return cmd_demo_euler(cfg);
    if (verify->parsed()) return cmd_verify(cfg);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace wkb
