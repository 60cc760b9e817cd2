#pragma once

#include <complex>
#include <cstdio>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace wkb {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using VecI = Eigen::VectorXi;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using Cplx = std::complex<double>;

enum class ErrorCode {
  SingularNormalMatrix,
  NonFiniteCoefficient,
  DimensionMismatch,
  EigenvalueCollision,
  ComplexSpectrum,
  NearCharacteristicAmbiguity,
  DegenerateBranch,
  GlancingBranch,
  GlancingFrequency,
  DefectiveElliptic,
  NotASymmetrizer,
  IllConditioned,
  ZeroVector,
  ZeroFrequency,
  GlancingOnLattice,
  NullProjectedPolarization,
  PartitionClosureViolation,
  ExactGlancing,
  ParameterOutOfRange,
  CFLViolation,
  PicardDivergence,
  ShockProximity,
  UnboundedCoupling,
  NoContraction,
  GridMismatch,
  EpsilonTooSmallForGrid,
  ConfigParse,
};

inline const char* error_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::SingularNormalMatrix: return "SingularNormalMatrix";
    case ErrorCode::NonFiniteCoefficient: return "NonFiniteCoefficient";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EigenvalueCollision: return "EigenvalueCollision";
    case ErrorCode::ComplexSpectrum: return "ComplexSpectrum";
    case ErrorCode::NearCharacteristicAmbiguity: return "NearCharacteristicAmbiguity";
    case ErrorCode::DegenerateBranch: return "DegenerateBranch";
    case ErrorCode::GlancingBranch: return "GlancingBranch";
    case ErrorCode::GlancingFrequency: return "GlancingFrequency";
    case ErrorCode::DefectiveElliptic: return "DefectiveElliptic";
    case ErrorCode::NotASymmetrizer: return "NotASymmetrizer";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::ZeroFrequency: return "ZeroFrequency";
    case ErrorCode::GlancingOnLattice: return "GlancingOnLattice";
    case ErrorCode::NullProjectedPolarization: return "NullProjectedPolarization";
    case ErrorCode::PartitionClosureViolation: return "PartitionClosureViolation";
    case ErrorCode::ExactGlancing: return "ExactGlancing";
    case ErrorCode::ParameterOutOfRange: return "ParameterOutOfRange";
    case ErrorCode::CFLViolation: return "CFLViolation";
    case ErrorCode::PicardDivergence: return "PicardDivergence";
    case ErrorCode::ShockProximity: return "ShockProximity";
    case ErrorCode::UnboundedCoupling: return "UnboundedCoupling";
    case ErrorCode::NoContraction: return "NoContraction";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::EpsilonTooSmallForGrid: return "EpsilonTooSmallForGrid";
    case ErrorCode::ConfigParse: return "ConfigParse";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Static-chunk parallel map. Each index is computed independently, so the
// result does not depend on the thread count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                         int threads = 0) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  if (threads == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t nt = std::min<std::size_t>(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    pool.emplace_back([&, t]() {
      for (std::size_t i = t; i < n; i += nt) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

// Deterministic sampling helpers (all randomness is seed-pinned).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform(double a, double b) {
    std::uniform_real_distribution<double> d(a, b);
    return d(gen_);
  }
  double normal() {
    std::normal_distribution<double> d(0.0, 1.0);
    return d(gen_);
  }
  Vec unit_vector(int dim) {
    Vec v(dim);
    do {
      for (int i = 0; i < dim; ++i) v[i] = normal();
    } while (v.norm() < 1e-12);
    return v / v.norm();
  }
  Vec vector(int dim, double scale = 1.0) {
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v[i] = scale * uniform(-1.0, 1.0);
    return v;
  }
  int integer(int lo, int hi) {
    std::uniform_int_distribution<int> d(lo, hi);
    return d(gen_);
  }

 private:
  std::mt19937_64 gen_;
};

struct CheckItem {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;
};

struct CheckReport {
  std::vector<CheckItem> checks;
  void add(const std::string& name, double value, double tol, bool pass,
           const std::string& detail = "") {
    checks.push_back({name, value, tol, pass, detail});
  }
  // pass iff value <= tol
  void add_residual(const std::string& name, double value, double tol,
                    const std::string& detail = "") {
    add(name, value, tol, value <= tol, detail);
  }
  // pass iff value >= tol
  void add_margin(const std::string& name, double value, double tol,
                  const std::string& detail = "") {
    add(name, value, tol, value >= tol, detail);
  }
  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

// Fixed formatting so repeated runs emit byte-identical files.
inline std::string fmt_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace wkb
