#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "dnadmm/problem.hpp"
#include "dnadmm/reference.hpp"
#include "dnadmm/solver.hpp"

namespace dnadmm {

// Deliberate corruption injected into the iteration so the suite can prove
// its checks are able to fail: flipping the neighbor-sum sign breaks the
// stationarity identity and the contraction while leaving the purely
// structural checks intact.
enum class Fault { none, flip_coupling_sign };

struct CheckResult {
  std::string name;
  long iterations = 0;     // iterations actually evaluated
  double worst_margin = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string note;
};

struct CertificateReport {
  std::vector<CheckResult> checks;
  bool pass = false;  // conjunction of all checks

  nlohmann::json to_json() const;
  std::string table() const;
};

// Run `iters` iterations of the global form and assert, per iteration:
//   coupling-spectral-radius  measured σ_max(D^{−1/2}ND^{−1/2}) ≤ closed-form
//                             bound (slack 1e−10)
//   dual-in-row-space         ‖(I − P)y_t‖ ≤ 1e−9, P the projector onto the
//                             row space of the constraint matrix
//   subgradient-membership    y^{m+1} within 1e−8 of ∂g(ẑ)
//   stationarity-identity     ‖∇F(x⁺) − ∇F(x⋆) + B(y⁺−y⋆) + e_t + ε(x⁺−x_t)‖
//                             ≤ 1e−8, with e_t from the definitional dense
//                             route (independent of the step's own algebra)
//   error-bound               ‖e_t‖ ≤ γ‖x⁺ − x_t‖ (slack 1e−10)
//   contraction               V_{t+1} ≤ V_t/(1+δ) + 1e−9
// The checks always use the correct operators even when a fault corrupts the
// iteration itself. Divergence stops the loop and is noted; margins already
// collected stand.
CertificateReport certify(const Problem& problem, const Hyper& h,
                          const TheoryParams& theory, long iters,
                          const ReferenceSolution& star, Fault fault = Fault::none);

}  // namespace dnadmm
