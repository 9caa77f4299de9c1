#pragma once

#include <utility>
#include <vector>

#include "sotglp/mat.hpp"

namespace sotglp {

struct SinkhornConfig {
  double epsilon = 0.05;   // entropic regularization on costs in [0, 2]
  int max_iters = 200;
  double tol = 1e-6;       // L1 marginal violation threshold
  bool unroll_grad = true; // differentiate through iterations vs detach plan
  // Overrelaxation factor for the dual updates, in [1, 2). 1 is the plain
  // update. Past a warmup the solver re-tunes the factor from the observed
  // violation decay (Young's rule), which keeps near-degenerate instances
  // inside the iteration budget.
  double omega = 1.5;

  void validate() const;
};

// Plan with uniform marginals a = 1/K, b = 1/N. Column sums equal b exactly
// because the column scaling runs last in every iteration.
struct TransportPlan {
  Mat plan;  // K x N, nonnegative
  int iterations_used = 0;
  double final_violation = 0.0;
  bool converged = false;
};

// C = 1 - sim. Entries of sim must lie in [-bound, bound] (+1e-9 slack);
// bound is 1 for unit-normalized features and is raised when row
// normalization is disabled.
Mat cost_from_sim(const Mat& sim, double bound = 1.0);

// Log-domain alternating dual updates until the L1 marginal violation drops
// below cfg.tol or the iteration budget runs out. Non-convergence is
// reported through the flag, never thrown. With unroll_grad and a tracked
// cost, the returned plan participates in the tape through every executed
// iteration; otherwise it is a constant.
TransportPlan sinkhorn_plan(const Mat& cost, const SinkhornConfig& cfg);

// phi = sum_{u,v} T_uv * sim_uv.
Mat transport_score(const TransportPlan& plan, const Mat& sim);

// Exact OT cost for square instances with uniform marginals: enumerates all
// K! assignments and returns (1/K) * min_pi sum_i C[i, pi(i)] together with
// the argmin permutation (lexicographically smallest on ties). K <= 8.
std::pair<double, std::vector<int>> exact_matching_oracle(const Mat& cost);

// ||row_sums - 1/K||_1 + ||col_sums - 1/N||_1.
double marginal_violation(const Mat& plan);

}  // namespace sotglp
