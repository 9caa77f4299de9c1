#pragma once

#include <vector>

#include "sotglp/mat.hpp"

namespace sotglp {

struct ScoringConfig {
  double tau = 0.07;     // shared temperature for both branches
  double lambda = 0.25;  // local-branch weight
  void validate() const;
};

struct BatchLogits {
  Mat global_logits;  // B x C
  Mat local_logits;   // B x C
  Mat fused;          // global + lambda * local
};

// s_{i,c} = mean over active global prompts of <z_i, T^g_{c,m}> / tau.
// global_embs holds one n_global x d matrix per class.
Mat global_scores(const Mat& z_global, const std::vector<Mat>& global_embs,
                  const std::vector<int>& active, double tau);

// Softmax over one row of logits (plain values).
std::vector<double> class_probs(const std::vector<double>& logits);

Mat total_loss(const Mat& loss_global, const Mat& loss_local, double lambda);
Mat fused_logits(const Mat& global_logits, const Mat& local_logits, double lambda);

// Max softmax probability of the global logits row.
double mcm_score(const std::vector<double>& global_logits_row);

// mcm plus the best per-patch class-softmax over patch/class similarities.
// Falls back to mcm alone when there are no patches (flag reported).
double glmcm_score(const std::vector<double>& global_logits_row, const Mat& patch_class_sims,
                   double tau, bool* fell_back = nullptr);

}  // namespace sotglp
