#include "sotglp/objective.hpp"

#include <algorithm>
#include <cmath>

namespace sotglp {

void ScoringConfig::validate() const {
  if (!(tau > 0.0)) throw ContractError("ScoringConfig: tau must be > 0");
  if (lambda < 0.0) throw ContractError("ScoringConfig: lambda must be >= 0");
}

Mat global_scores(const Mat& z_global, const std::vector<Mat>& global_embs,
                  const std::vector<int>& active, double tau) {
  if (active.empty()) throw ContractError("global_scores: active prompt set is empty");
  if (!(tau > 0.0)) throw ContractError("global_scores: tau must be > 0");
  std::vector<Mat> class_means;
  class_means.reserve(global_embs.size());
  for (const auto& emb : global_embs) class_means.push_back(mean_rows(gather_rows(emb, active)));
  Mat prototypes = vstack(class_means);  // C x d
  return affine(matmul(z_global, transpose(prototypes)), 1.0 / tau, 0.0);
}

std::vector<double> class_probs(const std::vector<double>& logits) {
  if (logits.empty()) throw ContractError("class_probs: empty logits");
  double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> probs(logits.size());
  double z = 0.0;
  for (size_t j = 0; j < logits.size(); ++j) {
    probs[j] = std::exp(logits[j] - mx);
    z += probs[j];
  }
  for (auto& p : probs) p /= z;
  return probs;
}

Mat total_loss(const Mat& loss_global, const Mat& loss_local, double lambda) {
  if (!loss_global.is_scalar() || !loss_local.is_scalar())
    throw DimensionError("total_loss: losses must be 1x1");
  return add(loss_global, affine(loss_local, lambda, 0.0));
}

Mat fused_logits(const Mat& global_logits, const Mat& local_logits, double lambda) {
  if (!same_shape(global_logits, local_logits)) throw DimensionError("fused_logits: shapes differ");
  return add(global_logits, affine(local_logits, lambda, 0.0));
}

double mcm_score(const std::vector<double>& global_logits_row) {
  auto probs = class_probs(global_logits_row);
  return *std::max_element(probs.begin(), probs.end());
}

double glmcm_score(const std::vector<double>& global_logits_row, const Mat& patch_class_sims,
                   double tau, bool* fell_back) {
  double global_part = mcm_score(global_logits_row);
  if (patch_class_sims.rows == 0) {
    if (fell_back) *fell_back = true;
    return global_part;
  }
  if (fell_back) *fell_back = false;
  if (!(tau > 0.0)) throw ContractError("glmcm_score: tau must be > 0");
  double local_part = 0.0;
  std::vector<double> row(patch_class_sims.cols);
  for (int p = 0; p < patch_class_sims.rows; ++p) {
    for (int c = 0; c < patch_class_sims.cols; ++c) row[c] = patch_class_sims.at(p, c) / tau;
    auto probs = class_probs(row);
    local_part = std::max(local_part, *std::max_element(probs.begin(), probs.end()));
  }
  return global_part + local_part;
}

}  // namespace sotglp
