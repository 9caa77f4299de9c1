#pragma once

#include <vector>

#include "sotglp/mat.hpp"
#include "sotglp/sinkhorn.hpp"

namespace sotglp {

// Top-K patches for one (image, class) pair, shared by all of that class's
// local prompts. Indices are ascending; gradients reach only these rows.
struct SparseSupport {
  std::vector<int> indices;       // K ascending patch indices
  Mat features;                   // K x d rows of z_local at those indices
  std::vector<double> saliency;   // saliency of the selected patches
};

struct LocalScoreOut {
  Mat phi;             // 1 x 1, tracked whenever inputs are
  TransportPlan plan;  // K x n_local
  SparseSupport support;
  Mat sim;             // K x n_local
};

// Mean similarity of every patch against the class's local prompt ensemble.
// Ranking only; never differentiated.
std::vector<double> saliency_map(const Mat& z_local, const Mat& local_emb);

// K largest-saliency patches; ties prefer the smaller patch index.
SparseSupport top_k_select(const std::vector<double>& saliency, const Mat& z_local, int k);

// Full local branch for one (image, class): saliency -> shared top-K ->
// pairwise sims -> balanced OT -> transport-weighted score.
// sim_bound widens cost_from_sim's contract for the no-normalize ablation.
LocalScoreOut local_class_score(const Mat& z_local, const Mat& local_emb, int k,
                                const SinkhornConfig& cfg, double sim_bound = 1.0);

}  // namespace sotglp
