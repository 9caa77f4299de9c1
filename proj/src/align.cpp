#include "sotglp/align.hpp"

#include <algorithm>
#include <numeric>

namespace sotglp {

std::vector<double> saliency_map(const Mat& z_local, const Mat& local_emb) {
  if (z_local.cols != local_emb.cols) throw DimensionError("saliency_map: feature dims differ");
  const int p = z_local.rows, n = local_emb.rows, d = z_local.cols;
  std::vector<double> sal(p, 0.0);
  for (int i = 0; i < p; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      double dot = 0.0;
      for (int x = 0; x < d; ++x) dot += z_local.at(i, x) * local_emb.at(j, x);
      s += dot;
    }
    sal[i] = s / n;
  }
  return sal;
}

SparseSupport top_k_select(const std::vector<double>& saliency, const Mat& z_local, int k) {
  const int p = static_cast<int>(saliency.size());
  if (p != z_local.rows) throw DimensionError("top_k_select: saliency length != patch count");
  if (k < 1 || k > p) throw SizeError("top_k_select: K must be in [1, P]");
  std::vector<int> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
    if (saliency[a] != saliency[b]) return saliency[a] > saliency[b];
    return a < b;
  });
  SparseSupport out;
  out.indices.assign(order.begin(), order.begin() + k);
  std::sort(out.indices.begin(), out.indices.end());
  out.features = gather_rows(z_local, out.indices);
  out.saliency.reserve(k);
  for (int idx : out.indices) out.saliency.push_back(saliency[idx]);
  return out;
}

LocalScoreOut local_class_score(const Mat& z_local, const Mat& local_emb, int k,
                                const SinkhornConfig& cfg, double sim_bound) {
  LocalScoreOut out;
  out.support = top_k_select(saliency_map(z_local, local_emb), z_local, k);
  out.sim = matmul(out.support.features, transpose(local_emb));
  out.plan = sinkhorn_plan(cost_from_sim(out.sim, sim_bound), cfg);
  out.phi = transport_score(out.plan, out.sim);
  return out;
}

}  // namespace sotglp
