#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <vector>

#include "sotglp/error.hpp"

namespace sotglp {

class Tape;

// Dense row-major f64 matrix. Values are immutable once an op has consumed
// them; a Mat optionally points at the tape node that produced it. Tracked
// Mats must not outlive their Tape.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // rows * cols, row-major
  Tape* tape = nullptr;
  int node = -1;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}
  Mat(int r, int c, std::vector<double> values);

  static Mat zeros(int r, int c) { return Mat(r, c); }
  static Mat filled(int r, int c, double v);
  static Mat identity(int n);
  static Mat of(std::initializer_list<std::initializer_list<double>> rows);
  static Mat row(std::initializer_list<double> values);
  static Mat gaussian(std::mt19937_64& rng, int r, int c, double sigma);

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  size_t size() const { return data.size(); }
  bool tracked() const { return tape != nullptr; }
  bool is_scalar() const { return rows == 1 && cols == 1; }
  double scalar() const;

  // Value copy with no tape association.
  Mat detach() const;
};

bool all_finite(const Mat& m);
bool same_shape(const Mat& a, const Mat& b);
// FNV-1a over the raw bytes of the entries; used for frozen-weight audits.
std::uint64_t checksum(const Mat& m);

// Reverse-mode tape. One tape per forward pass; nodes are recorded in
// topological order as ops execute. backward() may be run once.
class Tape {
 public:
  // Receives this node's gradient buffer and accumulates into parents.
  using BackFn = std::function<void(Tape&, const std::vector<double>&)>;

  int push(int rows, int cols, BackFn back);
  Mat leaf(const Mat& value);  // copies value, registers a parameter leaf

  // Requires loss to be a tracked 1x1 on this tape; single use.
  void backward(const Mat& loss);

  // Gradient of a tracked Mat after backward(); zero Mat if never reached.
  Mat grad(const Mat& m) const;
  Mat grad_of_node(int id) const;

  const std::vector<int>& leaf_ids() const { return leaf_ids_; }
  size_t num_nodes() const { return nodes_.size(); }

  // Used by op backward closures.
  std::vector<double>& grad_buf(int id);

 private:
  struct Node {
    int rows, cols;
    BackFn back;
  };
  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  std::vector<char> reached_;
  std::vector<int> leaf_ids_;
  bool ran_backward_ = false;
};

// ---- differentiable ops ------------------------------------------------
// Each op computes eagerly and records itself when any input is tracked.
// Shapes must match exactly; there is no implicit broadcasting.

Mat matmul(const Mat& a, const Mat& b);
Mat transpose(const Mat& a);
Mat add(const Mat& a, const Mat& b);
Mat sub(const Mat& a, const Mat& b);
Mat hadamard(const Mat& a, const Mat& b);
Mat affine(const Mat& a, double alpha, double beta);  // alpha * a + beta
Mat add_rowvec(const Mat& m, const Mat& v);           // v is 1 x m.cols
Mat add_colvec(const Mat& m, const Mat& u);           // u is m.rows x 1
Mat softmax_rows(const Mat& x);
Mat l2norm_rows(const Mat& x);
Mat logsumexp_rows(const Mat& x);  // -> rows x 1
Mat logsumexp_cols(const Mat& x);  // -> 1 x cols
Mat exp_elem(const Mat& x);
Mat sum_all(const Mat& x);    // -> 1 x 1
Mat mean_rows(const Mat& x);  // mean over the row axis -> 1 x cols
Mat vstack(const std::vector<Mat>& parts);
Mat slice_rows(const Mat& x, int begin, int end);          // [begin, end)
Mat gather_rows(const Mat& x, const std::vector<int>& indices);
// Assembles a rows x cols matrix from row-major 1x1 cells.
Mat stack_scalars(int rows, int cols, const std::vector<Mat>& cells);
// Mean cross-entropy of logits against integer labels, log-sum-exp form.
Mat cross_entropy(const Mat& logits, const std::vector<int>& labels);

// Convenience wrapper matching the rest of the op vocabulary.
inline void backward(const Mat& loss) {
  if (!loss.tracked()) throw ContractError("backward: loss is not tracked on any tape");
  loss.tape->backward(loss);
}

// Central-difference gradient oracle: (f(x+h e_i) - f(x-h e_i)) / 2h per
// coordinate of every leaf. f must be deterministic; evaluations are
// untracked. Non-finite values of f propagate into the result.
std::vector<Mat> finite_diff_grad(const std::function<double(const std::vector<Mat>&)>& f,
                                  const std::vector<Mat>& leaves, double h);

}  // namespace sotglp
