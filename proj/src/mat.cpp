#include "sotglp/mat.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace sotglp {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw DimensionError(msg);
}

// Tape the result of an op lives on; inputs tracked on two different tapes
// cannot be mixed.
Tape* joint_tape(const Mat& a, const Mat& b) {
  if (a.tape && b.tape && a.tape != b.tape)
    throw ContractError("op: inputs belong to different tapes");
  return a.tape ? a.tape : b.tape;
}

int node_of(const Mat& m) { return m.tape ? m.node : -1; }

void axpy(std::vector<double>& dst, const std::vector<double>& src) {
  for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

Mat::Mat(int r, int c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != static_cast<size_t>(r) * c)
    throw DimensionError("Mat: data length does not match rows*cols");
}

Mat Mat::filled(int r, int c, double v) {
  Mat m(r, c);
  std::fill(m.data.begin(), m.data.end(), v);
  return m;
}

Mat Mat::identity(int n) {
  Mat m(n, n);
  for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

Mat Mat::of(std::initializer_list<std::initializer_list<double>> rows_init) {
  int r = static_cast<int>(rows_init.size());
  int c = r > 0 ? static_cast<int>(rows_init.begin()->size()) : 0;
  Mat m(r, c);
  int i = 0;
  for (const auto& row : rows_init) {
    if (static_cast<int>(row.size()) != c) throw DimensionError("Mat::of: ragged rows");
    int j = 0;
    for (double v : row) m.at(i, j++) = v;
    ++i;
  }
  return m;
}

Mat Mat::row(std::initializer_list<double> values) {
  Mat m(1, static_cast<int>(values.size()));
  int j = 0;
  for (double v : values) m.at(0, j++) = v;
  return m;
}

Mat Mat::gaussian(std::mt19937_64& rng, int r, int c, double sigma) {
  Mat m(r, c);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto& v : m.data) v = sigma * dist(rng);
  return m;
}

double Mat::scalar() const {
  if (!is_scalar()) throw ContractError("Mat::scalar: matrix is not 1x1");
  return data[0];
}

Mat Mat::detach() const {
  Mat m(rows, cols, data);
  return m;
}

bool all_finite(const Mat& m) {
  for (double v : m.data)
    if (!std::isfinite(v)) return false;
  return true;
}

bool same_shape(const Mat& a, const Mat& b) { return a.rows == b.rows && a.cols == b.cols; }

std::uint64_t checksum(const Mat& m) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t bits) {
    for (int s = 0; s < 64; s += 8) {
      h ^= (bits >> s) & 0xFF;
      h *= 1099511628211ULL;
    }
  };
  mix(static_cast<std::uint64_t>(m.rows) << 32 | static_cast<std::uint32_t>(m.cols));
  for (double v : m.data) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    mix(bits);
  }
  return h;
}

// ---- Tape ----------------------------------------------------------------

int Tape::push(int rows, int cols, BackFn back) {
  nodes_.push_back(Node{rows, cols, std::move(back)});
  grads_.emplace_back();
  reached_.push_back(0);
  return static_cast<int>(nodes_.size()) - 1;
}

Mat Tape::leaf(const Mat& value) {
  Mat m = value.detach();
  m.tape = this;
  m.node = push(m.rows, m.cols, nullptr);
  leaf_ids_.push_back(m.node);
  return m;
}

std::vector<double>& Tape::grad_buf(int id) {
  auto& g = grads_[id];
  if (g.empty()) {
    g.assign(static_cast<size_t>(nodes_[id].rows) * nodes_[id].cols, 0.0);
    reached_[id] = 1;
  }
  return g;
}

void Tape::backward(const Mat& loss) {
  if (loss.tape != this || loss.node < 0)
    throw ContractError("Tape::backward: loss is not tracked on this tape");
  if (!loss.is_scalar()) throw ContractError("Tape::backward: loss must be 1x1");
  if (ran_backward_) throw ContractError("Tape::backward: tape already consumed");
  ran_backward_ = true;
  grad_buf(loss.node)[0] = 1.0;
  for (int i = loss.node; i >= 0; --i) {
    if (!reached_[i] || !nodes_[i].back) continue;
    nodes_[i].back(*this, grads_[i]);
  }
}

Mat Tape::grad_of_node(int id) const {
  if (id < 0 || id >= static_cast<int>(nodes_.size()))
    throw IndexError("Tape::grad_of_node: bad node id");
  Mat g(nodes_[id].rows, nodes_[id].cols);
  if (!grads_[id].empty()) g.data = grads_[id];
  return g;
}

Mat Tape::grad(const Mat& m) const {
  if (m.tape != this) throw ContractError("Tape::grad: Mat is not tracked on this tape");
  return grad_of_node(m.node);
}

// ---- ops -------------------------------------------------------------------

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) throw DimensionError("matmul: inner dimensions differ");
  Mat out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int k = 0; k < a.cols; ++k) {
      double aik = a.data[static_cast<size_t>(i) * a.cols + k];
      if (aik == 0.0) continue;
      const double* brow = &b.data[static_cast<size_t>(k) * b.cols];
      double* orow = &out.data[static_cast<size_t>(i) * out.cols];
      for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  if (Tape* t = joint_tape(a, b)) {
    int pa = node_of(a), pb = node_of(b);
    int ar = a.rows, ac = a.cols, bc = b.cols;
    std::vector<double> aval = pb >= 0 ? a.data : std::vector<double>{};
    std::vector<double> bval = pa >= 0 ? b.data : std::vector<double>{};
    out.tape = t;
    out.node = t->push(out.rows, out.cols, [=](Tape& tp, const std::vector<double>& g) {
      if (pa >= 0) {  // dA = G * B^T
        auto& ga = tp.grad_buf(pa);
        for (int i = 0; i < ar; ++i)
          for (int k = 0; k < ac; ++k) {
            double s = 0.0;
            const double* grow = &g[static_cast<size_t>(i) * bc];
            const double* brow = &bval[static_cast<size_t>(k) * bc];
            for (int j = 0; j < bc; ++j) s += grow[j] * brow[j];
            ga[static_cast<size_t>(i) * ac + k] += s;
          }
      }
      if (pb >= 0) {  // dB = A^T * G
        auto& gb = tp.grad_buf(pb);
        for (int i = 0; i < ar; ++i) {
          const double* grow = &g[static_cast<size_t>(i) * bc];
          for (int k = 0; k < ac; ++k) {
            double aik = aval[static_cast<size_t>(i) * ac + k];
            if (aik == 0.0) continue;
            double* gbrow = &gb[static_cast<size_t>(k) * bc];
            for (int j = 0; j < bc; ++j) gbrow[j] += aik * grow[j];
          }
        }
      }
    });
  }
  return out;
}

Mat transpose(const Mat& a) {
  Mat out(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
  if (a.tape) {
    int pa = a.node, r = a.rows, c = a.cols;
    out.tape = a.tape;
    out.node = a.tape->push(out.rows, out.cols, [=](Tape& tp, const std::vector<double>& g) {
      auto& ga = tp.grad_buf(pa);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) ga[static_cast<size_t>(i) * c + j] += g[static_cast<size_t>(j) * r + i];
    });
  }
  return out;
}

Mat add(const Mat& a, const Mat& b) {
  require(same_shape(a, b), "add: shapes differ");
  Mat out(a.rows, a.cols);
  for (size_t i = 0; i < out.size(); ++i) out.data[i] = a.data[i] + b.data[i];
  if (Tape* t = joint_tape(a, b)) {
    int pa = node_of(a), pb = node_of(b);
    out.tape = t;
    out.node = t->push(out.rows, out.cols, [=](Tape& tp, const std::vector<double>& g) {
      if (pa >= 0) axpy(tp.grad_buf(pa), g);
      if (pb >= 0) axpy(tp.grad_buf(pb), g);
    });
  }
  return out;
}

Mat sub(const Mat& a, const Mat& b) {
  require(same_shape(a, b), "sub: shapes differ");
  Mat out(a.rows, a.cols);
  for (size_t i = 0; i < out.size(); ++i) out.data[i] = a.data[i] - b.data[i];
  if (Tape* t = joint_tape(a, b)) {
    int pa = node_of(a), pb = node_of(b);
    out.tape = t;
    out.node = t->push(out.rows, out.cols, [=](Tape& tp, const std::vector<double>& g) {
      if (pa >= 0) axpy(tp.grad_buf(pa), g);
      if (pb >= 0) {
        auto& gb = tp.grad_buf(pb);
        for (size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return out;
}

Mat hadamard(const Mat& a, const Mat& b) {
  require(same_shape(a, b), "hadamard: shapes differ");
  Mat out(a.rows, a.cols);
  for (size_t i = 0; i < out.size(); ++i) out.data[i] = a.data[i] * b.data[i];
  if (Tape* t = joint_tape(a, b)) {
    int pa = node_of(a), pb = node_of(b);
    std::vector<double> aval = pb >= 0 ? a.data : std::vector<double>{};
    std::vector<double> bval = pa >= 0 ? b.data : std::vector<double>{};
    out.tape = t;
    out.node = t->push(out.rows, out.cols, [=](Tape& tp, const std::vector<double>& g) {
      if (pa >= 0) {
        auto& ga = tp.grad_buf(pa);
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bval[i];
      }
      if (pb >= 0) {
        auto& gb = tp.grad_buf(pb);
        for (size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * aval[i];
      }
    });
  }
  return out;
}

Mat affine(const Mat& a, double alpha, double beta) {
  Mat out(a.rows, a.cols);
  for (size_t i = 0; i < out.size(); ++i) out.data[i] = alpha * a.data[i] + beta;
  if (a.tape) {
    int pa = a.node;
    out.tape = a.tape;
    out.node = a.tape->push(out.rows, out.cols, [=](Tape& tp, const std::vector<double>& g) {
      auto& ga = tp.grad_buf(pa);
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += alpha * g[i];
    });
  }
  return out;
}

Mat add_rowvec(const Mat& m, const Mat& v) {
  if (v.rows != 1 || v.cols != m.cols) throw DimensionError("add_rowvec: v must be 1 x cols");
  Mat out(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) out.at(i, j) = m.at(i, j) + v.data[j];
  if (Tape* t = joint_tape(m, v)) {
    int pm = node_of(m), pv = node_of(v);
    int r = m.rows, c = m.cols;
    out.tape = t;
    out.node = t->push(r, c, [=](Tape& tp, const std::vector<double>& g) {
      if (pm >= 0) axpy(tp.grad_buf(pm), g);
      if (pv >= 0) {
        auto& gv = tp.grad_buf(pv);
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) gv[j] += g[static_cast<size_t>(i) * c + j];
      }
    });
  }
  return out;
}

Mat add_colvec(const Mat& m, const Mat& u) {
  if (u.cols != 1 || u.rows != m.rows) throw DimensionError("add_colvec: u must be rows x 1");
  Mat out(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) out.at(i, j) = m.at(i, j) + u.data[i];
  if (Tape* t = joint_tape(m, u)) {
    int pm = node_of(m), pu = node_of(u);
    int r = m.rows, c = m.cols;
    out.tape = t;
    out.node = t->push(r, c, [=](Tape& tp, const std::vector<double>& g) {
      if (pm >= 0) axpy(tp.grad_buf(pm), g);
      if (pu >= 0) {
        auto& gu = tp.grad_buf(pu);
        for (int i = 0; i < r; ++i) {
          double s = 0.0;
          for (int j = 0; j < c; ++j) s += g[static_cast<size_t>(i) * c + j];
          gu[i] += s;
        }
      }
    });
  }
  return out;
}

Mat softmax_rows(const Mat& x) {
  Mat out(x.rows, x.cols);
  for (int i = 0; i < x.rows; ++i) {
    const double* xr = &x.data[static_cast<size_t>(i) * x.cols];
    double* yr = &out.data[static_cast<size_t>(i) * x.cols];
    double mx = xr[0];
    for (int j = 1; j < x.cols; ++j) mx = std::max(mx, xr[j]);
    double z = 0.0;
    for (int j = 0; j < x.cols; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      z += yr[j];
    }
    for (int j = 0; j < x.cols; ++j) yr[j] /= z;
  }
  if (x.tape) {
    int px = x.node, r = x.rows, c = x.cols;
    std::vector<double> y = out.data;
    out.tape = x.tape;
    out.node = x.tape->push(r, c, [=](Tape& tp, const std::vector<double>& g) {
      auto& gx = tp.grad_buf(px);
      for (int i = 0; i < r; ++i) {
        const double* yr = &y[static_cast<size_t>(i) * c];
        const double* gr = &g[static_cast<size_t>(i) * c];
        double dot = 0.0;
        for (int j = 0; j < c; ++j) dot += gr[j] * yr[j];
        double* gxr = &gx[static_cast<size_t>(i) * c];
        for (int j = 0; j < c; ++j) gxr[j] += yr[j] * (gr[j] - dot);
      }
    });
  }
  return out;
}

Mat l2norm_rows(const Mat& x) {
  Mat out(x.rows, x.cols);
  std::vector<double> norms(x.rows);
  for (int i = 0; i < x.rows; ++i) {
    const double* xr = &x.data[static_cast<size_t>(i) * x.cols];
    double s = 0.0;
    for (int j = 0; j < x.cols; ++j) s += xr[j] * xr[j];
    double n = std::sqrt(s);
    if (n < 1e-12) throw DegenerateInputError("l2norm_rows: zero-norm row");
    norms[i] = n;
    double* yr = &out.data[static_cast<size_t>(i) * x.cols];
    for (int j = 0; j < x.cols; ++j) yr[j] = xr[j] / n;
  }
  if (x.tape) {
    int px = x.node, r = x.rows, c = x.cols;
    std::vector<double> y = out.data;
    out.tape = x.tape;
    out.node = x.tape->push(r, c, [=, norms = std::move(norms)](Tape& tp, const std::vector<double>& g) {
      auto& gx = tp.grad_buf(px);
      for (int i = 0; i < r; ++i) {
        const double* yr = &y[static_cast<size_t>(i) * c];
        const double* gr = &g[static_cast<size_t>(i) * c];
        double dot = 0.0;
        for (int j = 0; j < c; ++j) dot += gr[j] * yr[j];
        double* gxr = &gx[static_cast<size_t>(i) * c];
        for (int j = 0; j < c; ++j) gxr[j] += (gr[j] - dot * yr[j]) / norms[i];
      }
    });
  }
  return out;
}

namespace {

// Shared forward for the two logsumexp reductions: returns the reduced
// values and, when tracked, the softmax weights needed by backward.
void lse_rows_core(const Mat& x, std::vector<double>& out, std::vector<double>* weights) {
  for (int i = 0; i < x.rows; ++i) {
    const double* xr = &x.data[static_cast<size_t>(i) * x.cols];
    double mx = xr[0];
    for (int j = 1; j < x.cols; ++j) mx = std::max(mx, xr[j]);
    double z = 0.0;
    for (int j = 0; j < x.cols; ++j) z += std::exp(xr[j] - mx);
    out[i] = mx + std::log(z);
    if (weights) {
      double* wr = &(*weights)[static_cast<size_t>(i) * x.cols];
      for (int j = 0; j < x.cols; ++j) wr[j] = std::exp(xr[j] - out[i]);
    }
  }
}

}  // namespace

Mat logsumexp_rows(const Mat& x) {
  Mat out(x.rows, 1);
  std::vector<double> weights;
  if (x.tape) weights.resize(x.size());
  lse_rows_core(x, out.data, x.tape ? &weights : nullptr);
  if (x.tape) {
    int px = x.node, r = x.rows, c = x.cols;
    out.tape = x.tape;
    out.node = x.tape->push(r, 1, [=, w = std::move(weights)](Tape& tp, const std::vector<double>& g) {
      auto& gx = tp.grad_buf(px);
      for (int i = 0; i < r; ++i) {
        const double* wr = &w[static_cast<size_t>(i) * c];
        double* gxr = &gx[static_cast<size_t>(i) * c];
        for (int j = 0; j < c; ++j) gxr[j] += g[i] * wr[j];
      }
    });
  }
  return out;
}

Mat logsumexp_cols(const Mat& x) {
  Mat out(1, x.cols);
  std::vector<double> weights;
  if (x.tape) weights.resize(x.size());
  // Column-wise reduction, max-subtracted like the row case.
  for (int j = 0; j < x.cols; ++j) {
    double mx = x.at(0, j);
    for (int i = 1; i < x.rows; ++i) mx = std::max(mx, x.at(i, j));
    double z = 0.0;
    for (int i = 0; i < x.rows; ++i) z += std::exp(x.at(i, j) - mx);
    out.data[j] = mx + std::log(z);
    if (x.tape)
      for (int i = 0; i < x.rows; ++i)
        weights[static_cast<size_t>(i) * x.cols + j] = std::exp(x.at(i, j) - out.data[j]);
  }
  if (x.tape) {
    int px = x.node, r = x.rows, c = x.cols;
    out.tape = x.tape;
    out.node = x.tape->push(1, c, [=, w = std::move(weights)](Tape& tp, const std::vector<double>& g) {
      auto& gx = tp.grad_buf(px);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) gx[static_cast<size_t>(i) * c + j] += g[j] * w[static_cast<size_t>(i) * c + j];
    });
  }
  return out;
}

Mat exp_elem(const Mat& x) {
  Mat out(x.rows, x.cols);
  for (size_t i = 0; i < x.size(); ++i) out.data[i] = std::exp(x.data[i]);
  if (x.tape) {
    int px = x.node;
    std::vector<double> y = out.data;
    out.tape = x.tape;
    out.node = x.tape->push(x.rows, x.cols, [=, y = std::move(y)](Tape& tp, const std::vector<double>& g) {
      auto& gx = tp.grad_buf(px);
      for (size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * y[i];
    });
  }
  return out;
}

Mat sum_all(const Mat& x) {
  Mat out(1, 1);
  double s = 0.0;
  for (double v : x.data) s += v;
  out.data[0] = s;
  if (x.tape) {
    int px = x.node;
    out.tape = x.tape;
    out.node = x.tape->push(1, 1, [=](Tape& tp, const std::vector<double>& g) {
      auto& gx = tp.grad_buf(px);
      for (auto& v : gx) v += g[0];
    });
  }
  return out;
}

Mat mean_rows(const Mat& x) {
  if (x.rows < 1) throw DimensionError("mean_rows: empty matrix");
  Mat out(1, x.cols);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) out.data[j] += x.at(i, j);
  for (int j = 0; j < x.cols; ++j) out.data[j] /= x.rows;
  if (x.tape) {
    int px = x.node, r = x.rows, c = x.cols;
    out.tape = x.tape;
    out.node = x.tape->push(1, c, [=](Tape& tp, const std::vector<double>& g) {
      auto& gx = tp.grad_buf(px);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) gx[static_cast<size_t>(i) * c + j] += g[j] / r;
    });
  }
  return out;
}

Mat vstack(const std::vector<Mat>& parts) {
  if (parts.empty()) throw DimensionError("vstack: no parts");
  int c = parts[0].cols;
  int r = 0;
  Tape* t = nullptr;
  for (const auto& p : parts) {
    if (p.cols != c) throw DimensionError("vstack: column counts differ");
    r += p.rows;
    if (p.tape) {
      if (t && t != p.tape) throw ContractError("vstack: inputs belong to different tapes");
      t = p.tape;
    }
  }
  Mat out(r, c);
  int off = 0;
  std::vector<int> offsets, nodes, nrows;
  for (const auto& p : parts) {
    std::copy(p.data.begin(), p.data.end(), out.data.begin() + static_cast<size_t>(off) * c);
    offsets.push_back(off);
    nodes.push_back(node_of(p));
    nrows.push_back(p.rows);
    off += p.rows;
  }
  if (t) {
    out.tape = t;
    out.node = t->push(r, c, [=](Tape& tp, const std::vector<double>& g) {
      for (size_t k = 0; k < nodes.size(); ++k) {
        if (nodes[k] < 0) continue;
        auto& gp = tp.grad_buf(nodes[k]);
        const double* gsrc = &g[static_cast<size_t>(offsets[k]) * c];
        for (size_t i = 0; i < gp.size(); ++i) gp[i] += gsrc[i];
      }
    });
  }
  return out;
}

Mat slice_rows(const Mat& x, int begin, int end) {
  if (begin < 0 || end > x.rows || begin >= end) throw IndexError("slice_rows: bad range");
  Mat out(end - begin, x.cols);
  std::copy(x.data.begin() + static_cast<size_t>(begin) * x.cols,
            x.data.begin() + static_cast<size_t>(end) * x.cols, out.data.begin());
  if (x.tape) {
    int px = x.node, c = x.cols, b = begin, n = end - begin;
    out.tape = x.tape;
    out.node = x.tape->push(n, c, [=](Tape& tp, const std::vector<double>& g) {
      auto& gx = tp.grad_buf(px);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j) gx[static_cast<size_t>(b + i) * c + j] += g[static_cast<size_t>(i) * c + j];
    });
  }
  return out;
}

Mat gather_rows(const Mat& x, const std::vector<int>& indices) {
  for (int idx : indices)
    if (idx < 0 || idx >= x.rows) throw IndexError("gather_rows: index out of range");
  Mat out(static_cast<int>(indices.size()), x.cols);
  for (size_t k = 0; k < indices.size(); ++k)
    std::copy(x.data.begin() + static_cast<size_t>(indices[k]) * x.cols,
              x.data.begin() + static_cast<size_t>(indices[k] + 1) * x.cols,
              out.data.begin() + k * x.cols);
  if (x.tape) {
    int px = x.node, c = x.cols;
    std::vector<int> idx = indices;
    out.tape = x.tape;
    out.node = x.tape->push(out.rows, c, [=, idx = std::move(idx)](Tape& tp, const std::vector<double>& g) {
      auto& gx = tp.grad_buf(px);
      for (size_t k = 0; k < idx.size(); ++k)
        for (int j = 0; j < c; ++j) gx[static_cast<size_t>(idx[k]) * c + j] += g[k * c + j];
    });
  }
  return out;
}

Mat stack_scalars(int rows, int cols, const std::vector<Mat>& cells) {
  if (static_cast<int>(cells.size()) != rows * cols)
    throw DimensionError("stack_scalars: cell count does not match rows*cols");
  Mat out(rows, cols);
  Tape* t = nullptr;
  std::vector<int> nodes(cells.size(), -1);
  for (size_t k = 0; k < cells.size(); ++k) {
    if (!cells[k].is_scalar()) throw DimensionError("stack_scalars: cell is not 1x1");
    out.data[k] = cells[k].data[0];
    if (cells[k].tape) {
      if (t && t != cells[k].tape) throw ContractError("stack_scalars: cells belong to different tapes");
      t = cells[k].tape;
      nodes[k] = cells[k].node;
    }
  }
  if (t) {
    out.tape = t;
    out.node = t->push(rows, cols, [nodes = std::move(nodes)](Tape& tp, const std::vector<double>& g) {
      for (size_t k = 0; k < nodes.size(); ++k)
        if (nodes[k] >= 0) tp.grad_buf(nodes[k])[0] += g[k];
    });
  }
  return out;
}

Mat cross_entropy(const Mat& logits, const std::vector<int>& labels) {
  if (static_cast<int>(labels.size()) != logits.rows)
    throw DimensionError("cross_entropy: one label per row required");
  for (int y : labels)
    if (y < 0 || y >= logits.cols) throw IndexError("cross_entropy: label out of range");
  int b = logits.rows, c = logits.cols;
  std::vector<double> probs(logits.size());
  double loss = 0.0;
  for (int i = 0; i < b; ++i) {
    const double* lr = &logits.data[static_cast<size_t>(i) * c];
    double mx = lr[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, lr[j]);
    double z = 0.0;
    for (int j = 0; j < c; ++j) z += std::exp(lr[j] - mx);
    double lse = mx + std::log(z);
    loss += lse - lr[labels[i]];
    for (int j = 0; j < c; ++j) probs[static_cast<size_t>(i) * c + j] = std::exp(lr[j] - lse);
  }
  Mat out(1, 1);
  out.data[0] = loss / b;
  if (logits.tape) {
    int px = logits.node;
    std::vector<int> y = labels;
    out.tape = logits.tape;
    out.node = logits.tape->push(1, 1, [=, probs = std::move(probs), y = std::move(y)](
                                           Tape& tp, const std::vector<double>& g) {
      auto& gx = tp.grad_buf(px);
      for (int i = 0; i < b; ++i)
        for (int j = 0; j < c; ++j) {
          double p = probs[static_cast<size_t>(i) * c + j];
          gx[static_cast<size_t>(i) * c + j] += g[0] * (p - (j == y[i] ? 1.0 : 0.0)) / b;
        }
    });
  }
  return out;
}

std::vector<Mat> finite_diff_grad(const std::function<double(const std::vector<Mat>&)>& f,
                                  const std::vector<Mat>& leaves, double h) {
  if (h <= 0) throw ContractError("finite_diff_grad: h must be positive");
  std::vector<Mat> theta;
  theta.reserve(leaves.size());
  for (const auto& m : leaves) theta.push_back(m.detach());
  std::vector<Mat> grads;
  grads.reserve(leaves.size());
  for (size_t li = 0; li < theta.size(); ++li) {
    Mat g(theta[li].rows, theta[li].cols);
    for (size_t i = 0; i < theta[li].size(); ++i) {
      double orig = theta[li].data[i];
      theta[li].data[i] = orig + h;
      double fp = f(theta);
      theta[li].data[i] = orig - h;
      double fm = f(theta);
      theta[li].data[i] = orig;
      g.data[i] = (fp - fm) / (2.0 * h);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

}  // namespace sotglp
