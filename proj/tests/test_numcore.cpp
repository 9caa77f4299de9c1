#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sotglp/mat.hpp"
#include "sotglp/rng.hpp"

using namespace sotglp;

namespace {

// Independent product oracle: plain i/j/k accumulation.
Mat matmul_oracle(const Mat& a, const Mat& b) {
  Mat out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += a.at(i, k) * b.at(k, j);
      out.at(i, j) = s;
    }
  return out;
}

double max_abs_diff(const Mat& a, const Mat& b) {
  REQUIRE(same_shape(a, b));
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

double rel_err(const Mat& got, const Mat& want) {
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < got.size(); ++i) {
    num += (got.data[i] - want.data[i]) * (got.data[i] - want.data[i]);
    den += want.data[i] * want.data[i];
  }
  return std::sqrt(num) / (std::sqrt(den) + 1e-12);
}

// Backward vs central differences on the same loss builder. The builder must
// be deterministic and use only values reachable from the given leaves.
void check_grads(const std::function<Mat(const std::vector<Mat>&)>& build, const std::vector<Mat>& leaves,
                 double tol = 1e-6) {
  Tape tape;
  std::vector<Mat> tracked;
  tracked.reserve(leaves.size());
  for (const auto& m : leaves) tracked.push_back(tape.leaf(m));
  Mat loss = build(tracked);
  REQUIRE(loss.is_scalar());
  tape.backward(loss);

  auto fd = finite_diff_grad([&](const std::vector<Mat>& ls) { return build(ls).scalar(); }, leaves, 1e-5);
  for (size_t i = 0; i < leaves.size(); ++i) {
    Mat g = tape.grad(tracked[i]);
    CHECK(rel_err(g, fd[i]) <= tol);
  }
}

}  // namespace

TEST_CASE("matmul basics and oracle") {
  auto rng = make_rng(7);
  Mat x = Mat::gaussian(rng, 2, 3, 1.0);
  CHECK(max_abs_diff(matmul(Mat::identity(2), x), x) == 0.0);

  Mat a = Mat::of({{1, 2}, {3, 4}});
  Mat b = Mat::of({{1}, {1}});
  Mat c = matmul(a, b);
  CHECK(c.at(0, 0) == doctest::Approx(3.0));
  CHECK(c.at(1, 0) == doctest::Approx(7.0));

  Mat p = Mat::gaussian(rng, 5, 4, 1.0);
  Mat q = Mat::gaussian(rng, 4, 3, 1.0);
  CHECK(max_abs_diff(matmul(p, q), matmul_oracle(p, q)) <= 1e-14);

  CHECK_THROWS_AS(matmul(p, p), DimensionError);
}

TEST_CASE("matmul associativity on random triples") {
  auto rng = make_rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    Mat a = Mat::gaussian(rng, 3, 4, 1.0);
    Mat b = Mat::gaussian(rng, 4, 5, 1.0);
    Mat c = Mat::gaussian(rng, 5, 2, 1.0);
    CHECK(max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))) <= 1e-10);
  }
}

TEST_CASE("softmax_rows values") {
  Mat y = softmax_rows(Mat::row({0, 0, 0}));
  for (int j = 0; j < 3; ++j) CHECK(y.data[j] == doctest::Approx(1.0 / 3));

  Mat big = softmax_rows(Mat::row({1000, 1000}));
  CHECK(big.data[0] == doctest::Approx(0.5));
  CHECK(all_finite(big));

  Mat ln = softmax_rows(Mat::row({std::log(1.0), std::log(3.0)}));
  CHECK(ln.data[0] == doctest::Approx(0.25));
  CHECK(ln.data[1] == doctest::Approx(0.75));
}

TEST_CASE("softmax_rows: rows sum to one, shift invariant") {
  auto rng = make_rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    Mat x = Mat::gaussian(rng, 4, 6, 3.0);
    Mat y = softmax_rows(x);
    for (int i = 0; i < y.rows; ++i) {
      double s = 0.0;
      for (int j = 0; j < y.cols; ++j) {
        s += y.at(i, j);
        CHECK(y.at(i, j) >= 0.0);
      }
      CHECK(std::abs(s - 1.0) <= 1e-12);
    }
    Mat shifted = affine(x, 1.0, 17.5);
    CHECK(max_abs_diff(softmax_rows(shifted), y) <= 1e-12);
  }
}

TEST_CASE("l2norm_rows") {
  Mat y = l2norm_rows(Mat::of({{3, 4}}));
  CHECK(y.at(0, 0) == doctest::Approx(0.6));
  CHECK(y.at(0, 1) == doctest::Approx(0.8));

  CHECK(max_abs_diff(l2norm_rows(y), y) <= 1e-15);  // unit rows unchanged

  auto rng = make_rng(5);
  Mat x = Mat::gaussian(rng, 8, 5, 2.0);
  Mat n = l2norm_rows(x);
  for (int i = 0; i < n.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < n.cols; ++j) s += n.at(i, j) * n.at(i, j);
    CHECK(std::abs(std::sqrt(s) - 1.0) <= 1e-12);
  }

  Mat z = Mat::zeros(2, 3);
  CHECK_THROWS_AS(l2norm_rows(z), DegenerateInputError);
}

TEST_CASE("backward: trivial cases") {
  Tape tape;
  auto rng = make_rng(9);

  Mat w = tape.leaf(Mat::gaussian(rng, 3, 4, 1.0));
  Mat loss = sum_all(w);
  tape.backward(loss);
  Mat g = tape.grad(w);
  for (double v : g.data) CHECK(v == doctest::Approx(1.0));

  Tape tape2;
  Mat wv = Mat::gaussian(rng, 1, 5, 1.0);
  Mat xv = Mat::gaussian(rng, 1, 5, 1.0);
  Mat w2 = tape2.leaf(wv);
  Mat dot = matmul(w2, transpose(xv));
  tape2.backward(dot);
  CHECK(max_abs_diff(tape2.grad(w2), xv) <= 1e-15);

  Mat plain = Mat::gaussian(rng, 1, 1, 1.0);
  CHECK_THROWS_AS(backward(plain), ContractError);
}

TEST_CASE("finite_diff_grad basics") {
  Mat x0(1, 1);
  x0.data[0] = 3.0;
  auto square = [](const std::vector<Mat>& ls) { return ls[0].data[0] * ls[0].data[0]; };
  auto g = finite_diff_grad(square, {x0}, 1e-5);
  CHECK(std::abs(g[0].data[0] - 6.0) <= 1e-6);

  auto constant = [](const std::vector<Mat>&) { return 42.0; };
  auto gc = finite_diff_grad(constant, {x0}, 1e-5);
  CHECK(gc[0].data[0] == doctest::Approx(0.0));
}

TEST_CASE("gradients of every op vs finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto rng = make_rng(seed, 100);
    Mat a = Mat::gaussian(rng, 3, 4, 1.0);
    Mat b = Mat::gaussian(rng, 4, 3, 1.0);
    Mat v = Mat::gaussian(rng, 1, 3, 1.0);
    Mat u = Mat::gaussian(rng, 3, 1, 1.0);

    // matmul / transpose / softmax / lse / affine / hadamard / sub
    check_grads(
        [](const std::vector<Mat>& ls) {
          Mat m = matmul(ls[0], ls[1]);
          Mat s = softmax_rows(affine(m, 1.5, -0.25));
          Mat t = hadamard(s, transpose(m));
          Mat l = logsumexp_rows(sub(t, s));
          return sum_all(l);
        },
        {a, b}, 1e-4);

    // rowvec/colvec adds, exp, lse_cols, mean_rows
    check_grads(
        [](const std::vector<Mat>& ls) {
          Mat m = add_rowvec(add_colvec(matmul(ls[0], ls[1]), ls[2]), ls[3]);
          Mat e = exp_elem(affine(m, 0.3, 0.0));
          return sum_all(mean_rows(add(logsumexp_cols(e), ls[3])));
        },
        {a, b, u, v}, 1e-4);

    // l2norm / vstack / slice / gather / stack_scalars / cross_entropy
    check_grads(
        [](const std::vector<Mat>& ls) {
          Mat n = l2norm_rows(ls[0]);
          Mat st = vstack({n, slice_rows(n, 1, 3)});
          Mat gathered = gather_rows(st, {0, 2, 4});
          Mat logits = matmul(gathered, ls[1]);
          Mat ce = cross_entropy(logits, {0, 2, 1});
          std::vector<Mat> cells = {sum_all(gathered), ce, sum_all(logits), sum_all(n)};
          return sum_all(hadamard(stack_scalars(2, 2, cells), Mat::of({{0.2, 1.0}, {-0.5, 0.1}})));
        },
        {a, b}, 1e-4);
  }
}

TEST_CASE("cross_entropy label validation") {
  Mat logits = Mat::of({{1, 0}, {0, 1}});
  CHECK_THROWS_AS(cross_entropy(logits, {0, 2}), IndexError);
  CHECK_THROWS_AS(cross_entropy(logits, {0}), DimensionError);
}

TEST_CASE("tape is single use and leaf grads match shapes") {
  Tape tape;
  auto rng = make_rng(21);
  Mat w = tape.leaf(Mat::gaussian(rng, 2, 3, 1.0));
  Mat loss = sum_all(hadamard(w, w));
  tape.backward(loss);
  CHECK_THROWS_AS(tape.backward(loss), ContractError);
  Mat g = tape.grad(w);
  CHECK(g.rows == 2);
  CHECK(g.cols == 3);
}
