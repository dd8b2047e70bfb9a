#include "rgate/numkit.hpp"

#include <cmath>

namespace rgate {

namespace {

void check(bool ok, const char* msg) {
  if (!ok) throw DimError(msg);
}

}  // namespace

std::uint64_t Rng::next_below(std::uint64_t n) {
  // rejection sampling over the top multiple of n
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % n;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  check(a.cols == b.rows, "matmul: a.cols != b.rows");
  Matrix out(a.rows, b.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* orow = out.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      const double* brow = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

void matvec(const Matrix& a, const Vec& x, Vec& out) {
  check(a.cols == x.size(), "matvec: a.cols != x.len");
  out.resize(a.rows);
  const double* xp = x.data();
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) acc += arow[j] * xp[j];
    out[i] = acc;
  }
}

Vec matvec(const Matrix& a, const Vec& x) {
  Vec out;
  matvec(a, x, out);
  return out;
}

void matvec_t_acc(const Matrix& a, const Vec& x, Vec& out) {
  check(a.rows == x.size(), "matvec_t_acc: a.rows != x.len");
  check(a.cols == out.size(), "matvec_t_acc: a.cols != out.len");
  double* op = out.data();
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double xi = x[i];
    const double* arow = a.row(i);
    for (std::size_t j = 0; j < a.cols; ++j) op[j] += xi * arow[j];
  }
}

void add_outer(Matrix& a, const Vec& u, const Vec& v) {
  check(a.rows == u.size() && a.cols == v.size(), "add_outer: shape mismatch");
  const double* vp = v.data();
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double ui = u[i];
    double* arow = a.row(i);
    for (std::size_t j = 0; j < a.cols; ++j) arow[j] += ui * vp[j];
  }
}

void sigmoid(const Vec& v, Vec& out) {
  out.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-v[i]));
}

Vec sigmoid(const Vec& v) {
  Vec out;
  sigmoid(v, out);
  return out;
}

void tanh_act(const Vec& v, Vec& out) {
  out.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::tanh(v[i]);
}

Vec tanh_act(const Vec& v) {
  Vec out;
  tanh_act(v, out);
  return out;
}

void add_inplace(Vec& a, const Vec& b) {
  check(a.size() == b.size(), "add_inplace: length mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

void hadamard_acc(Vec& out, const Vec& a, const Vec& b) {
  check(out.size() == a.size() && a.size() == b.size(), "hadamard_acc: length mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) out[i] += a[i] * b[i];
}

Vec hadamard(const Vec& a, const Vec& b) {
  check(a.size() == b.size(), "hadamard: length mismatch");
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

void axpy(double alpha, const Vec& x, Vec& y) {
  check(x.size() == y.size(), "axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void scale_inplace(Vec& a, double s) {
  for (double& v : a) v *= s;
}

void fill(Vec& a, double v) {
  for (double& e : a) e = v;
}

double dot(const Vec& a, const Vec& b) {
  check(a.size() == b.size(), "dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double max_abs(const Vec& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::fabs(v));
  return m;
}

Matrix init_xavier(std::size_t rows, std::size_t cols, Rng& rng) {
  if (rows < 1 || cols < 1) throw DimError("init_xavier: empty shape");
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.uniform(-bound, bound);
  return m;
}

}  // namespace rgate
