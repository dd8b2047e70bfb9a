#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rgate {

using Vec = std::vector<double>;

/// Thrown when operand shapes violate an operation's contract.
struct DimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of 64-bit reals.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  const double* row(std::size_t r) const { return data.data() + r * cols; }
  double* row(std::size_t r) { return data.data() + r * cols; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

/// Deterministic splitmix64 generator. The full output stream is a pure
/// function of the seed, independent of platform or standard library.
struct Rng {
  std::uint64_t state;

  explicit Rng(std::uint64_t seed) : state(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1), 53 bits of entropy.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  /// Uniform integer in [0, n). Unbiased by rejection.
  std::uint64_t next_below(std::uint64_t n);

  bool next_bit() { return (next_u64() >> 63) != 0; }
};

// -- matrix / vector kernels -------------------------------------------------

Matrix matmul(const Matrix& a, const Matrix& b);

/// out = A x
void matvec(const Matrix& a, const Vec& x, Vec& out);
Vec matvec(const Matrix& a, const Vec& x);

/// out += A^T x  (accumulating; row-major friendly)
void matvec_t_acc(const Matrix& a, const Vec& x, Vec& out);

/// a += u v^T
void add_outer(Matrix& a, const Vec& u, const Vec& v);

// -- elementwise -------------------------------------------------------------

Vec sigmoid(const Vec& v);
Vec tanh_act(const Vec& v);
void sigmoid(const Vec& v, Vec& out);
void tanh_act(const Vec& v, Vec& out);

void add_inplace(Vec& a, const Vec& b);        // a += b
void hadamard_acc(Vec& out, const Vec& a, const Vec& b);  // out += a .* b
Vec hadamard(const Vec& a, const Vec& b);
void axpy(double alpha, const Vec& x, Vec& y); // y += alpha x
void scale_inplace(Vec& a, double s);
void fill(Vec& a, double v);

double dot(const Vec& a, const Vec& b);
double max_abs(const Vec& a);

// -- initialization ----------------------------------------------------------

/// Entries uniform in +-sqrt(6/(rows+cols)).
Matrix init_xavier(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace rgate
