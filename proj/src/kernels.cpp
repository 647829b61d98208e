#include "sigvae/kernels.hpp"

#include <cstdint>

namespace sigvae::kernels {

namespace {

void check_inner(std::size_t lhs, std::size_t rhs, const char* op, const Matrix& a,
                 const Matrix& b) {
  if (lhs != rhs) {
    throw ShapeError(std::string(op) + ": inner dimensions differ " + shape_string(a) + " vs " +
                     shape_string(b));
  }
}

using Index = std::int64_t;  // OpenMP loop variables must be signed

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.rows(), "matmul", a, b);
  const std::size_t n = a.rows(), inner = a.cols(), m = b.cols();
  Matrix c(n, m);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* pc = c.data().data();
#pragma omp parallel for schedule(static) if (n * inner * m > kParallelThreshold)
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    double* crow = pc + i * m;
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = pa[i * inner + k];
      const double* brow = pb + k * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  check_inner(a.rows(), b.rows(), "matmul_tn", a, b);
  const std::size_t n = a.rows(), p = a.cols(), q = b.cols();
  Matrix c(p, q);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* pc = c.data().data();
#pragma omp parallel for schedule(static) if (n * p * q > kParallelThreshold)
  for (Index i = 0; i < static_cast<Index>(p); ++i) {
    double* crow = pc + i * q;
    for (std::size_t k = 0; k < n; ++k) {
      const double aki = pa[k * p + i];
      const double* brow = pb + k * q;
      for (std::size_t j = 0; j < q; ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.cols(), "matmul_nt", a, b);
  const std::size_t n = a.rows(), p = a.cols(), q = b.rows();
  Matrix c(n, q);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* pc = c.data().data();
#pragma omp parallel for schedule(static) if (n * p * q > kParallelThreshold)
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    const double* arow = pa + i * p;
    for (std::size_t j = 0; j < q; ++j) {
      const double* brow = pb + j * p;
      double s = 0.0;
      for (std::size_t k = 0; k < p; ++k) s += arow[k] * brow[k];
      pc[i * q + j] = s;
    }
  }
  return c;
}

Matrix cross_sq_dists(const Matrix& queries, const Matrix& ref) {
  check_inner(queries.cols(), ref.cols(), "cross_sq_dists", queries, ref);
  const std::size_t n = queries.rows(), m = ref.rows(), d = queries.cols();
  Matrix out(n, m);
#pragma omp parallel for schedule(static) if (n * m * d > kParallelThreshold)
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    const auto qi = queries.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      const auto rj = ref.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = qi[k] - rj[k];
        s += diff * diff;
      }
      out(i, j) = s;
    }
  }
  return out;
}

Matrix pairwise_sq_dists(const Matrix& x) { return cross_sq_dists(x, x); }

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.rows(), "matmul", a, b);
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k)
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += a(i, k) * b(k, j);
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  check_inner(a.rows(), b.rows(), "matmul_tn", a, b);
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k)
    for (std::size_t i = 0; i < a.cols(); ++i)
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += a(k, i) * b(k, j);
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.cols(), "matmul_nt", a, b);
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      c(i, j) = s;
    }
  return c;
}

Matrix cross_sq_dists(const Matrix& queries, const Matrix& ref) {
  check_inner(queries.cols(), ref.cols(), "cross_sq_dists", queries, ref);
  Matrix out(queries.rows(), ref.rows());
  for (std::size_t i = 0; i < queries.rows(); ++i)
    for (std::size_t j = 0; j < ref.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < queries.cols(); ++k) {
        const double diff = queries(i, k) - ref(j, k);
        s += diff * diff;
      }
      out(i, j) = s;
    }
  return out;
}

Matrix pairwise_sq_dists(const Matrix& x) { return cross_sq_dists(x, x); }

}  // namespace serial

}  // namespace sigvae::kernels
