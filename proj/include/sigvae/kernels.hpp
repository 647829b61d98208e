#pragma once

// Hot loops of the toolkit. Each kernel has an OpenMP version (namespace
// kernels) and a plain serial version (kernels::serial) kept as the reference
// for tests and benchmarks. Parallel versions split work over output rows
// only and keep every reduction in the serial order, so both produce
// bit-identical results regardless of thread count.

#include <cstddef>

#include "sigvae/matrix.hpp"

namespace sigvae::kernels {

/// Work (in multiply-adds) below which kernels stay single-threaded.
inline constexpr std::size_t kParallelThreshold = 1u << 15;

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// n x n squared Euclidean distances between the rows of x.
Matrix pairwise_sq_dists(const Matrix& x);
/// queries.rows() x ref.rows() squared Euclidean distances.
Matrix cross_sq_dists(const Matrix& queries, const Matrix& ref);

namespace serial {
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix pairwise_sq_dists(const Matrix& x);
Matrix cross_sq_dists(const Matrix& queries, const Matrix& ref);
}  // namespace serial

}  // namespace sigvae::kernels
