#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace ssrlab {

/// Dense square matrix, row-major.
struct Matrix {
    int n = 0;
    std::vector<double> data;

    Matrix() = default;
    explicit Matrix(int n_) : n(n_), data(static_cast<std::size_t>(n_) * n_, 0.0) {}

    double& at(int i, int j) { return data[static_cast<std::size_t>(i) * n + j]; }
    double at(int i, int j) const { return data[static_cast<std::size_t>(i) * n + j]; }
    const double* row(int i) const { return data.data() + static_cast<std::size_t>(i) * n; }
};

/// Lower-triangular Cholesky factor of a symmetric matrix, or nullopt on a
/// nonpositive pivot. Only the lower triangle of the input is read.
std::optional<Matrix> cholesky_lower(const Matrix& a);

/// out = L z for a lower-triangular L.
void lower_matvec(const Matrix& lower, std::span<const double> z, std::span<double> out);

/// Eigenvalues of a symmetric matrix by cyclic Jacobi sweeps, ascending.
/// Intended for small matrices (test oracles, selftest).
std::vector<double> jacobi_eigenvalues(Matrix a, int max_sweeps = 64);

}  // namespace ssrlab
