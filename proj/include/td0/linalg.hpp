#pragma once

#include <complex>
#include <vector>

#include "td0/matrix.hpp"

namespace td0 {

/// Eigenvalue and norm data of a square matrix, computed once and cached
/// alongside the system it describes.
///
/// sym_min_eig / sym_max_eig are eigenvalues of m + m^T (not halved);
/// min_real_part is over the spectrum of m itself.
struct SpectralSummary {
    double sym_min_eig = 0.0;
    double sym_max_eig = 0.0;
    double min_real_part = 0.0;
    double spectral_norm = 0.0;
};

/// All eigenvalues of a symmetric matrix, ascending.
/// Cyclic Jacobi; sweeps until every off-diagonal magnitude is at or below
/// 1e-14 * frobenius_norm. Input must be square and symmetric to 1e-12
/// (max absolute asymmetry).
std::vector<double> sym_eigenvalues(const Matrix& m);

/// Symmetric eigendecomposition: values ascending plus the orthogonal
/// matrix whose columns are the matching eigenvectors.
struct SymEigen {
    std::vector<double> values;
    Matrix vectors;
};
SymEigen sym_eigen(const Matrix& m);

/// Eigenvalues of a general real square matrix, as complex numbers sorted
/// by (real, imag). Balancing, Householder reduction to Hessenberg form,
/// then Francis double-shift QR. Fails loudly if deflation has not finished
/// within 100*d sweeps.
std::vector<std::complex<double>> eigenvalues_general(const Matrix& m);

/// exp(m*t) by scaling and squaring with a degree-13 rational approximant;
/// the argument is rescaled until its inf-norm is at most 0.5.
Matrix matrix_exponential(const Matrix& m, double t = 1.0);

/// Operator 2-norm: sqrt of the largest eigenvalue of m^T m.
double spectral_norm(const Matrix& m);

/// Solve a x = rhs by Gaussian elimination with partial pivoting.
/// A pivot at or below 1e-12 * inf_norm(a) raises SingularMatrixError.
Vec solve_linear(const Matrix& a, const Vec& rhs);

/// Inverse via solve_linear against identity columns.
Matrix inverse(const Matrix& a);

/// Full spectral summary of a square matrix.
SpectralSummary spectral_summary(const Matrix& m);

} // namespace td0
