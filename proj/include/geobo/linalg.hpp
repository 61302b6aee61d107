#pragma once

#include <Eigen/Dense>

#include "geobo/rng.hpp"

namespace geobo {

struct SymEig {
    Vec lam;  // ascending
    Mat q;
};

// Eigendecomposition of a symmetric matrix. Throws std::invalid_argument if the
// input is not symmetric within tol_rel * ||a||_F.
SymEig eig_sym(const Mat& a, double tol_rel = 1e-8);

inline Mat sym_part(const Mat& a) { return 0.5 * (a + a.transpose()); }

double min_eigenvalue(const Mat& a);
double max_eigenvalue(const Mat& a);

// Matrix functions of symmetric matrices via eigendecomposition.
// Eigenvalues below -1e-8 are rejected; values in [-1e-8, 1e-12) are clamped
// to 1e-12 before log/sqrt.
Mat sym_logm(const Mat& a);
Mat sym_expm(const Mat& a);
Mat sym_sqrtm(const Mat& a);
Mat sym_inv_sqrtm(const Mat& a);

// Frechet derivative of logm at spd matrix a in direction h (h symmetric),
// computed with the Daleckii-Krein formula. Self-adjoint in h w.r.t. the
// Frobenius inner product.
Mat dlogm(const SymEig& ea, const Mat& h);
// Same for sqrtm.
Mat dsqrtm(const SymEig& ea, const Mat& h);

// Isometric vectorization of a symmetric d x d matrix: diagonal entries as-is,
// upper-triangular off-diagonals scaled by sqrt(2). Preserves Frobenius norm.
Vec svec(const Mat& a);
Mat unsvec(const Vec& v, Eigen::Index d);

// Thin QR orthonormalization with positive R diagonal, so the result is a
// deterministic function of the input.
Mat thin_qr(const Mat& a);

// Orthonormal basis of the orthogonal complement of the columns of w
// (w is D x d with orthonormal columns); returns D x (D-d).
Mat orthonormal_complement(const Mat& w);

}  // namespace geobo
