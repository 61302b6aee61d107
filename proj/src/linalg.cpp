#include "geobo/linalg.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

namespace geobo {

namespace {

constexpr double kEigClamp = 1e-12;
constexpr double kEigReject = -1e-8;

Vec checked_positive_eigs(const Vec& lam, const char* op) {
    Vec out = lam;
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        if (lam[i] < kEigReject)
            throw std::invalid_argument(std::string(op) +
                                        ": eigenvalue below tolerance, matrix not PD");
        if (out[i] < kEigClamp) out[i] = kEigClamp;
    }
    return out;
}

}  // namespace

SymEig eig_sym(const Mat& a, double tol_rel) {
    if (a.rows() != a.cols()) throw std::invalid_argument("eig_sym: matrix not square");
    const double scale = a.norm();
    if ((a - a.transpose()).norm() > tol_rel * std::max(scale, 1e-300))
        throw std::invalid_argument("eig_sym: matrix not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(sym_part(a));
    if (es.info() != Eigen::Success)
        throw std::runtime_error("eig_sym: eigendecomposition failed");
    return {es.eigenvalues(), es.eigenvectors()};
}

double min_eigenvalue(const Mat& a) { return eig_sym(a).lam.minCoeff(); }
double max_eigenvalue(const Mat& a) { return eig_sym(a).lam.maxCoeff(); }

Mat sym_logm(const Mat& a) {
    SymEig e = eig_sym(a);
    Vec lam = checked_positive_eigs(e.lam, "sym_logm");
    return e.q * lam.array().log().matrix().asDiagonal() * e.q.transpose();
}

Mat sym_expm(const Mat& a) {
    SymEig e = eig_sym(a);
    return e.q * e.lam.array().exp().matrix().asDiagonal() * e.q.transpose();
}

Mat sym_sqrtm(const Mat& a) {
    SymEig e = eig_sym(a);
    Vec lam = checked_positive_eigs(e.lam, "sym_sqrtm");
    return e.q * lam.array().sqrt().matrix().asDiagonal() * e.q.transpose();
}

Mat sym_inv_sqrtm(const Mat& a) {
    SymEig e = eig_sym(a);
    Vec lam = checked_positive_eigs(e.lam, "sym_inv_sqrtm");
    return e.q * lam.array().rsqrt().matrix().asDiagonal() * e.q.transpose();
}

namespace {

// Loewner matrix for f applied to the spectrum: g(i,j) = divided difference.
Mat frechet_apply(const SymEig& ea, const Mat& h, double (*f)(double),
                  double (*df)(double)) {
    const Eigen::Index n = ea.lam.size();
    Mat g(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double li = std::max(ea.lam[i], kEigClamp);
            const double lj = std::max(ea.lam[j], kEigClamp);
            if (std::abs(li - lj) > 1e-12 * std::max(li, lj))
                g(i, j) = (f(li) - f(lj)) / (li - lj);
            else
                g(i, j) = df(0.5 * (li + lj));
        }
    }
    Mat ht = ea.q.transpose() * sym_part(h) * ea.q;
    return ea.q * g.cwiseProduct(ht) * ea.q.transpose();
}

double f_log(double x) { return std::log(x); }
double df_log(double x) { return 1.0 / x; }
double f_sqrt(double x) { return std::sqrt(x); }
double df_sqrt(double x) { return 0.5 / std::sqrt(x); }

}  // namespace

Mat dlogm(const SymEig& ea, const Mat& h) { return frechet_apply(ea, h, f_log, df_log); }
Mat dsqrtm(const SymEig& ea, const Mat& h) { return frechet_apply(ea, h, f_sqrt, df_sqrt); }

Vec svec(const Mat& a) {
    const Eigen::Index d = a.rows();
    Vec v(d * (d + 1) / 2);
    const double s2 = std::sqrt(2.0);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index i = 0; i <= j; ++i) {
            v[k++] = (i == j) ? a(i, j) : s2 * a(i, j);
        }
    }
    return v;
}

Mat unsvec(const Vec& v, Eigen::Index d) {
    if (v.size() != d * (d + 1) / 2) throw std::invalid_argument("unsvec: size mismatch");
    Mat a(d, d);
    const double inv_s2 = 1.0 / std::sqrt(2.0);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index i = 0; i <= j; ++i) {
            const double x = v[k++];
            if (i == j) {
                a(i, j) = x;
            } else {
                a(i, j) = x * inv_s2;
                a(j, i) = x * inv_s2;
            }
        }
    }
    return a;
}

Mat thin_qr(const Mat& a) {
    Eigen::HouseholderQR<Mat> qr(a);
    Mat q = qr.householderQ() * Mat::Identity(a.rows(), a.cols());
    Mat r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        if (r(j, j) < 0) q.col(j) = -q.col(j);
    }
    return q;
}

Mat orthonormal_complement(const Mat& w) {
    const Eigen::Index big = w.rows(), small = w.cols();
    if (small >= big) throw std::invalid_argument("orthonormal_complement: no complement");
    Eigen::HouseholderQR<Mat> qr(w);
    Mat q = qr.householderQ() * Mat::Identity(big, big);
    // Fix signs of the leading block so the result is deterministic.
    Mat r = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < small; ++j)
        if (r(j, j) < 0) q.col(j) = -q.col(j);
    return q.rightCols(big - small);
}

}  // namespace geobo
