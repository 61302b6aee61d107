#include "geobo/manifold.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/SVD>

namespace geobo {

namespace {
constexpr double kPi = std::numbers::pi;

double sinc(double t) {
    if (std::abs(t) < 1e-8) return 1.0 - t * t / 6.0;
    return std::sin(t) / t;
}
}  // namespace

double Manifold::inner(const Vec&, const Vec& u, const Vec& v) const { return u.dot(v); }
double Manifold::norm(const Vec& x, const Vec& u) const { return std::sqrt(inner(x, u, u)); }

void Manifold::check_tangent(const Vec& x, const Vec& u, double tol) const {
    if (u.size() != ambient_size())
        throw std::invalid_argument(name() + ": tangent dimension mismatch");
    const double dev = (project_tangent(x, u) - u).norm();
    if (dev > tol * std::max(1.0, u.norm()))
        throw std::invalid_argument(name() + ": vector not tangent at base point");
}

Vec Manifold::random_tangent(const Vec& x, Rng& rng) const {
    return project_tangent(x, normal_vec(ambient_size(), rng));
}

// ---------------------------------------------------------------------------
// Sphere
// ---------------------------------------------------------------------------

Sphere::Sphere(int n) : n_(n) {
    if (n < 1) throw std::invalid_argument("Sphere: dimension must be >= 1");
}

std::string Sphere::name() const { return "S^" + std::to_string(n_); }

void Sphere::check_point(const Vec& x, double tol) const {
    if (x.size() != n_ + 1) throw std::invalid_argument(name() + ": dimension mismatch");
    if (std::abs(x.norm() - 1.0) > tol)
        throw std::invalid_argument(name() + ": point is not unit-norm");
}

Vec Sphere::project_tangent(const Vec& x, const Vec& v) const {
    return v - x.dot(v) * x;
}

Vec Sphere::exp(const Vec& x, const Vec& u) const {
    const double t = u.norm();
    Vec y = std::cos(t) * x + sinc(t) * u;
    return y / y.norm();
}

Vec Sphere::log(const Vec& x, const Vec& y) const {
    const double d = distance(x, y);
    if (d < 1e-14) return Vec::Zero(x.size());
    if (x.dot(y) < -1.0 + 1e-12 || kPi - d < 1e-9)
        throw std::domain_error(name() + ": log undefined for antipodal points");
    Vec w = y - x.dot(y) * x;
    return w * (d / w.norm());
}

Vec Sphere::retract(const Vec& x, const Vec& u) const {
    Vec y = x + u;
    return y / y.norm();
}

double Sphere::distance(const Vec& x, const Vec& y) const {
    if (x.size() != y.size())
        throw std::invalid_argument(name() + ": dimension mismatch");
    // 2 asin(||x-y||/2) equals arccos(x.y) with better accuracy near 0.
    const double h = 0.5 * (x - y).norm();
    return 2.0 * std::asin(std::min(1.0, h));
}

Vec Sphere::random_point(Rng& rng) const {
    Vec v = normal_vec(n_ + 1, rng);
    while (v.norm() < 1e-12) v = normal_vec(n_ + 1, rng);
    return v / v.norm();
}

Mat Sphere::tangent_basis(const Vec& x) const {
    // Householder reflection swapping x with +-e_last; remaining columns span
    // the tangent space.
    const Eigen::Index m = n_ + 1;
    const double s = x[m - 1] >= 0 ? 1.0 : -1.0;
    Vec w = x;
    w[m - 1] += s;
    const double denom = w.squaredNorm();
    Mat basis(m, n_);
    for (int j = 0; j < n_; ++j) {
        Vec e = Vec::Zero(m);
        e[j] = 1.0;
        basis.col(j) = e - (2.0 * w[j] / denom) * w;
    }
    return basis;
}

double Sphere::injectivity_scale() const { return kPi / 2.0; }

// ---------------------------------------------------------------------------
// Spd
// ---------------------------------------------------------------------------

Spd::Spd(int d, double sample_eig_lo, double sample_eig_hi)
    : d_(d), lo_(sample_eig_lo), hi_(sample_eig_hi) {
    if (d < 1) throw std::invalid_argument("Spd: dimension must be >= 1");
    if (!(lo_ > 0.0) || !(hi_ > lo_)) throw std::invalid_argument("Spd: bad eigenvalue bounds");
}

std::string Spd::name() const { return "S++^" + std::to_string(d_); }

Mat Spd::to_mat(const Vec& x) const {
    return Eigen::Map<const Mat>(x.data(), d_, d_);
}

Vec Spd::to_vec(const Mat& m) const {
    return Eigen::Map<const Vec>(m.data(), Eigen::Index(d_) * d_);
}

void Spd::check_point(const Vec& x, double tol) const {
    if (x.size() != ambient_size()) throw std::invalid_argument(name() + ": dimension mismatch");
    Mat m = to_mat(x);
    const double scale = std::max(m.norm(), 1e-300);
    if ((m - m.transpose()).norm() > tol * scale)
        throw std::invalid_argument(name() + ": matrix not symmetric");
    if (min_eigenvalue(sym_part(m)) <= 0.0)
        throw std::invalid_argument(name() + ": matrix not positive definite");
}

Vec Spd::project_tangent(const Vec&, const Vec& v) const {
    return to_vec(sym_part(to_mat(v)));
}

Vec Spd::exp(const Vec& x, const Vec& u) const {
    SymEig e = eig_sym(to_mat(x));
    Vec sq = e.lam.array().sqrt();
    Mat p = e.q * sq.asDiagonal() * e.q.transpose();
    Mat pi = e.q * sq.array().inverse().matrix().asDiagonal() * e.q.transpose();
    Mat inner_mat = sym_part(pi * to_mat(u) * pi);
    return to_vec(sym_part(p * sym_expm(inner_mat) * p));
}

Vec Spd::log(const Vec& x, const Vec& y) const {
    SymEig e = eig_sym(to_mat(x));
    Vec sq = e.lam.array().sqrt();
    Mat p = e.q * sq.asDiagonal() * e.q.transpose();
    Mat pi = e.q * sq.array().inverse().matrix().asDiagonal() * e.q.transpose();
    Mat inner_mat = sym_part(pi * to_mat(y) * pi);
    return to_vec(sym_part(p * sym_logm(inner_mat) * p));
}

Vec Spd::retract(const Vec& x, const Vec& u) const {
    Mat xm = to_mat(x);
    Mat um = sym_part(to_mat(u));
    Mat xiu = xm.ldlt().solve(um);
    return to_vec(sym_part(xm + um + 0.5 * um * xiu));
}

double Spd::distance(const Vec& x, const Vec& y) const {
    return spd_log_euclidean_distance(to_mat(x), to_mat(y));
}

Vec Spd::random_point(Rng& rng) const {
    return to_vec(random_spd_with_eig_bounds(d_, lo_, hi_, rng));
}

Mat Spd::tangent_basis(const Vec&) const {
    Mat basis(ambient_size(), dim());
    const double inv_s2 = 1.0 / std::sqrt(2.0);
    int k = 0;
    for (int j = 0; j < d_; ++j) {
        for (int i = 0; i <= j; ++i) {
            Mat b = Mat::Zero(d_, d_);
            if (i == j) {
                b(i, j) = 1.0;
            } else {
                b(i, j) = inv_s2;
                b(j, i) = inv_s2;
            }
            basis.col(k++) = to_vec(b);
        }
    }
    return basis;
}

double Spd::injectivity_scale() const { return 1.0; }

// ---------------------------------------------------------------------------
// Grassmann
// ---------------------------------------------------------------------------

Grassmann::Grassmann(int big_d, int small_d) : big_(big_d), small_(small_d) {
    if (small_d < 1 || small_d >= big_d)
        throw std::invalid_argument("Grassmann: need 1 <= d < D");
}

std::string Grassmann::name() const {
    return "G(" + std::to_string(big_) + "," + std::to_string(small_) + ")";
}

Mat Grassmann::to_mat(const Vec& x) const {
    return Eigen::Map<const Mat>(x.data(), big_, small_);
}

Vec Grassmann::to_vec(const Mat& m) const {
    return Eigen::Map<const Vec>(m.data(), ambient_size());
}

void Grassmann::check_point(const Vec& x, double tol) const {
    if (x.size() != ambient_size()) throw std::invalid_argument(name() + ": dimension mismatch");
    Mat w = to_mat(x);
    if ((w.transpose() * w - Mat::Identity(small_, small_)).norm() > tol)
        throw std::invalid_argument(name() + ": frame columns not orthonormal");
}

Vec Grassmann::project_tangent(const Vec& x, const Vec& v) const {
    Mat w = to_mat(x);
    Mat a = to_mat(v);
    return to_vec(a - w * (w.transpose() * a));
}

Vec Grassmann::exp(const Vec& x, const Vec& u) const {
    Mat w = to_mat(x);
    Eigen::JacobiSVD<Mat> svd(to_mat(u), Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vec s = svd.singularValues();
    Mat y = (w * svd.matrixV() * s.array().cos().matrix().asDiagonal() +
             svd.matrixU() * s.array().sin().matrix().asDiagonal()) *
            svd.matrixV().transpose();
    return to_vec(y);
}

Vec Grassmann::log(const Vec& x, const Vec& y) const {
    Mat w = to_mat(x);
    Mat z = to_mat(y);
    Mat m = w.transpose() * z;
    Eigen::FullPivLU<Mat> lu(m);
    if (!lu.isInvertible())
        throw std::domain_error(name() + ": log undefined, subspaces contain orthogonal directions");
    Mat a = z * lu.inverse() - w;
    Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vec s = svd.singularValues();
    return to_vec(svd.matrixU() * s.array().atan().matrix().asDiagonal() *
                  svd.matrixV().transpose());
}

Vec Grassmann::retract(const Vec& x, const Vec& u) const {
    return to_vec(thin_qr(to_mat(x) + to_mat(u)));
}

double Grassmann::distance(const Vec& x, const Vec& y) const {
    Mat w1 = to_mat(x);
    Mat w2 = to_mat(y);
    return grassmann_distance(w1, w2);
}

Vec Grassmann::random_point(Rng& rng) const {
    return to_vec(thin_qr(normal_mat(big_, small_, rng)));
}

Mat Grassmann::tangent_basis(const Vec& x) const {
    Mat comp = orthonormal_complement(to_mat(x));  // big_ x (big_-small_)
    Mat basis(ambient_size(), dim());
    int k = 0;
    for (int b = 0; b < small_; ++b) {
        for (int a = 0; a < big_ - small_; ++a) {
            Mat t = Mat::Zero(big_, small_);
            t.col(b) = comp.col(a);
            basis.col(k++) = to_vec(t);
        }
    }
    return basis;
}

double Grassmann::injectivity_scale() const { return kPi / 2.0; }

// ---------------------------------------------------------------------------
// Euclidean
// ---------------------------------------------------------------------------

Euclidean::Euclidean(int n) : n_(n) {
    if (n < 1) throw std::invalid_argument("Euclidean: dimension must be >= 1");
}

std::string Euclidean::name() const { return "R^" + std::to_string(n_); }

void Euclidean::check_point(const Vec& x, double) const {
    if (x.size() != n_) throw std::invalid_argument(name() + ": dimension mismatch");
}

Vec Euclidean::project_tangent(const Vec&, const Vec& v) const { return v; }
Vec Euclidean::exp(const Vec& x, const Vec& u) const { return x + u; }
Vec Euclidean::log(const Vec& x, const Vec& y) const { return y - x; }
Vec Euclidean::retract(const Vec& x, const Vec& u) const { return x + u; }
double Euclidean::distance(const Vec& x, const Vec& y) const { return (x - y).norm(); }
Vec Euclidean::random_point(Rng& rng) const { return normal_vec(n_, rng); }
Mat Euclidean::tangent_basis(const Vec&) const { return Mat::Identity(n_, n_); }
double Euclidean::injectivity_scale() const { return 5.0; }

// ---------------------------------------------------------------------------
// ProductManifold
// ---------------------------------------------------------------------------

ProductManifold::ProductManifold(std::vector<ManifoldPtr> parts) : parts_(std::move(parts)) {
    if (parts_.empty()) throw std::invalid_argument("ProductManifold: no parts");
    offsets_.reserve(parts_.size());
    for (const auto& p : parts_) {
        offsets_.push_back(total_);
        total_ += p->ambient_size();
        dim_ += p->dim();
    }
}

std::string ProductManifold::name() const {
    std::string s = "product(";
    for (std::size_t i = 0; i < parts_.size(); ++i) {
        if (i) s += " x ";
        s += parts_[i]->name();
    }
    return s + ")";
}

Vec ProductManifold::part_of(const Vec& x, std::size_t i) const {
    return x.segment(offsets_[i], parts_[i]->ambient_size());
}

void ProductManifold::set_part(Vec& x, std::size_t i, const Vec& value) const {
    x.segment(offsets_[i], parts_[i]->ambient_size()) = value;
}

void ProductManifold::check_point(const Vec& x, double tol) const {
    if (x.size() != total_) throw std::invalid_argument(name() + ": dimension mismatch");
    for (std::size_t i = 0; i < parts_.size(); ++i) parts_[i]->check_point(part_of(x, i), tol);
}

Vec ProductManifold::project_tangent(const Vec& x, const Vec& v) const {
    Vec out(total_);
    for (std::size_t i = 0; i < parts_.size(); ++i)
        set_part(out, i, parts_[i]->project_tangent(part_of(x, i), part_of(v, i)));
    return out;
}

Vec ProductManifold::exp(const Vec& x, const Vec& u) const {
    Vec out(total_);
    for (std::size_t i = 0; i < parts_.size(); ++i)
        set_part(out, i, parts_[i]->exp(part_of(x, i), part_of(u, i)));
    return out;
}

Vec ProductManifold::log(const Vec& x, const Vec& y) const {
    Vec out(total_);
    for (std::size_t i = 0; i < parts_.size(); ++i)
        set_part(out, i, parts_[i]->log(part_of(x, i), part_of(y, i)));
    return out;
}

Vec ProductManifold::retract(const Vec& x, const Vec& u) const {
    Vec out(total_);
    for (std::size_t i = 0; i < parts_.size(); ++i)
        set_part(out, i, parts_[i]->retract(part_of(x, i), part_of(u, i)));
    return out;
}

double ProductManifold::distance(const Vec& x, const Vec& y) const {
    double sq = 0.0;
    for (std::size_t i = 0; i < parts_.size(); ++i) {
        const double d = parts_[i]->distance(part_of(x, i), part_of(y, i));
        sq += d * d;
    }
    return std::sqrt(sq);
}

Vec ProductManifold::random_point(Rng& rng) const {
    Vec out(total_);
    for (std::size_t i = 0; i < parts_.size(); ++i) set_part(out, i, parts_[i]->random_point(rng));
    return out;
}

Mat ProductManifold::tangent_basis(const Vec& x) const {
    Mat basis = Mat::Zero(total_, dim_);
    int col = 0;
    for (std::size_t i = 0; i < parts_.size(); ++i) {
        Mat part_basis = parts_[i]->tangent_basis(part_of(x, i));
        basis.block(offsets_[i], col, parts_[i]->ambient_size(), parts_[i]->dim()) = part_basis;
        col += parts_[i]->dim();
    }
    return basis;
}

double ProductManifold::injectivity_scale() const {
    double s = parts_[0]->injectivity_scale();
    for (const auto& p : parts_) s = std::min(s, p->injectivity_scale());
    return s;
}

// ---------------------------------------------------------------------------
// Free helpers
// ---------------------------------------------------------------------------

double sphere_distance(const Vec& x, const Vec& y) {
    if (x.size() != y.size()) throw std::invalid_argument("sphere_distance: dimension mismatch");
    const double h = 0.5 * (x - y).norm();
    return 2.0 * std::asin(std::min(1.0, h));
}

double spd_log_euclidean_distance(const Mat& x, const Mat& y) {
    if (x.rows() != y.rows() || x.cols() != y.cols())
        throw std::invalid_argument("spd_log_euclidean_distance: dimension mismatch");
    return (sym_logm(x) - sym_logm(y)).norm();
}

double spd_affine_invariant_distance(const Mat& x, const Mat& y) {
    Mat pi = sym_inv_sqrtm(x);
    return sym_logm(sym_part(pi * y * pi)).norm();
}

double grassmann_distance(const Mat& w1, const Mat& w2) {
    if (w1.rows() != w2.rows() || w1.cols() != w2.cols())
        throw std::invalid_argument("grassmann_distance: dimension mismatch");
    const Eigen::Index d = w1.cols();
    // Principal angles from both cosines and sines, paired via atan2 for
    // accuracy at small and large angles.
    Eigen::JacobiSVD<Mat> svd_cos(w1.transpose() * w2);
    Mat residual = w2 - w1 * (w1.transpose() * w2);
    Eigen::JacobiSVD<Mat> svd_sin(residual);
    Vec c = svd_cos.singularValues();  // descending
    Vec s = svd_sin.singularValues();  // descending
    double sq = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
        const double ci = std::min(1.0, c[i]);
        const double si = std::min(1.0, s[d - 1 - i]);
        const double theta = std::atan2(si, ci);
        sq += theta * theta;
    }
    return std::sqrt(sq);
}

Vec make_sphere_point(Vec coords, double tol) {
    if (std::abs(coords.norm() - 1.0) > tol)
        throw std::invalid_argument("make_sphere_point: not unit-norm");
    return coords;
}

Mat make_spd_point(Mat m, double tol) {
    if (m.rows() != m.cols()) throw std::invalid_argument("make_spd_point: not square");
    const double scale = std::max(m.norm(), 1e-300);
    if ((m - m.transpose()).norm() > tol * scale)
        throw std::invalid_argument("make_spd_point: not symmetric");
    if (min_eigenvalue(sym_part(m)) <= 0.0)
        throw std::invalid_argument("make_spd_point: not positive definite");
    return m;
}

Mat make_grassmann_point(Mat frame, double tol) {
    if ((frame.transpose() * frame - Mat::Identity(frame.cols(), frame.cols())).norm() > tol)
        throw std::invalid_argument("make_grassmann_point: columns not orthonormal");
    return frame;
}

Mat random_spd_with_eig_bounds(int d, double lo, double hi, Rng& rng) {
    if (!(lo > 0.0) || !(hi >= lo))
        throw std::invalid_argument("random_spd_with_eig_bounds: bad bounds");
    Vec lam(d);
    for (int i = 0; i < d; ++i) lam[i] = uniform(rng, lo, hi);
    Mat q = thin_qr(normal_mat(d, d, rng));
    return sym_part(q * lam.asDiagonal() * q.transpose());
}

}  // namespace geobo
