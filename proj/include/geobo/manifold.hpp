#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geobo/linalg.hpp"
#include "geobo/rng.hpp"

namespace geobo {

// Points and tangent vectors are stored as flattened ambient coordinates
// (matrices column-major). The inner product on tangents is the ambient dot
// product for every manifold here, which coincides with the Frobenius inner
// product in matrix form.
class Manifold {
public:
    virtual ~Manifold() = default;

    virtual std::string name() const = 0;
    virtual Eigen::Index ambient_size() const = 0;
    virtual int dim() const = 0;

    // Throws std::invalid_argument if x is not on the manifold within tol.
    virtual void check_point(const Vec& x, double tol = 1e-9) const = 0;
    void check_tangent(const Vec& x, const Vec& u, double tol = 1e-9) const;

    virtual Vec project_tangent(const Vec& x, const Vec& v) const = 0;
    virtual Vec exp(const Vec& x, const Vec& u) const = 0;
    virtual Vec log(const Vec& x, const Vec& y) const = 0;
    virtual Vec retract(const Vec& x, const Vec& u) const = 0;
    virtual double distance(const Vec& x, const Vec& y) const = 0;
    virtual Vec random_point(Rng& rng) const = 0;
    virtual Vec random_tangent(const Vec& x, Rng& rng) const;

    // Orthonormal basis of the tangent space at x, columns of size
    // ambient_size(); dim() columns.
    virtual Mat tangent_basis(const Vec& x) const = 0;

    // Scale used for default trust-region radii.
    virtual double injectivity_scale() const = 0;

    double inner(const Vec& x, const Vec& u, const Vec& v) const;
    double norm(const Vec& x, const Vec& u) const;
};

using ManifoldPtr = std::shared_ptr<const Manifold>;

// Unit sphere S^n embedded in R^{n+1}.
class Sphere final : public Manifold {
public:
    explicit Sphere(int n);

    std::string name() const override;
    Eigen::Index ambient_size() const override { return n_ + 1; }
    int dim() const override { return n_; }
    void check_point(const Vec& x, double tol = 1e-9) const override;
    Vec project_tangent(const Vec& x, const Vec& v) const override;
    Vec exp(const Vec& x, const Vec& u) const override;
    Vec log(const Vec& x, const Vec& y) const override;
    Vec retract(const Vec& x, const Vec& u) const override;
    double distance(const Vec& x, const Vec& y) const override;
    Vec random_point(Rng& rng) const override;
    Mat tangent_basis(const Vec& x) const override;
    double injectivity_scale() const override;

private:
    int n_;
};

// Manifold of d x d symmetric positive definite matrices. Distances are
// Log-Euclidean; exp/log are the affine-invariant maps used by the
// acquisition optimizer; the tangent inner product is Frobenius.
class Spd final : public Manifold {
public:
    explicit Spd(int d, double sample_eig_lo = 0.1, double sample_eig_hi = 10.0);

    std::string name() const override;
    Eigen::Index ambient_size() const override { return Eigen::Index(d_) * d_; }
    int dim() const override { return d_ * (d_ + 1) / 2; }
    void check_point(const Vec& x, double tol = 1e-9) const override;
    Vec project_tangent(const Vec& x, const Vec& v) const override;
    Vec exp(const Vec& x, const Vec& u) const override;
    Vec log(const Vec& x, const Vec& y) const override;
    Vec retract(const Vec& x, const Vec& u) const override;
    double distance(const Vec& x, const Vec& y) const override;
    Vec random_point(Rng& rng) const override;
    Mat tangent_basis(const Vec& x) const override;
    double injectivity_scale() const override;

    int matrix_dim() const { return d_; }
    double sample_eig_lo() const { return lo_; }
    double sample_eig_hi() const { return hi_; }

    Mat to_mat(const Vec& x) const;
    Vec to_vec(const Mat& m) const;

private:
    int d_;
    double lo_, hi_;
};

// Grassmann manifold of d-dimensional subspaces of R^D, represented by
// D x d orthonormal frames.
class Grassmann final : public Manifold {
public:
    Grassmann(int big_d, int small_d);

    std::string name() const override;
    Eigen::Index ambient_size() const override { return Eigen::Index(big_) * small_; }
    int dim() const override { return (big_ - small_) * small_; }
    void check_point(const Vec& x, double tol = 1e-9) const override;
    Vec project_tangent(const Vec& x, const Vec& v) const override;
    Vec exp(const Vec& x, const Vec& u) const override;
    Vec log(const Vec& x, const Vec& y) const override;
    Vec retract(const Vec& x, const Vec& u) const override;
    double distance(const Vec& x, const Vec& y) const override;
    Vec random_point(Rng& rng) const override;
    Mat tangent_basis(const Vec& x) const override;
    double injectivity_scale() const override;

    int rows() const { return big_; }
    int cols() const { return small_; }
    Mat to_mat(const Vec& x) const;
    Vec to_vec(const Mat& m) const;

private:
    int big_, small_;
};

class Euclidean final : public Manifold {
public:
    explicit Euclidean(int n);

    std::string name() const override;
    Eigen::Index ambient_size() const override { return n_; }
    int dim() const override { return n_; }
    void check_point(const Vec& x, double tol = 1e-9) const override;
    Vec project_tangent(const Vec& x, const Vec& v) const override;
    Vec exp(const Vec& x, const Vec& u) const override;
    Vec log(const Vec& x, const Vec& y) const override;
    Vec retract(const Vec& x, const Vec& u) const override;
    double distance(const Vec& x, const Vec& y) const override;
    Vec random_point(Rng& rng) const override;
    Mat tangent_basis(const Vec& x) const override;
    double injectivity_scale() const override;

private:
    int n_;
};

// Cartesian product of manifolds; points are concatenations of part points.
class ProductManifold final : public Manifold {
public:
    explicit ProductManifold(std::vector<ManifoldPtr> parts);

    std::string name() const override;
    Eigen::Index ambient_size() const override { return total_; }
    int dim() const override { return dim_; }
    void check_point(const Vec& x, double tol = 1e-9) const override;
    Vec project_tangent(const Vec& x, const Vec& v) const override;
    Vec exp(const Vec& x, const Vec& u) const override;
    Vec log(const Vec& x, const Vec& y) const override;
    Vec retract(const Vec& x, const Vec& u) const override;
    double distance(const Vec& x, const Vec& y) const override;
    Vec random_point(Rng& rng) const override;
    Mat tangent_basis(const Vec& x) const override;
    double injectivity_scale() const override;

    std::size_t part_count() const { return parts_.size(); }
    const Manifold& part(std::size_t i) const { return *parts_[i]; }
    Eigen::Index part_offset(std::size_t i) const { return offsets_[i]; }
    Vec part_of(const Vec& x, std::size_t i) const;
    void set_part(Vec& x, std::size_t i, const Vec& value) const;

private:
    std::vector<ManifoldPtr> parts_;
    std::vector<Eigen::Index> offsets_;
    Eigen::Index total_ = 0;
    int dim_ = 0;
};

// Distance helpers in natural (matrix / vector) form.
double sphere_distance(const Vec& x, const Vec& y);
double spd_log_euclidean_distance(const Mat& x, const Mat& y);
double spd_affine_invariant_distance(const Mat& x, const Mat& y);
double grassmann_distance(const Mat& w1, const Mat& w2);

// Validating constructors for the domain types; throw std::invalid_argument
// when the invariant fails.
Vec make_sphere_point(Vec coords, double tol = 1e-10);
Mat make_spd_point(Mat m, double tol = 1e-10);
Mat make_grassmann_point(Mat frame, double tol = 1e-10);

// Draw an SPD matrix with eigenvalues uniform in [lo, hi] and a random
// orthogonal eigenbasis.
Mat random_spd_with_eig_bounds(int d, double lo, double hi, Rng& rng);

}  // namespace geobo
