#pragma once

#include <optional>
#include <vector>

#include "geobo/manifold.hpp"

namespace geobo {

// Parameters of the nested-sphere mapping S^D -> S^d: one axis v_k in S^k and
// one radius r_k in (0, pi/2] per removed dimension, ordered [v_D, ..., v_{d+1}].
struct NestedSphereParams {
    std::vector<Vec> axes;
    std::vector<double> radii;

    NestedSphereParams() = default;
    NestedSphereParams(std::vector<Vec> axes_in, std::vector<double> radii_in);

    int levels() const { return static_cast<int>(axes.size()); }
    // Dimension of the high sphere S^D (axes empty means identity mapping).
    int high_dim(int latent_dim) const { return latent_dim + levels(); }
};

// Parameters of the SPD projection Z = W' X W, with W a D x d orthonormal frame.
struct SpdNestedParams {
    Mat w;

    SpdNestedParams() = default;
    explicit SpdNestedParams(Mat w_in);

    int high_dim() const { return static_cast<int>(w.rows()); }
    int latent_dim() const { return static_cast<int>(w.cols()); }
};

// Reconstruction parameters of the SPD inverse mapping: V spans the complement
// of W, K is a contraction, B is SPD of size (D-d).
struct SpdReconstructionParams {
    Mat v;
    Mat k;
    Mat b;

    SpdReconstructionParams() = default;
    SpdReconstructionParams(Mat v_in, Mat k_in, Mat b_in, const Mat& w);
};

// Rotation moving v to the north pole (0,...,0,1); proper rotation built from
// the rank-2 closed form in the {v, north} plane. v at the south pole maps
// through a fixed 180-degree rotation in the (e_1, north) plane.
Mat rotation_to_north(const Vec& v);

// Single-level mappings with a caller-provided rotation (the rotation depends
// only on the axis, so batch and repeated evaluations build it once).
Vec sphere_project_step_cached(const Vec& x, const Vec& v, const Mat& rot, double r,
                               int level = -1);
Vec sphere_unproject_step_cached(const Vec& z, const Mat& rot, double r);

// Precomputed rotations of a nested-sphere composition for fixed axes,
// reusable across points and radii.
class SphereChain {
public:
    explicit SphereChain(std::vector<Vec> axes);

    int levels() const { return static_cast<int>(axes_.size()); }
    const Vec& axis(int i) const { return axes_[static_cast<std::size_t>(i)]; }
    const Mat& rotation(int i) const { return rotations_[static_cast<std::size_t>(i)]; }

    Vec project(const Vec& x, const std::vector<double>& radii) const;
    Vec unproject(const Vec& z, const std::vector<double>& radii) const;

private:
    std::vector<Vec> axes_;
    std::vector<Mat> rotations_;
};

// Single-level projection S^k -> S^{k-1}. Throws SingularProjectionError when
// x is within 1e-9 geodesic distance of +-v; `level` annotates the error.
Vec sphere_project_step(const Vec& x, const Vec& v, double r, int level = -1);

// Single-level inverse: x = R' (sin(r) z; cos(r)).
Vec sphere_unproject_step(const Vec& z, const Vec& v, double r);

// Full compositions. Empty params act as the identity.
Vec sphere_project(const Vec& x, const NestedSphereParams& p);
Vec sphere_unproject(const Vec& z, const NestedSphereParams& p);

Mat spd_project(const Mat& x, const SpdNestedParams& p);
Mat spd_unproject(const Mat& z, const SpdNestedParams& pm, const SpdReconstructionParams& pr);

struct SphereReconstructionFit {
    std::vector<double> radii;
    double objective = 0.0;
    bool converged = true;
};

struct SphereFitOptions {
    int max_iterations = 200;
    double grad_tol = 1e-10;
    std::optional<std::vector<double>> warm_start;
};

// Fit the radii of the inverse sphere mapping by minimizing the sum of squared
// geodesic residuals d^2(x_i, m^-1(z_i)) with the axes held fixed. Radii are
// optimized through a logistic bijection onto (0, pi/2] by gradient descent
// with backtracking, multistarted from pi/6, pi/3, pi/2.
SphereReconstructionFit fit_reconstruction_sphere(const std::vector<Vec>& xs,
                                                  const std::vector<Vec>& zs,
                                                  const std::vector<Vec>& axes,
                                                  const SphereFitOptions& opts = {});

struct SpdReconstructionFit {
    SpdReconstructionParams params;
    double objective = 0.0;
    bool feasible = true;
    // Objective after each outer round; non-increasing.
    std::vector<double> outer_objectives;
};

struct SpdFitOptions {
    int outer_rounds = 8;
    int inner_iterations = 30;
    double constraint_tol = 1e-6;
    double infeasible_tol = 1e-4;
    std::optional<SpdReconstructionParams> warm_start;
};

// Fit (V, K, B) of the SPD inverse mapping by minimizing the sum of squared
// Log-Euclidean residuals subject to W'V = 0 and ||K||_2 <= 1, solved with an
// augmented Lagrangian over Grassmann x Euclidean x SPD. Throws
// InfeasibleError if the returned point violates the constraints beyond
// infeasible_tol.
SpdReconstructionFit fit_reconstruction_spd(const std::vector<Mat>& xs,
                                            const std::vector<Mat>& zs, const Mat& w,
                                            const SpdFitOptions& opts = {});

// Objective and analytic gradient of the SPD reconstruction fit, exposed for
// verification against finite differences. Layout of the flattened parameter
// vector: [vec(V); vec(K); vec(B)].
double spd_reconstruction_objective(const std::vector<Mat>& xs, const std::vector<Mat>& zs,
                                    const Mat& w, const Mat& v, const Mat& k, const Mat& b);
void spd_reconstruction_objective_grad(const std::vector<Mat>& xs, const std::vector<Mat>& zs,
                                       const Mat& w, const Mat& v, const Mat& k, const Mat& b,
                                       double* value, Mat* grad_v, Mat* grad_k, Mat* grad_b);

}  // namespace geobo
