#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "geobo/kernel.hpp"
#include "geobo/trust_region.hpp"

using namespace geobo;

// Each parallel kernel must reproduce its serial reference exactly: the
// per-element arithmetic is identical, only the loop scheduling differs.

TEST_CASE("pairwise distances: parallel equals serial") {
    Rng rng = make_rng(1);
    Sphere s(8);
    std::vector<Vec> pts;
    for (int i = 0; i < 120; ++i) pts.push_back(s.random_point(rng));
    Mat a = pairwise_sq_distances(pts, s, Exec::serial);
    Mat b = pairwise_sq_distances(pts, s, Exec::parallel);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);

    Spd m(4);
    std::vector<Vec> spd_pts;
    for (int i = 0; i < 40; ++i) spd_pts.push_back(m.random_point(rng));
    Mat c = pairwise_sq_distances(spd_pts, m, Exec::serial);
    Mat d = pairwise_sq_distances(spd_pts, m, Exec::parallel);
    CHECK((c - d).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("feature distances: parallel equals serial") {
    Rng rng = make_rng(2);
    Spd m(5);
    std::vector<Vec> feats;
    for (int i = 0; i < 60; ++i) feats.push_back(distance_feature(m, m.random_point(rng)));
    Mat a = pairwise_sq_distances_features(feats, FeatureMetric::euclidean, Exec::serial);
    Mat b = pairwise_sq_distances_features(feats, FeatureMetric::euclidean, Exec::parallel);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("batch matrix log: parallel equals serial") {
    Rng rng = make_rng(3);
    Spd m(6);
    std::vector<Mat> pts;
    for (int i = 0; i < 50; ++i) pts.push_back(m.to_mat(m.random_point(rng)));
    SpdLogTable a = build_spd_log_table(pts, Exec::serial);
    SpdLogTable b = build_spd_log_table(pts, Exec::parallel);
    REQUIRE(a.logs.size() == b.logs.size());
    for (std::size_t i = 0; i < a.logs.size(); ++i)
        CHECK((a.logs[i] - b.logs[i]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fast latent distances: parallel equals serial") {
    Rng rng = make_rng(4);
    Spd m(6);
    Grassmann g(6, 2);
    std::vector<Mat> pts;
    for (int i = 0; i < 50; ++i) pts.push_back(m.to_mat(m.random_point(rng)));
    SpdLogTable table = build_spd_log_table(pts);
    Mat w = g.to_mat(g.random_point(rng));
    Mat a = spd_latent_sq_distances_fast(table, w, Exec::serial);
    Mat b = spd_latent_sq_distances_fast(table, w, Exec::parallel);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fd gradient: parallel equals serial") {
    Rng rng = make_rng(5);
    Sphere s(20);
    Vec x = s.random_point(rng);
    Objective f = [](const Vec& v) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < v.size(); ++i) acc += std::sin(2.0 * v[i]) + v[i] * v[i] * v[i];
        return acc;
    };
    Vec a = fd_gradient(s, f, x, 1e-6, Exec::serial);
    Vec b = fd_gradient(s, f, x, 1e-6, Exec::parallel);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gram assembly: parallel equals serial") {
    Rng rng = make_rng(6);
    Sphere s(5);
    std::vector<Vec> pts;
    for (int i = 0; i < 80; ++i) pts.push_back(s.random_point(rng));
    GeodesicSeKernel k(1.0, 4.0);
    Mat a = gram(pts, k, s, Exec::serial);
    Mat b = gram(pts, k, s, Exec::parallel);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}
