#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "geobo/bo.hpp"
#include "geobo/nested.hpp"

namespace geobo {

enum class BenchmarkKind { ackley, rosenbrock, styblinski_tang, product_of_sines };

std::string to_string(BenchmarkKind k);
std::optional<BenchmarkKind> parse_benchmark(const std::string& s);

double eval_ackley(const Vec& v);
double eval_rosenbrock(const Vec& v);
double eval_styblinski_tang(const Vec& v);
double eval_product_of_sines(const Vec& v);
double eval_benchmark(BenchmarkKind kind, const Vec& v);

// Half-width of the conventional argument domain the latent coordinates are
// rescaled to: [-1,1] is kept for the pre-scaled Styblinski-Tang form,
// [-pi,pi] for product-of-sines, [-2,2] for Ackley and Rosenbrock.
double benchmark_domain_halfwidth(BenchmarkKind kind);

struct BenchmarkFn {
    BenchmarkKind kind = BenchmarkKind::ackley;
    int input_dim = 2;

    BenchmarkFn() = default;
    BenchmarkFn(BenchmarkKind kind_in, int input_dim_in);
    double operator()(const Vec& v) const;
};

// Benchmark objective planted on a high-dimensional manifold: the base
// function reads rescaled coordinates of the latent projection m(x), so the
// value depends on x only through m(x). Mapping parameters are drawn from the
// seed; sphere radii are drawn uniform in (pi/4, pi/2].
class EmbeddedObjective {
public:
    EmbeddedObjective(const SearchSpace& space, int latent_dim, BenchmarkKind base,
                      std::uint64_t seed);

    double operator()(const Vec& x) const;
    // Rescaled argument vector of a flattened latent point.
    Vec latent_coords(const Vec& z) const;
    Vec project(const Vec& x) const;
    double f_star() const { return f_star_; }
    const SearchSpace& space() const { return space_; }
    int latent_dim() const { return latent_dim_; }
    BenchmarkKind base() const { return base_; }
    const std::optional<NestedSphereParams>& sphere_map() const { return sphere_map_; }
    const std::optional<SpdNestedParams>& spd_map() const { return spd_map_; }

private:
    SearchSpace space_;
    int latent_dim_;
    BenchmarkKind base_;
    ManifoldPtr high_;
    ManifoldPtr latent_;
    std::optional<NestedSphereParams> sphere_map_;
    std::optional<SpdNestedParams> spd_map_;
    double f_star_ = 0.0;
};

EmbeddedObjective make_embedded_objective(const SearchSpace& space, int latent_dim,
                                          BenchmarkKind base, std::uint64_t seed);

// Minimum of the coordinateized base function over the latent manifold,
// found by multistart trust region (1e4 seeded starts) and cached per
// (function, manifold kind, dimension, bounds). Independent of the planted
// mapping parameters since the projection is onto the full latent manifold.
double embedded_f_star(const SearchSpace& space, int latent_dim, BenchmarkKind base);

// Per-iteration simple regret best_y_n - f_star; sets *warned when some
// observation undercuts f_star.
std::vector<double> simple_regret(const std::vector<double>& ys, double f_star,
                                  bool* warned = nullptr);

}  // namespace geobo
