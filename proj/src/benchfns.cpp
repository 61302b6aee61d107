#include "geobo/benchfns.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <tuple>

#include "geobo/errors.hpp"
#include "geobo/parallel.hpp"
#include "geobo/trust_region.hpp"

namespace geobo {

namespace {
constexpr double kPi = std::numbers::pi;
}

std::string to_string(BenchmarkKind k) {
    switch (k) {
        case BenchmarkKind::ackley: return "ackley";
        case BenchmarkKind::rosenbrock: return "rosenbrock";
        case BenchmarkKind::styblinski_tang: return "styblinski_tang";
        case BenchmarkKind::product_of_sines: return "product_of_sines";
    }
    return "unknown";
}

std::optional<BenchmarkKind> parse_benchmark(const std::string& s) {
    if (s == "ackley") return BenchmarkKind::ackley;
    if (s == "rosenbrock") return BenchmarkKind::rosenbrock;
    if (s == "styblinski_tang") return BenchmarkKind::styblinski_tang;
    if (s == "product_of_sines") return BenchmarkKind::product_of_sines;
    return std::nullopt;
}

double eval_ackley(const Vec& v) {
    if (v.size() == 0) throw std::invalid_argument("eval_ackley: empty input");
    const double d = static_cast<double>(v.size());
    const double rms = std::sqrt(v.squaredNorm() / d);
    const double mean_cos = (2.0 * kPi * v.array()).cos().sum() / d;
    return -20.0 * std::exp(-0.2 * rms) - std::exp(mean_cos) + 20.0 + std::exp(1.0);
}

double eval_rosenbrock(const Vec& v) {
    if (v.size() < 2) throw std::invalid_argument("eval_rosenbrock: need dimension >= 2");
    double total = 0.0;
    for (Eigen::Index i = 0; i + 1 < v.size(); ++i) {
        const double a = v[i + 1] - v[i] * v[i];
        const double b = v[i] - 1.0;
        total += 100.0 * a * a + b * b;
    }
    return total;
}

double eval_styblinski_tang(const Vec& v) {
    if (v.size() == 0) throw std::invalid_argument("eval_styblinski_tang: empty input");
    double total = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double t = 5.0 * v[i];
        total += t * t * t * t - 16.0 * t * t + 5.0 * t;
    }
    return 0.5 * total;
}

double eval_product_of_sines(const Vec& v) {
    if (v.size() == 0) throw std::invalid_argument("eval_product_of_sines: empty input");
    double prod = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) prod *= std::sin(v[i]);
    return 100.0 * std::sin(v[0]) * prod;
}

double eval_benchmark(BenchmarkKind kind, const Vec& v) {
    switch (kind) {
        case BenchmarkKind::ackley: return eval_ackley(v);
        case BenchmarkKind::rosenbrock: return eval_rosenbrock(v);
        case BenchmarkKind::styblinski_tang: return eval_styblinski_tang(v);
        case BenchmarkKind::product_of_sines: return eval_product_of_sines(v);
    }
    throw std::invalid_argument("eval_benchmark: unknown kind");
}

double benchmark_domain_halfwidth(BenchmarkKind kind) {
    switch (kind) {
        case BenchmarkKind::ackley: return 2.0;
        case BenchmarkKind::rosenbrock: return 2.0;
        case BenchmarkKind::styblinski_tang: return 1.0;
        case BenchmarkKind::product_of_sines: return kPi;
    }
    return 1.0;
}

BenchmarkFn::BenchmarkFn(BenchmarkKind kind_in, int input_dim_in)
    : kind(kind_in), input_dim(input_dim_in) {
    const int min_dim = kind == BenchmarkKind::rosenbrock ? 2 : 1;
    if (input_dim < min_dim) throw std::invalid_argument("BenchmarkFn: input_dim too small");
}

double BenchmarkFn::operator()(const Vec& v) const {
    if (v.size() != input_dim) throw std::invalid_argument("BenchmarkFn: dimension mismatch");
    return eval_benchmark(kind, v);
}

// ---------------------------------------------------------------------------
// Embedded objectives
// ---------------------------------------------------------------------------

EmbeddedObjective::EmbeddedObjective(const SearchSpace& space, int latent_dim, BenchmarkKind base,
                                     std::uint64_t seed)
    : space_(space), latent_dim_(latent_dim), base_(base) {
    space_.validate();
    if (latent_dim < 1 || latent_dim >= space.dim)
        throw std::invalid_argument("EmbeddedObjective: need 1 <= d < D");
    high_ = space_.make_manifold();

    Rng rng = make_rng(sub_seed(seed, "planted_map"));
    if (space_.kind == SearchSpace::Kind::sphere) {
        std::vector<Vec> axes;
        std::vector<double> radii;
        for (int k = space_.dim; k > latent_dim_; --k) {
            Sphere s(k);
            axes.push_back(s.random_point(rng));
            radii.push_back(uniform(rng, kPi / 4.0 + 1e-9, kPi / 2.0));
        }
        sphere_map_ = NestedSphereParams(std::move(axes), std::move(radii));
        latent_ = std::make_shared<Sphere>(latent_dim_);
    } else {
        Grassmann g(space_.dim, latent_dim_);
        spd_map_ = SpdNestedParams(g.to_mat(g.random_point(rng)));
        latent_ = std::make_shared<Spd>(latent_dim_,
                                        space_.eig_bounds ? space_.eig_bounds->first : 0.1,
                                        space_.eig_bounds ? space_.eig_bounds->second : 10.0);
    }
    f_star_ = embedded_f_star(space_, latent_dim_, base_);
}

Vec EmbeddedObjective::latent_coords(const Vec& z) const {
    const double hw = benchmark_domain_halfwidth(base_);
    if (space_.kind == SearchSpace::Kind::sphere) return hw * z;
    const auto* spd = dynamic_cast<const Spd*>(latent_.get());
    return hw * svec(sym_logm(spd->to_mat(z)));
}

Vec EmbeddedObjective::project(const Vec& x) const {
    if (sphere_map_) return sphere_project(x, *sphere_map_);
    const auto* spd_high = dynamic_cast<const Spd*>(high_.get());
    const auto* spd_lat = dynamic_cast<const Spd*>(latent_.get());
    return spd_lat->to_vec(spd_project(spd_high->to_mat(x), *spd_map_));
}

double EmbeddedObjective::operator()(const Vec& x) const {
    if (sphere_map_) {
        // Points numerically on a mapping axis are perturbed deterministically
        // before projecting; measure-zero inputs, bounded retries.
        Vec cur = x;
        for (int attempt = 0;; ++attempt) {
            try {
                return eval_benchmark(base_, latent_coords(sphere_project(cur, *sphere_map_)));
            } catch (const SingularProjectionError&) {
                if (attempt >= 2) throw;
                Rng rng = make_rng(mix64(std::hash<double>{}(cur.sum()) + 17u * attempt));
                Sphere s(space_.dim);
                Vec t = s.random_tangent(cur, rng);
                cur = s.exp(cur, t * (1e-9 / std::max(t.norm(), 1e-300)));
            }
        }
    }
    return eval_benchmark(base_, latent_coords(project(x)));
}

EmbeddedObjective make_embedded_objective(const SearchSpace& space, int latent_dim,
                                          BenchmarkKind base, std::uint64_t seed) {
    return EmbeddedObjective(space, latent_dim, base, seed);
}

double embedded_f_star(const SearchSpace& space, int latent_dim, BenchmarkKind base) {
    using Key = std::tuple<int, int, int, long long, long long>;
    static std::map<Key, double> cache;
    static std::mutex mu;
    const double lo = space.eig_bounds ? space.eig_bounds->first : 0.1;
    const double hi = space.eig_bounds ? space.eig_bounds->second : 10.0;
    Key key{static_cast<int>(space.kind), latent_dim, static_cast<int>(base),
            static_cast<long long>(lo * 1e9), static_cast<long long>(hi * 1e9)};
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }

    ManifoldPtr latent;
    std::optional<ConstraintSet> cs;
    if (space.kind == SearchSpace::Kind::sphere) {
        latent = std::make_shared<Sphere>(latent_dim);
    } else {
        auto spd = std::make_shared<Spd>(latent_dim, lo, hi);
        cs = spd_eigenvalue_bound_constraints(*spd, lo, hi);
        latent = spd;
    }

    const double hw = benchmark_domain_halfwidth(base);
    Objective obj = [&](const Vec& z) {
        if (space.kind == SearchSpace::Kind::sphere) return eval_benchmark(base, Vec(hw * z));
        const auto* spd = dynamic_cast<const Spd*>(latent.get());
        return eval_benchmark(base, Vec(hw * svec(sym_logm(spd->to_mat(z)))));
    };

    TrustRegionConfig cfg = default_tr_config(*latent);
    cfg.max_outer = 30;
    cfg.grad_tol = 1e-9;
    cfg.hess_fd_step = 1e-5;

    constexpr int kStarts = 10000;
    std::vector<double> results(kStarts, std::numeric_limits<double>::infinity());
    par_for_dynamic(Exec::parallel, kStarts, [&](std::int64_t s) {
        Rng rng = make_rng(sub_seed(0xF57A12u, "fstar", static_cast<std::uint64_t>(s),
                                    static_cast<std::uint64_t>(std::get<2>(key))));
        const Vec z0 = latent->random_point(rng);
        double best = obj(z0);
        try {
            TrResult r = trust_region_minimize(*latent, obj, nullptr, z0, cfg,
                                               cs ? &*cs : nullptr);
            best = std::min(best, r.f);
        } catch (const std::exception&) {
        }
        results[static_cast<std::size_t>(s)] = best;
    });
    double f_star = results[0];
    for (double v : results) f_star = std::min(f_star, v);

    std::lock_guard<std::mutex> lock(mu);
    cache[key] = f_star;
    return f_star;
}

std::vector<double> simple_regret(const std::vector<double>& ys, double f_star, bool* warned) {
    std::vector<double> regret;
    regret.reserve(ys.size());
    double best = std::numeric_limits<double>::infinity();
    bool warn = false;
    for (double y : ys) {
        best = std::min(best, y);
        if (best < f_star - 1e-9) warn = true;
        regret.push_back(best - f_star);
    }
    if (warned) *warned = warn;
    return regret;
}

}  // namespace geobo
