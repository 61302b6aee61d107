#pragma once

#include <stdexcept>
#include <string>

namespace geobo {

// Projection of a point lying (numerically) on the axis of a subsphere
// mapping; carries the composition level at which the singularity occurred.
class SingularProjectionError : public std::runtime_error {
public:
    SingularProjectionError(const std::string& what, int level)
        : std::runtime_error(what), level_(level) {}
    int level() const { return level_; }

private:
    int level_;
};

// Gram matrix failed the positive-semidefiniteness guard.
class KernelValidityError : public std::runtime_error {
public:
    KernelValidityError(const std::string& what, double beta, double beta_min)
        : std::runtime_error(what), beta_(beta), beta_min_(beta_min) {}
    double beta() const { return beta_; }
    double beta_min() const { return beta_min_; }

private:
    double beta_;
    double beta_min_;
};

// Constrained solve returned a point violating its constraints beyond tolerance.
class InfeasibleError : public std::runtime_error {
public:
    explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace geobo
