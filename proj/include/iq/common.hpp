#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace iq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

inline constexpr const char* kVersion = "0.2.0";

/// Thrown when a fixed-point solve runs out of iterations. Carries the last
/// sup-norm residual so callers can report how close the solve got.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what + " (last residual " + std::to_string(residual) + ")"),
          residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

inline double sup_norm(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }
inline double sup_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

/// log(sum_i exp(x_i)), stabilized by max subtraction so that entries as
/// extreme as +-1e6 (e.g. logits scaled by 1/tau with tau=1e-4) stay finite.
inline double logsumexp(const Vector& x) {
    const double m = x.maxCoeff();
    if (!std::isfinite(m)) return m;  // all -inf, or a NaN/ inf slipped in
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) s += std::exp(x[i] - m);
    return m + std::log(s);
}

/// Row of log softmax(x): x - logsumexp(x). Exact in log space; never
/// exponentiates first, so entries far below the max do not flush to -inf.
inline Vector log_softmax(const Vector& x) {
    return x.array() - logsumexp(x);
}

inline Vector softmax(const Vector& x) {
    return log_softmax(x).array().exp();
}

/// Uniform double in [lo, hi) from the given generator.
inline double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace iq
