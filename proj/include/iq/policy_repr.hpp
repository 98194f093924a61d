#pragma once

#include <utility>

#include "iq/common.hpp"

namespace iq {

/// Axis-aligned action box [lo_i, hi_i] per dimension.
struct ActionBox {
    Vector lo;
    Vector hi;

    int dim() const { return static_cast<int>(lo.size()); }

    static ActionBox cube(int d, double lo, double hi) {
        ActionBox box;
        box.lo = Vector::Constant(d, lo);
        box.hi = Vector::Constant(d, hi);
        return box;
    }
};

inline void validate(const ActionBox& box) {
    if (box.dim() < 1 || box.hi.size() != box.lo.size())
        throw std::invalid_argument("ActionBox: need matching bounds with dim >= 1");
    for (int j = 0; j < box.dim(); ++j) {
        if (!std::isfinite(box.lo[j]) || !std::isfinite(box.hi[j]))
            throw std::invalid_argument("ActionBox: bounds must be finite");
        if (box.lo[j] >= box.hi[j])
            throw std::invalid_argument("ActionBox: lower bound must be below upper bound");
    }
}

/// Uniform discretization of each box dimension into n bin centers
///     delta_0 = lo + (hi - lo)/(2n),   delta_j = delta_0 + j (hi - lo)/n,
/// so every bin lies strictly inside the box. The joint space has n^dim
/// actions but is only ever accessed one dimension at a time.
struct DiscretizedActionSpace {
    ActionBox box;
    int n_bins = 0;
    Matrix bins;  // dim x n_bins

    int dim() const { return box.dim(); }
};

inline DiscretizedActionSpace discretize(const ActionBox& box, int n_bins) {
    validate(box);
    if (n_bins < 1) throw std::invalid_argument("discretize: n_bins must be >= 1");
    DiscretizedActionSpace space;
    space.box = box;
    space.n_bins = n_bins;
    space.bins = Matrix(box.dim(), n_bins);
    for (int j = 0; j < box.dim(); ++j) {
        const double width = box.hi[j] - box.lo[j];
        const double first = box.lo[j] + width / (2.0 * n_bins);
        for (int k = 0; k < n_bins; ++k) space.bins(j, k) = first + k * width / n_bins;
    }
    return space;
}

/// Factorized discrete policy over a discretized box: one independent
/// categorical per dimension, each the softmax of its logit row.
struct MulticategoricalHead {
    DiscretizedActionSpace space;
    Matrix logits;  // dim x n_bins
    double tau = 1.0;

    int dim() const { return space.dim(); }
    int n_bins() const { return space.n_bins; }
};

inline MulticategoricalHead make_head(DiscretizedActionSpace space, Matrix logits, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("MulticategoricalHead: tau must be > 0");
    if (logits.rows() != space.dim() || logits.cols() != space.n_bins)
        throw std::invalid_argument("MulticategoricalHead: logits shape mismatch");
    return MulticategoricalHead{std::move(space), std::move(logits), tau};
}

/// Joint log probability sum_j log softmax(logits_j)(a_j).
inline double log_prob(const MulticategoricalHead& head, const Eigen::VectorXi& action_indices) {
    if (action_indices.size() != head.dim())
        throw std::invalid_argument("log_prob: index vector has wrong dimension");
    double lp = 0.0;
    for (int j = 0; j < head.dim(); ++j) {
        const int k = action_indices[j];
        if (k < 0 || k >= head.n_bins())
            throw std::invalid_argument("log_prob: action index out of range");
        lp += log_softmax(head.logits.row(j).transpose())[k];
    }
    return lp;
}

/// Per-dimension categorical draw; returns both bin indices and the
/// corresponding bin-center action.
inline std::pair<Eigen::VectorXi, Vector> sample(const MulticategoricalHead& head, Rng& rng) {
    Eigen::VectorXi idx(head.dim());
    Vector action(head.dim());
    for (int j = 0; j < head.dim(); ++j) {
        const Vector p = softmax(head.logits.row(j).transpose());
        const double u = uniform(rng, 0.0, 1.0);
        double acc = 0.0;
        int k = head.n_bins() - 1;
        for (int i = 0; i < head.n_bins(); ++i) {
            acc += p[i];
            if (u < acc) {
                k = i;
                break;
            }
        }
        idx[j] = k;
        action[j] = head.space.bins(j, k);
    }
    return {idx, action};
}

/// Expected action under the head: per dimension sum_k p_k delta_k.
inline Vector mean_action(const MulticategoricalHead& head) {
    Vector out(head.dim());
    for (int j = 0; j < head.dim(); ++j)
        out[j] = softmax(head.logits.row(j).transpose()).dot(head.space.bins.row(j).transpose());
    return out;
}

/// Most likely bin per dimension (evaluation alternative to the mean).
inline Vector mode_action(const MulticategoricalHead& head) {
    Vector out(head.dim());
    for (int j = 0; j < head.dim(); ++j) {
        int best = 0;
        head.logits.row(j).maxCoeff(&best);
        out[j] = head.space.bins(j, best);
    }
    return out;
}

/// Split a Q row into its unique (policy, value) pair:
/// pi = softmax(q/tau), v = tau logsumexp(q/tau), so tau ln pi + v == q.
inline std::pair<Vector, double> softmax_consistency_roundtrip(const Vector& q_row, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("softmax_consistency_roundtrip: tau must be > 0");
    return {softmax(q_row / tau), tau * logsumexp(q_row / tau)};
}

/// tau ln softmax(f/tau) = f - tau logsumexp(f/tau). Tends to the hard
/// advantage f - max f as tau -> 0; the gap is at most tau ln n.
inline Vector soft_advantage(const Vector& logits_row, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("soft_advantage: tau must be > 0");
    return tau * log_softmax(logits_row / tau);
}

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

/// Diagonal Gaussian squashed into the box by a per-dimension tanh: the
/// ablation policy class. log_std is clamped to [-5, 2] on construction.
struct GaussianHead {
    ActionBox box;
    Vector mean;     // pre-squash
    Vector log_std;  // clamped

    int dim() const { return box.dim(); }
};

inline GaussianHead make_gaussian_head(ActionBox box, Vector mean, Vector log_std) {
    validate(box);
    if (mean.size() != box.dim() || log_std.size() != box.dim())
        throw std::invalid_argument("GaussianHead: parameter shape mismatch");
    for (int j = 0; j < log_std.size(); ++j)
        log_std[j] = std::clamp(log_std[j], kLogStdMin, kLogStdMax);
    return GaussianHead{std::move(box), std::move(mean), std::move(log_std)};
}

namespace detail {

inline double box_mid(const ActionBox& box, int j) { return 0.5 * (box.lo[j] + box.hi[j]); }
inline double box_half(const ActionBox& box, int j) { return 0.5 * (box.hi[j] - box.lo[j]); }

// Pre-squash coordinate of an in-box action, clipped away from the
// boundary so atanh stays finite.
inline double unsquash(const ActionBox& box, int j, double a) {
    const double z = std::clamp((a - box_mid(box, j)) / box_half(box, j), -1.0 + 1e-9, 1.0 - 1e-9);
    return std::atanh(z);
}

}  // namespace detail

inline Vector sample(const GaussianHead& head, Rng& rng) {
    std::normal_distribution<double> unit(0.0, 1.0);
    Vector action(head.dim());
    for (int j = 0; j < head.dim(); ++j) {
        const double u = head.mean[j] + std::exp(head.log_std[j]) * unit(rng);
        action[j] = detail::box_mid(head.box, j) + detail::box_half(head.box, j) * std::tanh(u);
    }
    return action;
}

/// Log density of an in-box action under the squashed Gaussian, including
/// the tanh change-of-variables correction.
inline double log_prob(const GaussianHead& head, const Vector& action) {
    if (action.size() != head.dim())
        throw std::invalid_argument("log_prob: action has wrong dimension");
    constexpr double half_log_two_pi = 0.9189385332046727;
    double lp = 0.0;
    for (int j = 0; j < head.dim(); ++j) {
        const double u = detail::unsquash(head.box, j, action[j]);
        const double sigma = std::exp(head.log_std[j]);
        const double z = (u - head.mean[j]) / sigma;
        lp += -0.5 * z * z - head.log_std[j] - half_log_two_pi;
        const double t = std::tanh(u);
        lp -= std::log(detail::box_half(head.box, j) * std::max(1.0 - t * t, 1e-12));
    }
    return lp;
}

inline Vector mean_action(const GaussianHead& head) {
    Vector action(head.dim());
    for (int j = 0; j < head.dim(); ++j)
        action[j] = detail::box_mid(head.box, j) +
                    detail::box_half(head.box, j) * std::tanh(head.mean[j]);
    return action;
}

}  // namespace iq
