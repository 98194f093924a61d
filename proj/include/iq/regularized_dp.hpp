#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <utility>
#include <vector>

#include "iq/common.hpp"
#include "iq/tabular_mdp.hpp"

namespace iq {

/// Balance between KL regularization (weight alpha*tau, toward the previous
/// policy) and entropy regularization (weight (1-alpha)*tau).
struct RegularizationConfig {
    double alpha = 0.0;  // in [0, 1]
    double tau = 0.1;    // > 0

    double kl_weight() const { return alpha * tau; }
    double entropy_weight() const { return (1.0 - alpha) * tau; }
};

inline void validate(const RegularizationConfig& cfg) {
    if (cfg.alpha < 0.0 || cfg.alpha > 1.0)
        throw std::invalid_argument("RegularizationConfig: alpha must lie in [0, 1]");
    if (cfg.tau <= 0.0) throw std::invalid_argument("RegularizationConfig: tau must be > 0");
}

/// One (policy, value) pair carried across iterations, plus the policy one
/// step behind it (needed by the implicit-Q identity checks). Policies are
/// floored at kPolicyFloor so their logs stay finite.
struct DpIterate {
    TabularPolicy policy;       // newest policy
    TabularPolicy prev_policy;  // policy one step older
    Vector value;
    int step_index = 0;

    static DpIterate uniform_init(const TabularMdp& mdp) {
        DpIterate it;
        it.policy = TabularPolicy::uniform(mdp.n_states, mdp.n_actions);
        it.prev_policy = it.policy;
        it.value = Vector::Zero(mdp.n_states);
        it.step_index = 0;
        return it;
    }
};

inline constexpr double kPolicyFloor = 1e-300;

/// Clamp probabilities to at least kPolicyFloor and renormalize each row.
/// Softmax rows far in the tail underflow to exact 0; without the floor the
/// KL/Munchausen log terms would be -inf.
inline void floor_policy(TabularPolicy& pi) {
    for (int s = 0; s < pi.n_states(); ++s) {
        for (int a = 0; a < pi.n_actions(); ++a)
            if (pi.probs(s, a) < kPolicyFloor) pi.probs(s, a) = kPolicyFloor;
        pi.probs.row(s) /= pi.probs.row(s).sum();
    }
}

/// Additive error injected into the update target.
///
/// `constant_bias` draws one matrix of Rademacher entries (+scale or -scale,
/// decided by the seed) and replays it every step, so the time average of
/// the noise has sup norm exactly `scale`. A bias that is constant across
/// actions would be invisible to the policy sequence (softmax rows are shift
/// invariant), so the sign pattern must vary across state-action pairs for
/// the bias to have any effect.
struct NoiseModel {
    enum class Kind { none, iid_gaussian, iid_uniform, constant_bias };
    Kind kind = Kind::none;
    double scale = 0.0;
    std::uint64_t seed = 0;
};

inline void validate(const NoiseModel& noise) {
    if (noise.scale < 0.0) throw std::invalid_argument("NoiseModel: scale must be >= 0");
}

/// Deterministic stream of error matrices for one scheme run.
class NoiseStream {
public:
    NoiseStream(const NoiseModel& model, int n_states, int n_actions)
        : model_(model), rng_(model.seed) {
        validate(model);
        if (model_.kind == NoiseModel::Kind::constant_bias) {
            bias_ = Matrix::Zero(n_states, n_actions);
            for (int s = 0; s < n_states; ++s)
                for (int a = 0; a < n_actions; ++a)
                    bias_(s, a) = (rng_() & 1u) ? model_.scale : -model_.scale;
        }
    }

    Matrix next(int n_states, int n_actions) {
        switch (model_.kind) {
            case NoiseModel::Kind::none:
                return Matrix::Zero(n_states, n_actions);
            case NoiseModel::Kind::constant_bias:
                return bias_;
            case NoiseModel::Kind::iid_gaussian: {
                std::normal_distribution<double> dist(0.0, model_.scale);
                Matrix eps(n_states, n_actions);
                for (int s = 0; s < n_states; ++s)
                    for (int a = 0; a < n_actions; ++a) eps(s, a) = dist(rng_);
                return eps;
            }
            case NoiseModel::Kind::iid_uniform: {
                Matrix eps(n_states, n_actions);
                for (int s = 0; s < n_states; ++s)
                    for (int a = 0; a < n_actions; ++a)
                        eps(s, a) = uniform(rng_, -model_.scale, model_.scale);
                return eps;
            }
        }
        throw std::logic_error("unreachable");
    }

private:
    NoiseModel model_;
    Rng rng_;
    Matrix bias_;
};

/// One step of the implicit-Q scheme. The target
///     T = r + alpha tau ln pi + gamma P V + eps
/// is split into its unique (policy, value) decomposition:
/// pi' = softmax(T/tau) rowwise and V' = tau logsumexp(T/tau) rowwise, so
/// that tau ln pi' + V' reconstructs T.
inline DpIterate iq_dp_step(const TabularMdp& mdp, const DpIterate& it,
                            const RegularizationConfig& cfg, const Matrix& eps) {
    validate(cfg);
    const Matrix target = mdp.reward +
                          cfg.alpha * cfg.tau * it.policy.probs.array().log().matrix() +
                          mdp.gamma * expected_next_value(mdp, it.value) + eps;
    if (!target.allFinite()) throw std::domain_error("iq_dp_step: non-finite update target");

    DpIterate next;
    next.prev_policy = it.policy;
    next.policy.probs = Matrix(mdp.n_states, mdp.n_actions);
    next.value = Vector(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) {
        const Vector logits = target.row(s).transpose() / cfg.tau;
        next.policy.probs.row(s) = softmax(logits).transpose();
        next.value[s] = cfg.tau * logsumexp(logits);
    }
    floor_policy(next.policy);
    next.step_index = it.step_index + 1;
    return next;
}

inline DpIterate iq_dp_step(const TabularMdp& mdp, const DpIterate& it,
                            const RegularizationConfig& cfg, NoiseStream& noise) {
    return iq_dp_step(mdp, it, cfg, noise.next(mdp.n_states, mdp.n_actions));
}

inline DpIterate iq_dp_step(const TabularMdp& mdp, const DpIterate& it,
                            const RegularizationConfig& cfg) {
    return iq_dp_step(mdp, it, cfg, Matrix::Zero(mdp.n_states, mdp.n_actions));
}

/// One step of mirror-descent value iteration with KL weight alpha*tau and
/// entropy weight (1-alpha)*tau, via the closed form
///     pi' propto pi^alpha exp((r + gamma P V)/tau),
///     V'  = tau ln <pi^alpha, exp((r + gamma P V)/tau)>.
/// Produces the same policy sequence as iq_dp_step with zero noise; the two
/// are kept as independently coded routes on purpose.
inline DpIterate md_vi_step(const TabularMdp& mdp, const DpIterate& it,
                            const RegularizationConfig& cfg) {
    validate(cfg);
    const Matrix q = mdp.reward + mdp.gamma * expected_next_value(mdp, it.value);
    if (!q.allFinite()) throw std::domain_error("md_vi_step: non-finite greedy target");

    DpIterate next;
    next.prev_policy = it.policy;
    next.policy.probs = Matrix(mdp.n_states, mdp.n_actions);
    next.value = Vector(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) {
        const Vector w = cfg.alpha * it.policy.probs.row(s).array().log().matrix().transpose() +
                         q.row(s).transpose() / cfg.tau;
        next.policy.probs.row(s) = softmax(w).transpose();
        next.value[s] = cfg.tau * logsumexp(w);
    }
    floor_policy(next.policy);
    next.step_index = it.step_index + 1;
    return next;
}

/// Per-step record of a noisy scheme run.
struct ErrorStep {
    int step = 0;
    Matrix eps;         // error injected into this step's target
    Matrix moving_avg;  // E_k = (1-alpha) sum_j alpha^(k-j) eps_j
    double eps_sup = 0.0;
    double moving_avg_sup = 0.0;
    double distance = 0.0;        // sup distance between optimal and current-policy Q
    double bound_explicit = 0.0;  // error-sum side of the propagation bound
};

struct ErrorTrace {
    RegularizationConfig config;
    NoiseModel noise;
    double gamma = 0.0;
    std::vector<ErrorStep> steps;
    DpIterate final_iterate;

    /// CSV columns: step, eps_sup, E_sup, distance, bound_explicit.
    void write_csv(std::ostream& out) const {
        out << "step,eps_sup,E_sup,distance,bound_explicit\n";
        char line[256];
        for (const ErrorStep& s : steps) {
            std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g,%.17g\n", s.step, s.eps_sup,
                          s.moving_avg_sup, s.distance, s.bound_explicit);
            out << line;
        }
    }

    void write_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot open " + path);
        write_csv(out);
    }
};

/// Drive iq_dp_step for n_steps with injected noise, tracking at each step
/// the exact suboptimality of the current policy in the (1-alpha)*tau
/// regularized MDP (plain MDP when alpha = 1) against the explicit error
/// terms of the propagation bound. The bound's vanishing-in-k remainders are
/// not computable and are deliberately left out of bound_explicit.
inline ErrorTrace run_scheme(const TabularMdp& mdp, const RegularizationConfig& cfg,
                             const NoiseModel& noise, int n_steps, const DpIterate& init) {
    validate(cfg);
    if (n_steps < 1) throw std::invalid_argument("run_scheme: n_steps must be >= 1");

    const double opt_tau = cfg.entropy_weight();
    const QFunction q_star = exact_optimal_regularized(mdp, opt_tau).second;
    const double bound_prefactor = 2.0 / (1.0 - mdp.gamma);

    ErrorTrace trace;
    trace.config = cfg;
    trace.noise = noise;
    trace.gamma = mdp.gamma;
    trace.steps.reserve(n_steps);

    NoiseStream stream(noise, mdp.n_states, mdp.n_actions);
    DpIterate it = init;
    Matrix moving_avg = Matrix::Zero(mdp.n_states, mdp.n_actions);
    Matrix eps_sum = Matrix::Zero(mdp.n_states, mdp.n_actions);
    double discounted_avg_sum = 0.0;  // sum_j gamma^(k-j) ||E_j||_inf

    for (int k = 1; k <= n_steps; ++k) {
        const Matrix eps = stream.next(mdp.n_states, mdp.n_actions);
        it = iq_dp_step(mdp, it, cfg, eps);

        moving_avg = cfg.alpha * moving_avg + (1.0 - cfg.alpha) * eps;
        eps_sum += eps;

        ErrorStep rec;
        rec.step = k;
        rec.eps = eps;
        rec.moving_avg = moving_avg;
        rec.eps_sup = sup_norm(eps);
        rec.moving_avg_sup = sup_norm(moving_avg);
        rec.distance = sup_norm(q_star - exact_q_of_policy(mdp, it.policy, opt_tau));
        if (cfg.alpha == 1.0) {
            rec.bound_explicit = bound_prefactor * sup_norm(eps_sum / k);
        } else {
            discounted_avg_sum = mdp.gamma * discounted_avg_sum + rec.moving_avg_sup;
            rec.bound_explicit = bound_prefactor * discounted_avg_sum;
        }
        trace.steps.push_back(std::move(rec));
    }
    trace.final_iterate = std::move(it);
    return trace;
}

/// Run the implicit-Q and mirror-descent routes side by side from the same
/// randomized strictly-positive init and report the largest entrywise policy
/// deviation seen over all steps.
inline double theorem1_equivalence_check(const TabularMdp& mdp, const RegularizationConfig& cfg,
                                         int n_steps, std::uint64_t seed) {
    Rng rng(seed);
    DpIterate init = DpIterate::uniform_init(mdp);
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a)
            init.policy.probs(s, a) = uniform(rng, 0.05, 1.0);
        init.policy.probs.row(s) /= init.policy.probs.row(s).sum();
        init.value[s] = uniform(rng, -1.0, 1.0);
    }
    init.prev_policy = init.policy;

    DpIterate a = init;
    DpIterate b = init;
    double max_dev = 0.0;
    for (int k = 0; k < n_steps; ++k) {
        a = iq_dp_step(mdp, a, cfg);
        b = md_vi_step(mdp, b, cfg);
        max_dev = std::max(max_dev, sup_norm(a.policy.probs - b.policy.probs));
    }
    return max_dev;
}

/// Evaluate the scheme's regression target two ways and return the largest
/// entrywise gap. Route A bootstraps V directly; route B goes through the
/// implicit Q = tau ln pi - alpha tau ln pi_prev + V and the KL-regularized
/// expectation <pi, Q> + (1-alpha) tau H(pi) - alpha tau KL(pi || pi_prev),
/// which is how the Munchausen form of the loss evaluates the same target.
/// The two agree identically for any strictly positive iterate.
inline double munchausen_loss_identity_check(const TabularMdp& mdp, const DpIterate& it,
                                             const RegularizationConfig& cfg) {
    validate(cfg);
    const Matrix log_pi = it.policy.probs.array().log();
    const Matrix log_prev = it.prev_policy.probs.array().log();
    const Matrix implicit_q =
        cfg.tau * log_pi - cfg.alpha * cfg.tau * log_prev +
        it.value.replicate(1, mdp.n_actions);

    Vector value_via_q(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) {
        double expectation = 0.0;
        double entropy = 0.0;
        double kl = 0.0;
        for (int a = 0; a < mdp.n_actions; ++a) {
            const double p = it.policy.probs(s, a);
            expectation += p * implicit_q(s, a);
            entropy -= p * log_pi(s, a);
            kl += p * (log_pi(s, a) - log_prev(s, a));
        }
        value_via_q[s] = expectation + cfg.entropy_weight() * entropy - cfg.kl_weight() * kl;
    }

    const Matrix munchausen = cfg.kl_weight() * log_pi;
    const Matrix target_direct =
        mdp.reward + munchausen + mdp.gamma * expected_next_value(mdp, it.value);
    const Matrix target_via_q =
        mdp.reward + munchausen + mdp.gamma * expected_next_value(mdp, value_via_q);
    return sup_norm(target_direct - target_via_q);
}

}  // namespace iq
