#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include <json.hpp>

#include "iq/common.hpp"

namespace iq {

/// Finite MDP with a dense transition kernel. transition[a] is the S x S
/// row-stochastic matrix of P(s'|s,a); reward(s,a) is bounded by r_max.
struct TabularMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<Matrix> transition;  // indexed by action, each S x S
    Matrix reward;                   // S x A
    double gamma = 0.0;
    double r_max = 1.0;

    double p(int s, int a, int s_next) const { return transition[a](s, s_next); }
};

/// Stochastic policy: probs(s,a) = pi(a|s), rows on the simplex.
struct TabularPolicy {
    Matrix probs;

    int n_states() const { return static_cast<int>(probs.rows()); }
    int n_actions() const { return static_cast<int>(probs.cols()); }

    static TabularPolicy uniform(int n_states, int n_actions) {
        TabularPolicy pi;
        pi.probs = Matrix::Constant(n_states, n_actions, 1.0 / n_actions);
        return pi;
    }
};

using QFunction = Matrix;  // S x A
using VFunction = Vector;  // S

inline void validate(const TabularMdp& mdp) {
    if (mdp.n_states < 1 || mdp.n_actions < 1)
        throw std::invalid_argument("TabularMdp: need at least one state and action");
    if (mdp.gamma < 0.0 || mdp.gamma >= 1.0)
        throw std::invalid_argument("TabularMdp: gamma must lie in [0, 1)");
    if (mdp.r_max <= 0.0) throw std::invalid_argument("TabularMdp: r_max must be positive");
    if (static_cast<int>(mdp.transition.size()) != mdp.n_actions)
        throw std::invalid_argument("TabularMdp: transition tensor has wrong action count");
    if (mdp.reward.rows() != mdp.n_states || mdp.reward.cols() != mdp.n_actions)
        throw std::invalid_argument("TabularMdp: reward matrix has wrong shape");
    for (int a = 0; a < mdp.n_actions; ++a) {
        const Matrix& pa = mdp.transition[a];
        if (pa.rows() != mdp.n_states || pa.cols() != mdp.n_states)
            throw std::invalid_argument("TabularMdp: transition matrix has wrong shape");
        for (int s = 0; s < mdp.n_states; ++s) {
            if (pa.row(s).minCoeff() < 0.0)
                throw std::invalid_argument("TabularMdp: negative transition probability");
            if (std::abs(pa.row(s).sum() - 1.0) > 1e-12)
                throw std::invalid_argument("TabularMdp: transition row does not sum to 1");
        }
    }
    if (mdp.reward.cwiseAbs().maxCoeff() > mdp.r_max + 1e-12)
        throw std::invalid_argument("TabularMdp: reward exceeds r_max");
}

inline void validate(const TabularPolicy& pi) {
    for (int s = 0; s < pi.n_states(); ++s) {
        if (pi.probs.row(s).minCoeff() < 0.0)
            throw std::invalid_argument("TabularPolicy: negative probability");
        if (std::abs(pi.probs.row(s).sum() - 1.0) > 1e-12)
            throw std::invalid_argument("TabularPolicy: row does not sum to 1");
    }
}

/// Random MDP in the Garnet family: each (s,a) has exactly `branching`
/// reachable successors with normalized-uniform probabilities, rewards
/// uniform in [-1, 1]. Fully determined by the seed.
inline TabularMdp generate_garnet(int n_states, int n_actions, int branching, std::uint64_t seed,
                                  double gamma = 0.9) {
    if (n_states < 1 || n_actions < 1)
        throw std::invalid_argument("generate_garnet: need at least one state and action");
    if (branching < 1 || branching > n_states)
        throw std::invalid_argument("generate_garnet: branching must lie in [1, n_states]");

    Rng rng(seed);
    TabularMdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.gamma = gamma;
    mdp.r_max = 1.0;
    mdp.reward = Matrix::Zero(n_states, n_actions);
    mdp.transition.assign(n_actions, Matrix::Zero(n_states, n_states));

    std::vector<int> successors(n_states);
    std::iota(successors.begin(), successors.end(), 0);
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            std::shuffle(successors.begin(), successors.end(), rng);
            Vector w(branching);
            for (int b = 0; b < branching; ++b) w[b] = uniform(rng, 0.0, 1.0);
            const double total = w.sum();
            if (total <= 0.0)
                w.setConstant(1.0 / branching);
            else
                w /= total;
            for (int b = 0; b < branching; ++b) mdp.transition[a](s, successors[b]) = w[b];
            mdp.reward(s, a) = uniform(rng, -1.0, 1.0);
        }
    }
    return mdp;
}

/// (P V)(s,a) = sum_{s'} P(s'|s,a) V(s').
inline Matrix expected_next_value(const TabularMdp& mdp, const Vector& v) {
    Matrix pv(mdp.n_states, mdp.n_actions);
    for (int a = 0; a < mdp.n_actions; ++a) pv.col(a) = mdp.transition[a] * v;
    return pv;
}

namespace detail {

inline void check_shapes(const TabularMdp& mdp, const TabularPolicy& pi, const QFunction& q) {
    if (pi.n_states() != mdp.n_states || pi.n_actions() != mdp.n_actions)
        throw std::invalid_argument("policy shape does not match MDP");
    if (q.rows() != mdp.n_states || q.cols() != mdp.n_actions)
        throw std::invalid_argument("Q shape does not match MDP");
}

/// <pi, Q - tau ln pi> per state. Requires pi > 0 wherever tau > 0.
inline Vector regularized_expectation(const TabularPolicy& pi, const QFunction& q, double tau) {
    Vector v(q.rows());
    for (int s = 0; s < q.rows(); ++s) {
        double acc = 0.0;
        for (int a = 0; a < q.cols(); ++a) {
            const double p = pi.probs(s, a);
            if (tau > 0.0) {
                if (p <= 0.0)
                    throw std::domain_error(
                        "regularized Bellman operator: zero-probability action with tau > 0");
                acc += p * (q(s, a) - tau * std::log(p));
            } else {
                acc += p * q(s, a);
            }
        }
        v[s] = acc;
    }
    return v;
}

}  // namespace detail

/// T_pi Q = r + gamma P <pi, Q>.
inline QFunction bellman_operator(const TabularMdp& mdp, const TabularPolicy& pi,
                                  const QFunction& q) {
    detail::check_shapes(mdp, pi, q);
    const Vector v = detail::regularized_expectation(pi, q, 0.0);
    return mdp.reward + mdp.gamma * expected_next_value(mdp, v);
}

/// T^tau_pi Q = r + gamma P <pi, Q - tau ln pi>. Collapses to the plain
/// Bellman operator at tau = 0.
inline QFunction regularized_bellman_operator(const TabularMdp& mdp, const TabularPolicy& pi,
                                              const QFunction& q, double tau) {
    detail::check_shapes(mdp, pi, q);
    if (tau < 0.0) throw std::invalid_argument("tau must be >= 0");
    const Vector v = detail::regularized_expectation(pi, q, tau);
    return mdp.reward + mdp.gamma * expected_next_value(mdp, v);
}

/// Fixed point of T^tau_pi by power iteration. Stops when the sup-norm
/// change falls below tol; throws ConvergenceError past max_iters.
inline QFunction exact_q_of_policy_iterative(const TabularMdp& mdp, const TabularPolicy& pi,
                                             double tau, double tol = 1e-12,
                                             int max_iters = 100000) {
    QFunction q = QFunction::Zero(mdp.n_states, mdp.n_actions);
    double residual = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iters; ++it) {
        QFunction next = regularized_bellman_operator(mdp, pi, q, tau);
        residual = sup_norm(next - q);
        q = std::move(next);
        if (residual < tol) return q;
    }
    throw ConvergenceError("exact_q_of_policy_iterative did not converge", residual);
}

/// Fixed point of T^tau_pi by direct linear solve of the state-value
/// equation (I - gamma M) v = <pi, r - tau ln pi>, M(s,s') = sum_a pi(a|s)
/// P(s'|s,a), then Q = r + gamma P v. Exact up to the solver's precision.
inline QFunction exact_q_of_policy(const TabularMdp& mdp, const TabularPolicy& pi, double tau) {
    detail::check_shapes(mdp, pi, QFunction::Zero(mdp.n_states, mdp.n_actions));
    if (tau < 0.0) throw std::invalid_argument("tau must be >= 0");
    const int n = mdp.n_states;
    Matrix m = Matrix::Zero(n, n);
    for (int a = 0; a < mdp.n_actions; ++a)
        m += pi.probs.col(a).asDiagonal() * mdp.transition[a];
    const Vector b = detail::regularized_expectation(pi, mdp.reward, tau);
    const Matrix system = Matrix::Identity(n, n) - mdp.gamma * m;
    const Vector v = system.partialPivLu().solve(b);
    return mdp.reward + mdp.gamma * expected_next_value(mdp, v);
}

/// Optimal policy and Q of the tau-entropy-regularized MDP, by soft value
/// iteration: V <- tau logsumexp((r + gamma P V)/tau) rowwise, hard max at
/// tau = 0 with greedy ties broken to the lowest action index.
inline std::pair<TabularPolicy, QFunction> exact_optimal_regularized(const TabularMdp& mdp,
                                                                     double tau,
                                                                     double tol = 1e-12,
                                                                     int max_iters = 100000) {
    if (tau < 0.0) throw std::invalid_argument("tau must be >= 0");
    Vector v = Vector::Zero(mdp.n_states);
    double residual = std::numeric_limits<double>::infinity();
    bool converged = false;
    for (int it = 0; it < max_iters && !converged; ++it) {
        const Matrix q = mdp.reward + mdp.gamma * expected_next_value(mdp, v);
        Vector next(mdp.n_states);
        for (int s = 0; s < mdp.n_states; ++s) {
            next[s] = tau > 0.0 ? tau * logsumexp(q.row(s).transpose() / tau)
                                : q.row(s).maxCoeff();
        }
        residual = sup_norm(next - v);
        v = std::move(next);
        converged = residual < tol;
    }
    if (!converged) throw ConvergenceError("exact_optimal_regularized did not converge", residual);

    const QFunction q = mdp.reward + mdp.gamma * expected_next_value(mdp, v);
    TabularPolicy pi;
    pi.probs = Matrix::Zero(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s) {
        if (tau > 0.0) {
            pi.probs.row(s) = softmax(q.row(s).transpose() / tau).transpose();
        } else {
            int best = 0;
            for (int a = 1; a < mdp.n_actions; ++a)
                if (q(s, a) > q(s, best)) best = a;
            pi.probs(s, best) = 1.0;
        }
    }
    return {pi, q};
}

inline nlohmann::json to_json(const TabularMdp& mdp) {
    nlohmann::json j;
    j["n_states"] = mdp.n_states;
    j["n_actions"] = mdp.n_actions;
    j["gamma"] = mdp.gamma;
    auto reward = nlohmann::json::array();
    for (int s = 0; s < mdp.n_states; ++s) {
        auto row = nlohmann::json::array();
        for (int a = 0; a < mdp.n_actions; ++a) row.push_back(mdp.reward(s, a));
        reward.push_back(std::move(row));
    }
    j["reward"] = std::move(reward);
    auto transition = nlohmann::json::array();
    for (int s = 0; s < mdp.n_states; ++s) {
        auto per_action = nlohmann::json::array();
        for (int a = 0; a < mdp.n_actions; ++a) {
            auto row = nlohmann::json::array();
            for (int t = 0; t < mdp.n_states; ++t) row.push_back(mdp.transition[a](s, t));
            per_action.push_back(std::move(row));
        }
        transition.push_back(std::move(per_action));
    }
    j["transition"] = std::move(transition);
    return j;
}

inline TabularMdp mdp_from_json(const nlohmann::json& j) {
    TabularMdp mdp;
    mdp.n_states = j.at("n_states").get<int>();
    mdp.n_actions = j.at("n_actions").get<int>();
    mdp.gamma = j.at("gamma").get<double>();
    mdp.reward = Matrix::Zero(mdp.n_states, mdp.n_actions);
    mdp.transition.assign(mdp.n_actions, Matrix::Zero(mdp.n_states, mdp.n_states));
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a)
            mdp.reward(s, a) = j.at("reward").at(s).at(a).get<double>();
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a)
            for (int t = 0; t < mdp.n_states; ++t)
                mdp.transition[a](s, t) = j.at("transition").at(s).at(a).at(t).get<double>();
    const double max_abs = mdp.reward.size() > 0 ? mdp.reward.cwiseAbs().maxCoeff() : 0.0;
    mdp.r_max = max_abs > 0.0 ? max_abs : 1.0;
    validate(mdp);
    return mdp;
}

}  // namespace iq
