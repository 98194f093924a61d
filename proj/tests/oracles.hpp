// Independent reference implementations used only by tests. Everything here
// is written with plain loops and scalar arithmetic, on purpose: these are
// the oracles the library is checked against, so they must not share code
// with it.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "iq/tabular_mdp.hpp"

namespace oracle {

// T^tau_pi Q by direct evaluation of the definition, one scalar at a time.
inline iq::Matrix brute_force_regularized_bellman(const iq::TabularMdp& mdp,
                                                  const iq::TabularPolicy& pi,
                                                  const iq::Matrix& q, double tau) {
    iq::Matrix out(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            double acc = 0.0;
            for (int t = 0; t < mdp.n_states; ++t) {
                double inner = 0.0;
                for (int b = 0; b < mdp.n_actions; ++b) {
                    const double p = pi.probs(t, b);
                    double term = p * q(t, b);
                    if (tau > 0.0 && p > 0.0) term -= tau * p * std::log(p);
                    inner += term;
                }
                acc += mdp.p(s, a, t) * inner;
            }
            out(s, a) = mdp.reward(s, a) + mdp.gamma * acc;
        }
    }
    return out;
}

// Policy evaluation by repeated application of the operator above.
inline iq::Matrix power_iteration_policy_eval(const iq::TabularMdp& mdp,
                                              const iq::TabularPolicy& pi, double tau,
                                              int iters = 4000) {
    iq::Matrix q = iq::Matrix::Zero(mdp.n_states, mdp.n_actions);
    for (int i = 0; i < iters; ++i) q = brute_force_regularized_bellman(mdp, pi, q, tau);
    return q;
}

// Plain value iteration; returns the optimal V and the greedy action per
// state (lowest index wins ties).
inline std::pair<std::vector<double>, std::vector<int>> classic_value_iteration(
    const iq::TabularMdp& mdp, double tol = 1e-14, int iters = 200000) {
    std::vector<double> v(mdp.n_states, 0.0);
    for (int i = 0; i < iters; ++i) {
        std::vector<double> next(mdp.n_states, 0.0);
        double change = 0.0;
        for (int s = 0; s < mdp.n_states; ++s) {
            double best = -1e300;
            for (int a = 0; a < mdp.n_actions; ++a) {
                double q = mdp.reward(s, a);
                for (int t = 0; t < mdp.n_states; ++t) q += mdp.gamma * mdp.p(s, a, t) * v[t];
                if (q > best) best = q;
            }
            next[s] = best;
            change = std::max(change, std::abs(best - v[s]));
        }
        v = next;
        if (change < tol) break;
    }
    std::vector<int> greedy(mdp.n_states, 0);
    for (int s = 0; s < mdp.n_states; ++s) {
        double best = -1e300;
        for (int a = 0; a < mdp.n_actions; ++a) {
            double q = mdp.reward(s, a);
            for (int t = 0; t < mdp.n_states; ++t) q += mdp.gamma * mdp.p(s, a, t) * v[t];
            if (q > best + 1e-13) {
                best = q;
                greedy[s] = a;
            }
        }
    }
    return {v, greedy};
}

// Entropy-only soft value iteration, tracking the policy sequence. Third
// independent route for the alpha = 0 equivalence check.
struct SoftViState {
    iq::Matrix policy;
    std::vector<double> value;
};

inline void soft_vi_step(const iq::TabularMdp& mdp, double tau, SoftViState& st) {
    iq::Matrix target(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) {
            double acc = mdp.reward(s, a);
            for (int t = 0; t < mdp.n_states; ++t)
                acc += mdp.gamma * mdp.p(s, a, t) * st.value[t];
            target(s, a) = acc;
        }
    for (int s = 0; s < mdp.n_states; ++s) {
        double mx = -1e300;
        for (int a = 0; a < mdp.n_actions; ++a) mx = std::max(mx, target(s, a) / tau);
        double z = 0.0;
        for (int a = 0; a < mdp.n_actions; ++a) z += std::exp(target(s, a) / tau - mx);
        for (int a = 0; a < mdp.n_actions; ++a)
            st.policy(s, a) = std::exp(target(s, a) / tau - mx) / z;
        st.value[s] = tau * (mx + std::log(z));
    }
}

// Advantage-augmented value iteration: Q <- r + beta (Q - max_a Q) + gamma P max_a Q.
// Returns the greedy action per state after `iters` sweeps.
inline std::vector<int> advantage_learning_greedy(const iq::TabularMdp& mdp, double beta,
                                                  int iters = 3000) {
    iq::Matrix q = iq::Matrix::Zero(mdp.n_states, mdp.n_actions);
    for (int i = 0; i < iters; ++i) {
        std::vector<double> vmax(mdp.n_states);
        for (int s = 0; s < mdp.n_states; ++s) {
            double mx = -1e300;
            for (int a = 0; a < mdp.n_actions; ++a) mx = std::max(mx, q(s, a));
            vmax[s] = mx;
        }
        iq::Matrix next(mdp.n_states, mdp.n_actions);
        for (int s = 0; s < mdp.n_states; ++s)
            for (int a = 0; a < mdp.n_actions; ++a) {
                double acc = mdp.reward(s, a) + beta * (q(s, a) - vmax[s]);
                for (int t = 0; t < mdp.n_states; ++t)
                    acc += mdp.gamma * mdp.p(s, a, t) * vmax[t];
                next(s, a) = acc;
            }
        q = next;
    }
    std::vector<int> greedy(mdp.n_states, 0);
    for (int s = 0; s < mdp.n_states; ++s) {
        double best = -1e300;
        for (int a = 0; a < mdp.n_actions; ++a)
            if (q(s, a) > best) {
                best = q(s, a);
                greedy[s] = a;
            }
    }
    return greedy;
}

// Smallest over states of the gap between the best and second-best optimal
// Q values; used to screen for MDPs with a unique optimal action per state.
inline double min_action_gap(const iq::Matrix& q) {
    double gap = 1e300;
    for (int s = 0; s < q.rows(); ++s) {
        double best = -1e300, second = -1e300;
        for (int a = 0; a < q.cols(); ++a) {
            if (q(s, a) > best) {
                second = best;
                best = q(s, a);
            } else if (q(s, a) > second) {
                second = q(s, a);
            }
        }
        if (q.cols() > 1) gap = std::min(gap, best - second);
    }
    return gap;
}

// Ordinary least squares slope of y on x.
inline double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const int n = static_cast<int>(x.size());
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    return sxy / sxx;
}

// One-sided paired t statistic for mean(d) > 0.
inline double paired_t_statistic(const std::vector<double>& d) {
    const int n = static_cast<int>(d.size());
    double mean = 0.0;
    for (double v : d) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : d) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1));
    return mean / (sd / std::sqrt(static_cast<double>(n)));
}

}  // namespace oracle
