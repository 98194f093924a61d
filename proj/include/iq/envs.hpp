#pragma once

#include <memory>

#include "iq/common.hpp"
#include "iq/policy_repr.hpp"
#include "iq/tabular_mdp.hpp"

namespace iq {

struct EnvSpec {
    int observation_dim = 0;
    ActionBox action_box;
    int max_episode_steps = 0;
    double reward_min = 0.0;
    double reward_max = 0.0;
};

/// Episode end is reported two ways: `terminated` for environment death
/// (absorbing state) and `truncated` for hitting the step limit. Learning
/// targets bootstrap through truncation but not through termination.
struct StepResult {
    Vector observation;
    double reward = 0.0;
    bool terminated = false;
    bool truncated = false;
};

class Env {
public:
    virtual ~Env() = default;
    virtual const EnvSpec& spec() const = 0;
    /// Reseed the environment stream and start a fresh episode.
    virtual Vector reset(std::uint64_t seed) = 0;
    /// Start the next episode of the current stream.
    virtual Vector reset() = 0;
    virtual StepResult step(const Vector& action) = 0;
    virtual std::unique_ptr<Env> clone() const = 0;

    /// Number of actions that had to be clamped into the box so far.
    long clamp_warnings() const { return clamp_count_; }

protected:
    Vector clamp_action(const Vector& action) {
        if (!action.allFinite()) throw std::invalid_argument("step: non-finite action");
        const ActionBox& box = spec().action_box;
        if (action.size() != box.dim())
            throw std::invalid_argument("step: action has wrong dimension");
        Vector a = action;
        bool clamped = false;
        for (int j = 0; j < box.dim(); ++j) {
            const double c = std::clamp(a[j], box.lo[j], box.hi[j]);
            if (c != a[j]) clamped = true;
            a[j] = c;
        }
        if (clamped) ++clamp_count_;
        return a;
    }

    long clamp_count_ = 0;
};

/// Wrap an angle into (-pi, pi].
inline double wrap_angle(double theta) {
    return theta - 2.0 * M_PI * std::ceil((theta - M_PI) / (2.0 * M_PI));
}

/// Torque-limited swing-up: the pole hangs down at reset and the reward
/// peaks when it is balanced upright (theta = 0). Angular acceleration is
/// (g/l) sin(theta) + u/(m l^2), so one zero-torque step changes omega by at
/// most g dt / l.
class PendulumEnv : public Env {
public:
    double mass = 1.0;
    double length = 1.0;
    double gravity = 9.81;
    double dt = 0.05;

    explicit PendulumEnv(int max_episode_steps = 200) {
        spec_.observation_dim = 3;  // (cos theta, sin theta, omega)
        spec_.action_box = ActionBox::cube(1, -2.0, 2.0);
        spec_.max_episode_steps = max_episode_steps;
        spec_.reward_min = -(M_PI * M_PI + 0.1 * 64.0 + 0.001 * 4.0);
        spec_.reward_max = 0.0;
    }

    const EnvSpec& spec() const override { return spec_; }

    Vector reset(std::uint64_t seed) override {
        rng_.seed(seed);
        return reset();
    }

    Vector reset() override {
        theta_ = wrap_angle(M_PI + uniform(rng_, -0.1, 0.1));
        omega_ = uniform(rng_, -0.05, 0.05);
        steps_ = 0;
        return observation();
    }

    StepResult step(const Vector& action) override {
        const double u = clamp_action(action)[0];
        StepResult out;
        out.reward = -(theta_ * theta_ + 0.1 * omega_ * omega_ + 0.001 * u * u);
        const double accel =
            (gravity / length) * std::sin(theta_) + u / (mass * length * length);
        omega_ = std::clamp(omega_ + accel * dt, -8.0, 8.0);
        theta_ = wrap_angle(theta_ + omega_ * dt);
        ++steps_;
        out.observation = observation();
        out.truncated = steps_ >= spec_.max_episode_steps;
        return out;
    }

    std::unique_ptr<Env> clone() const override { return std::make_unique<PendulumEnv>(*this); }

    double theta() const { return theta_; }
    double omega() const { return omega_; }

private:
    Vector observation() const {
        Vector obs(3);
        obs << std::cos(theta_), std::sin(theta_), omega_;
        return obs;
    }

    EnvSpec spec_;
    Rng rng_{0};
    double theta_ = M_PI;
    double omega_ = 0.0;
    int steps_ = 0;
};

/// 2-D double integrator: push a point toward the origin with a bounded
/// force. Exercises the per-dimension factorization of the policy.
class PointMassEnv : public Env {
public:
    double dt = 0.1;

    explicit PointMassEnv(int max_episode_steps = 120) {
        spec_.observation_dim = 4;  // (position, velocity)
        spec_.action_box = ActionBox::cube(2, -1.0, 1.0);
        spec_.max_episode_steps = max_episode_steps;
        spec_.reward_min = -(5.0 * std::sqrt(2.0) + 0.02);
        spec_.reward_max = 0.0;
    }

    const EnvSpec& spec() const override { return spec_; }

    Vector reset(std::uint64_t seed) override {
        rng_.seed(seed);
        return reset();
    }

    Vector reset() override {
        for (int j = 0; j < 2; ++j) {
            pos_[j] = uniform(rng_, -4.0, 4.0);
            vel_[j] = 0.0;
        }
        steps_ = 0;
        return observation();
    }

    StepResult step(const Vector& action) override {
        const Vector f = clamp_action(action);
        StepResult out;
        out.reward = -pos_.norm() - 0.01 * f.squaredNorm();
        vel_ += f * dt;
        pos_ += vel_ * dt;
        for (int j = 0; j < 2; ++j) {
            if (pos_[j] < -5.0 || pos_[j] > 5.0) {
                pos_[j] = std::clamp(pos_[j], -5.0, 5.0);
                vel_[j] = 0.0;  // walls absorb momentum
            }
        }
        ++steps_;
        out.observation = observation();
        out.truncated = steps_ >= spec_.max_episode_steps;
        return out;
    }

    std::unique_ptr<Env> clone() const override { return std::make_unique<PointMassEnv>(*this); }

private:
    Vector observation() const {
        Vector obs(4);
        obs << pos_[0], pos_[1], vel_[0], vel_[1];
        return obs;
    }

    EnvSpec spec_;
    Rng rng_{0};
    Eigen::Vector2d pos_ = Eigen::Vector2d::Zero();
    Eigen::Vector2d vel_ = Eigen::Vector2d::Zero();
    int steps_ = 0;
};

/// One-hot wrapper around a finite MDP. The discrete actions are exposed as
/// a 1-D box [-1, 1] discretized into n_actions bins so the same policy
/// heads apply; an incoming continuous action maps to the nearest bin.
class TabularEnv : public Env {
public:
    TabularEnv(TabularMdp mdp, std::uint64_t seed, int max_episode_steps = 200)
        : mdp_(std::move(mdp)), rng_(seed) {
        validate(mdp_);
        spec_.observation_dim = mdp_.n_states;
        spec_.action_box = ActionBox::cube(1, -1.0, 1.0);
        spec_.max_episode_steps = max_episode_steps;
        spec_.reward_min = -mdp_.r_max;
        spec_.reward_max = mdp_.r_max;
    }

    const EnvSpec& spec() const override { return spec_; }

    Vector reset(std::uint64_t seed) override {
        rng_.seed(seed);
        return reset();
    }

    Vector reset() override {
        state_ = static_cast<int>(rng_() % mdp_.n_states);
        steps_ = 0;
        return observation();
    }

    StepResult step(const Vector& action) override {
        const double a = clamp_action(action)[0];
        const int idx = action_index(a);
        StepResult out;
        out.reward = mdp_.reward(state_, idx);
        state_ = sample_next(state_, idx);
        ++steps_;
        out.observation = observation();
        out.truncated = steps_ >= spec_.max_episode_steps;
        return out;
    }

    std::unique_ptr<Env> clone() const override { return std::make_unique<TabularEnv>(*this); }

    const TabularMdp& mdp() const { return mdp_; }
    int state() const { return state_; }

    int action_index(double a) const {
        const int n = mdp_.n_actions;
        const int idx = static_cast<int>(std::floor((a + 1.0) / 2.0 * n));
        return std::clamp(idx, 0, n - 1);
    }

private:
    int sample_next(int s, int a) {
        const double u = uniform(rng_, 0.0, 1.0);
        double acc = 0.0;
        for (int t = 0; t < mdp_.n_states; ++t) {
            acc += mdp_.transition[a](s, t);
            if (u < acc) return t;
        }
        return mdp_.n_states - 1;
    }

    Vector observation() const {
        Vector obs = Vector::Zero(mdp_.n_states);
        obs[state_] = 1.0;
        return obs;
    }

    TabularMdp mdp_;
    EnvSpec spec_;
    Rng rng_;
    int state_ = 0;
    int steps_ = 0;
};

inline std::unique_ptr<Env> wrap_tabular(TabularMdp mdp, std::uint64_t seed,
                                         int max_episode_steps = 200) {
    return std::make_unique<TabularEnv>(std::move(mdp), seed, max_episode_steps);
}

struct ReturnStats {
    double mean = 0.0;
    double stddev = 0.0;
    int episodes = 0;
};

/// Mean and sample standard deviation of the undiscounted return of a
/// uniform-random policy. Used as the normalization baseline.
inline ReturnStats random_policy_baseline(Env& env, int episodes, std::uint64_t seed) {
    Rng rng(seed);
    const ActionBox& box = env.spec().action_box;
    std::vector<double> returns;
    returns.reserve(episodes);
    env.reset(seed + 1);
    for (int e = 0; e < episodes; ++e) {
        if (e > 0) env.reset();
        double ret = 0.0;
        while (true) {
            Vector a(box.dim());
            for (int j = 0; j < box.dim(); ++j) a[j] = uniform(rng, box.lo[j], box.hi[j]);
            const StepResult r = env.step(a);
            ret += r.reward;
            if (r.terminated || r.truncated) break;
        }
        returns.push_back(ret);
    }
    ReturnStats stats;
    stats.episodes = episodes;
    for (double r : returns) stats.mean += r;
    stats.mean /= episodes;
    double ss = 0.0;
    for (double r : returns) ss += (r - stats.mean) * (r - stats.mean);
    stats.stddev = episodes > 1 ? std::sqrt(ss / (episodes - 1)) : 0.0;
    return stats;
}

}  // namespace iq
