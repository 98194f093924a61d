#pragma once

#include <functional>
#include <string>
#include <vector>

#include "iq/autodiff_nn.hpp"
#include "iq/common.hpp"
#include "iq/envs.hpp"
#include "iq/policy_repr.hpp"
#include "iq/regularized_dp.hpp"
#include "iq/tabular_mdp.hpp"

namespace iq {

enum class Variant { iq, m_iq, pcl, trust_pcl, iq_gaussian, m_iq_gaussian };

inline bool is_residual(Variant v) { return v == Variant::pcl || v == Variant::trust_pcl; }
inline bool is_gaussian(Variant v) {
    return v == Variant::iq_gaussian || v == Variant::m_iq_gaussian;
}

inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::iq: return "iq";
        case Variant::m_iq: return "m_iq";
        case Variant::pcl: return "pcl";
        case Variant::trust_pcl: return "trust_pcl";
        case Variant::iq_gaussian: return "iq_gaussian";
        case Variant::m_iq_gaussian: return "m_iq_gaussian";
    }
    throw std::logic_error("unreachable");
}

inline Variant variant_from_string(const std::string& s) {
    for (Variant v : {Variant::iq, Variant::m_iq, Variant::pcl, Variant::trust_pcl,
                      Variant::iq_gaussian, Variant::m_iq_gaussian})
        if (s == to_string(v)) return v;
    throw std::invalid_argument("unknown variant: " + s);
}

struct AgentConfig {
    double alpha = 0.0;
    double tau = 0.01;
    double gamma = 0.99;
    int batch_size = 256;
    double lambda = 0.05;  // target smoothing coefficient
    double lr = 3e-4;
    int n_bins = 11;
    Variant variant = Variant::iq;
    std::vector<int> hidden = {512, 512};
    std::size_t buffer_capacity = 1000000;
    int eval_interval = 10000;
    int eval_episodes = 10;
    double epsilon_explore = 0.0;  // epsilon-uniform behavior mixing
    bool eval_mode_action = false;  // evaluate with the per-dimension mode instead of the mean
    bool munchausen_clip_enabled = false;
    double munchausen_clip_l0 = -1.0;  // clip tau ln pi_target to [l0, 0] when enabled
    // Default target update: target <- (1-lambda) target + lambda online.
    // The switch applies the reversed-coefficient form
    // target <- lambda target + (1-lambda) online instead.
    bool polyak_reversed_coefficient = false;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    /// Reporting convention: with alpha in (0, 1) the scheme optimizes the
    /// MDP regularized at (1-alpha)*tau, so scores are labeled tau/(1-alpha).
    double effective_tau() const {
        return alpha > 0.0 && alpha < 1.0 ? tau / (1.0 - alpha) : tau;
    }
};

inline void validate(const AgentConfig& cfg) {
    validate(RegularizationConfig{cfg.alpha, cfg.tau});
    if (cfg.gamma < 0.0 || cfg.gamma > 1.0)
        throw std::invalid_argument("AgentConfig: gamma must lie in [0, 1]");
    if (cfg.batch_size < 1) throw std::invalid_argument("AgentConfig: batch_size must be >= 1");
    if (cfg.lambda <= 0.0 || cfg.lambda >= 1.0)
        throw std::invalid_argument("AgentConfig: lambda must lie in (0, 1)");
    if (cfg.n_bins < 1) throw std::invalid_argument("AgentConfig: n_bins must be >= 1");
    if (cfg.epsilon_explore < 0.0 || cfg.epsilon_explore > 1.0)
        throw std::invalid_argument("AgentConfig: epsilon_explore must lie in [0, 1]");
}

template <class S>
struct Transition {
    Vec<S> state;
    Eigen::VectorXi action_indices;  // empty for Gaussian variants
    Vec<S> continuous_action;
    S reward = S(0);
    Vec<S> next_state;
    bool done = false;  // environment termination; truncation stays false
};

/// Bounded FIFO store with uniform sampling over current contents.
template <class S>
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity_ < 1) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
    }

    void push(Transition<S> t) {
        if (data_.size() < capacity_) {
            data_.push_back(std::move(t));
        } else {
            data_[head_] = std::move(t);
            head_ = (head_ + 1) % capacity_;
        }
    }

    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }

    const Transition<S>& sample(Rng& rng) const {
        if (data_.empty()) throw std::logic_error("ReplayBuffer: sampling from empty buffer");
        return data_[rng() % data_.size()];
    }

    /// i-th transition in insertion order (0 = oldest still stored).
    const Transition<S>& oldest(std::size_t i) const {
        return data_[(head_ + i) % data_.size()];
    }

private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::vector<Transition<S>> data_;
};

template <class S>
struct TransitionBatch {
    Mat<S> states;                   // B x obs
    Mat<S> next_states;              // B x obs
    Eigen::MatrixXi action_indices;  // B x d (categorical variants)
    Mat<S> continuous_actions;       // B x d
    Vec<S> rewards;                  // B
    Vec<S> done;                     // B, 1 at termination else 0
    ActionBox action_box;            // geometry of the continuous actions

    int size() const { return static_cast<int>(rewards.size()); }
};

template <class S>
TransitionBatch<S> sample_batch(const ReplayBuffer<S>& buffer, int batch_size, Rng& rng,
                                const ActionBox& box) {
    if (batch_size < 1) throw std::invalid_argument("sample_batch: batch_size must be >= 1");
    const Transition<S>& probe = buffer.sample(rng);
    const int obs = static_cast<int>(probe.state.size());
    const int idx_dim = static_cast<int>(probe.action_indices.size());
    const int act_dim = static_cast<int>(probe.continuous_action.size());

    TransitionBatch<S> batch;
    batch.action_box = box;
    batch.states = Mat<S>(batch_size, obs);
    batch.next_states = Mat<S>(batch_size, obs);
    batch.action_indices = Eigen::MatrixXi(batch_size, idx_dim);
    batch.continuous_actions = Mat<S>(batch_size, act_dim);
    batch.rewards = Vec<S>(batch_size);
    batch.done = Vec<S>(batch_size);
    for (int i = 0; i < batch_size; ++i) {
        const Transition<S>& t = buffer.sample(rng);
        batch.states.row(i) = t.state.transpose();
        batch.next_states.row(i) = t.next_state.transpose();
        if (idx_dim > 0) batch.action_indices.row(i) = t.action_indices.transpose();
        if (act_dim > 0) batch.continuous_actions.row(i) = t.continuous_action.transpose();
        batch.rewards[i] = t.reward;
        batch.done[i] = t.done ? S(1) : S(0);
    }
    return batch;
}

struct LossBatchReport {
    double loss = 0.0;
    double mean_target = 0.0;
    double mean_abs_tau_log_pi = 0.0;
    double policy_grad_norm = 0.0;
    double value_grad_norm = 0.0;
};

namespace detail {

/// log pi(a|s) of the taken actions and, optionally, the gradient of the
/// per-sample log probability w.r.t. the policy-network output. For the
/// factorized categorical head: per dimension block,
/// d log pi / d logits = onehot(a) - softmax(block).
template <class S>
void multicat_log_prob(const Mat<S>& logits, const Eigen::MatrixXi& actions, int n_bins,
                       Vec<S>& lp, Mat<S>* dlogits) {
    const int batch = static_cast<int>(logits.rows());
    const int d = static_cast<int>(actions.cols());
    lp = Vec<S>::Zero(batch);
    if (dlogits) *dlogits = Mat<S>::Zero(batch, logits.cols());
    for (int i = 0; i < batch; ++i) {
        for (int j = 0; j < d; ++j) {
            const auto block = logits.row(i).segment(j * n_bins, n_bins);
            const S max = block.maxCoeff();
            S sum = S(0);
            for (int k = 0; k < n_bins; ++k) sum += std::exp(block[k] - max);
            const S lse = max + std::log(sum);
            const int a = actions(i, j);
            lp[i] += block[a] - lse;
            if (dlogits) {
                for (int k = 0; k < n_bins; ++k)
                    (*dlogits)(i, j * n_bins + k) = -std::exp(block[k] - lse);
                (*dlogits)(i, j * n_bins + a) += S(1);
            }
        }
    }
}

/// Same contract for the squashed-Gaussian head. The network output is
/// (mean, raw log_std) per dimension; log_std is clamped and the clamp
/// zeroes its gradient. The tanh correction term carries no gradient
/// because the action is a constant of the batch.
template <class S>
void gaussian_log_prob(const Mat<S>& out, const Mat<S>& actions, const ActionBox& box,
                       Vec<S>& lp, Mat<S>* dout) {
    constexpr double half_log_two_pi = 0.9189385332046727;
    const int batch = static_cast<int>(out.rows());
    const int d = box.dim();
    lp = Vec<S>::Zero(batch);
    if (dout) *dout = Mat<S>::Zero(batch, out.cols());
    for (int i = 0; i < batch; ++i) {
        for (int j = 0; j < d; ++j) {
            const double mean = static_cast<double>(out(i, j));
            const double raw = static_cast<double>(out(i, d + j));
            const double log_std = std::clamp(raw, kLogStdMin, kLogStdMax);
            const double sigma = std::exp(log_std);
            const double u = unsquash(box, j, static_cast<double>(actions(i, j)));
            const double z = (u - mean) / sigma;
            const double t = std::tanh(u);
            lp[i] += static_cast<S>(-0.5 * z * z - log_std - half_log_two_pi -
                                    std::log(box_half(box, j) * std::max(1.0 - t * t, 1e-12)));
            if (dout) {
                (*dout)(i, j) = static_cast<S>(z / sigma);
                const bool clamped = raw <= kLogStdMin || raw >= kLogStdMax;
                (*dout)(i, d + j) = clamped ? S(0) : static_cast<S>(z * z - 1.0);
            }
        }
    }
}

template <class S>
void taken_log_prob(const TransitionBatch<S>& batch, const Mat<S>& policy_out,
                    const AgentConfig& cfg, Vec<S>& lp, Mat<S>* dout) {
    if (is_gaussian(cfg.variant))
        gaussian_log_prob(policy_out, batch.continuous_actions, batch.action_box, lp, dout);
    else
        multicat_log_prob(policy_out, batch.action_indices, cfg.n_bins, lp, dout);
}

}  // namespace detail

/// Squared regression loss tying the online policy/value pair to the frozen
/// target pair:
///   (r + alpha tau ln pi_target(a|s) + gamma V_target(s') - tau ln pi(a|s) - V(s))^2
/// averaged over the batch. Gradients flow only through tau ln pi(a|s) and
/// V(s); terminal transitions drop the bootstrap term. With
/// `residual = true`, V(s') comes from the online value network instead of
/// the target and receives gradient through that path.
template <class S>
LossBatchReport iq_loss_impl(const TransitionBatch<S>& batch, MlpParams<S>& policy,
                             MlpParams<S>& value, const Mlp<S>& target_policy,
                             const Mlp<S>& target_value, const AgentConfig& cfg, bool residual) {
    validate(cfg);
    const int n = batch.size();
    if (n < 1) throw std::invalid_argument("iq_loss: empty batch");
    const S tau = static_cast<S>(cfg.tau);

    Tape<S> pi_tape = forward(policy, batch.states);
    Vec<S> lp;
    Mat<S> dlogits;
    detail::taken_log_prob(batch, pi_tape.output, cfg, lp, &dlogits);

    Tape<S> v_tape = forward(value, batch.states);
    const Vec<S> v = v_tape.output.col(0);

    // frozen Munchausen term through the target policy
    Vec<S> lp_target;
    detail::taken_log_prob(batch, predict(target_policy, batch.states), cfg, lp_target, nullptr);
    Vec<S> munchausen = tau * lp_target;
    if (cfg.munchausen_clip_enabled)
        munchausen = munchausen.cwiseMax(static_cast<S>(cfg.munchausen_clip_l0));
    munchausen *= static_cast<S>(cfg.alpha);

    Vec<S> v_next;
    Tape<S> v_next_tape;
    if (residual) {
        v_next_tape = forward(value, batch.next_states);
        v_next = v_next_tape.output.col(0);
    } else {
        v_next = predict(target_value, batch.next_states).col(0);
    }

    const Vec<S> not_done = Vec<S>::Ones(n) - batch.done;
    const Vec<S> target = batch.rewards + munchausen +
                          static_cast<S>(cfg.gamma) * not_done.cwiseProduct(v_next);
    const Vec<S> delta = target - tau * lp - v;
    const S inv_n = S(1) / static_cast<S>(n);

    LossBatchReport report;
    report.loss = static_cast<double>(delta.squaredNorm() * inv_n);
    report.mean_target = static_cast<double>(target.sum() * inv_n);
    report.mean_abs_tau_log_pi = static_cast<double>((tau * lp).cwiseAbs().sum() * inv_n);

    // d loss / d (tau ln pi + V) = -2 delta / n
    const Vec<S> dpred = S(-2) * inv_n * delta;
    Mat<S> dout = dlogits;
    for (int i = 0; i < n; ++i) dout.row(i) *= tau * dpred[i];
    backward(policy, pi_tape, dout);
    backward(value, v_tape, Mat<S>(dpred));
    if (residual) {
        const Vec<S> dv_next =
            S(-1) * static_cast<S>(cfg.gamma) * dpred.cwiseProduct(not_done);
        backward(value, v_next_tape, Mat<S>(dv_next));
    }

    report.policy_grad_norm = std::sqrt(grad_sq_norm(policy));
    report.value_grad_norm = std::sqrt(grad_sq_norm(value));
    return report;
}

template <class S>
LossBatchReport iq_loss(const TransitionBatch<S>& batch, MlpParams<S>& policy, MlpParams<S>& value,
                        const Mlp<S>& target_policy, const Mlp<S>& target_value,
                        const AgentConfig& cfg) {
    return iq_loss_impl(batch, policy, value, target_policy, target_value, cfg, false);
}

/// PCL (alpha = 0) / Trust-PCL (alpha > 0) residual form of the loss.
template <class S>
LossBatchReport residual_loss(const TransitionBatch<S>& batch, MlpParams<S>& policy,
                              MlpParams<S>& value, const Mlp<S>& target_policy,
                              const Mlp<S>& target_value, const AgentConfig& cfg) {
    return iq_loss_impl(batch, policy, value, target_policy, target_value, cfg, true);
}

enum class ActMode { sample, mean };

/// Off-policy agent: a policy network, a value network and their moving
/// target copies, trained with a single regression loss.
template <class S>
class IqAgent {
public:
    IqAgent(const EnvSpec& env_spec, AgentConfig cfg, std::uint64_t seed)
        : cfg_(std::move(cfg)), box_(env_spec.action_box) {
        validate(cfg_);
        space_ = discretize(box_, cfg_.n_bins);
        const int d = box_.dim();
        MlpSpec policy_spec{env_spec.observation_dim, cfg_.hidden,
                            is_gaussian(cfg_.variant) ? 2 * d : cfg_.n_bins * d};
        MlpSpec value_spec{env_spec.observation_dim, cfg_.hidden, 1};
        policy_ = make_params<S>(policy_spec, seed);
        value_ = make_params<S>(value_spec, seed + 1);
        target_policy_ = make_target(policy_, cfg_.lambda);
        target_value_ = make_target(value_, cfg_.lambda);
    }

    const AgentConfig& config() const { return cfg_; }
    const ActionBox& action_box() const { return box_; }
    const DiscretizedActionSpace& space() const { return space_; }
    MlpParams<S>& policy() { return policy_; }
    MlpParams<S>& value() { return value_; }
    const MlpParams<S>& policy() const { return policy_; }
    const MlpParams<S>& value() const { return value_; }
    TargetParams<S>& target_policy() { return target_policy_; }
    TargetParams<S>& target_value() { return target_value_; }

    MulticategoricalHead head_at(const Vector& state) const {
        const Vec<S> out = predict_vector(policy_.net, Vec<S>(state.template cast<S>()));
        Matrix logits(box_.dim(), cfg_.n_bins);
        for (int j = 0; j < box_.dim(); ++j)
            for (int k = 0; k < cfg_.n_bins; ++k)
                logits(j, k) = static_cast<double>(out[j * cfg_.n_bins + k]);
        return make_head(space_, std::move(logits), cfg_.tau);
    }

    GaussianHead gaussian_head_at(const Vector& state) const {
        const Vec<S> out = predict_vector(policy_.net, Vec<S>(state.template cast<S>()));
        const int d = box_.dim();
        Vector mean(d), log_std(d);
        for (int j = 0; j < d; ++j) {
            mean[j] = static_cast<double>(out[j]);
            log_std[j] = static_cast<double>(out[d + j]);
        }
        return make_gaussian_head(box_, std::move(mean), std::move(log_std));
    }

    /// Sampled or expected action for one state. Sampling also reports the
    /// chosen bin indices for the replay buffer.
    Vector act(const Vector& state, ActMode mode, Rng& rng,
               Eigen::VectorXi* indices = nullptr) const {
        if (indices) *indices = Eigen::VectorXi();
        if (is_gaussian(cfg_.variant)) {
            const GaussianHead head = gaussian_head_at(state);
            return mode == ActMode::sample ? sample(head, rng) : mean_action(head);
        }
        const MulticategoricalHead head = head_at(state);
        if (mode == ActMode::sample) {
            auto [idx, action] = iq::sample(head, rng);
            if (indices) *indices = idx;
            return action;
        }
        return cfg_.eval_mode_action ? mode_action(head) : mean_action(head);
    }

    /// One gradient step on the variant's loss followed by the smooth
    /// target update.
    LossBatchReport update(const TransitionBatch<S>& batch) {
        LossBatchReport report =
            is_residual(cfg_.variant)
                ? residual_loss(batch, policy_, value_, target_policy_.net, target_value_.net,
                                cfg_)
                : iq_loss(batch, policy_, value_, target_policy_.net, target_value_.net, cfg_);
        adam_step(policy_, cfg_.lr, cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps);
        adam_step(value_, cfg_.lr, cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps);
        const double lam =
            cfg_.polyak_reversed_coefficient ? 1.0 - cfg_.lambda : cfg_.lambda;
        polyak_update(target_policy_, policy_, lam);
        polyak_update(target_value_, value_, lam);
        return report;
    }

private:
    AgentConfig cfg_;
    ActionBox box_;
    DiscretizedActionSpace space_;
    MlpParams<S> policy_;
    MlpParams<S> value_;
    TargetParams<S> target_policy_;
    TargetParams<S> target_value_;
};

struct TrainingRow {
    long env_step = 0;
    double eval_return_mean = 0.0;
    double eval_return_std = 0.0;
    double loss = 0.0;
    double grad_norm = 0.0;
};

struct TrainingLog {
    std::vector<TrainingRow> rows;

    void write_csv(std::ostream& out) const {
        out << "env_step,eval_return_mean,eval_return_std,loss,grad_norm\n";
        char line[192];
        for (const TrainingRow& r : rows) {
            std::snprintf(line, sizeof(line), "%ld,%.17g,%.17g,%.17g,%.17g\n", r.env_step,
                          r.eval_return_mean, r.eval_return_std, r.loss, r.grad_norm);
            out << line;
        }
    }

    void write_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot open " + path);
        write_csv(out);
    }
};

/// Deterministic evaluation: average undiscounted return over a fixed set
/// of episodes, acting with the expected action.
template <class S>
ReturnStats evaluate_agent(const IqAgent<S>& agent, Env& env, int episodes,
                           std::uint64_t seed_base) {
    Rng rng(seed_base);  // act() takes an rng but mean-mode acting never draws
    ReturnStats stats;
    stats.episodes = episodes;
    std::vector<double> returns;
    returns.reserve(episodes);
    for (int e = 0; e < episodes; ++e) {
        Vector obs = env.reset(seed_base + e);
        double ret = 0.0;
        while (true) {
            const StepResult r = env.step(agent.act(obs, ActMode::mean, rng));
            ret += r.reward;
            obs = r.observation;
            if (r.terminated || r.truncated) break;
        }
        returns.push_back(ret);
    }
    for (double r : returns) stats.mean += r;
    stats.mean /= episodes;
    double ss = 0.0;
    for (double r : returns) ss += (r - stats.mean) * (r - stats.mean);
    stats.stddev = episodes > 1 ? std::sqrt(ss / (episodes - 1)) : 0.0;
    return stats;
}

/// Training loop on an existing agent: one environment step, one gradient
/// step, one target update per iteration. Evaluates at step 0, every
/// eval_interval steps and at the end; the optional callback sees each
/// evaluation row and may stop training early.
template <class S>
TrainingLog run_training(IqAgent<S>& agent, Env& env, long total_steps, std::uint64_t seed,
                         const std::function<bool(const TrainingRow&)>& on_eval = nullptr) {
    const AgentConfig& cfg = agent.config();
    if (total_steps < 0) throw std::invalid_argument("run_training: total_steps must be >= 0");

    ReplayBuffer<S> buffer(cfg.buffer_capacity);
    Rng rng(seed + 1000003);
    std::unique_ptr<Env> eval_env = env.clone();
    const std::uint64_t eval_seed = seed * 2654435761u + 17;

    TrainingLog log;
    double last_loss = 0.0;
    double last_grad = 0.0;
    auto evaluate = [&](long step) {
        const ReturnStats stats = evaluate_agent(agent, *eval_env, cfg.eval_episodes, eval_seed);
        TrainingRow row{step, stats.mean, stats.stddev, last_loss, last_grad};
        log.rows.push_back(row);
        return on_eval && on_eval(row);
    };

    if (evaluate(0) || total_steps == 0) return log;

    Vector obs = env.reset(seed);
    const ActionBox& box = env.spec().action_box;
    for (long t = 1; t <= total_steps; ++t) {
        Eigen::VectorXi indices;
        Vector action = agent.act(obs, ActMode::sample, rng, &indices);
        if (cfg.epsilon_explore > 0.0 && uniform(rng, 0.0, 1.0) < cfg.epsilon_explore) {
            if (is_gaussian(cfg.variant)) {
                for (int j = 0; j < box.dim(); ++j)
                    action[j] = uniform(rng, box.lo[j], box.hi[j]);
            } else {
                for (int j = 0; j < box.dim(); ++j) {
                    const int k = static_cast<int>(rng() % cfg.n_bins);
                    indices[j] = k;
                    action[j] = agent.space().bins(j, k);
                }
            }
        }
        const StepResult result = env.step(action);

        Transition<S> tr;
        tr.state = obs.template cast<S>();
        tr.action_indices = indices;
        tr.continuous_action = action.template cast<S>();
        tr.reward = static_cast<S>(result.reward);
        tr.next_state = result.observation.template cast<S>();
        tr.done = result.terminated;  // bootstrap through time-limit truncation
        buffer.push(std::move(tr));

        obs = (result.terminated || result.truncated) ? env.reset() : result.observation;

        const TransitionBatch<S> batch = sample_batch(buffer, cfg.batch_size, rng, box);
        const LossBatchReport report = agent.update(batch);
        if (!std::isfinite(report.loss))
            throw std::runtime_error(
                "run_training: non-finite loss at step " + std::to_string(t) +
                " (policy grad " + std::to_string(report.policy_grad_norm) + ", value grad " +
                std::to_string(report.value_grad_norm) + ")");
        last_loss = report.loss;
        last_grad = std::sqrt(report.policy_grad_norm * report.policy_grad_norm +
                              report.value_grad_norm * report.value_grad_norm);

        if (t % cfg.eval_interval == 0 || t == total_steps) {
            if (evaluate(t)) break;
        }
    }
    return log;
}

template <class S>
TrainingLog train(Env& env, const AgentConfig& cfg, long total_steps, std::uint64_t seed,
                  const std::function<bool(const TrainingRow&)>& on_eval = nullptr) {
    IqAgent<S> agent(env.spec(), cfg, seed);
    return run_training(agent, env, total_steps, seed, on_eval);
}

/// Tabulate the agent's policy over the one-hot states of a finite MDP.
template <class S>
TabularPolicy tabulate_policy(const IqAgent<S>& agent, int n_states) {
    TabularPolicy pi;
    pi.probs = Matrix(n_states, agent.config().n_bins);
    for (int s = 0; s < n_states; ++s) {
        Vector obs = Vector::Zero(n_states);
        obs[s] = 1.0;
        const MulticategoricalHead head = agent.head_at(obs);
        pi.probs.row(s) = softmax(head.logits.row(0).transpose()).transpose();
    }
    return pi;
}

/// Train the deep agent on an exact finite MDP (one-hot states, transitions
/// sampled from the kernel) and report the sup-norm gap between the learned
/// policy and the exact optimum of the (1-alpha)*tau regularized MDP.
template <class S>
double tabular_sanity_train(const TabularMdp& mdp, AgentConfig cfg, long total_steps,
                            std::uint64_t seed) {
    validate(mdp);
    cfg.gamma = mdp.gamma;       // the exact oracle solves the MDP at its own discount
    cfg.n_bins = mdp.n_actions;  // one bin per discrete action
    if (cfg.epsilon_explore == 0.0) cfg.epsilon_explore = 0.1;
    cfg.eval_interval = static_cast<int>(std::max<long>(1, total_steps));
    if (is_gaussian(cfg.variant))
        throw std::invalid_argument("tabular_sanity_train: needs a categorical policy");

    TabularEnv env(mdp, seed + 77);
    IqAgent<S> agent(env.spec(), cfg, seed);
    run_training(agent, env, total_steps, seed);

    const TabularPolicy learned = tabulate_policy(agent, mdp.n_states);
    const double opt_tau = (1.0 - cfg.alpha) * cfg.tau;
    const TabularPolicy optimal = exact_optimal_regularized(mdp, opt_tau).first;
    return sup_norm(learned.probs - optimal.probs);
}

}  // namespace iq
