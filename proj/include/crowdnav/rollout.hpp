#pragma once

#include <atomic>
#include <thread>
#include <vector>

#include "crowdnav/env.hpp"
#include "crowdnav/policy.hpp"
#include "crowdnav/settings.hpp"

namespace crowdnav {

/// One transition as the PPO update needs to replay it: the exact forward
/// inputs (including the reparameterization seed) plus what the rollout policy
/// did with them.
struct RolloutStep {
    PolicyInput input;
    Tensor h_prev;
    std::uint64_t bnn_seed = 0;
    Vec2 action;
    Vec2 z;  // pre-squash sample
    double log_prob = 0.0;
    double value = 0.0;
    double reward = 0.0;
    bool done = false;
    /// Timeouts truncate rather than terminate the underlying process; the
    /// value of the post-step state is kept so GAE can bootstrap through it.
    double trunc_value = 0.0;
};

struct EpisodeStat {
    double ret = 0.0;
    int length = 0;
    EventKind end = EventKind::Running;
};

struct RolloutBuffer {
    int n_envs = 0;
    int t_rollout = 0;
    std::vector<RolloutStep> steps;        // env-major: steps[env * t_rollout + t]
    std::vector<double> bootstrap_value;   // per env, V(s_T)
    std::vector<double> advantages;        // filled by compute_gae
    std::vector<double> returns;
    std::vector<EpisodeStat> episodes;     // episodes finished during collection

    RolloutStep& at(int env, int t) { return steps[env * t_rollout + t]; }
    const RolloutStep& at(int env, int t) const { return steps[env * t_rollout + t]; }
    int size() const { return n_envs * t_rollout; }
};

/// Persistent per-environment training state: the env pipeline, the recurrent
/// hidden state, the action-sampling stream and deterministic seed counters.
struct EnvSlot {
    NavEnv env;
    Tensor hidden;
    Rng action_rng;
    std::uint64_t base_seed = 0;
    std::uint64_t env_index = 0;
    std::uint64_t episode_counter = 0;
    std::uint64_t step_counter = 0;
    double episode_return = 0.0;
    int episode_length = 0;
    bool needs_reset = true;

    EnvSlot(const RunConfig& cfg, std::uint64_t index)
        : env(make_env(cfg)),
          hidden(1, cfg.dims().d_hidden),
          action_rng(Rng::derive(cfg.seed, 0x0acc0000 + index)),
          base_seed(cfg.seed),
          env_index(index) {}

    std::uint64_t next_episode_seed() {
        return mix_seed(base_seed, 0xe9150000 + env_index, episode_counter++);
    }

    void reset_episode() {
        env.reset(next_episode_seed());
        hidden.fill(0.0);
        episode_return = 0.0;
        episode_length = 0;
        needs_reset = false;
    }
};

/// Advances one environment slot by t_rollout steps through the full pipeline,
/// writing into its stripe of the buffer. Thread-safe across distinct slots.
inline void collect_env_rollout(EnvSlot& slot, PolicyNet& net, PolicyVariant variant,
                                int n_samples, RolloutBuffer& buffer, int env_idx,
                                Graph& g, bool timeout_bootstrap = false) {
    const double v_max = slot.env.episode_config().robot_v_max;
    if (slot.needs_reset) slot.reset_episode();

    for (int t = 0; t < buffer.t_rollout; ++t) {
        RolloutStep& rec = buffer.at(env_idx, t);
        rec.input = slot.env.observe_phase();
        rec.h_prev = slot.hidden;
        rec.bnn_seed = mix_seed(slot.base_seed, 0xb5500000 + slot.env_index,
                                slot.step_counter++);

        g.reset();
        PolicyForward f = net.forward(g, rec.input, slot.hidden, rec.bnn_seed, n_samples,
                                      variant);
        Vec2 mean{g.val(f.mean).at(0, 0), g.val(f.mean).at(0, 1)};
        Vec2 log_std{g.val(f.log_std).at(0, 0), g.val(f.log_std).at(0, 1)};
        ActionSample s = sample_action(mean, log_std, v_max, slot.action_rng);

        rec.action = s.action;
        rec.z = s.z;
        rec.log_prob = s.log_prob;
        rec.value = g.scalar(f.value);
        slot.hidden = g.val(f.h_next);

        NavEnv::StepOutcome out = slot.env.apply(s.action);
        rec.reward = out.reward.total;
        rec.done = out.done;
        slot.episode_return += out.reward.total;
        slot.episode_length += 1;

        if (out.done) {
            if (timeout_bootstrap && out.event == EventKind::Timeout) {
                // bootstrap through the artificial horizon: value of the
                // final state under the current policy, pre-reset
                NavEnv probe = slot.env;
                PolicyInput last = probe.observe_phase();
                Graph vg;
                std::uint64_t vseed = mix_seed(slot.base_seed,
                                               0x7c0de000 + slot.env_index,
                                               slot.step_counter);
                PolicyForward vf = net.forward(vg, last, slot.hidden, vseed, n_samples,
                                               variant);
                rec.trunc_value = vg.scalar(vf.value);
            }
            buffer.episodes.push_back({slot.episode_return, slot.episode_length, out.event});
            slot.reset_episode();
        }
    }

    // Bootstrap value of the post-rollout state; observe on a scratch copy so
    // the real pipeline state is untouched.
    NavEnv probe = slot.env;
    PolicyInput last = probe.observe_phase();
    g.reset();
    std::uint64_t seed = mix_seed(slot.base_seed, 0xb0070000 + slot.env_index,
                                  slot.step_counter);
    PolicyForward f = net.forward(g, last, slot.hidden, seed, n_samples, variant);
    buffer.bootstrap_value[env_idx] = g.scalar(f.value);
}

/// Collects t_rollout steps from every environment. Environments are
/// independent, so they may run on a thread pool; results are identical for
/// any thread count.
inline RolloutBuffer collect_rollouts(std::vector<EnvSlot>& slots, PolicyNet& net,
                                      PolicyVariant variant, int n_samples, int t_rollout,
                                      int threads = 1, bool timeout_bootstrap = false) {
    RolloutBuffer buffer;
    buffer.n_envs = static_cast<int>(slots.size());
    buffer.t_rollout = t_rollout;
    buffer.steps.resize(static_cast<std::size_t>(buffer.n_envs) * t_rollout);
    buffer.bootstrap_value.assign(buffer.n_envs, 0.0);

    if (threads <= 1 || slots.size() <= 1) {
        Graph g;
        for (std::size_t e = 0; e < slots.size(); ++e)
            collect_env_rollout(slots[e], net, variant, n_samples, buffer,
                                static_cast<int>(e), g, timeout_bootstrap);
        return buffer;
    }

    // Parallel path: each env writes a private stripe; episode stats merge in
    // env order afterwards, so the result is thread-count independent.
    std::vector<std::vector<EpisodeStat>> episode_lists(slots.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        Graph g;
        for (;;) {
            std::size_t e = next.fetch_add(1);
            if (e >= slots.size()) return;
            RolloutBuffer local;
            local.n_envs = 1;
            local.t_rollout = t_rollout;
            local.steps.resize(t_rollout);
            local.bootstrap_value.assign(1, 0.0);
            collect_env_rollout(slots[e], net, variant, n_samples, local, 0, g,
                                timeout_bootstrap);
            for (int t = 0; t < t_rollout; ++t)
                buffer.at(static_cast<int>(e), t) = std::move(local.steps[t]);
            buffer.bootstrap_value[e] = local.bootstrap_value[0];
            episode_lists[e] = std::move(local.episodes);
        }
    };
    std::vector<std::thread> pool;
    int n_threads = std::min<int>(threads, static_cast<int>(slots.size()));
    pool.reserve(n_threads);
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    for (auto& eps : episode_lists)
        for (auto& e : eps) buffer.episodes.push_back(e);
    return buffer;
}

/// Generalized advantage estimation with episode-boundary masking;
/// returns[i] = advantages[i] + values[i]. True terminals (goal, collision)
/// cut the value chain to zero; truncations (timeout) bootstrap through the
/// recorded final-state value but still cut the advantage recursion.
inline void compute_gae(RolloutBuffer& buffer, double gamma, double lam) {
    buffer.advantages.assign(buffer.size(), 0.0);
    buffer.returns.assign(buffer.size(), 0.0);
    for (int e = 0; e < buffer.n_envs; ++e) {
        double running = 0.0;
        for (int t = buffer.t_rollout - 1; t >= 0; --t) {
            const RolloutStep& s = buffer.at(e, t);
            double not_done = s.done ? 0.0 : 1.0;
            double next_value;
            if (s.done)
                next_value = s.trunc_value;  // 0 at true terminals
            else
                next_value = (t == buffer.t_rollout - 1) ? buffer.bootstrap_value[e]
                                                         : buffer.at(e, t + 1).value;
            double delta = s.reward + gamma * next_value - s.value;
            running = delta + gamma * lam * not_done * running;
            int idx = e * buffer.t_rollout + t;
            buffer.advantages[idx] = running;
            buffer.returns[idx] = running + s.value;
        }
    }
}

}  // namespace crowdnav
