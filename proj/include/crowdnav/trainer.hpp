#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "crowdnav/ppo.hpp"
#include "crowdnav/rollout.hpp"
#include "crowdnav/settings.hpp"

namespace crowdnav {

struct TrainResult {
    long long steps = 0;
    std::string checkpoint_path;
    double final_success_rate = 0.0;
    double final_mean_return = 0.0;
};

namespace detail {

inline std::string training_echo(const RunConfig& cfg, PolicyVariant variant,
                                 long long steps_done) {
    KvConfig kv = cfg.to_kv();
    kv.set("run.variant", std::string(variant_name(variant)));
    kv.set("run.steps_done", steps_done);
    return kv.echo();
}

}  // namespace detail

/// Alternates rollout collection and PPO updates until total_steps environment
/// steps have been consumed. Writes curves.csv and periodic checkpoints under
/// out_dir; resumable from a checkpoint produced by the same function.
inline TrainResult train_loop(const RunConfig& cfg, PolicyVariant variant,
                              const std::string& out_dir,
                              const std::string& resume_path = "",
                              bool quiet = false) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    PolicyNet net(cfg.dims());
    net.init_weights(cfg.seed);
    Adam adam(net.store(), cfg.ppo.lr);

    long long steps_done = 0;
    if (!resume_path.empty()) {
        Checkpoint c = load_checkpoint(resume_path);
        load_policy(net, c);
        KvConfig echo = KvConfig::from_string(c.config_echo);
        steps_done = echo.get_int("run.steps_done", 0);
        long long adam_steps = echo.get_int("run.adam_steps", 0);
        adam.load_state(c, adam_steps);
    }

    if (!quiet)
        std::printf("policy %s: %lld parameters, seed %llu, resuming at step %lld\n",
                    variant_name(variant), static_cast<long long>(net.parameter_count()),
                    static_cast<unsigned long long>(cfg.seed), steps_done);

    std::vector<EnvSlot> slots;
    slots.reserve(cfg.ppo.n_envs);
    for (int e = 0; e < cfg.ppo.n_envs; ++e) slots.emplace_back(cfg, e);

    int threads = cfg.train.threads;
    if (threads <= 0)
        threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, cfg.ppo.n_envs));

    Rng shuffle_rng = Rng::derive(cfg.seed, 0x5c0ffee);

    const std::string curves_path = out_dir + "/curves.csv";
    std::ofstream curves;
    if (steps_done == 0) {
        curves.open(curves_path, std::ios::trunc);
        curves << "step,episodes,mean_return,success_rate,policy_loss,value_loss,entropy,"
                  "clip_fraction,approx_kl,kl_bnn\n";
    } else {
        curves.open(curves_path, std::ios::app);
    }
    if (!curves) throw std::runtime_error("cannot write " + curves_path);

    auto checkpoint = [&](const std::string& path) {
        std::string echo = detail::training_echo(cfg, variant, steps_done);
        KvConfig kv = KvConfig::from_string(echo);
        kv.set("run.adam_steps", adam.step_count());
        save_policy(path, net, kv.echo(), adam.named_state());
    };

    const std::string latest = out_dir + "/ckpt_latest.bin";
    if (steps_done == 0) checkpoint(latest);

    const long long steps_per_iter =
        static_cast<long long>(cfg.ppo.n_envs) * cfg.ppo.t_rollout;
    long long next_checkpoint = steps_done + cfg.train.checkpoint_every;
    TrainResult result;

    while (steps_done < cfg.train.total_steps) {
        if (cfg.ppo.lr_anneal && cfg.train.total_steps > 0) {
            double frac = 1.0 - static_cast<double>(steps_done) / cfg.train.total_steps;
            adam.set_lr(cfg.ppo.lr * std::max(0.0, frac));
        }
        RolloutBuffer buffer = collect_rollouts(slots, net, variant, cfg.n_samples_train,
                                                cfg.ppo.t_rollout, threads,
                                                cfg.ppo.timeout_bootstrap);
        compute_gae(buffer, cfg.ppo.gamma, cfg.ppo.lam);
        PpoStats stats = ppo_update(net, adam, buffer, cfg.ppo, cfg.n_samples_train,
                                    variant, shuffle_rng, cfg.episode.robot_v_max);
        steps_done += steps_per_iter;

        double mean_ret = 0.0, sr = 0.0;
        for (const EpisodeStat& ep : buffer.episodes) {
            mean_ret += ep.ret;
            sr += ep.end == EventKind::ReachedGoal ? 1.0 : 0.0;
        }
        int n_eps = static_cast<int>(buffer.episodes.size());
        if (n_eps > 0) {
            mean_ret /= n_eps;
            sr /= n_eps;
        }
        result.final_mean_return = mean_ret;
        result.final_success_rate = sr;

        char line[256];
        std::snprintf(line, sizeof(line), "%lld,%d,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n",
                      steps_done, n_eps, mean_ret, sr, stats.policy_loss, stats.value_loss,
                      stats.entropy, stats.clip_fraction, stats.approx_kl, stats.kl_bnn);
        curves << line;
        curves.flush();
        if (!curves) throw std::runtime_error("write failure on " + curves_path);
        if (!quiet)
            std::printf("step %lld  eps %d  ret %.2f  sr %.2f  pol %.4f  val %.4f\n",
                        steps_done, n_eps, mean_ret, sr, stats.policy_loss,
                        stats.value_loss);

        if (steps_done >= next_checkpoint) {
            checkpoint(out_dir + "/ckpt_" + std::to_string(steps_done) + ".bin");
            checkpoint(latest);
            next_checkpoint += cfg.train.checkpoint_every;
        }
    }

    checkpoint(latest);
    result.steps = steps_done;
    result.checkpoint_path = latest;
    return result;
}

}  // namespace crowdnav
