#pragma once

#include <set>
#include <string>

#include "crowdnav/belief.hpp"
#include "crowdnav/config.hpp"
#include "crowdnav/env.hpp"
#include "crowdnav/policy.hpp"
#include "crowdnav/rewards.hpp"
#include "crowdnav/sensing.hpp"
#include "crowdnav/sim.hpp"

namespace crowdnav {

struct PpoConfig {
    double clip = 0.2;
    double gamma = 0.99;
    double lam = 0.95;
    double lr = 3e-4;
    int epochs = 4;
    int minibatch = 512;
    double ent_coef = 0.01;
    double vf_coef = 0.5;
    double kl_coef = -1.0;  // < 0: auto = 1 / steps-per-update; 0 disables
    double max_grad_norm = 0.5;  // global gradient clip; 0 disables
    bool lr_anneal = true;       // linear decay of lr to 0 over total_steps
    /// Treat timeouts as truncations and bootstrap V(s_T) through them.
    /// Off by default: the reward definition makes the timeout an absorbing
    /// zero-reward event, and bootstrapping through it empirically rewards
    /// hovering next to the goal until the clock runs out.
    bool timeout_bootstrap = false;
    int n_envs = 16;
    int t_rollout = 128;
};

struct TrainSettings {
    long long total_steps = 500000;
    long long checkpoint_every = 100000;
    int threads = 0;  // 0 = hardware concurrency, capped at n_envs
};

struct EvalSettings {
    int episodes = 100;
    int threads = 0;
};

/// Every knob of the artifact in one place; loads from / echoes to the flat
/// key = value schema documented in the README.
struct RunConfig {
    EpisodeConfig episode;
    SensorConfig sensor;
    RewardConfig reward;
    BeliefConfig belief;
    int history_length = 5;  // L
    int horizon = 5;         // K
    PolicyDims net;          // n_max and K derived from episode/horizon at build time
    int n_samples_train = 2;
    int n_samples_eval = 8;
    PpoConfig ppo;
    TrainSettings train;
    EvalSettings eval;
    std::uint64_t seed = 1;

    PolicyDims dims() const {
        PolicyDims d = net;
        d.n_max = episode.n_humans;
        d.K = horizon;
        return d;
    }

    RewardConfig reward_cfg() const {
        RewardConfig r = reward;
        r.K = horizon;
        return r;
    }

    static RunConfig from_kv(const KvConfig& kv);
    KvConfig to_kv() const;
    std::string echo() const { return to_kv().echo(); }
};

namespace detail {

inline const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "sim.n_humans", "sim.arena", "sim.dt", "sim.time_limit", "sim.goal_resample_prob",
        "sim.human_radius_min", "sim.human_radius_max", "sim.human_speed_min",
        "sim.human_speed_max", "sim.orca_tau", "sim.orca_neighbor_cutoff",
        "sim.orca_safety_margin",
        "robot.v_max", "robot.radius", "robot.start_x", "robot.start_y", "robot.goal_x",
        "robot.goal_y", "robot.start_jitter",
        "sensor.max_range", "sensor.fov_deg", "sensor.blink", "sensor.blink_on",
        "sensor.blink_off",
        "predictor.history", "predictor.horizon",
        "belief.drop_range_factor", "belief.max_age",
        "net.d_model", "net.heads", "net.gru_hidden", "net.bnn_hidden", "net.head_hidden",
        "net.sigma_prior", "net.samples_train", "net.samples_eval",
        "reward.goal", "reward.collision", "reward.w_disc", "reward.sigma_disc",
        "reward.danger_radius", "reward.gamma_bel", "reward.pot_coeff",
        "ppo.clip", "ppo.gamma", "ppo.lambda", "ppo.lr", "ppo.epochs", "ppo.minibatch",
        "ppo.entropy_coef", "ppo.value_coef", "ppo.kl_coef", "ppo.max_grad_norm",
        "ppo.lr_anneal", "ppo.timeout_bootstrap", "ppo.n_envs", "ppo.rollout_steps",
        "train.total_steps", "train.checkpoint_every", "train.threads",
        "eval.episodes", "eval.threads",
        "seed",
    };
    return keys;
}

}  // namespace detail

inline RunConfig RunConfig::from_kv(const KvConfig& kv) {
    for (const auto& [k, v] : kv.values()) {
        (void)v;
        if (!detail::known_keys().count(k))
            throw std::runtime_error("unknown config key: " + k);
    }

    RunConfig c;
    c.episode.n_humans = static_cast<int>(kv.get_int("sim.n_humans", c.episode.n_humans));
    c.episode.arena = kv.get_double("sim.arena", c.episode.arena);
    c.episode.dt = kv.get_double("sim.dt", c.episode.dt);
    c.episode.time_limit = kv.get_double("sim.time_limit", c.episode.time_limit);
    c.episode.human_goal_resample_prob =
        kv.get_double("sim.goal_resample_prob", c.episode.human_goal_resample_prob);
    c.episode.human_radius_min = kv.get_double("sim.human_radius_min", c.episode.human_radius_min);
    c.episode.human_radius_max = kv.get_double("sim.human_radius_max", c.episode.human_radius_max);
    c.episode.human_speed_min = kv.get_double("sim.human_speed_min", c.episode.human_speed_min);
    c.episode.human_speed_max = kv.get_double("sim.human_speed_max", c.episode.human_speed_max);
    c.episode.orca_tau = kv.get_double("sim.orca_tau", c.episode.orca_tau);
    c.episode.orca_neighbor_cutoff =
        kv.get_double("sim.orca_neighbor_cutoff", c.episode.orca_neighbor_cutoff);
    c.episode.orca_safety_margin =
        kv.get_double("sim.orca_safety_margin", c.episode.orca_safety_margin);
    c.episode.robot_v_max = kv.get_double("robot.v_max", c.episode.robot_v_max);
    c.episode.robot_radius = kv.get_double("robot.radius", c.episode.robot_radius);
    c.episode.robot_start.x = kv.get_double("robot.start_x", c.episode.robot_start.x);
    c.episode.robot_start.y = kv.get_double("robot.start_y", c.episode.robot_start.y);
    c.episode.robot_goal.x = kv.get_double("robot.goal_x", c.episode.robot_goal.x);
    c.episode.robot_goal.y = kv.get_double("robot.goal_y", c.episode.robot_goal.y);
    c.episode.start_jitter = kv.get_double("robot.start_jitter", c.episode.start_jitter);

    c.sensor.max_range = kv.get_double("sensor.max_range", c.sensor.max_range);
    c.sensor.fov_deg = kv.get_double("sensor.fov_deg", c.sensor.fov_deg);
    c.sensor.blink_enabled = kv.get_bool("sensor.blink", c.sensor.blink_enabled);
    c.sensor.blink.on_duration = kv.get_double("sensor.blink_on", c.sensor.blink.on_duration);
    c.sensor.blink.off_duration = kv.get_double("sensor.blink_off", c.sensor.blink.off_duration);

    c.history_length = static_cast<int>(kv.get_int("predictor.history", c.history_length));
    c.horizon = static_cast<int>(kv.get_int("predictor.horizon", c.horizon));

    c.belief.drop_range_factor =
        kv.get_double("belief.drop_range_factor", c.belief.drop_range_factor);
    c.belief.max_age = static_cast<int>(kv.get_int("belief.max_age", c.belief.max_age));

    c.net.d_model = static_cast<int>(kv.get_int("net.d_model", c.net.d_model));
    c.net.heads = static_cast<int>(kv.get_int("net.heads", c.net.heads));
    c.net.d_hidden = static_cast<int>(kv.get_int("net.gru_hidden", c.net.d_hidden));
    c.net.bnn_hidden = static_cast<int>(kv.get_int("net.bnn_hidden", c.net.bnn_hidden));
    c.net.head_hidden = static_cast<int>(kv.get_int("net.head_hidden", c.net.head_hidden));
    c.net.sigma_prior = kv.get_double("net.sigma_prior", c.net.sigma_prior);
    c.n_samples_train = static_cast<int>(kv.get_int("net.samples_train", c.n_samples_train));
    c.n_samples_eval = static_cast<int>(kv.get_int("net.samples_eval", c.n_samples_eval));

    c.reward.r_goal = kv.get_double("reward.goal", c.reward.r_goal);
    c.reward.r_col = kv.get_double("reward.collision", c.reward.r_col);
    c.reward.w_disc = kv.get_double("reward.w_disc", c.reward.w_disc);
    c.reward.sigma_disc = kv.get_double("reward.sigma_disc", c.reward.sigma_disc);
    c.reward.danger_radius = kv.get_double("reward.danger_radius", c.reward.danger_radius);
    c.reward.gamma_bel = kv.get_double("reward.gamma_bel", c.reward.gamma_bel);
    c.reward.pot_coeff = kv.get_double("reward.pot_coeff", c.reward.pot_coeff);

    c.ppo.clip = kv.get_double("ppo.clip", c.ppo.clip);
    c.ppo.gamma = kv.get_double("ppo.gamma", c.ppo.gamma);
    c.ppo.lam = kv.get_double("ppo.lambda", c.ppo.lam);
    c.ppo.lr = kv.get_double("ppo.lr", c.ppo.lr);
    c.ppo.epochs = static_cast<int>(kv.get_int("ppo.epochs", c.ppo.epochs));
    c.ppo.minibatch = static_cast<int>(kv.get_int("ppo.minibatch", c.ppo.minibatch));
    c.ppo.ent_coef = kv.get_double("ppo.entropy_coef", c.ppo.ent_coef);
    c.ppo.vf_coef = kv.get_double("ppo.value_coef", c.ppo.vf_coef);
    c.ppo.kl_coef = kv.get_double("ppo.kl_coef", c.ppo.kl_coef);
    c.ppo.max_grad_norm = kv.get_double("ppo.max_grad_norm", c.ppo.max_grad_norm);
    c.ppo.lr_anneal = kv.get_bool("ppo.lr_anneal", c.ppo.lr_anneal);
    c.ppo.timeout_bootstrap = kv.get_bool("ppo.timeout_bootstrap", c.ppo.timeout_bootstrap);
    c.ppo.n_envs = static_cast<int>(kv.get_int("ppo.n_envs", c.ppo.n_envs));
    c.ppo.t_rollout = static_cast<int>(kv.get_int("ppo.rollout_steps", c.ppo.t_rollout));

    c.train.total_steps = kv.get_int("train.total_steps", c.train.total_steps);
    c.train.checkpoint_every = kv.get_int("train.checkpoint_every", c.train.checkpoint_every);
    c.train.threads = static_cast<int>(kv.get_int("train.threads", c.train.threads));
    c.eval.episodes = static_cast<int>(kv.get_int("eval.episodes", c.eval.episodes));
    c.eval.threads = static_cast<int>(kv.get_int("eval.threads", c.eval.threads));
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));
    return c;
}

inline KvConfig RunConfig::to_kv() const {
    KvConfig kv;
    kv.set("sim.n_humans", static_cast<long long>(episode.n_humans));
    kv.set("sim.arena", episode.arena);
    kv.set("sim.dt", episode.dt);
    kv.set("sim.time_limit", episode.time_limit);
    kv.set("sim.goal_resample_prob", episode.human_goal_resample_prob);
    kv.set("sim.human_radius_min", episode.human_radius_min);
    kv.set("sim.human_radius_max", episode.human_radius_max);
    kv.set("sim.human_speed_min", episode.human_speed_min);
    kv.set("sim.human_speed_max", episode.human_speed_max);
    kv.set("sim.orca_tau", episode.orca_tau);
    kv.set("sim.orca_neighbor_cutoff", episode.orca_neighbor_cutoff);
    kv.set("sim.orca_safety_margin", episode.orca_safety_margin);
    kv.set("robot.v_max", episode.robot_v_max);
    kv.set("robot.radius", episode.robot_radius);
    kv.set("robot.start_x", episode.robot_start.x);
    kv.set("robot.start_y", episode.robot_start.y);
    kv.set("robot.goal_x", episode.robot_goal.x);
    kv.set("robot.goal_y", episode.robot_goal.y);
    kv.set("robot.start_jitter", episode.start_jitter);
    kv.set("sensor.max_range", sensor.max_range);
    kv.set("sensor.fov_deg", sensor.fov_deg);
    kv.set("sensor.blink", sensor.blink_enabled);
    kv.set("sensor.blink_on", sensor.blink.on_duration);
    kv.set("sensor.blink_off", sensor.blink.off_duration);
    kv.set("predictor.history", static_cast<long long>(history_length));
    kv.set("predictor.horizon", static_cast<long long>(horizon));
    kv.set("belief.drop_range_factor", belief.drop_range_factor);
    kv.set("belief.max_age", static_cast<long long>(belief.max_age));
    kv.set("net.d_model", static_cast<long long>(net.d_model));
    kv.set("net.heads", static_cast<long long>(net.heads));
    kv.set("net.gru_hidden", static_cast<long long>(net.d_hidden));
    kv.set("net.bnn_hidden", static_cast<long long>(net.bnn_hidden));
    kv.set("net.head_hidden", static_cast<long long>(net.head_hidden));
    kv.set("net.sigma_prior", net.sigma_prior);
    kv.set("net.samples_train", static_cast<long long>(n_samples_train));
    kv.set("net.samples_eval", static_cast<long long>(n_samples_eval));
    kv.set("reward.goal", reward.r_goal);
    kv.set("reward.collision", reward.r_col);
    kv.set("reward.w_disc", reward.w_disc);
    kv.set("reward.sigma_disc", reward.sigma_disc);
    kv.set("reward.danger_radius", reward.danger_radius);
    kv.set("reward.gamma_bel", reward.gamma_bel);
    kv.set("reward.pot_coeff", reward.pot_coeff);
    kv.set("ppo.clip", ppo.clip);
    kv.set("ppo.gamma", ppo.gamma);
    kv.set("ppo.lambda", ppo.lam);
    kv.set("ppo.lr", ppo.lr);
    kv.set("ppo.epochs", static_cast<long long>(ppo.epochs));
    kv.set("ppo.minibatch", static_cast<long long>(ppo.minibatch));
    kv.set("ppo.entropy_coef", ppo.ent_coef);
    kv.set("ppo.value_coef", ppo.vf_coef);
    kv.set("ppo.kl_coef", ppo.kl_coef);
    kv.set("ppo.max_grad_norm", ppo.max_grad_norm);
    kv.set("ppo.lr_anneal", ppo.lr_anneal);
    kv.set("ppo.timeout_bootstrap", ppo.timeout_bootstrap);
    kv.set("ppo.n_envs", static_cast<long long>(ppo.n_envs));
    kv.set("ppo.rollout_steps", static_cast<long long>(ppo.t_rollout));
    kv.set("train.total_steps", train.total_steps);
    kv.set("train.checkpoint_every", train.checkpoint_every);
    kv.set("train.threads", static_cast<long long>(train.threads));
    kv.set("eval.episodes", static_cast<long long>(eval.episodes));
    kv.set("eval.threads", static_cast<long long>(eval.threads));
    kv.set("seed", static_cast<long long>(seed));
    return kv;
}

/// Builds a pipeline environment from the aggregated settings.
inline NavEnv make_env(const RunConfig& cfg) {
    return NavEnv(cfg.episode, cfg.sensor, cfg.reward_cfg(), cfg.belief, cfg.history_length,
                  cfg.horizon);
}

}  // namespace crowdnav
