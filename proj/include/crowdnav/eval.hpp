#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>
#include <vector>

#include "crowdnav/metrics.hpp"
#include "crowdnav/policies.hpp"
#include "crowdnav/settings.hpp"
#include "crowdnav/svg.hpp"
#include "crowdnav/trainer.hpp"

namespace crowdnav {

struct ScenarioSpec {
    RunConfig cfg;
    std::string policy_id;
    int n_episodes = 100;
    std::uint64_t seed_base = 1000;
};

inline std::string run_id_of(const ScenarioSpec& spec) {
    std::string blob = spec.cfg.echo() + spec.policy_id + "|" +
                       std::to_string(spec.n_episodes) + "|" +
                       std::to_string(spec.seed_base);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : blob) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Runs one seeded episode through the full pipeline and records the trace.
inline EpisodeLog run_episode(const RunConfig& cfg, NavigationPolicy& policy,
                              std::uint64_t episode_seed, const std::string& run_id,
                              bool validate = false) {
    NavEnv env = make_env(cfg);
    env.set_validate(validate);
    env.reset(episode_seed);
    policy.reset(episode_seed);

    EpisodeLog log;
    log.run_id = run_id;
    log.policy = policy.name();
    log.episode_seed = episode_seed;
    log.config = cfg.to_kv();
    for (const HumanState& h : env.world().humans) {
        log.human_radii.push_back(h.radius);
        log.init_humans.push_back(h.position);
    }
    log.init_robot_pos = env.world().robot.position;
    log.init_robot_vel = env.world().robot.velocity;
    log.init_heading = env.world().robot.heading;
    log.goal = env.world().robot.goal;

    const int max_steps =
        static_cast<int>(cfg.episode.time_limit / cfg.episode.dt) + 2;
    for (int t = 0; t < max_steps; ++t) {
        PolicyInput input = env.observe_phase();

        LogStep step;
        step.t = env.world().time_step;
        step.mask = env.frame().mask;
        for (const BeliefTrack& b : env.beliefs().tracks)
            step.beliefs.push_back({b.human_id, b.age, b.trajectory.front()});

        Vec2 action = policy.act(env.frame(), input);
        NavEnv::StepOutcome out = env.apply(action);

        step.sim_time = env.world().sim_time;
        step.robot_pos = env.world().robot.position;
        step.robot_vel = env.world().robot.velocity;
        step.heading = env.world().robot.heading;
        step.action = action;
        step.event = out.event;
        step.d_min = out.d_min;
        step.reward = out.reward;
        for (const HumanState& h : env.world().humans) step.humans.push_back(h.position);
        log.steps.push_back(std::move(step));
        if (out.done) break;
    }
    return log;
}

struct EvalResult {
    Metrics metrics;
    std::vector<EpisodeLog> logs;
};

/// Episodes are seeded seed_base .. seed_base + n - 1 and are independent, so
/// they parallelize across a thread pool; aggregation happens in seed order
/// and is thread-count invariant.
inline EvalResult run_episodes(const ScenarioSpec& spec, bool keep_logs = true,
                               int threads = 1) {
    EvalResult result;
    result.logs.resize(spec.n_episodes);
    const std::string run_id = run_id_of(spec);
    PolicySpec pspec = PolicySpec::parse(spec.policy_id);

    std::atomic<int> next{0};
    auto worker = [&]() {
        std::unique_ptr<NavigationPolicy> policy = make_policy(pspec, spec.cfg);
        for (;;) {
            int e = next.fetch_add(1);
            if (e >= spec.n_episodes) return;
            result.logs[e] =
                run_episode(spec.cfg, *policy, spec.seed_base + e, run_id);
        }
    };

    int n_threads = threads <= 0 ? static_cast<int>(std::thread::hardware_concurrency())
                                 : threads;
    n_threads = std::max(1, std::min(n_threads, spec.n_episodes));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    result.metrics = compute_metrics(result.logs, spec.cfg.reward.danger_radius);
    if (!keep_logs) result.logs.clear();
    return result;
}

inline void write_manifest(const std::string& out_dir, const RunConfig& cfg,
                           const std::vector<std::pair<std::string, std::string>>& extra) {
    std::filesystem::create_directories(out_dir);
    std::ofstream os(out_dir + "/manifest.txt");
    if (!os) throw std::runtime_error("cannot write manifest in " + out_dir);
    for (const auto& [k, v] : extra) os << k << " = " << v << "\n";
    os << cfg.echo();
}

inline void write_episode_logs(const std::string& out_dir,
                               const std::vector<EpisodeLog>& logs) {
    std::filesystem::create_directories(out_dir);
    for (const EpisodeLog& log : logs) {
        std::ofstream os(out_dir + "/ep_" + std::to_string(log.episode_seed) + ".log");
        write_episode_log(os, log);
        if (!os) throw std::runtime_error("failed writing episode log in " + out_dir);
    }
}

// ---------------------------------------------------------------------------
// experiment protocols

struct SweepRow {
    std::string policy;
    double fov = 0.0;
    Metrics metrics;
};

/// Runs every policy at fov in {270, 240, 210, 180, 150, 120} (configurable)
/// and emits a CSV plus one SVG line chart per metric.
inline std::vector<SweepRow> fov_sweep(const RunConfig& base_cfg,
                                       const std::vector<std::string>& policies,
                                       int n_episodes, std::uint64_t seed_base,
                                       const std::string& out_dir, int threads = 1,
                                       std::vector<double> fovs = {270, 240, 210, 180,
                                                                   150, 120},
                                       bool quiet = false) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    std::vector<SweepRow> rows;
    for (const std::string& policy : policies) {
        for (double fov : fovs) {
            ScenarioSpec spec;
            spec.cfg = base_cfg;
            spec.cfg.sensor.fov_deg = fov;
            spec.policy_id = policy;
            spec.n_episodes = n_episodes;
            spec.seed_base = seed_base;
            EvalResult r = run_episodes(spec, false, threads);
            rows.push_back({policy, fov, r.metrics});
            if (!quiet)
                std::printf("fov %3.0f  %-24s %s\n", fov, policy.c_str(),
                            metrics_oneline(r.metrics).c_str());
        }
    }

    std::ofstream csv(out_dir + "/sweep.csv");
    csv << "policy,fov,SR,NT,PL,ITR\n";
    for (const SweepRow& row : rows) {
        csv << row.policy << "," << row.fov << "," << row.metrics.sr << ",";
        if (row.metrics.nt_defined) csv << row.metrics.nt;
        csv << "," << row.metrics.pl << "," << row.metrics.itr << "\n";
    }
    csv.close();

    auto chart = [&](const std::string& metric, auto getter) {
        std::vector<ChartSeries> series;
        for (const std::string& policy : policies) {
            ChartSeries s;
            s.label = policy;
            for (const SweepRow& row : rows)
                if (row.policy == policy) {
                    s.x.push_back(row.fov);
                    s.y.push_back(getter(row.metrics));
                }
            series.push_back(std::move(s));
        }
        std::ofstream os(out_dir + "/sweep_" + metric + ".svg");
        os << render_line_chart(metric + " vs FoV", "FoV (deg)", metric, series);
    };
    chart("sr", [](const Metrics& m) { return m.sr; });
    chart("nt", [](const Metrics& m) { return m.nt_defined ? m.nt : 0.0; });
    chart("pl", [](const Metrics& m) { return m.pl; });
    chart("itr", [](const Metrics& m) { return m.itr; });
    return rows;
}

struct BlinkRow {
    std::string policy;
    Metrics base;
    Metrics blink;
    double d_sr() const { return blink.sr - base.sr; }
    double d_nt() const { return (blink.nt_defined ? blink.nt : 0.0) -
                                 (base.nt_defined ? base.nt : 0.0); }
    double d_pl() const { return blink.pl - base.pl; }
    double d_itr() const { return blink.itr - base.itr; }
};

/// Runs each policy with and without the blink schedule under identical seeds
/// and reports absolute metrics plus (blink - base) deltas.
inline std::vector<BlinkRow> blink_eval(const RunConfig& base_cfg,
                                        const std::vector<std::string>& policies,
                                        int n_episodes, std::uint64_t seed_base,
                                        const std::string& out_dir, int threads = 1,
                                        bool quiet = false) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    std::vector<BlinkRow> rows;
    for (const std::string& policy : policies) {
        BlinkRow row;
        row.policy = policy;
        for (bool blink : {false, true}) {
            ScenarioSpec spec;
            spec.cfg = base_cfg;
            spec.cfg.sensor.blink_enabled = blink;
            spec.policy_id = policy;
            spec.n_episodes = n_episodes;
            spec.seed_base = seed_base;
            EvalResult r = run_episodes(spec, false, threads);
            (blink ? row.blink : row.base) = r.metrics;
        }
        if (!quiet)
            std::printf("%-24s  SR %.2f (%+.2f)  ITR %.4f (%+.4f)\n", policy.c_str(),
                        row.blink.sr, row.d_sr(), row.blink.itr, row.d_itr());
        rows.push_back(row);
    }

    std::ofstream csv(out_dir + "/blink.csv");
    csv << "policy,SR,SR_delta,NT,NT_delta,PL,PL_delta,ITR,ITR_delta\n";
    for (const BlinkRow& row : rows) {
        csv << row.policy << "," << row.blink.sr << "," << row.d_sr() << ",";
        if (row.blink.nt_defined) csv << row.blink.nt;
        csv << "," << row.d_nt() << "," << row.blink.pl << "," << row.d_pl() << ","
            << row.blink.itr << "," << row.d_itr() << "\n";
    }
    return rows;
}

/// Console rendering in the blink-table format: value (delta) per metric.
inline std::string blink_table(const std::vector<BlinkRow>& rows) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-28s %-16s %-16s %-16s %-16s\n", "policy",
                  "SR(d)", "NT(d) s", "PL(d) m", "ITR(d)");
    out += line;
    for (const BlinkRow& row : rows) {
        char sr[32], nt[32], pl[32], itr[32];
        std::snprintf(sr, sizeof(sr), "%.2f (%+.2f)", row.blink.sr, row.d_sr());
        if (row.blink.nt_defined)
            std::snprintf(nt, sizeof(nt), "%.2f (%+.2f)", row.blink.nt, row.d_nt());
        else
            std::snprintf(nt, sizeof(nt), "n/a");
        std::snprintf(pl, sizeof(pl), "%.2f (%+.2f)", row.blink.pl, row.d_pl());
        std::snprintf(itr, sizeof(itr), "%.4f (%+.4f)", row.blink.itr, row.d_itr());
        std::snprintf(line, sizeof(line), "%-28s %-16s %-16s %-16s %-16s\n",
                      row.policy.c_str(), sr, nt, pl, itr);
        out += line;
    }
    return out;
}

/// Replay: renders the trajectory SVG and a per-step metric trace CSV.
inline void replay_log(const std::string& log_path, const std::string& out_dir) {
    std::ifstream is(log_path);
    if (!is) throw std::runtime_error("cannot open log: " + log_path);
    EpisodeLog log = parse_episode_log(is);

    std::filesystem::create_directories(out_dir);
    std::string base = std::filesystem::path(log_path).stem().string();
    {
        std::ofstream os(out_dir + "/" + base + ".svg");
        os << render_episode_svg(log);
    }
    {
        std::ofstream os(out_dir + "/" + base + "_trace.csv");
        os << "t,time,dmin,reward,goal,col,disc,pred,bel,pot,event,n_visible,n_beliefs\n";
        for (const LogStep& s : log.steps) {
            int visible = 0;
            for (auto m : s.mask) visible += m;
            char buf[256];
            std::snprintf(buf, sizeof(buf),
                          "%d,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%s,%d,%d\n", s.t,
                          s.sim_time, s.d_min, s.reward.total, s.reward.goal, s.reward.col,
                          s.reward.disc, s.reward.pred, s.reward.bel, s.reward.pot,
                          event_name(s.event), visible, static_cast<int>(s.beliefs.size()));
            os << buf;
        }
    }
}

}  // namespace crowdnav
