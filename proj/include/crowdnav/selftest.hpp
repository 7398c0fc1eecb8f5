#pragma once

#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "crowdnav/eval.hpp"

namespace crowdnav {

/// Quick built-in sanity suite for installed binaries (the full suites live in
/// the test tree). Prints one line per check; returns the number of failures.
inline int selftest() {
    int failures = 0;
    auto check = [&](const std::string& name, const std::function<bool()>& fn) {
        bool ok = false;
        std::string what;
        try {
            ok = fn();
        } catch (const std::exception& e) {
            what = e.what();
        }
        std::printf("[%s] %s%s%s\n", ok ? "ok" : "FAIL", name.c_str(),
                    what.empty() ? "" : ": ", what.c_str());
        if (!ok) ++failures;
    };

    check("world_init determinism", [] {
        EpisodeConfig cfg;
        cfg.seed = 0xabcdef12;
        WorldState a = world_init(cfg), b = world_init(cfg);
        for (std::size_t i = 0; i < a.humans.size(); ++i)
            if (!(a.humans[i].position == b.humans[i].position)) return false;
        return a.robot.position == b.robot.position;
    });

    check("orca feasibility and speed cap", [] {
        Rng rng(42);
        for (int i = 0; i < 20; ++i) {
            OrcaAgentView self{{0, 0}, {rng.uniform(-1, 1), rng.uniform(-1, 1)}, 0.4};
            std::vector<OrcaAgentView> nb;
            for (int k = 0; k < 3; ++k)
                nb.push_back({{rng.uniform(-3, 3), rng.uniform(-3, 3)},
                              {rng.uniform(-1, 1), rng.uniform(-1, 1)},
                              0.4});
            Vec2 pref{rng.uniform(-1, 1), rng.uniform(-1, 1)};
            OrcaResult res = orca_velocity_ex(self, pref, 1.0, nb, 0.25, 2.0);
            if (res.velocity.norm() > 1.0 + 1e-9 || !res.velocity.finite()) return false;
            if (res.feasible) {
                auto lines = orca_build_lines(self, nb, 0.25, 2.0);
                for (const auto& line : lines)
                    if (!orca_satisfies(line, res.velocity, 1e-9)) return false;
            }
        }
        return true;
    });

    check("blink periodicity", [] {
        SensorConfig s;
        s.blink_enabled = true;
        s.blink = {3.0, 0.5};
        for (double t = 0.0; t < 10.0; t += 0.25)
            if (effective_fov(s, t) != effective_fov(s, t + s.blink.period())) return false;
        return effective_fov(s, 3.25) == 0.0 && effective_fov(s, 2.0) == s.fov_deg;
    });

    check("belief invariants on random episodes", [] {
        for (int ep = 0; ep < 3; ++ep) {
            RunConfig cfg;
            cfg.episode.n_humans = 6;
            cfg.episode.time_limit = 6.0;
            NavEnv env = make_env(cfg);
            env.set_validate(true);  // throws on violation
            env.reset(100 + ep);
            Rng rng(ep);
            for (int t = 0; t < 24; ++t) {
                env.observe_phase();
                if (env.apply({rng.uniform(-1, 1), rng.uniform(-1, 1)}).done) break;
            }
        }
        return true;
    });

    check("reward case structure", [] {
        RewardConfig cfg;
        RewardBreakdown r = total_reward(EventKind::Running, 1.0, 0.0, -5.0, 0.0, 0.75, cfg);
        if (r.total != -4.25) return false;
        if (total_reward(EventKind::ReachedGoal, 1, 0, 0, 0, 0, cfg).total != 10.0)
            return false;
        return r_disc(0.0, cfg) == -cfg.w_disc;
    });

    check("policy forward finite + checkpoint roundtrip", [] {
        PolicyDims dims;
        dims.n_max = 4;
        dims.K = 5;
        dims.d_model = 16;
        dims.heads = 2;
        dims.d_hidden = 16;
        dims.bnn_hidden = 8;
        dims.head_hidden = 8;
        PolicyNet net(dims);
        net.init_weights(7);
        std::string path = "/tmp/crowdnav_selftest_ckpt.bin";
        save_policy(path, net, "run.variant = bnbrl+\n");
        PolicyNet other(dims);
        other.init_weights(8);
        load_policy(other, load_checkpoint(path));
        std::remove(path.c_str());
        for (int i = 0; i < net.store().count(); ++i)
            for (int j = 0; j < net.store()[i].value.size(); ++j)
                if (net.store()[i].value.v[j] != other.store()[i].value.v[j]) return false;
        return true;
    });

    check("metrics oracle on a short orca run", [] {
        RunConfig cfg;
        cfg.episode.n_humans = 4;
        cfg.episode.time_limit = 12.0;
        ScenarioSpec spec{cfg, "orca", 3, 555};
        EvalResult a = run_episodes(spec);
        EvalResult b = run_episodes(spec);
        if (!(a.metrics == b.metrics)) return false;
        // naive recomputation from the logs
        int succ = 0;
        for (const auto& log : a.logs)
            if (log.terminal_event() == EventKind::ReachedGoal) ++succ;
        return succ == a.metrics.successes;
    });

    check("episode log round-trip", [] {
        RunConfig cfg;
        cfg.episode.n_humans = 3;
        cfg.episode.time_limit = 5.0;
        ScenarioSpec spec{cfg, "orca", 1, 42};
        EvalResult r = run_episodes(spec);
        std::ostringstream os;
        write_episode_log(os, r.logs[0]);
        std::istringstream is(os.str());
        EpisodeLog parsed = parse_episode_log(is);
        std::ostringstream os2;
        write_episode_log(os2, parsed);
        return os.str() == os2.str();
    });

    return failures;
}

}  // namespace crowdnav
