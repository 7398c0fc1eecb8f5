#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "crowdnav/logfmt.hpp"

namespace crowdnav {

/// SR: fraction of episodes reaching the goal.
/// NT: mean terminal time over successful episodes (absent when none succeed).
/// PL: mean robot path length over all episodes.
/// ITR: fraction of all steps with a danger-zone intrusion (d_min < 0.5 m).
struct Metrics {
    int n_episodes = 0;
    int successes = 0;
    int collisions = 0;
    int timeouts = 0;
    double sr = 0.0;
    bool nt_defined = false;
    double nt = 0.0;
    double pl = 0.0;
    double itr = 0.0;

    bool operator==(const Metrics& o) const {
        return n_episodes == o.n_episodes && successes == o.successes &&
               collisions == o.collisions && timeouts == o.timeouts && sr == o.sr &&
               nt_defined == o.nt_defined && nt == o.nt && pl == o.pl && itr == o.itr;
    }
};

inline Metrics compute_metrics(const std::vector<EpisodeLog>& logs,
                               double danger_radius = 0.5) {
    Metrics m;
    m.n_episodes = static_cast<int>(logs.size());
    double nt_sum = 0.0, pl_sum = 0.0;
    long long intrusion_steps = 0, total_steps = 0;
    for (const EpisodeLog& log : logs) {
        switch (log.terminal_event()) {
            case EventKind::ReachedGoal:
                ++m.successes;
                nt_sum += log.terminal_time();
                break;
            case EventKind::Collision:
                ++m.collisions;
                break;
            case EventKind::Timeout:
                ++m.timeouts;
                break;
            case EventKind::Running:
                break;
        }
        pl_sum += log.path_length();
        for (const LogStep& s : log.steps) {
            ++total_steps;
            if (s.d_min < danger_radius) ++intrusion_steps;
        }
    }
    if (m.n_episodes > 0) {
        m.sr = static_cast<double>(m.successes) / m.n_episodes;
        m.pl = pl_sum / m.n_episodes;
    }
    if (m.successes > 0) {
        m.nt_defined = true;
        m.nt = nt_sum / m.successes;
    }
    if (total_steps > 0)
        m.itr = static_cast<double>(intrusion_steps) / static_cast<double>(total_steps);
    return m;
}

/// Fixed-header CSV row; NT is left empty when no episode succeeded.
inline std::string metrics_csv(const Metrics& m) {
    char buf[160];
    if (m.nt_defined)
        std::snprintf(buf, sizeof(buf), "SR,NT,PL,ITR\n%.6g,%.6g,%.6g,%.6g\n", m.sr, m.nt,
                      m.pl, m.itr);
    else
        std::snprintf(buf, sizeof(buf), "SR,NT,PL,ITR\n%.6g,,%.6g,%.6g\n", m.sr, m.pl, m.itr);
    return buf;
}

inline std::string metrics_oneline(const Metrics& m) {
    char buf[200];
    char nt[32];
    if (m.nt_defined)
        std::snprintf(nt, sizeof(nt), "%.2f", m.nt);
    else
        std::snprintf(nt, sizeof(nt), "n/a");
    std::snprintf(buf, sizeof(buf),
                  "SR %.3f  NT %s  PL %.2f  ITR %.4f  (%d eps: %d goal / %d col / %d timeout)",
                  m.sr, nt, m.pl, m.itr, m.n_episodes, m.successes, m.collisions, m.timeouts);
    return buf;
}

}  // namespace crowdnav
