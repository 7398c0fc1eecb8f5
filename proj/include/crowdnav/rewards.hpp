#pragma once

#include <cmath>
#include <vector>

#include "crowdnav/belief.hpp"
#include "crowdnav/prediction.hpp"
#include "crowdnav/sim.hpp"

namespace crowdnav {

struct RewardConfig {
    double r_goal = 10.0;
    double r_col = -10.0;
    double w_disc = 0.25;
    double sigma_disc = 0.2;
    double danger_radius = 0.5;
    double gamma_bel = 0.9;
    double pot_coeff = 1.5;
    int K = 5;
};

struct RewardBreakdown {
    double goal = 0.0;
    double col = 0.0;
    double disc = 0.0;
    double pred = 0.0;
    double bel = 0.0;
    double pot = 0.0;
    double total = 0.0;
};

/// Gaussian-shaped proximity penalty (peak -w_disc at contact), active only
/// inside the danger zone.
inline double r_disc(double d_min, const RewardConfig& cfg) {
    if (!(d_min < cfg.danger_radius)) return 0.0;
    return -cfg.w_disc * std::exp(-(d_min * d_min) / (2.0 * cfg.sigma_disc * cfg.sigma_disc));
}

/// Penalty for standing on a predicted future position: per human the most
/// negative 1 * r_col / 2^k over the horizon, then the most negative human.
/// Zero when no indicator fires.
inline double r_pred(const RobotState& robot, const PredictionSet& predictions,
                     const std::vector<double>& human_radii, const RewardConfig& cfg) {
    double worst = 0.0;
    for (std::size_t i = 0; i < predictions.rows.size(); ++i) {
        const PredictionRow& row = predictions.rows[i];
        if (!row.valid) continue;
        double radius = i < human_radii.size() ? human_radii[i] : 0.0;
        double human_worst = 0.0;
        for (int k = 1; k <= predictions.horizon && k <= static_cast<int>(row.future.size());
             ++k) {
            if (distance(robot.position, row.future[k - 1]) < robot.radius + radius) {
                double term = cfg.r_col / std::pow(2.0, k);
                if (term < human_worst) human_worst = term;
            }
        }
        if (human_worst < worst) worst = human_worst;
    }
    return worst;
}

/// Same structure over believed trajectories, each human's term additionally
/// discounted by gamma_bel^age (age = tracked steps of that belief).
inline double r_bel(const RobotState& robot, const BeliefSet& beliefs,
                    const std::vector<double>& human_radii, const RewardConfig& cfg) {
    double worst = 0.0;
    for (const BeliefTrack& track : beliefs.tracks) {
        double radius = track.human_id >= 0 &&
                                track.human_id < static_cast<int>(human_radii.size())
                            ? human_radii[track.human_id]
                            : 0.0;
        double human_worst = 0.0;
        int limit = std::min(cfg.K, static_cast<int>(track.trajectory.size()) - 1);
        for (int k = 1; k <= limit; ++k) {
            if (distance(robot.position, track.trajectory[k]) < robot.radius + radius) {
                double term = cfg.r_col / std::pow(2.0, k) * std::pow(cfg.gamma_bel, track.age);
                if (term < human_worst) human_worst = term;
            }
        }
        if (human_worst < worst) worst = human_worst;
    }
    return worst;
}

/// Potential shaping on goal distance.
inline double r_pot(double d_goal_now, double d_goal_prev, const RewardConfig& cfg) {
    return cfg.pot_coeff * (-d_goal_now + d_goal_prev);
}

/// Case selection: goal and collision are terminal rewards, the danger zone
/// pays only the proximity penalty, everything else sums the shaping terms.
/// A timeout pays 0. All components are recorded for logging regardless of
/// which case fired.
inline RewardBreakdown total_reward(EventKind event, double d_min, double disc, double pred,
                                    double bel, double pot, const RewardConfig& cfg) {
    RewardBreakdown r;
    r.goal = event == EventKind::ReachedGoal ? cfg.r_goal : 0.0;
    r.col = event == EventKind::Collision ? cfg.r_col : 0.0;
    r.disc = disc;
    r.pred = pred;
    r.bel = bel;
    r.pot = pot;
    if (event == EventKind::ReachedGoal) {
        r.total = cfg.r_goal;
    } else if (event == EventKind::Collision) {
        r.total = cfg.r_col;
    } else if (event == EventKind::Timeout) {
        r.total = 0.0;
    } else if (d_min < cfg.danger_radius) {
        r.total = disc;
    } else {
        r.total = pred + bel + pot;
    }
    return r;
}

}  // namespace crowdnav
