#pragma once

#include <cstdint>
#include <vector>

#include "crowdnav/belief.hpp"
#include "crowdnav/prediction.hpp"
#include "crowdnav/sensing.hpp"
#include "crowdnav/tensor.hpp"

namespace crowdnav {

/// Everything the policy network sees for one step, recentred on the robot.
/// Rows are indexed by human id for the observation block and by belief slot
/// for the belief block; dead rows are zero-filled and masked out.
struct PolicyInput {
    Tensor humans;                        // n_max x (2 + 2K): [u, hat-u_{t+1..t+K}]
    std::vector<std::uint8_t> mask;       // visibility mask, length n_max
    Tensor robot;                         // 1 x 7: [g - p, v, v_max, heading, radius]
    Tensor beliefs;                       // n_max x (2(K+1) + 1)
    std::vector<std::uint8_t> belief_mask;

    bool any_belief() const {
        for (auto m : belief_mask)
            if (m) return true;
        return false;
    }
};

inline int human_row_width(int K) { return 2 + 2 * K; }
inline int belief_row_width(int K) { return 2 * (K + 1) + 1; }
constexpr int kRobotFeatureWidth = 8;

/// Fixed input normalization: recentred positions are divided by the sensor
/// range scale, velocities by the fastest human, so every network input sits
/// in roughly [-2, 2] and the attention scores stay in their linear regime.
struct FeatureScale {
    double position = 5.0;
    double velocity = 1.5;
    double heading = M_PI;
    double age = 10.0;
};

inline Tensor robot_feature_row(const RobotState& r, const FeatureScale& fs = {}) {
    // goal offset as unit direction + scaled distance, so the homing signal
    // keeps O(1) magnitude all the way to the goal
    Vec2 to_goal = r.goal - r.position;
    Vec2 dir = to_goal.normalized();
    Tensor t(1, kRobotFeatureWidth);
    t.v = {dir.x,
           dir.y,
           to_goal.norm() / fs.position,
           r.velocity.x / fs.velocity,
           r.velocity.y / fs.velocity,
           r.v_max / fs.velocity,
           r.heading / fs.heading,
           r.radius};
    return t;
}

inline PolicyInput build_policy_input(const ObservationFrame& frame,
                                      const PredictionSet& predictions,
                                      const BeliefSet& beliefs, int n_max, int K,
                                      const FeatureScale& fs = {}) {
    PolicyInput in;
    in.humans = Tensor(n_max, human_row_width(K));
    in.mask.assign(n_max, 0);
    in.robot = robot_feature_row(frame.w, fs);

    const Vec2 p_rob = frame.w.position;
    for (const auto& [id, rel] : frame.visible_humans) {
        if (id < 0 || id >= n_max) continue;
        in.mask[id] = 1;
        in.humans.at(id, 0) = rel.x / fs.position;
        in.humans.at(id, 1) = rel.y / fs.position;
        if (id < static_cast<int>(predictions.rows.size())) {
            const PredictionRow& pred = predictions.rows[id];
            for (int k = 0; k < K && k < static_cast<int>(pred.future.size()); ++k) {
                Vec2 u_hat = pred.future[k] - p_rob;
                in.humans.at(id, 2 + 2 * k) = u_hat.x / fs.position;
                in.humans.at(id, 2 + 2 * k + 1) = u_hat.y / fs.position;
            }
        }
    }

    auto [rows, bmask] = belief_features(beliefs, frame.w, n_max, K);
    in.beliefs = Tensor(n_max, belief_row_width(K));
    for (int i = 0; i < n_max; ++i) {
        for (int j = 0; j < belief_row_width(K) - 1; ++j)
            in.beliefs.at(i, j) = rows[i][j] / fs.position;
        in.beliefs.at(i, belief_row_width(K) - 1) =
            rows[i][belief_row_width(K) - 1] / fs.age;
    }
    in.belief_mask = std::move(bmask);
    return in;
}

}  // namespace crowdnav
