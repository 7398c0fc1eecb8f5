#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "crowdnav/prediction.hpp"
#include "crowdnav/sensing.hpp"

namespace crowdnav {

struct BeliefConfig {
    /// "Out of range" drop rule: belief farther than this factor times the
    /// sensor range from the robot, or outside the arena.
    double drop_range_factor = 1.5;
    /// Tracks older than this are dropped; unbounded extrapolation diverges.
    int max_age = 20;
};

/// Predicted trajectory for one human who left the FoV. trajectory[0] is the
/// believed position at the current step, trajectory[1..K] the predicted
/// continuation. All positions are world coordinates.
struct BeliefTrack {
    int human_id = -1;
    int age = 0;                    // steps since last direct observation, >= 1
    std::vector<Vec2> trajectory;   // K+1 positions
    TrackRow history;               // past believed positions (mask N), newest = current
};

struct BeliefSet {
    std::vector<BeliefTrack> tracks;  // unique human_id, sorted ascending

    const BeliefTrack* find(int human_id) const {
        for (const auto& t : tracks)
            if (t.human_id == human_id) return &t;
        return nullptr;
    }
    bool empty() const { return tracks.empty(); }
    std::size_t size() const { return tracks.size(); }
};

namespace detail {

inline bool belief_in_drop_envelope(const Vec2& pos, const RobotState& robot,
                                    const SensorConfig& sensor, double arena_half_extent,
                                    const BeliefConfig& cfg) {
    if (distance(pos, robot.position) > cfg.drop_range_factor * sensor.max_range)
        return true;
    return std::abs(pos.x) > arena_half_extent || std::abs(pos.y) > arena_half_extent;
}

/// Re-predicts a track's future from its believed-position history and renews
/// the stored trajectory. history must already contain trajectory[0].
inline void belief_repredict(BeliefTrack& track, const TrajectoryPredictor& predictor,
                             double dt) {
    PredictionRow row = predictor.predict_row(track.history, dt);
    const Vec2 current = track.trajectory.front();
    track.trajectory.assign(1, current);
    if (row.valid) {
        for (const Vec2& p : row.future) track.trajectory.push_back(p);
    } else {
        for (int k = 0; k < predictor.horizon(); ++k) track.trajectory.push_back(current);
    }
}

}  // namespace detail

/// One step of the belief algorithm:
///   (a) a fresh episode starts with no beliefs;
///   (b) humans that just left the FoV seed a track from their latest
///       predicted trajectory (zero-velocity when only one point was seen);
///   (c) tracks whose believed position re-enters the FoV, leaves the range
///       envelope, coincides with a re-observed human, or outlives max_age
///       are dropped;
///   (d) survivors advance one step along their trajectory and re-predict the
///       remainder from their believed-position history.
inline BeliefSet belief_update(const BeliefSet& beliefs, const ObservationFrame& frame,
                               const PredictionSet& predictions, const RobotState& robot,
                               const SensorConfig& sensor, double arena_half_extent,
                               bool episode_start, const TrajectoryPredictor& predictor,
                               double dt, const BeliefConfig& cfg = {},
                               int history_length = 5) {
    BeliefSet out;
    if (episode_start) return out;

    const double t = static_cast<double>(frame.t);
    const int K = predictions.horizon;

    auto droppable = [&](const Vec2& pos, int id, int age) {
        if (id >= 0 && id < static_cast<int>(frame.mask.size()) && frame.mask[id])
            return true;  // human re-observed: the mask owns this id now
        if (is_visible_point(robot, pos, sensor, t)) return true;
        if (detail::belief_in_drop_envelope(pos, robot, sensor, arena_half_extent, cfg))
            return true;
        return age > cfg.max_age;
    };

    // (d) then (c): advance existing tracks to the current step, drop the ones
    // that hit a reset condition, re-predict the survivors.
    for (const BeliefTrack& old_track : beliefs.tracks) {
        BeliefTrack track = old_track;
        track.age += 1;
        if (track.trajectory.size() > 1)
            track.trajectory.erase(track.trajectory.begin());
        if (droppable(track.trajectory.front(), track.human_id, track.age)) continue;
        track.history.push({track.trajectory.front(), true});
        detail::belief_repredict(track, predictor, dt);
        out.tracks.push_back(std::move(track));
    }

    // (b) seed tracks for humans visible at t-1 and invisible now.
    for (std::size_t id = 0; id < frame.mask.size(); ++id) {
        if (frame.mask[id]) continue;
        if (id >= predictions.rows.size()) continue;
        const PredictionRow& pred = predictions.rows[id];
        if (!pred.valid || pred.steps_since_seen != 1) continue;
        if (out.find(static_cast<int>(id)) != nullptr) continue;

        BeliefTrack track;
        track.human_id = static_cast<int>(id);
        track.age = 1;
        track.trajectory.reserve(K + 1);
        for (int k = 1; k <= K; ++k)
            track.trajectory.push_back(pred.anchor + static_cast<double>(k) * dt * pred.velocity);
        track.trajectory.push_back(pred.anchor +
                                   static_cast<double>(K + 1) * dt * pred.velocity);
        if (droppable(track.trajectory.front(), track.human_id, track.age)) continue;
        track.history = TrackRow(history_length);
        track.history.push({track.trajectory.front(), true});
        out.tracks.push_back(std::move(track));
    }

    std::sort(out.tracks.begin(), out.tracks.end(),
              [](const BeliefTrack& a, const BeliefTrack& b) { return a.human_id < b.human_id; });
    return out;
}

/// Fixed-shape policy input: n_max rows of [trajectory recentred on the robot,
/// age], plus the belief mask. When there are more tracks than rows, the most
/// recently lost (lowest age) are kept.
inline std::pair<std::vector<std::vector<double>>, std::vector<std::uint8_t>>
belief_features(const BeliefSet& beliefs, const RobotState& robot, int n_max, int K) {
    const int row_width = 2 * (K + 1) + 1;
    std::vector<std::vector<double>> rows(n_max, std::vector<double>(row_width, 0.0));
    std::vector<std::uint8_t> mask(n_max, 0);

    std::vector<const BeliefTrack*> selected;
    selected.reserve(beliefs.tracks.size());
    for (const auto& t : beliefs.tracks) selected.push_back(&t);
    if (static_cast<int>(selected.size()) > n_max) {
        std::sort(selected.begin(), selected.end(),
                  [](const BeliefTrack* a, const BeliefTrack* b) {
                      if (a->age != b->age) return a->age < b->age;
                      return a->human_id < b->human_id;
                  });
        selected.resize(n_max);
        std::sort(selected.begin(), selected.end(),
                  [](const BeliefTrack* a, const BeliefTrack* b) {
                      return a->human_id < b->human_id;
                  });
    }

    for (std::size_t i = 0; i < selected.size(); ++i) {
        const BeliefTrack& t = *selected[i];
        std::vector<double>& row = rows[i];
        for (int k = 0; k <= K; ++k) {
            Vec2 p = (k < static_cast<int>(t.trajectory.size()) ? t.trajectory[k]
                                                                : t.trajectory.back()) -
                     robot.position;
            row[2 * k] = p.x;
            row[2 * k + 1] = p.y;
        }
        row[row_width - 1] = static_cast<double>(t.age);
        mask[i] = 1;
    }
    return {std::move(rows), std::move(mask)};
}

/// Invariant checker used by tests and debug stepping; throws on violation.
inline void belief_validate(const BeliefSet& beliefs, const ObservationFrame& frame,
                            const RobotState& robot, const SensorConfig& sensor,
                            double arena_half_extent, const BeliefConfig& cfg = {}) {
    int prev_id = -1;
    for (const BeliefTrack& t : beliefs.tracks) {
        if (t.human_id <= prev_id)
            throw std::runtime_error("belief_validate: ids not strictly increasing");
        prev_id = t.human_id;
        if (t.age < 1) throw std::runtime_error("belief_validate: age < 1");
        if (t.human_id < static_cast<int>(frame.mask.size()) && frame.mask[t.human_id])
            throw std::runtime_error(
                "belief_validate: track coexists with a visible human (id " +
                std::to_string(t.human_id) + ")");
        for (const Vec2& p : t.trajectory)
            if (!p.finite()) throw std::runtime_error("belief_validate: non-finite position");
        const Vec2& current = t.trajectory.front();
        if (is_visible_point(robot, current, sensor, static_cast<double>(frame.t)))
            throw std::runtime_error("belief_validate: believed position inside the FoV");
        if (detail::belief_in_drop_envelope(current, robot, sensor, arena_half_extent, cfg))
            throw std::runtime_error("belief_validate: believed position out of range");
    }
}

}  // namespace crowdnav
