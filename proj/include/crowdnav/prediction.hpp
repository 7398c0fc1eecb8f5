#pragma once

#include <cstdint>
#include <vector>

#include "crowdnav/sensing.hpp"
#include "crowdnav/vec2.hpp"

namespace crowdnav {

struct TrackEntry {
    Vec2 position;   // world coordinates; meaningful only when seen
    bool seen = false;
};

/// Fixed-length window of the last L steps for one agent, oldest first.
class TrackRow {
public:
    TrackRow() = default;
    explicit TrackRow(int length) : entries_(length) {}

    void push(const TrackEntry& e) {
        if (entries_.empty()) return;
        for (std::size_t i = 0; i + 1 < entries_.size(); ++i) entries_[i] = entries_[i + 1];
        entries_.back() = e;
    }

    void set_newest(const TrackEntry& e) {
        if (!entries_.empty()) entries_.back() = e;
    }

    int length() const { return static_cast<int>(entries_.size()); }
    const TrackEntry& at(int i) const { return entries_[i]; }  // 0 = oldest
    const std::vector<TrackEntry>& entries() const { return entries_; }

private:
    std::vector<TrackEntry> entries_;
};

/// Per-human observation history over the last L steps. Positions are stored
/// in world coordinates (recovered from the relative observation plus the
/// robot's own, fully known, position).
class TrackHistory {
public:
    TrackHistory() = default;
    TrackHistory(int n_agents, int length)
        : rows_(n_agents, TrackRow(length)), length_(length) {}

    void push_frame(const ObservationFrame& frame) {
        for (auto& row : rows_) row.push({Vec2{}, false});
        for (const auto& [id, rel] : frame.visible_humans) {
            if (id < 0 || id >= static_cast<int>(rows_.size())) continue;
            rows_[id].set_newest({frame.w.position + rel, true});
        }
    }

    int n_agents() const { return static_cast<int>(rows_.size()); }
    int length() const { return length_; }
    const TrackRow& row(int id) const { return rows_[id]; }

private:
    std::vector<TrackRow> rows_;
    int length_ = 0;
};

struct PredictionRow {
    bool valid = false;
    int steps_since_seen = -1;  // 0 when seen at the current step
    Vec2 anchor;                // last observed position (world)
    Vec2 velocity;              // estimated velocity (world)
    std::vector<Vec2> future;   // K positions, future[k-1] = anchor + k*dt*velocity
};

struct PredictionSet {
    int horizon = 0;  // K
    std::vector<PredictionRow> rows;
};

/// Trajectory predictor interface (future positions from a masked position
/// history). The learned predictor is swappable; everything downstream depends
/// only on this surface.
class TrajectoryPredictor {
public:
    virtual ~TrajectoryPredictor() = default;
    virtual int horizon() const = 0;
    virtual PredictionRow predict_row(const TrackRow& row, double dt) const = 0;

    PredictionSet predict(const TrackHistory& history, double dt) const {
        PredictionSet out;
        out.horizon = horizon();
        out.rows.reserve(history.n_agents());
        for (int i = 0; i < history.n_agents(); ++i)
            out.rows.push_back(predict_row(history.row(i), dt));
        return out;
    }
};

/// Default predictor: constant velocity from the last two observed points,
/// divided by their actual step gap. A single observed point extrapolates with
/// zero velocity; a never-observed agent yields an invalid row.
class ConstantVelocityPredictor final : public TrajectoryPredictor {
public:
    explicit ConstantVelocityPredictor(int k) : k_(k) {}

    int horizon() const override { return k_; }

    PredictionRow predict_row(const TrackRow& row, double dt) const override {
        PredictionRow out;
        int last = -1, prev = -1;
        for (int i = row.length() - 1; i >= 0; --i) {
            if (!row.at(i).seen) continue;
            if (last < 0) {
                last = i;
            } else {
                prev = i;
                break;
            }
        }
        if (last < 0) return out;  // never observed

        out.valid = true;
        out.steps_since_seen = row.length() - 1 - last;
        out.anchor = row.at(last).position;
        if (prev >= 0) {
            double gap = static_cast<double>(last - prev);
            out.velocity = (row.at(last).position - row.at(prev).position) / (gap * dt);
        } else {
            out.velocity = {0.0, 0.0};
        }
        out.future.reserve(k_);
        for (int k = 1; k <= k_; ++k)
            out.future.push_back(out.anchor + static_cast<double>(k) * dt * out.velocity);
        return out;
    }

private:
    int k_;
};

inline void update_history(TrackHistory& history, const ObservationFrame& frame) {
    history.push_frame(frame);
}

}  // namespace crowdnav
