#pragma once

#include <memory>
#include <utility>

#include "crowdnav/belief.hpp"
#include "crowdnav/features.hpp"
#include "crowdnav/prediction.hpp"
#include "crowdnav/rewards.hpp"
#include "crowdnav/sensing.hpp"
#include "crowdnav/sim.hpp"

namespace crowdnav {

/// Full per-step pipeline state for one navigation environment:
/// observe -> history -> predict -> belief -> (policy acts) -> step -> reward.
/// Self-contained value-ish object; independent instances never share state.
class NavEnv {
public:
    struct StepOutcome {
        EventKind event = EventKind::Running;
        RewardBreakdown reward;
        double d_min = 0.0;
        bool done = false;
    };

    NavEnv(EpisodeConfig episode, SensorConfig sensor, RewardConfig reward,
           BeliefConfig belief_cfg, int history_length, int horizon)
        : episode_(episode),
          sensor_(sensor),
          reward_(reward),
          belief_cfg_(belief_cfg),
          history_length_(history_length),
          predictor_(std::make_shared<ConstantVelocityPredictor>(horizon)) {
        reward_.K = horizon;
    }

    void set_predictor(std::shared_ptr<TrajectoryPredictor> p) { predictor_ = std::move(p); }
    void set_validate(bool v) { validate_ = v; }

    const EpisodeConfig& episode_config() const { return episode_; }
    const SensorConfig& sensor_config() const { return sensor_; }
    const WorldState& world() const { return world_; }
    const BeliefSet& beliefs() const { return beliefs_; }
    const PredictionSet& predictions() const { return predictions_; }
    const ObservationFrame& frame() const { return frame_; }
    const TrajectoryPredictor& predictor() const { return *predictor_; }

    void reset(std::uint64_t seed) {
        EpisodeConfig cfg = episode_;
        cfg.seed = seed;
        world_ = world_init(cfg);
        history_ = TrackHistory(cfg.n_humans, history_length_);
        beliefs_ = BeliefSet{};
        episode_start_ = true;
        prev_goal_dist_ = distance(world_.robot.position, world_.robot.goal);
        observed_ = false;
    }

    /// Observation phase: advances sensing, history, prediction and belief
    /// bookkeeping, and returns the policy input. Call once per step.
    PolicyInput observe_phase() {
        frame_ = observe(world_, sensor_);
        update_history(history_, frame_);
        predictions_ = predictor_->predict(history_, episode_.dt);
        beliefs_ = belief_update(beliefs_, frame_, predictions_, world_.robot, sensor_,
                                 world_.arena_half_extent, episode_start_, *predictor_,
                                 episode_.dt, belief_cfg_, history_length_);
        if (validate_)
            belief_validate(beliefs_, frame_, world_.robot, sensor_,
                            world_.arena_half_extent, belief_cfg_);
        episode_start_ = false;
        observed_ = true;
        return build_policy_input(frame_, predictions_, beliefs_, episode_.n_humans,
                                  predictor_->horizon());
    }

    /// Action phase: steps the world and scores the transition against the
    /// predictions and beliefs computed in the preceding observe_phase().
    StepOutcome apply(const Vec2& action) {
        auto [next, event] = step_world(world_, action, episode_);
        auto [collided, d_min] = check_collision(next.robot, next.humans);
        (void)collided;

        std::vector<double> radii;
        radii.reserve(next.humans.size());
        for (const auto& h : next.humans) radii.push_back(h.radius);

        double goal_dist = distance(next.robot.position, next.robot.goal);
        double disc = r_disc(d_min, reward_);
        double pred = observed_ ? r_pred(next.robot, predictions_, radii, reward_) : 0.0;
        double bel = observed_ ? r_bel(next.robot, beliefs_, radii, reward_) : 0.0;
        double pot = r_pot(goal_dist, prev_goal_dist_, reward_);

        StepOutcome out;
        out.event = event;
        out.d_min = d_min;
        out.reward = total_reward(event, d_min, disc, pred, bel, pot, reward_);
        out.done = event != EventKind::Running;

        world_ = std::move(next);
        prev_goal_dist_ = goal_dist;
        return out;
    }

private:
    EpisodeConfig episode_;
    SensorConfig sensor_;
    RewardConfig reward_;
    BeliefConfig belief_cfg_;
    int history_length_;
    std::shared_ptr<TrajectoryPredictor> predictor_;

    WorldState world_;
    TrackHistory history_;
    BeliefSet beliefs_;
    PredictionSet predictions_;
    ObservationFrame frame_;
    bool episode_start_ = true;
    bool observed_ = false;
    double prev_goal_dist_ = 0.0;
    bool validate_ = false;
};

}  // namespace crowdnav
