#pragma once

#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "crowdnav/orca.hpp"
#include "crowdnav/rng.hpp"
#include "crowdnav/vec2.hpp"

namespace crowdnav {

struct HumanState {
    int id = 0;
    Vec2 position;
    Vec2 velocity;
    double radius = 0.3;           // [0.3, 0.5]
    double preferred_speed = 1.0;  // [0.5, 1.5], fixed per episode
    Vec2 goal;
};

struct RobotState {
    Vec2 position;
    Vec2 velocity;
    Vec2 goal;
    double v_max = 1.0;
    double heading = 0.0;  // radians, (-pi, pi]
    double radius = 0.3;
};

enum class EventKind { Running, ReachedGoal, Collision, Timeout };

inline const char* event_name(EventKind e) {
    switch (e) {
        case EventKind::Running: return "Running";
        case EventKind::ReachedGoal: return "ReachedGoal";
        case EventKind::Collision: return "Collision";
        case EventKind::Timeout: return "Timeout";
    }
    return "?";
}

inline EventKind event_from_name(const std::string& s) {
    if (s == "Running") return EventKind::Running;
    if (s == "ReachedGoal") return EventKind::ReachedGoal;
    if (s == "Collision") return EventKind::Collision;
    if (s == "Timeout") return EventKind::Timeout;
    throw std::runtime_error("unknown event kind: " + s);
}

struct EpisodeConfig {
    int n_humans = 20;
    double arena = 12.0;  // square side length in meters
    double dt = 0.25;
    double time_limit = 30.0;
    double human_goal_resample_prob = 0.01;  // per human per step
    std::uint64_t seed = 0;

    // human population ranges
    double human_radius_min = 0.3;
    double human_radius_max = 0.5;
    double human_speed_min = 0.5;
    double human_speed_max = 1.5;

    // robot
    double robot_v_max = 1.0;
    double robot_radius = 0.3;
    Vec2 robot_start{0.0, -4.5};
    Vec2 robot_goal{0.0, 4.5};
    double start_jitter = 0.25;  // uniform +/- jitter on start and goal

    // ORCA
    double orca_tau = 2.0;
    double orca_neighbor_cutoff = 10.0;
    /// Added to the combined radius when building avoidance constraints, so
    /// that infeasible-moment fallbacks eat margin instead of body.
    double orca_safety_margin = 0.05;

    double arena_half_extent() const { return 0.5 * arena; }
};

/// Ground-truth state. Policy code never reads this directly; it goes through
/// the sensing module.
struct WorldState {
    int time_step = 0;
    double sim_time = 0.0;
    RobotState robot;
    std::vector<HumanState> humans;
    double arena_half_extent = 6.0;
    Rng rng;
};

/// (collided, d_min): minimum surface-to-surface distance between the robot
/// and any human. No humans -> (false, +inf).
inline std::pair<bool, double> check_collision(const RobotState& robot,
                                               const std::vector<HumanState>& humans) {
    double d_min = std::numeric_limits<double>::infinity();
    for (const HumanState& h : humans) {
        double d = distance(robot.position, h.position) - robot.radius - h.radius;
        if (d < d_min) d_min = d;
    }
    return {d_min < 0.0, d_min};
}

namespace detail {

inline Vec2 random_interior_point(Rng& rng, double half_extent, double margin) {
    double lo = -half_extent + margin;
    double hi = half_extent - margin;
    return {rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

}  // namespace detail

/// Spawns the robot and n_humans without initial overlap. Deterministic for a
/// fixed seed. Throws std::runtime_error when placement keeps failing (the
/// arena is too dense for the requested population).
inline WorldState world_init(const EpisodeConfig& config) {
    if (config.dt <= 0.0 || config.time_limit <= 0.0)
        throw std::runtime_error("EpisodeConfig: dt and time_limit must be > 0");
    if (config.human_goal_resample_prob < 0.0 || config.human_goal_resample_prob > 1.0)
        throw std::runtime_error("EpisodeConfig: resample prob must be in [0,1]");

    WorldState w;
    w.arena_half_extent = config.arena_half_extent();
    w.rng = Rng(config.seed);

    double j = config.start_jitter;
    w.robot.position = config.robot_start + Vec2{w.rng.uniform(-j, j), w.rng.uniform(-j, j)};
    w.robot.goal = config.robot_goal + Vec2{w.rng.uniform(-j, j), w.rng.uniform(-j, j)};
    w.robot.velocity = {0.0, 0.0};
    w.robot.v_max = config.robot_v_max;
    w.robot.radius = config.robot_radius;
    Vec2 to_goal = w.robot.goal - w.robot.position;
    w.robot.heading = to_goal.norm() > 0.0 ? std::atan2(to_goal.y, to_goal.x) : 0.0;

    constexpr int kMaxAttempts = 2000;
    w.humans.reserve(config.n_humans);
    for (int i = 0; i < config.n_humans; ++i) {
        HumanState h;
        h.id = i;
        h.radius = w.rng.uniform(config.human_radius_min, config.human_radius_max);
        h.preferred_speed = w.rng.uniform(config.human_speed_min, config.human_speed_max);

        bool placed = false;
        for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
            Vec2 p = detail::random_interior_point(w.rng, w.arena_half_extent, h.radius);
            bool ok = distance(p, w.robot.position) > h.radius + w.robot.radius + 0.1;
            for (const HumanState& other : w.humans) {
                if (!ok) break;
                ok = distance(p, other.position) > h.radius + other.radius + 0.1;
            }
            if (ok) {
                h.position = p;
                placed = true;
                break;
            }
        }
        if (!placed)
            throw std::runtime_error("world_init: could not place human " +
                                     std::to_string(i) + "; arena too dense");

        h.goal = detail::random_interior_point(w.rng, w.arena_half_extent, h.radius);
        h.velocity = {0.0, 0.0};
        w.humans.push_back(h);
    }
    return w;
}

/// One simulator tick. The robot is holonomic: velocity equals the (clamped)
/// action for the whole step. Humans run ORCA against each other only; per the
/// scenario definition they never react to the robot.
inline std::pair<WorldState, EventKind> step_world(const WorldState& world,
                                                   Vec2 robot_action,
                                                   const EpisodeConfig& config) {
    WorldState w = world;

    robot_action = clamp_norm(robot_action, w.robot.v_max);
    w.robot.position += robot_action * config.dt;
    w.robot.velocity = robot_action;
    if (robot_action.norm() > 1e-6)
        w.robot.heading = std::atan2(robot_action.y, robot_action.x);
    // heading keeps its last value when the robot stops

    // arena walls stop the robot like any other agent
    double rlim = w.arena_half_extent - w.robot.radius;
    w.robot.position.x = std::min(std::max(w.robot.position.x, -rlim), rlim);
    w.robot.position.y = std::min(std::max(w.robot.position.y, -rlim), rlim);

    // Simultaneous human update: all ORCA velocities from the pre-step state.
    std::vector<Vec2> new_vels(w.humans.size());
    for (std::size_t i = 0; i < w.humans.size(); ++i) {
        const HumanState& h = world.humans[i];
        std::vector<OrcaAgentView> neighbors;
        neighbors.reserve(world.humans.size());
        for (std::size_t k = 0; k < world.humans.size(); ++k) {
            if (k == i) continue;
            const HumanState& o = world.humans[k];
            if (distance(h.position, o.position) > config.orca_neighbor_cutoff) continue;
            neighbors.push_back({o.position, o.velocity, o.radius + config.orca_safety_margin});
        }
        Vec2 pref = orca_preferred_velocity(h.position, h.goal, h.preferred_speed, config.dt);
        OrcaAgentView self{h.position, h.velocity, h.radius};
        std::vector<OrcaLine> walls =
            arena_wall_lines(h.position, h.radius, w.arena_half_extent, config.dt);
        new_vels[i] = orca_velocity(self, pref, h.preferred_speed, neighbors,
                                    config.dt, config.orca_tau, walls);
    }
    for (std::size_t i = 0; i < w.humans.size(); ++i) {
        HumanState& h = w.humans[i];
        h.velocity = new_vels[i];
        h.position += h.velocity * config.dt;

        if (distance(h.position, h.goal) < 0.05)
            h.goal = detail::random_interior_point(w.rng, w.arena_half_extent, h.radius);
        if (w.rng.bernoulli(config.human_goal_resample_prob))
            h.goal = detail::random_interior_point(w.rng, w.arena_half_extent, h.radius);

        // Keep density constant: clamp anyone drifting out and send them back in.
        double lim = w.arena_half_extent - h.radius;
        if (h.position.x < -lim || h.position.x > lim || h.position.y < -lim ||
            h.position.y > lim) {
            h.position.x = std::min(std::max(h.position.x, -lim), lim);
            h.position.y = std::min(std::max(h.position.y, -lim), lim);
            h.goal = detail::random_interior_point(w.rng, w.arena_half_extent, h.radius);
        }
    }

    w.time_step += 1;
    w.sim_time += config.dt;

    auto [collided, d_min] = check_collision(w.robot, w.humans);
    (void)d_min;
    EventKind event = EventKind::Running;
    if (collided) {
        event = EventKind::Collision;  // takes precedence over goal
    } else if (distance(w.robot.position, w.robot.goal) < w.robot.radius) {
        event = EventKind::ReachedGoal;
    } else if (w.sim_time >= config.time_limit) {
        event = EventKind::Timeout;
    }
    return {std::move(w), event};
}

}  // namespace crowdnav
