#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "crowdnav/sim.hpp"
#include "crowdnav/vec2.hpp"

namespace crowdnav {

/// Alternating sensing schedule: full FoV for on_duration steps, then 0° for
/// off_duration steps. Durations are in time steps and may be fractional; the
/// schedule is evaluated at each sensing instant, so with (3, 0.5) the sensor
/// is blind at any instant whose phase falls in [3.0, 3.5).
struct BlinkSchedule {
    double on_duration = 3.0;
    double off_duration = 0.5;

    double period() const { return on_duration + off_duration; }
};

struct SensorConfig {
    double max_range = 5.0;
    double fov_deg = 270.0;
    bool blink_enabled = false;
    BlinkSchedule blink;
};

/// FoV in degrees at sensing instant t (t in steps, may be fractional).
inline double effective_fov(const SensorConfig& sensor, double t) {
    if (!sensor.blink_enabled) return sensor.fov_deg;
    double period = sensor.blink.period();
    if (period <= 0.0) return sensor.fov_deg;
    double phase = std::fmod(t, period);
    if (phase < 0.0) phase += period;
    return phase < sensor.blink.on_duration ? sensor.fov_deg : 0.0;
}

/// Center-point visibility: the human's center must be within range and inside
/// the closed angular sector around the robot heading.
inline bool is_visible_point(const RobotState& robot, const Vec2& point,
                             const SensorConfig& sensor, double t) {
    double fov = effective_fov(sensor, t);
    if (fov <= 0.0) return false;
    Vec2 rel = point - robot.position;
    if (rel.norm() > sensor.max_range) return false;
    double half = 0.5 * deg_to_rad(fov);
    if (half >= M_PI) return true;  // 360°: every bearing is inside
    double bearing = wrap_angle(std::atan2(rel.y, rel.x) - robot.heading);
    return std::abs(bearing) <= half + 1e-12;  // closed sector
}

inline bool is_visible(const RobotState& robot, const HumanState& human,
                       const SensorConfig& sensor, double t) {
    return is_visible_point(robot, human.position, sensor, t);
}

using VisibilityMask = std::vector<std::uint8_t>;

/// The POMDP observation o_t: the robot's own state (fully known) plus the
/// relative position of every currently visible human. Contains nothing about
/// invisible humans beyond mask = false.
struct ObservationFrame {
    int t = 0;
    RobotState w;                                  // self-state as observed
    std::vector<std::pair<int, Vec2>> visible_humans;  // (id, p_i - p_rob), world axes
    VisibilityMask mask;                           // length = human count
};

inline ObservationFrame observe(const WorldState& world, const SensorConfig& sensor) {
    ObservationFrame frame;
    frame.t = world.time_step;
    frame.w = world.robot;
    frame.mask.assign(world.humans.size(), 0);
    for (std::size_t i = 0; i < world.humans.size(); ++i) {
        const HumanState& h = world.humans[i];
        if (is_visible(world.robot, h, sensor, static_cast<double>(world.time_step))) {
            frame.mask[i] = 1;
            frame.visible_humans.emplace_back(h.id, h.position - world.robot.position);
        }
    }
    return frame;
}

}  // namespace crowdnav
