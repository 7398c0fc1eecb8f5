#pragma once

#include <cstddef>
#include <vector>

#include "crowdnav/vec2.hpp"

namespace crowdnav {

/// Minimal view of a neighboring agent for collision avoidance.
struct OrcaAgentView {
    Vec2 position;
    Vec2 velocity;
    double radius = 0.0;
};

/// Directed line; the feasible half-plane is to the LEFT of direction, i.e.
/// velocities v with direction.det(point - v) <= 0.
struct OrcaLine {
    Vec2 point;
    Vec2 direction;
};

inline bool orca_satisfies(const OrcaLine& line, const Vec2& v, double tol = 0.0) {
    return line.direction.det(line.point - v) <= tol;
}

/// Preferred velocity towards the goal: full preferred speed far away,
/// distance/dt cap close in so the agent does not overshoot.
inline Vec2 orca_preferred_velocity(const Vec2& position, const Vec2& goal,
                                    double preferred_speed, double dt) {
    Vec2 to_goal = goal - position;
    double dist = to_goal.norm();
    if (dist <= 0.0) return {0.0, 0.0};
    double speed = std::min(preferred_speed, dist / dt);
    return to_goal * (speed / dist);
}

/// Builds one reciprocal half-plane constraint per neighbor from the
/// velocity-obstacle geometry. Each agent takes half the avoidance effort.
inline std::vector<OrcaLine> orca_build_lines(const OrcaAgentView& self,
                                              const std::vector<OrcaAgentView>& neighbors,
                                              double dt, double tau) {
    std::vector<OrcaLine> lines;
    lines.reserve(neighbors.size());
    const double inv_tau = 1.0 / tau;

    for (const OrcaAgentView& other : neighbors) {
        const Vec2 rel_pos = other.position - self.position;
        const Vec2 rel_vel = self.velocity - other.velocity;
        const double dist_sq = rel_pos.norm_sq();
        const double combined_r = self.radius + other.radius;
        const double combined_r_sq = combined_r * combined_r;

        OrcaLine line;
        Vec2 u;

        if (dist_sq > combined_r_sq) {
            // Not yet colliding: constrain against the truncated velocity cone.
            const Vec2 w = rel_vel - inv_tau * rel_pos;
            const double w_len_sq = w.norm_sq();
            const double dot1 = w.dot(rel_pos);

            if (dot1 < 0.0 && dot1 * dot1 > combined_r_sq * w_len_sq) {
                // Project on the cut-off circle.
                const double w_len = std::sqrt(w_len_sq);
                const Vec2 unit_w = w_len > 0.0 ? w / w_len : Vec2{1.0, 0.0};
                line.direction = Vec2{unit_w.y, -unit_w.x};
                u = (combined_r * inv_tau - w_len) * unit_w;
            } else {
                // Project on the nearer leg of the cone.
                const double leg = std::sqrt(dist_sq - combined_r_sq);
                if (rel_pos.det(w) > 0.0) {
                    line.direction = Vec2{rel_pos.x * leg - rel_pos.y * combined_r,
                                          rel_pos.x * combined_r + rel_pos.y * leg} /
                                     dist_sq;
                } else {
                    line.direction = -Vec2{rel_pos.x * leg + rel_pos.y * combined_r,
                                           -rel_pos.x * combined_r + rel_pos.y * leg} /
                                     dist_sq;
                }
                const double dot2 = rel_vel.dot(line.direction);
                u = dot2 * line.direction - rel_vel;
            }
        } else {
            // Already overlapping: push apart within one time step.
            const double inv_dt = 1.0 / dt;
            const Vec2 w = rel_vel - inv_dt * rel_pos;
            const double w_len = w.norm();
            const Vec2 unit_w = w_len > 0.0 ? w / w_len : Vec2{1.0, 0.0};
            line.direction = Vec2{unit_w.y, -unit_w.x};
            u = (combined_r * inv_dt - w_len) * unit_w;
        }

        line.point = self.velocity + 0.5 * u;
        lines.push_back(line);
    }
    return lines;
}

namespace detail {

constexpr double kOrcaEps = 1e-10;

/// Optimizes along line line_no within the speed disc, subject to lines[0..line_no).
/// Returns false when infeasible.
inline bool linear_program1(const std::vector<OrcaLine>& lines, std::size_t line_no,
                            double radius, const Vec2& opt_velocity, bool direction_opt,
                            Vec2& result) {
    const double dot_product = lines[line_no].point.dot(lines[line_no].direction);
    const double discriminant =
        dot_product * dot_product + radius * radius - lines[line_no].point.norm_sq();

    if (discriminant < 0.0) return false;  // line misses the speed disc

    const double sqrt_disc = std::sqrt(discriminant);
    double t_left = -dot_product - sqrt_disc;
    double t_right = -dot_product + sqrt_disc;

    for (std::size_t i = 0; i < line_no; ++i) {
        const double denominator = lines[line_no].direction.det(lines[i].direction);
        const double numerator =
            lines[i].direction.det(lines[line_no].point - lines[i].point);

        if (std::abs(denominator) <= kOrcaEps) {
            if (numerator < 0.0) return false;  // parallel and fully excluded
            continue;
        }

        const double t = numerator / denominator;
        if (denominator >= 0.0) {
            t_right = std::min(t_right, t);
        } else {
            t_left = std::max(t_left, t);
        }
        if (t_left > t_right) return false;
    }

    if (direction_opt) {
        if (opt_velocity.dot(lines[line_no].direction) > 0.0) {
            result = lines[line_no].point + t_right * lines[line_no].direction;
        } else {
            result = lines[line_no].point + t_left * lines[line_no].direction;
        }
    } else {
        const double t =
            lines[line_no].direction.dot(opt_velocity - lines[line_no].point);
        if (t < t_left) {
            result = lines[line_no].point + t_left * lines[line_no].direction;
        } else if (t > t_right) {
            result = lines[line_no].point + t_right * lines[line_no].direction;
        } else {
            result = lines[line_no].point + t * lines[line_no].direction;
        }
    }
    return true;
}

/// Sequentially satisfies every half-plane, re-optimizing on the boundary of
/// each violated one. Returns lines.size() on success, else the failing index.
inline std::size_t linear_program2(const std::vector<OrcaLine>& lines, double radius,
                                   const Vec2& opt_velocity, bool direction_opt,
                                   Vec2& result) {
    if (direction_opt) {
        result = opt_velocity * radius;  // opt_velocity is a unit direction here
    } else if (opt_velocity.norm_sq() > radius * radius) {
        result = opt_velocity.normalized() * radius;
    } else {
        result = opt_velocity;
    }

    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].direction.det(lines[i].point - result) > 0.0) {
            const Vec2 temp = result;
            if (!linear_program1(lines, i, radius, opt_velocity, direction_opt, result)) {
                result = temp;
                return i;
            }
        }
    }
    return lines.size();
}

/// Infeasible fallback: minimizes the maximum penetration over the agent
/// half-planes starting from the first failing one. The first num_fixed lines
/// (hard constraints such as arena walls) are never relaxed.
inline void linear_program3(const std::vector<OrcaLine>& lines, std::size_t num_fixed,
                            std::size_t begin_line, double radius, Vec2& result) {
    double distance = 0.0;

    for (std::size_t i = begin_line; i < lines.size(); ++i) {
        if (lines[i].direction.det(lines[i].point - result) > distance) {
            std::vector<OrcaLine> proj_lines(lines.begin(),
                                             lines.begin() + static_cast<long>(num_fixed));
            proj_lines.reserve(i);
            for (std::size_t j = num_fixed; j < i; ++j) {
                OrcaLine line;
                const double determinant = lines[i].direction.det(lines[j].direction);
                if (std::abs(determinant) <= kOrcaEps) {
                    if (lines[i].direction.dot(lines[j].direction) > 0.0) {
                        continue;  // same direction, redundant
                    }
                    line.point = 0.5 * (lines[i].point + lines[j].point);
                } else {
                    line.point =
                        lines[i].point +
                        (lines[j].direction.det(lines[i].point - lines[j].point) /
                         determinant) *
                            lines[i].direction;
                }
                line.direction = (lines[j].direction - lines[i].direction).normalized();
                proj_lines.push_back(line);
            }

            const Vec2 temp = result;
            if (linear_program2(proj_lines, radius,
                                Vec2{-lines[i].direction.y, lines[i].direction.x},
                                true, result) < proj_lines.size()) {
                result = temp;  // keep previous result on numerical failure
            }
            distance = lines[i].direction.det(lines[i].point - result);
        }
    }
}

}  // namespace detail

struct OrcaResult {
    Vec2 velocity;
    bool feasible = true;  // false when the 3D fallback program was needed
};

/// New velocity for `self`: the velocity closest to pref_velocity inside the
/// intersection of all neighbor half-planes and the disc |v| <= max_speed.
/// When the intersection is empty, falls back to the least-penetrating velocity.
/// fixed_lines are extra hard constraints (e.g. arena walls) that the fallback
/// never relaxes.
inline OrcaResult orca_velocity_ex(const OrcaAgentView& self, const Vec2& pref_velocity,
                                   double max_speed,
                                   const std::vector<OrcaAgentView>& neighbors,
                                   double dt, double tau,
                                   const std::vector<OrcaLine>& fixed_lines = {}) {
    std::vector<OrcaLine> lines = fixed_lines;
    const std::vector<OrcaLine> agent_lines = orca_build_lines(self, neighbors, dt, tau);
    lines.insert(lines.end(), agent_lines.begin(), agent_lines.end());

    OrcaResult res;
    const std::size_t fail =
        detail::linear_program2(lines, max_speed, pref_velocity, false, res.velocity);
    if (fail < lines.size()) {
        res.feasible = false;
        detail::linear_program3(lines, fixed_lines.size(), fail, max_speed, res.velocity);
    }
    return res;
}

inline Vec2 orca_velocity(const OrcaAgentView& self, const Vec2& pref_velocity,
                          double max_speed, const std::vector<OrcaAgentView>& neighbors,
                          double dt, double tau,
                          const std::vector<OrcaLine>& fixed_lines = {}) {
    return orca_velocity_ex(self, pref_velocity, max_speed, neighbors, dt, tau, fixed_lines)
        .velocity;
}

/// Velocity-space wall constraints keeping a disc agent inside the square
/// arena for the next step: v . n <= (distance to wall) / dt per side.
inline std::vector<OrcaLine> arena_wall_lines(const Vec2& position, double radius,
                                              double arena_half_extent, double dt) {
    const double lim = arena_half_extent - radius;
    std::vector<OrcaLine> lines(4);
    lines[0] = {{(lim - position.x) / dt, 0.0}, {0.0, 1.0}};    // vx <= ...
    lines[1] = {{(-lim - position.x) / dt, 0.0}, {0.0, -1.0}};  // vx >= ...
    lines[2] = {{0.0, (lim - position.y) / dt}, {-1.0, 0.0}};   // vy <= ...
    lines[3] = {{0.0, (-lim - position.y) / dt}, {1.0, 0.0}};   // vy >= ...
    return lines;
}

}  // namespace crowdnav
