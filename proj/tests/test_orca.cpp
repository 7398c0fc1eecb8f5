#include "doctest.h"

#include <vector>

#include "crowdnav/orca.hpp"
#include "crowdnav/rng.hpp"

using namespace crowdnav;

namespace {

// Brute-force oracle: scan a grid over the speed disc for the feasible point
// closest to the preferred velocity. Independent of the LP implementation.
Vec2 grid_search(const std::vector<OrcaLine>& lines, double max_speed, const Vec2& pref,
                 int resolution, bool* found) {
    Vec2 best;
    double best_d = std::numeric_limits<double>::infinity();
    *found = false;
    for (int i = 0; i <= resolution; ++i) {
        for (int j = 0; j <= resolution; ++j) {
            Vec2 v{-max_speed + 2.0 * max_speed * i / resolution,
                   -max_speed + 2.0 * max_speed * j / resolution};
            if (v.norm() > max_speed) continue;
            bool ok = true;
            for (const auto& line : lines)
                ok = ok && orca_satisfies(line, v, 1e-12);
            if (!ok) continue;
            double d = (v - pref).norm();
            if (d < best_d) {
                best_d = d;
                best = v;
                *found = true;
            }
        }
    }
    return best;
}

}  // namespace

TEST_CASE("preferred velocity points at the goal with distance/dt cap") {
    CHECK(orca_preferred_velocity({0, 0}, {10, 0}, 1.0, 0.25).x == doctest::Approx(1.0));
    CHECK(orca_preferred_velocity({0, 0}, {10, 0}, 1.0, 0.25).y == doctest::Approx(0.0));

    Vec2 at_goal = orca_preferred_velocity({3, 2}, {3, 2}, 1.0, 0.25);
    CHECK(at_goal.norm() == doctest::Approx(0.0));

    Vec2 close = orca_preferred_velocity({0, 0}, {0.1, 0}, 1.0, 0.25);
    CHECK(close.norm() == doctest::Approx(0.4));
}

TEST_CASE("no neighbors returns exactly the preferred velocity") {
    OrcaAgentView self{{0, 0}, {0.3, 0.1}, 0.3};
    Vec2 pref{0.7, -0.2};
    Vec2 v = orca_velocity(self, pref, 1.5, {}, 0.25, 2.0);
    CHECK(v.x == doctest::Approx(pref.x));
    CHECK(v.y == doctest::Approx(pref.y));
}

TEST_CASE("head-on agents produce mirrored velocities") {
    // The exact head-on configuration maps onto itself under a 180° rotation
    // that swaps the agents, so the outputs must be point reflections of each
    // other; both dodge to their own side and the avoidance effort is shared.
    OrcaAgentView a{{-2, 0}, {1, 0}, 0.3};
    OrcaAgentView b{{2, 0}, {-1, 0}, 0.3};
    Vec2 pref_a{1, 0}, pref_b{-1, 0};
    Vec2 va = orca_velocity(a, pref_a, 1.0, {b}, 0.25, 2.0);
    Vec2 vb = orca_velocity(b, pref_b, 1.0, {a}, 0.25, 2.0);
    CHECK(va.x == doctest::Approx(-vb.x).epsilon(1e-9));
    CHECK(va.y == doctest::Approx(-vb.y).epsilon(1e-9));
    CHECK(va.x > 0.0);  // still makes progress
}

TEST_CASE("returned velocity satisfies every half-plane and is grid-optimal") {
    Rng rng(2024);
    int feasible_count = 0;
    for (int trial = 0; trial < 40; ++trial) {
        OrcaAgentView self{{0, 0},
                           {rng.uniform(-1, 1), rng.uniform(-1, 1)},
                           rng.uniform(0.3, 0.5)};
        std::vector<OrcaAgentView> neighbors;
        for (int i = 0; i < 3; ++i) {
            Vec2 pos{rng.uniform(-3, 3), rng.uniform(-3, 3)};
            if (pos.norm() < 1.2) pos = pos.normalized() * 1.2;
            neighbors.push_back(
                {pos, {rng.uniform(-1, 1), rng.uniform(-1, 1)}, rng.uniform(0.3, 0.5)});
        }
        double max_speed = rng.uniform(0.8, 1.5);
        Vec2 pref{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        pref = clamp_norm(pref, max_speed);

        auto lines = orca_build_lines(self, neighbors, 0.25, 2.0);
        OrcaResult res = orca_velocity_ex(self, pref, max_speed, neighbors, 0.25, 2.0);

        CHECK(res.velocity.norm() <= max_speed + 1e-9);
        if (!res.feasible) continue;
        ++feasible_count;
        for (const auto& line : lines) CHECK(orca_satisfies(line, res.velocity, 1e-9));

        bool found = false;
        const int resolution = 200;
        Vec2 grid_best = grid_search(lines, max_speed, pref, resolution, &found);
        if (found) {
            double spacing = 2.0 * max_speed / resolution;
            CHECK((res.velocity - pref).norm() <= (grid_best - pref).norm() + spacing);
        }
    }
    CHECK(feasible_count > 20);  // most random instances must be feasible
}

TEST_CASE("output speed never exceeds the cap") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        OrcaAgentView self{{0, 0}, {rng.uniform(-2, 2), rng.uniform(-2, 2)}, 0.4};
        std::vector<OrcaAgentView> neighbors;
        int n = static_cast<int>(rng.uniform_int(5));
        for (int i = 0; i < n; ++i)
            neighbors.push_back({{rng.uniform(-2, 2), rng.uniform(-2, 2)},
                                 {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)},
                                 rng.uniform(0.3, 0.5)});
        double cap = rng.uniform(0.5, 1.5);
        Vec2 pref{rng.uniform(-3, 3), rng.uniform(-3, 3)};
        Vec2 v = orca_velocity(self, pref, cap, neighbors, 0.25, 2.0);
        CHECK(v.norm() <= cap + 1e-9);
        CHECK(v.finite());
    }
}

TEST_CASE("overlapping agents stay finite and separate") {
    OrcaAgentView a{{0, 0}, {0, 0}, 0.4};
    OrcaAgentView b{{0.1, 0}, {0, 0}, 0.4};  // heavily overlapping
    Vec2 va = orca_velocity(a, {1, 0}, 1.0, {b}, 0.25, 2.0);
    CHECK(va.finite());
    // the already-colliding branch must push a away from b
    CHECK(va.x < 0.5);
}
