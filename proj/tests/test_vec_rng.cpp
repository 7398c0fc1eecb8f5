#include "doctest.h"

#include "crowdnav/rng.hpp"
#include "crowdnav/vec2.hpp"

using namespace crowdnav;

TEST_CASE("wrap_angle maps into (-pi, pi]") {
    CHECK(wrap_angle(0.0) == doctest::Approx(0.0));
    CHECK(wrap_angle(M_PI) == doctest::Approx(M_PI));
    CHECK(wrap_angle(-M_PI) == doctest::Approx(M_PI));
    CHECK(wrap_angle(3.0 * M_PI) == doctest::Approx(M_PI));
    CHECK(wrap_angle(2.0 * M_PI + 0.25) == doctest::Approx(0.25));
    CHECK(wrap_angle(-2.5 * M_PI) == doctest::Approx(-0.5 * M_PI));
}

TEST_CASE("clamp_norm") {
    Vec2 v{3.0, 4.0};
    Vec2 c = clamp_norm(v, 1.0);
    CHECK(c.norm() == doctest::Approx(1.0));
    CHECK(c.x == doctest::Approx(0.6));
    CHECK(clamp_norm(Vec2{0.1, 0.0}, 1.0) == Vec2{0.1, 0.0});
}

TEST_CASE("rng streams are deterministic and distinct") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    bool differs = false;
    Rng a2(42);
    for (int i = 0; i < 10; ++i) differs = differs || (a2.next() != c.next());
    CHECK(differs);

    Rng d1 = Rng::derive(7, 0), d2 = Rng::derive(7, 1);
    CHECK(d1.next() != d2.next());
}

TEST_CASE("rng uniform and normal are sane") {
    Rng r(123);
    double mn = 1.0, mx = 0.0, sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double u = r.uniform();
        mn = std::min(mn, u);
        mx = std::max(mx, u);
        sum += u;
    }
    CHECK(mn >= 0.0);
    CHECK(mx < 1.0);
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));

    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = r.normal();
        s += x;
        s2 += x * x;
    }
    CHECK(s / n == doctest::Approx(0.0).epsilon(0.05));
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.05));
}
