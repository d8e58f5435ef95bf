#include "pspectra/bounds.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace pspectra;
using std::numbers::pi;

TEST_SUITE("bounds")
{
    TEST_CASE("closed forms")
    {
        CHECK(theorem1_bound(2.0, 2, 2, 4 * pi) == doctest::Approx(8 * pi).epsilon(1e-15));
        CHECK(theorem1_bound(1.5, 2, 2, 4 * pi)
              == doctest::Approx(std::pow(2.0, 0.75) * std::pow(3.0, 0.25) * std::pow(4 * pi, 0.75)).epsilon(1e-15));
        CHECK(theorem1_bound(2.0, 2, 3, 1.0) == doctest::Approx(2.0).epsilon(1e-15));
        CHECK(corollary_surface_bound(2.0, 0, true) == doctest::Approx(8 * pi).epsilon(1e-15));
        CHECK(corollary_surface_bound(2.0, 1, true) == doctest::Approx(16 * pi).epsilon(1e-15));
        CHECK(corollary_surface_bound(2.0, 2, true) == doctest::Approx(16 * pi).epsilon(1e-15));
        CHECK(corollary_surface_bound(1.5, 0, true)
              == doctest::Approx(std::pow(3.0, 0.25) * std::pow(8 * pi, 0.75)).epsilon(1e-15));
        CHECK(corollary_surface_bound(2.0, 1, false) == doctest::Approx(48 * pi).epsilon(1e-15));
        // the sphere case of the corollary coincides with the general bound at Vnc = 4 pi
        for (double p : {1.2, 1.5, 1.8, 2.0}) {
            CHECK(corollary_surface_bound(p, 0, true) == doctest::Approx(theorem1_bound(p, 2, 2, 4 * pi)).epsilon(1e-14));
        }
        CHECK(canonical_conformal_volume(CanonicalSphere::S1) == doctest::Approx(2 * pi).epsilon(1e-15));
        CHECK(canonical_conformal_volume(CanonicalSphere::S2) == doctest::Approx(4 * pi).epsilon(1e-15));
        CHECK(conformal_volume_from_eigenvalue(CanonicalSphere::S2, 2.0 * 1.01) == doctest::Approx(4 * pi * 1.01).epsilon(1e-14));
        CHECK(parse_canonical_sphere("S2") == CanonicalSphere::S2);
        CHECK_THROWS_AS(parse_canonical_sphere("T2"), std::invalid_argument);
    }

    TEST_CASE("argument checks")
    {
        CHECK_THROWS_AS(theorem1_bound(1.0, 2, 2, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(theorem1_bound(2.5, 2, 2, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(theorem1_bound(2.0, 3, 2, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(theorem1_bound(2.0, 2, 2, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(corollary_surface_bound(2.5, 0, true), std::invalid_argument);
        CHECK_THROWS_AS(corollary_surface_bound(2.0, -1, true), std::invalid_argument);
        CHECK_THROWS_AS(evaluate_bound(BoundSource::corollary(0, true), 1.0 + 0.5, 1), std::invalid_argument);
    }

    TEST_CASE("monotonicity")
    {
        for (double p : {1.2, 1.5, 2.0}) {
            double prev = 0.0;
            for (double v : {0.5, 1.0, 4 * pi, 100.0}) {
                const double b = theorem1_bound(p, 2, 2, v);
                CHECK(b > prev);
                prev = b;
            }
            CHECK(theorem1_bound(p, 2, 4, 1.0) >= theorem1_bound(p, 2, 2, 1.0));
            for (int g = 0; g < 8; ++g) {
                CHECK(corollary_surface_bound(p, g + 1, true) >= corollary_surface_bound(p, g, true));
                CHECK(corollary_surface_bound(p, g, false) > corollary_surface_bound(p, g, true));
            }
        }
    }

    TEST_CASE("comparison report")
    {
        const auto src = BoundSource::theorem1(2, 4 * pi);
        const auto ok = compare_bound(src, 2.0, 2, 8 * pi * 1.01, 0.02);
        CHECK(ok.holds);
        CHECK(ok.source == "theorem1");
        CHECK(ok.slack == doctest::Approx(-0.01 * 8 * pi).epsilon(1e-12));
        CHECK_FALSE(compare_bound(src, 2.0, 2, 8 * pi * 1.03, 0.02).holds);
        CHECK_FALSE(compare_bound(src, 2.0, 2, std::nan(""), 0.02).holds);

        const auto s = build_icosphere(3);
        const auto f = ConformalFactor::constant(s.vertex_count(), 1.0 / s.total_measure());
        const auto r = verify_bound(s, f, 2.0, BoundSource::corollary(0, true));
        CHECK(r.converged);
        CHECK(r.holds);
        CHECK(r.computed_lambda >= 0.95 * r.bound_value);
        CHECK_THROWS_AS(verify_bound(s, f.scaled(2.0), 2.0, src), std::invalid_argument);
    }
}
