#include "oracles.hpp"

#include "pspectra/mobius.hpp"
#include "pspectra/psolve.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace pspectra;
using std::numbers::pi;

namespace {

std::vector<Vec3> random_sphere_points(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N;
    std::vector<Vec3> out;
    while (out.size() < n) {
        Vec3 x(N(rng), N(rng), N(rng));
        if (x.norm() > 1e-3) out.push_back(x.normalized());
    }
    return out;
}

std::vector<Vec3> positions_of(const DiscreteManifold& m) { return {m.positions().begin(), m.positions().end()}; }

ScalarField unit_density(const DiscreteManifold& m) { return ScalarField::constant(m.vertex_count(), 1.0); }

} // namespace

TEST_SUITE("mobius")
{
    TEST_CASE("stereographic chart")
    {
        for (const Vec3& a : random_sphere_points(5, 1)) {
            CHECK(stereographic(a, -a).norm() < 1e-15);
            Vec3 e1, e2;
            orthonormal_complement(a, e1, e2);
            for (int k = 0; k < 12; ++k) {
                const double th = 2 * pi * k / 12;
                CHECK(stereographic(a, std::cos(th) * e1 + std::sin(th) * e2).norm() == doctest::Approx(1.0).epsilon(1e-14));
            }
            double worst = 0.0;
            for (const Vec3& x : random_sphere_points(1000, 2)) {
                if ((x - a).norm() < 1e-3) continue;
                worst = std::max(worst, (inverse_stereographic(a, stereographic(a, x)) - x).norm());
            }
            CHECK(worst < 1e-10);
            CHECK_THROWS_AS(stereographic(a, a), std::invalid_argument);
        }
    }

    TEST_CASE("conformal dilations")
    {
        const auto pts = random_sphere_points(500, 3);
        const Vec3 a = Vec3(1, 2, -2).normalized();
        const MobiusMap id(a, 1.0);
        for (const auto& x : pts) CHECK((id.apply(x) - x).norm() < 1e-15);
        for (double t : {0.9, 0.5, 0.1, 0.02}) {
            const MobiusMap g(a, t);
            CHECK((g.apply(a) - a).norm() < 1e-12);
            CHECK((g.apply(-a) + a).norm() < 1e-12);
            const MobiusMap gi = g.inverse();
            double worst = 0.0;
            for (const auto& x : pts) {
                const Vec3 y = g.apply(x);
                CHECK(y.norm() == doctest::Approx(1.0).epsilon(1e-14));
                worst = std::max(worst, (gi.apply(y) - x).norm());
            }
            if (t >= 0.1) CHECK(worst < 1e-9);
            // pushes towards a: the height along a only grows
            for (const auto& x : pts) CHECK(g.apply(x).dot(a) >= x.dot(a) - 1e-12);
            // boost coordinates round trip
            const MobiusMap b = MobiusMap::from_boost(g.boost_vector());
            CHECK(b.t() == doctest::Approx(t).epsilon(1e-12));
            CHECK((b.pole() - a).norm() < 1e-12);
        }
        CHECK_THROWS_AS(MobiusMap(Vec3(1, 1, 0), 0.5), std::invalid_argument);
        CHECK_THROWS_AS(MobiusMap(a, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(MobiusMap(a, 1.5), std::invalid_argument);
    }

    TEST_CASE("moment vector")
    {
        const auto s = build_icosphere(4);
        const auto x = positions_of(s);
        for (double p : {1.5, 2.0, 3.0}) {
            CHECK(moment_vector(s, x, unit_density(s), p, MobiusMap::identity()).norm() < 1e-12);
            // nearly everything ends up close to a
            const Vec3 a = Vec3(0.3, -0.4, 0.5).normalized();
            const auto F = moment_vector(s, x, unit_density(s), p, MobiusMap(a, 1e-3));
            Vec3 expect;
            for (int i = 0; i < 3; ++i) expect[i] = std::copysign(std::pow(std::abs(a[i]), p - 1), a[i]);
            CHECK((F.components - expect).norm() < 1e-2);
            CHECK(F.measure_total == doctest::Approx(s.total_measure()).epsilon(1e-12));
        }
    }

    TEST_CASE("balancing a cap density")
    {
        const auto s = build_icosphere(3);
        const auto x = positions_of(s);
        const Vec3 c = Vec3(1, 1, 1).normalized();
        std::vector<double> rho(s.vertex_count());
        for (std::size_t v = 0; v < rho.size(); ++v) rho[v] = std::exp(4.0 * (x[v].dot(c) - 1.0));
        for (double p : {1.5, 2.0, 3.0}) {
            const auto r = balance(s, x, ScalarField(rho), p, 1e-6);
            CHECK(r.converged);
            CHECK(r.moment_norm <= 1e-6);
            CHECK(moment_vector(s, x, ScalarField(rho), p, r.map).norm() == doctest::Approx(r.moment_norm).epsilon(1e-9));
            // the balancing map pushes mass away from the cap
            CHECK(r.map.pole().dot(c) < 0.0);
        }
        const auto already = balance(s, x, unit_density(s), 2.0, 1e-6);
        CHECK(already.converged);
        CHECK(already.map.t() == 1.0);

        std::vector<double> spike(s.vertex_count(), 0.0);
        spike[0] = 1.0;
        CHECK_THROWS_AS(balance(s, x, ScalarField(spike), 2.0, 1e-6), DegenerateInput);
    }

    TEST_CASE("p = 2 balancing agrees with the center-of-mass normalization")
    {
        const auto s = build_icosphere(3);
        const auto x = positions_of(s);
        const auto mass = s.lumped_mass();
        for (std::uint64_t seed : {7u, 8u}) {
            std::mt19937_64 rng(seed);
            std::uniform_real_distribution<double> U(-1.0, 1.0);
            const Vec3 c = Vec3(U(rng), U(rng), U(rng)).normalized();
            std::vector<double> rho(s.vertex_count()), w(s.vertex_count());
            for (std::size_t v = 0; v < rho.size(); ++v) {
                rho[v] = std::exp(2.5 * x[v].dot(c)) * (1.2 + 0.5 * x[v].x() * x[v].y());
                w[v] = mass[v] * rho[v];
            }
            const auto ours = balance(s, x, ScalarField(rho), 2.0, 1e-9);
            REQUIRE(ours.converged);
            const auto ref = oracle::center_of_mass_balance(x, w);
            Vec3 mean = Vec3::Zero();
            double total = 0.0;
            for (std::size_t v = 0; v < x.size(); ++v) mean += w[v] * ref.image[v], total += w[v];
            CHECK((mean / total).norm() <= 1e-6);

            const auto img = ours.map.apply(x);
            double worst = 0.0;
            for (std::size_t i = 0; i < x.size(); i += 7) {
                for (std::size_t j = i + 1; j < x.size(); j += 11) {
                    worst = std::max(worst, std::abs((img[i] - img[j]).norm() - (ref.image[i] - ref.image[j]).norm()));
                }
            }
            CHECK(worst <= 1e-6);
        }
    }

    TEST_CASE("lemma bound for balanced maps")
    {
        const auto s = build_icosphere(4);
        const auto x = positions_of(s);
        const auto one = ConformalFactor::constant(s.vertex_count(), 1.0 / s.total_measure());
        // identity embedding of the round sphere of unit area is balanced
        for (double p : {1.5, 2.0}) {
            const double energy = map_p_energy(s, one, x, p);
            CHECK(lemma2_bound(s, one, x, p, 2, 1e-6)
                  == doctest::Approx(std::pow(3.0, std::abs(p / 2 - 1)) * energy).epsilon(1e-12));
            SolveOptions o;
            o.p = p;
            const double lambda = solve_closed(s, one, o).lambda;
            CHECK(lemma2_bound(s, one, x, p, 2, 1e-6) >= lambda);
        }
        // p = 2: sum |d x_i|^2 = 2 pointwise, energy = 2 * area
        CHECK(map_p_energy(s, one, x, 2.0) == doctest::Approx(8 * pi).epsilon(1e-2));

        const auto shifted = MobiusMap(Vec3::UnitZ(), 0.3).apply(x);
        CHECK_THROWS_AS(lemma2_bound(s, one, shifted, 2.0, 2, 1e-6), std::invalid_argument);
        CHECK_THROWS_AS(lemma2_bound(s, one, x, 2.0, 3, 1e-6), std::invalid_argument);
        CHECK_THROWS_AS(lemma2_bound(s, one.scaled(2.0), x, 2.0, 2, 1e-6), std::invalid_argument);
    }

    TEST_CASE("supremum of the image area")
    {
        const auto s = build_icosphere(3);
        const auto x = positions_of(s);
        const auto r = sup_volume_over_gamma(s, x, 400);
        CHECK(r.identity_value >= 4 * pi * (1 - 0.005 * 4));
        CHECK(r.value >= r.identity_value);
        CHECK(r.value <= 4 * pi + 1e-9);

        // the orbit of a conformal map has the same supremum
        const auto moved = MobiusMap(Vec3(0, 1, 0), 0.4).apply(x);
        const auto rm = sup_volume_over_gamma(s, moved, 400);
        CHECK(rm.value == doctest::Approx(r.value).epsilon(0.01));

        // collapsing everything to one point has zero area
        const std::vector<Vec3> point(x.size(), Vec3::UnitZ());
        CHECK(sup_volume_over_gamma(s, point, 50).value == 0.0);

        const auto fine = build_icosphere(5);
        CHECK(image_area(fine, positions_of(fine)) >= 4 * pi * (1 - 0.005));
    }

    TEST_CASE("elementary coordinate inequalities")
    {
        std::mt19937_64 rng(12);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        for (int trial = 0; trial < 2000; ++trial) {
            std::vector<double> sq(3), psi(3);
            Vec3 y(U(rng) - 0.5, U(rng) - 0.5, U(rng) - 0.5);
            y.normalize();
            for (int i = 0; i < 3; ++i) sq[i] = std::pow(U(rng), 3) * 5.0, psi[i] = y[i];
            const double p_hi = 2.0 + 3.0 * U(rng), p_lo = 1.0 + U(rng);
            CHECK(gap_num1(sq, p_hi) <= 1e-12);
            CHECK(gap_den1(psi, p_hi) <= 1e-12);
            CHECK(gap_den2(psi, p_lo) <= 1e-12);
            CHECK(gap_num2(sq, p_lo) <= 1e-12);
        }
        // equality cases
        const std::vector<double> e{1.0, 0.0, 0.0}, flat{1 / std::sqrt(3.0), 1 / std::sqrt(3.0), 1 / std::sqrt(3.0)};
        CHECK(std::abs(gap_num1(e, 3.0)) < 1e-15);
        CHECK(std::abs(gap_den1(flat, 3.0)) < 1e-14);
        CHECK(std::abs(gap_den2(e, 1.5)) < 1e-15);
        CHECK(std::abs(gap_num2(std::vector<double>{2.0, 2.0, 2.0}, 1.5)) < 1e-14);
    }
}
