#include "oracles.hpp"
#include "random_meshes.hpp"

#include "pspectra/psolve.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <random>

using namespace pspectra;
using std::numbers::pi;

namespace {

std::vector<double> coordinate_field(const DiscreteManifold& m, int axis)
{
    std::vector<double> u(m.vertex_count());
    for (std::size_t v = 0; v < u.size(); ++v) u[v] = m.position(v)[axis];
    return u;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b)
{
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// relative error of the analytic quotient gradient against central differences
double gradient_check(const RayleighFunctional& rq, std::vector<double> u)
{
    const std::size_t n = u.size();
    std::vector<double> gn(n), gd(n);
    const double N = rq.numerator(u, gn), D = rq.denominator(u, gd);
    const double q = N / D;
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double analytic = (gn[i] - q * gd[i]) / D;
        const double h = 1e-6 * std::max(1.0, std::abs(u[i]));
        const double keep = u[i];
        u[i] = keep + h;
        const double qp = rq.quotient(u);
        u[i] = keep - h;
        const double qm = rq.quotient(u);
        u[i] = keep;
        const double fd = (qp - qm) / (2 * h);
        err += (analytic - fd) * (analytic - fd);
        scale += analytic * analytic;
    }
    return std::sqrt(err / scale);
}

} // namespace

TEST_SUITE("psolve")
{
    TEST_CASE("rayleigh quotient")
    {
        const auto s = build_icosphere(5);
        const auto one = ConformalFactor::constant(s.vertex_count(), 1.0);
        const auto z = coordinate_field(s, 2);
        CHECK(rayleigh_quotient(s, one, 2.0, ScalarField(z)) == doctest::Approx(2.0).epsilon(0.02));

        const auto f = random_smooth_factor(s, 2);
        std::vector<double> u(z), u3(z), uc(z);
        for (std::size_t v = 0; v < u.size(); ++v) {
            u[v] = z[v] + 0.3 * s.position(v).x() * s.position(v).y();
            u3[v] = 3.0 * u[v];
            uc[v] = u[v] + 5.0;
        }
        for (double p : {1.5, 2.0, 3.0}) {
            const RayleighFunctional rq(s, f, p);
            const double q = rq.quotient(u);
            CHECK(std::abs(rq.quotient(u3) - q) <= 1e-13 * q);
            CHECK(std::abs(rq.numerator(uc) - rq.numerator(u)) <= 1e-9 * rq.numerator(u));
            CHECK(admissible_quotient(s, f, p, ScalarField(uc))
                  == doctest::Approx(admissible_quotient(s, f, p, ScalarField(u))).epsilon(1e-9));
        }
        CHECK_THROWS_AS(rayleigh_quotient(s, one, 2.0, ScalarField::constant(s.vertex_count(), 0.0)), DegenerateInput);
        CHECK_THROWS_AS(admissible_quotient(s, one, 2.0, ScalarField::constant(s.vertex_count(), 2.0)),
                        DegenerateInput);
    }

    TEST_CASE("p-shift")
    {
        const std::vector<double> u{1.0, 4.0, -2.0, 0.5}, w{1.0, 2.0, 0.5, 3.0};
        CHECK(p_shift(u, w, 2.0) == doctest::Approx((1.0 + 8.0 - 1.0 + 1.5) / 6.5).epsilon(1e-14));
        CHECK(std::abs(p_shift(std::vector<double>{-3, -1, 1, 3}, std::vector<double>{2, 1, 1, 2}, 3.0)) < 1e-15);
        CHECK(p_shift(std::vector<double>{-1, 2}, std::vector<double>{1, 1}, 4.0) == doctest::Approx(0.5).epsilon(1e-14));
        CHECK_THROWS_AS(p_shift(std::vector<double>{2, 2}, std::vector<double>{1, 1}, 3.0), DegenerateInput);
        CHECK_THROWS_AS(p_shift(u, std::vector<double>{1, 1, 1}, 2.0), std::invalid_argument);

        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        for (double p : {1.2, 1.5, 2.5, 3.0, 5.0}) {
            std::vector<double> x(200), wt(200);
            for (int i = 0; i < 200; ++i) x[i] = std::pow(U(rng), 3) * 4.0, wt[i] = 0.5 + U(rng) * 0.4;
            const double c = p_shift(x, wt, p);
            const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
            CHECK(c >= *lo);
            CHECK(c <= *hi);
            double g = 0.0, scale = 0.0;
            auto cost = [&](double cc) {
                double acc = 0.0;
                for (int i = 0; i < 200; ++i) acc += wt[i] * std::pow(std::abs(x[i] - cc), p);
                return acc;
            };
            for (int i = 0; i < 200; ++i) {
                const double d = x[i] - c;
                g += wt[i] * std::copysign(std::pow(std::abs(d), p - 1), d);
                scale += wt[i] * std::pow(std::abs(d), p - 1);
            }
            CHECK(std::abs(g) <= 1e-12 * scale);
            const double span = *hi - *lo;
            CHECK(cost(c) <= cost(c + 0.1 * span));
            CHECK(cost(c) <= cost(c - 0.1 * span));
        }
    }

    TEST_CASE("t-split shift")
    {
        const std::vector<double> eq{1, 1};
        CHECK(t_split_shift(std::vector<double>{2, -2}, eq, 3.0) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(t_split_shift(std::vector<double>{3, -1}, eq, 2.0) == doctest::Approx(1.0 / 3).epsilon(1e-15));
        CHECK(t_split_shift(std::vector<double>{3, -1}, eq, 3.0) == doctest::Approx(1.0 / 3).epsilon(1e-15));
        CHECK_THROWS_AS(t_split_shift(std::vector<double>{3, 1}, eq, 2.0), DegenerateInput);

        std::mt19937_64 rng(8);
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        for (double p : {1.3, 2.0, 2.7, 4.0}) {
            std::vector<double> x(100), w(100);
            for (int i = 0; i < 100; ++i) x[i] = U(rng) + 0.2, w[i] = 1.0 + U(rng) * 0.5;
            CHECK(t_split_shift(x, w, p) == doctest::Approx(oracle::t_shift_bisection(x, w, p)).epsilon(1e-12));
        }
    }

    TEST_CASE("analytic gradient matches central differences")
    {
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            const auto grid = testmesh::jittered_grid(seed);
            const auto loop = testmesh::jittered_loop(seed);
            for (const auto* m : {&grid, &loop}) {
                REQUIRE(m->vertex_count() == 50);
                std::mt19937_64 rng(seed * 17);
                std::uniform_real_distribution<double> U(-1.0, 1.0);
                std::vector<double> fv(50), u(50);
                for (int i = 0; i < 50; ++i) fv[i] = std::exp(0.4 * U(rng)), u[i] = U(rng);
                const ConformalFactor f(fv);
                for (double p : {1.5, 2.0, 3.0}) {
                    const RayleighFunctional rq(*m, f, p, p < 2 ? 1e-2 : 0.0);
                    CHECK(gradient_check(rq, u) < 1e-5);
                }
            }
        }
    }

    TEST_CASE("closed problems")
    {
        SolveOptions o;
        const auto c = build_circle(400, 2 * pi);
        const auto r = solve_closed(c, ConformalFactor::constant(400, 1.0), o);
        CHECK(r.converged);
        CHECK(r.lambda == doctest::Approx(1.0).epsilon(0.01));
        CHECK(r.lambda == doctest::Approx(oracle::circle_p2_discrete(400, 2 * pi)).epsilon(1e-8));

        const auto s = build_icosphere(5);
        const auto rs = solve_closed(s, ConformalFactor::constant(s.vertex_count(), 1.0), o);
        CHECK(rs.converged);
        CHECK(rs.lambda == doctest::Approx(2.0).epsilon(0.02));
        CHECK(rs.constraint_defect <= 1e-8);
        CHECK(rs.gradient_residual <= 1e-6);

        // the p = 1 request and an open mesh are rejected
        o.p = 1.0;
        CHECK_THROWS_AS(solve_closed(c, ConformalFactor::constant(400, 1.0), o), std::invalid_argument);
        o.p = 2.0;
        CHECK_THROWS_AS(solve_closed(build_interval(10, 0, 1), ConformalFactor::constant(11, 1.0), o),
                        std::invalid_argument);
    }

    TEST_CASE("solver invariants, monotone trace and determinism")
    {
        const auto s = build_icosphere(3);
        const auto f = normalize_unit_volume(s, random_smooth_factor(s, 21), 2);
        for (double p : {1.5, 2.0, 3.0}) {
            SolveOptions o;
            o.p = p;
            o.seed = 5;
            const auto a = solve_closed(s, f, o), b = solve_closed(s, f, o);
            CHECK(a.converged);
            CHECK(bitwise_equal(a.eigenfunction.data(), b.eigenfunction.data()));
            CHECK(std::memcmp(&a.lambda, &b.lambda, sizeof(double)) == 0);
            CHECK(a.constraint_defect <= 1e-8);
            const auto [lo, hi] = std::minmax_element(a.eigenfunction.data().begin(), a.eigenfunction.data().end());
            CHECK(*hi - *lo > 1e-10);
            const RayleighFunctional rq(s, f, p);
            CHECK(rq.denominator(a.eigenfunction.values()) == doctest::Approx(1.0).epsilon(1e-12));
            for (std::size_t i = 1; i < a.trace.size(); ++i) {
                if (a.trace_stage[i] == a.trace_stage[i - 1]) CHECK(a.trace[i] <= a.trace[i - 1]);
            }
        }
    }

    TEST_CASE("dilatation scaling law")
    {
        const auto s = build_icosphere(3);
        const auto f = random_smooth_factor(s, 4);
        for (double p : {1.5, 2.0, 3.0}) {
            SolveOptions o;
            o.p = p;
            const double base = solve_closed(s, f, o).lambda;
            for (double c : {0.25, 4.0}) {
                const double scaled = solve_closed(s, f.scaled(c), o).lambda;
                CHECK(scaled == doctest::Approx(std::pow(c, -p / 2) * base).epsilon(1e-6));
            }
        }
    }

    TEST_CASE("dirichlet")
    {
        SolveOptions o;
        const auto I = build_interval(1000, -1.0, 1.0);
        const auto r = solve_dirichlet(I, o);
        CHECK(r.converged);
        CHECK(r.lambda == doctest::Approx(pi * pi / 4).epsilon(0.005));
        for (std::size_t v = 0; v <= 1000; ++v) CHECK(std::abs(r.eigenfunction[v] - r.eigenfunction[1000 - v]) < 1e-6);
        for (double p : {1.5, 3.0}) {
            o.p = p;
            const double l1 = solve_dirichlet(I, o).lambda;
            const double le = solve_dirichlet(build_interval(1000, -0.25, 0.25), o).lambda;
            CHECK(le * std::pow(0.25, p) == doctest::Approx(l1).epsilon(1e-9));
            CHECK(l1 == doctest::Approx(oracle::dirichlet_interval(p, 1.0)).epsilon(0.005));
        }
        CHECK_THROWS_AS(solve_dirichlet(build_circle(10, 1.0), o), std::invalid_argument);
    }

    TEST_CASE("neumann")
    {
        SolveOptions o;
        const auto h = extract_hemisphere(build_icosphere(5, EquatorRing::Conform));
        const auto r = solve_neumann(h, ConformalFactor::constant(h.vertex_count(), 1.0), o);
        CHECK(r.converged);
        CHECK(r.lambda == doctest::Approx(2.0).epsilon(0.02));
        CHECK(r.constraint_defect <= 1e-8);
        const auto I = build_interval(1000, 0.0, 1.0);
        const auto ri = solve_neumann(I, ConformalFactor::constant(1001, 1.0), o);
        CHECK(ri.lambda == doctest::Approx(pi * pi).epsilon(0.01));
        CHECK(ri.constraint_defect <= 1e-8);
        CHECK_THROWS_AS(solve_neumann(build_circle(10, 1.0), ConformalFactor::constant(10, 1.0), o),
                        std::invalid_argument);
    }

    TEST_CASE("shooting oracle")
    {
        CHECK(shooting_oracle_1d(2.0, ShootingMode::Dirichlet, 1.0) == doctest::Approx(pi * pi / 4).epsilon(1e-10));
        for (double p : {1.5, 2.0, 3.0, 4.5}) {
            const double one = shooting_oracle_1d(p, ShootingMode::Dirichlet, 1.0);
            CHECK(one == doctest::Approx(oracle::dirichlet_interval(p, 1.0)).epsilon(1e-9));
            for (double h : {0.5, 0.1}) {
                CHECK(shooting_oracle_1d(p, ShootingMode::Dirichlet, h) * std::pow(h, p)
                      == doctest::Approx(one).epsilon(1e-9));
            }
            CHECK(shooting_oracle_1d(p, ShootingMode::Neumann, 0.5)
                  == doctest::Approx(oracle::neumann_interval(p, 0.5)).epsilon(1e-9));
        }
        CHECK_THROWS_AS(shooting_oracle_1d(1.0, ShootingMode::Dirichlet, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(shooting_oracle_1d(2.0, ShootingMode::Dirichlet, 0.0), std::invalid_argument);
    }

    TEST_CASE("radial averaging")
    {
        const auto s = build_icosphere(5);
        const auto one = ConformalFactor::constant(s.vertex_count(), 1.0);
        const auto x = coordinate_field(s, 0);
        const auto prof = radial_average(s, ScalarField(x), one, 2.0);
        for (std::size_t k = 0; k < prof.r.size(); ++k) {
            const double expect = std::sin(prof.r[k]) / std::sqrt(2.0);
            if (expect > 0.2) CHECK(prof.ubar[k] == doctest::Approx(expect).epsilon(0.05));
        }
        CHECK(prof.pnorm_profile == doctest::Approx(prof.pnorm_field).epsilon(0.01));
        CHECK(prof.energy_profile <= prof.energy_field * 1.01);

        // a radial field is reproduced band by band
        std::vector<double> rad(s.vertex_count());
        const auto r = colatitudes(s);
        for (std::size_t v = 0; v < rad.size(); ++v) rad[v] = std::cos(r[v]);
        const auto pr = radial_average(s, ScalarField(rad), one, 3.0, 10);
        for (std::size_t k = 0; k < pr.r.size(); ++k) {
            CHECK(pr.ubar[k] <= std::max(std::abs(std::cos(pr.band_edges[k])), std::abs(std::cos(pr.band_edges[k + 1])))
                                     + 1e-12);
            CHECK(pr.ubar[k] >= std::min(std::abs(std::cos(pr.band_edges[k])), std::abs(std::cos(pr.band_edges[k + 1])))
                                     - 1e-12);
        }
        CHECK_THROWS_AS(radial_average(s, ScalarField(x), one, 2.0, 1000), std::invalid_argument);
    }

    TEST_CASE("band/plateau split")
    {
        std::vector<double> r, flat, mono;
        std::mt19937_64 rng(4);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        double acc = 0.0;
        for (int k = 0; k <= 40; ++k) {
            r.push_back(k * (pi / 2) / 40);
            flat.push_back(0.7);
            acc += U(rng);
            mono.push_back(acc);
        }
        const auto sf = split_band_plateau(r, flat, 0.3, 2.5);
        for (std::size_t i = 0; i < sf.r.size(); ++i) {
            CHECK(sf.v[i] == 0.0);
            CHECK(sf.w[i] == 0.7);
        }
        for (double p : {1.5, 2.0, 3.0}) {
            const auto sm = split_band_plateau(r, mono, 0.4, p);
            CHECK(sm.derivative_identity_error <= 1e-12);
            CHECK(sm.convexity_violation <= 1e-12);
            for (std::size_t i = 0; i < sm.r.size(); ++i) {
                if (sm.r[i] <= sm.breakpoint) CHECK(sm.v[i] == 0.0);
                else CHECK(sm.w[i] == profile_value(r, mono, sm.breakpoint));
            }
        }
        CHECK_THROWS_AS(split_band_plateau(r, mono, 2.0, 2.0), std::invalid_argument);
    }

    TEST_CASE("even reflection")
    {
        const auto s = build_icosphere(4, EquatorRing::Conform);
        const auto h = extract_hemisphere(s);
        const auto one_s = ConformalFactor::constant(s.vertex_count(), 1.0);
        const auto xh = coordinate_field(h, 0);
        const auto w = reflect_even(ScalarField(xh), h, s);
        const auto mirror = mirror_map(s);
        const auto parent = h.parent_vertices();
        for (std::size_t i = 0; i < parent.size(); ++i) CHECK(w[parent[i]] == xh[i]);
        for (std::size_t v = 0; v < s.vertex_count(); ++v) CHECK(w[v] == w[mirror[v]]);
        const double qs = rayleigh_quotient(s, one_s, 2.0, w);
        const double qh = rayleigh_quotient(h, ConformalFactor::constant(h.vertex_count(), 1.0), 2.0, ScalarField(xh));
        CHECK(qs == doctest::Approx(2.0).epsilon(0.02));
        CHECK(qs == doctest::Approx(qh).epsilon(1e-12));
        const RayleighFunctional rq(s, one_s, 2.0);
        CHECK(std::abs(rq.constraint_integral(w.values())) < 1e-8);

        CHECK_THROWS_AS(require_mirror_symmetric(s, random_smooth_factor(s, 3)), std::invalid_argument);
        CHECK_THROWS_AS(reflect_even(ScalarField(xh), h, build_icosphere(3, EquatorRing::Conform)),
                        std::invalid_argument);
    }

    TEST_CASE("smooth vs singular comparison chain")
    {
        const auto s = build_icosphere(4, EquatorRing::Conform);
        const double p = 3.0, eps = 0.5;
        const auto sm = normalize_unit_volume(s, f_eps_smooth(s, eps, p, 2), 2);
        // same normalization constant so f~ <= f_eps survives
        const double k = sm[*s.pole()] / f_eps_smooth(s, eps, p, 2)[*s.pole()];
        const auto sg = f_eps_singular(s, eps, p, 2).scaled(k);
        SolveOptions o;
        o.p = p;
        const auto rsm = solve_closed(s, sm, o);
        const auto rsg = solve_closed(s, sg, o);
        const auto chain = compare_chain(s, sm, sg, p, rsm.eigenfunction, rsg.lambda);
        CHECK(chain.majorant_ok);
        CHECK(chain.minimum_ok);
        CHECK(chain.halves_ok);
        CHECK(chain.smooth_quotient >= rsm.lambda * (1 - 1e-9));
    }
}
