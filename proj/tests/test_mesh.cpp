#include "oracles.hpp"

#include "pspectra/mesh.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

using namespace pspectra;
using std::numbers::pi;

TEST_SUITE("mesh")
{
    TEST_CASE("interval partitions")
    {
        const auto m = build_interval(2, -1.0, 1.0);
        REQUIRE(m.vertex_count() == 3);
        CHECK(m.coordinate(0) == -1.0);
        CHECK(m.coordinate(1) == 0.0);
        CHECK(m.coordinate(2) == 1.0);
        CHECK(m.element_measure(0) == 1.0);
        CHECK(m.element_measure(1) == 1.0);
        CHECK(m.is_boundary(0));
        CHECK(m.is_boundary(2));
        CHECK_FALSE(m.is_boundary(1));
        CHECK(build_interval(4, 0.0, 2.0).total_measure() == doctest::Approx(2.0).epsilon(1e-15));
        CHECK(std::abs(build_interval(1000, -0.1, 0.1).total_measure() - 0.2) < 1e-14);
        CHECK_THROWS_AS(build_interval(1, 0.0, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(build_interval(4, 1.0, 1.0), std::invalid_argument);
    }

    TEST_CASE("circle")
    {
        const auto c3 = build_circle(3, 3.0);
        for (std::size_t e = 0; e < 3; ++e) CHECK(c3.element_measure(e) == doctest::Approx(1.0).epsilon(1e-15));
        for (int n : {3, 7, 400}) CHECK(build_circle(n, 2 * pi).total_measure() == doctest::Approx(2 * pi).epsilon(1e-14));
        const auto c6 = build_circle(6, 2 * pi);
        CHECK_FALSE(c6.has_boundary());
        CHECK(*c6.pole() == 0);
        CHECK(colatitude(c6, 0) == 0.0);
        CHECK(colatitude(c6, 3) == doctest::Approx(pi).epsilon(1e-15));
        CHECK_THROWS_AS(build_circle(2, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(build_circle(5, 0.0), std::invalid_argument);
    }

    TEST_CASE("icosphere combinatorics and convergence")
    {
        const auto l0 = build_icosphere(0);
        CHECK(l0.vertex_count() == 12);
        CHECK(l0.element_count() == 20);
        double prev_err = 4 * pi;
        for (int k = 0; k <= 5; ++k) {
            const auto s = build_icosphere(k);
            CHECK(s.element_count() == 20u * (1u << (2 * k)));
            for (const auto& x : s.positions()) CHECK(std::abs(x.norm() - 1.0) < 1e-12);
            const double err = std::abs(s.total_measure() - 4 * pi);
            CHECK(err < prev_err);
            prev_err = err;
        }
        CHECK(prev_err / (4 * pi) < 1e-3);
        CHECK_THROWS_AS(build_icosphere(9), std::invalid_argument);
    }

    TEST_CASE("icosphere orientation is outward")
    {
        const auto s = build_icosphere(2);
        for (std::size_t e = 0; e < s.element_count(); ++e) {
            auto el = s.element(e);
            const Vec3 n = (s.position(el[1]) - s.position(el[0])).cross(s.position(el[2]) - s.position(el[0]));
            CHECK(n.dot(s.position(el[0]) + s.position(el[1]) + s.position(el[2])) > 0.0);
        }
    }

    TEST_CASE("mirror symmetry and colatitude")
    {
        const auto s = build_icosphere(3, EquatorRing::Conform);
        const auto mirror = mirror_map(s);
        const int pole = *s.pole();
        CHECK(colatitude(s, pole) == 0.0);
        CHECK(colatitude(s, mirror[pole]) == pi);
        int ring = 0;
        for (std::size_t v = 0; v < s.vertex_count(); ++v) {
            const Vec3 x = s.position(v), y = s.position(mirror[v]);
            CHECK(x.x() == y.x());
            CHECK(x.y() == y.y());
            CHECK(x.z() == -y.z());
            if (x.z() == 0.0) {
                ++ring;
                CHECK(std::abs(colatitude(s, v) - pi / 2) < 1e-9);
            }
        }
        CHECK(ring > 0);
    }

    TEST_CASE("hemisphere extraction")
    {
        const auto s = build_icosphere(4, EquatorRing::Conform);
        const auto h = extract_hemisphere(s);
        CHECK(std::abs(h.total_measure() - 2 * pi) < 0.01 * 2 * pi);
        CHECK_FALSE(h.is_boundary(*h.pole()));
        for (std::size_t v = 0; v < h.vertex_count(); ++v) {
            CHECK(colatitude(h, v) <= pi / 2 + 1e-9);
            if (std::abs(h.position(v).z()) < 1e-12) CHECK(h.is_boundary(v));
            else CHECK_FALSE(h.is_boundary(v));
        }
        CHECK_THROWS_AS(extract_hemisphere(build_icosphere(3)), std::invalid_argument);
    }

    TEST_CASE("integrate")
    {
        const auto s = build_icosphere(5);
        CHECK(integrate(s, ScalarField::constant(s.vertex_count(), 1.0)) == doctest::Approx(s.total_measure()));
        CHECK(integrate(s, ScalarField::constant(s.vertex_count(), 3.5))
              == doctest::Approx(3.5 * s.total_measure()).epsilon(1e-13));
        std::vector<double> odd(s.vertex_count()), a(s.vertex_count()), b(s.vertex_count()), ab(s.vertex_count());
        for (std::size_t v = 0; v < odd.size(); ++v) {
            const Vec3 x = s.position(v);
            odd[v] = x.z() * (1.0 + x.x() * x.x());
            a[v] = std::exp(x.x());
            b[v] = x.y() * x.z() + 2.0;
            ab[v] = 2.0 * a[v] - 0.5 * b[v];
        }
        CHECK(std::abs(integrate(s, odd)) < 1e-10);
        const double lin = 2.0 * integrate(s, a) - 0.5 * integrate(s, b);
        CHECK(std::abs(integrate(s, ab) - lin) <= 1e-12 * std::abs(lin));
    }

    TEST_CASE("piecewise-linear gradients")
    {
        const auto I = build_interval(50, -1.0, 2.0);
        std::vector<double> x(I.vertex_count());
        for (std::size_t v = 0; v < x.size(); ++v) x[v] = I.coordinate(v);
        for (double g : pl_gradient_sq(I, ScalarField(x))) CHECK(g == doctest::Approx(1.0).epsilon(1e-12));
        for (double g : pl_gradient_sq(I, ScalarField::constant(I.vertex_count(), 4.0))) CHECK(g == 0.0);

        const auto s = build_icosphere(5);
        std::vector<double> z(s.vertex_count()), zc(s.vertex_count()), z2(s.vertex_count());
        for (std::size_t v = 0; v < z.size(); ++v) {
            z[v] = s.position(v).z();
            zc[v] = z[v] + 7.0;
            z2[v] = z[v] * z[v];
        }
        const auto g = pl_gradient_sq(s, ScalarField(z)), gc = pl_gradient_sq(s, ScalarField(zc));
        double energy = 0.0;
        for (std::size_t e = 0; e < g.size(); ++e) {
            CHECK(std::abs(g[e] - gc[e]) <= 1e-9 * g[e] + 1e-15);
            energy += g[e] * s.element_measure(e);
        }
        CHECK(energy == doctest::Approx(2.0 * integrate(s, z2)).epsilon(0.01));
        CHECK(integrate(s, z2) == doctest::Approx(4 * pi / 3).epsilon(0.01));
    }

    TEST_CASE("orthonormal complement")
    {
        for (Vec3 a : {Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(0.3, -0.4, 0.866), Vec3(-1, 1, 1)}) {
            a.normalize();
            Vec3 e1, e2;
            orthonormal_complement(a, e1, e2);
            CHECK(std::abs(e1.dot(a)) < 1e-15);
            CHECK(std::abs(e2.dot(a)) < 1e-15);
            CHECK(std::abs(e1.dot(e2)) < 1e-15);
            CHECK(e1.norm() == doctest::Approx(1.0));
            CHECK(e2.norm() == doctest::Approx(1.0));
            CHECK(e1.cross(e2).dot(a) == doctest::Approx(1.0));
        }
    }

    TEST_CASE("OFF and CSV round trips")
    {
        const auto dir = std::filesystem::temp_directory_path() / "pspectra_mesh_io";
        std::filesystem::create_directories(dir);
        const auto s = build_icosphere(2);
        write_off(s, (dir / "s.off").string());
        const auto r = read_off((dir / "s.off").string());
        REQUIRE(r.vertex_count() == s.vertex_count());
        REQUIRE(r.element_count() == s.element_count());
        CHECK(r.kind() == MeshKind::Sphere);
        for (std::size_t v = 0; v < s.vertex_count(); ++v) CHECK((r.position(v) - s.position(v)).norm() == 0.0);

        const auto h = extract_hemisphere(build_icosphere(2, EquatorRing::Conform));
        write_off(h, (dir / "h.off").string());
        const auto hr = read_off((dir / "h.off").string());
        CHECK(hr.kind() == MeshKind::Hemisphere);
        CHECK(hr.boundary_vertices() == h.boundary_vertices());

        const auto c = build_circle(17, 3.0);
        write_mesh_csv(c, (dir / "c.csv").string());
        const auto cr = read_mesh_csv((dir / "c.csv").string());
        CHECK(cr.kind() == MeshKind::Circle);
        CHECK(cr.total_measure() == doctest::Approx(3.0).epsilon(1e-14));

        std::vector<double> vals{1.0 / 3.0, -2.5e-17, 1e300};
        write_field_csv(ScalarField(vals), (dir / "f.csv").string());
        CHECK(read_field_csv((dir / "f.csv").string()).data() == vals);
        CHECK_THROWS(read_off((dir / "missing.off").string()));
    }
}
