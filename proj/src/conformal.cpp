#include "pspectra/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace pspectra {

ConformalFactor::ConformalFactor(std::vector<double> values) : values_(std::move(values))
{
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i]) || values_[i] <= 0.0) {
            throw std::invalid_argument("conformal factor must be positive and finite (vertex "
                                        + std::to_string(i) + ")");
        }
    }
}

ConformalFactor ConformalFactor::constant(std::size_t size, double value)
{
    return ConformalFactor(std::vector<double>(size, value));
}

ConformalFactor ConformalFactor::scaled(double c) const
{
    std::vector<double> out(values_);
    for (double& x : out) x *= c;
    return ConformalFactor(std::move(out));
}

namespace {

ScalarField pointwise_power(const ConformalFactor& f, double exponent)
{
    std::vector<double> out(f.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        // exact for the common exponents 0, 1/2 and 1
        if (exponent == 0.0) {
            out[i] = 1.0;
        } else if (exponent == 1.0) {
            out[i] = f[i];
        } else if (exponent == 0.5) {
            out[i] = std::sqrt(f[i]);
        } else {
            out[i] = std::pow(f[i], exponent);
        }
    }
    return ScalarField(std::move(out));
}

void require_radial_mesh(const DiscreteManifold& mesh, const char* what)
{
    if (!mesh.pole() || !(mesh.kind() == MeshKind::Circle || mesh.is_sphere_like())) {
        throw std::invalid_argument(std::string(what) + ": needs a circle or sphere mesh with a pole");
    }
}

void check_eps(const DiscreteManifold& mesh, double eps, double p, int m, const char* what)
{
    require_radial_mesh(mesh, what);
    if (m != mesh.dim()) {
        throw std::invalid_argument(std::string(what) + ": m does not match the mesh dimension");
    }
    if (!(p > m)) {
        throw std::invalid_argument(std::string(what) + ": needs p > m");
    }
    if (!(eps > 0.0 && eps < 0.5 * std::numbers::pi)) {
        throw std::invalid_argument(std::string(what) + ": eps must lie in (0, pi/2)");
    }
    if (eps < min_resolvable_eps(mesh)) {
        throw std::invalid_argument(std::string(what) + ": eps = " + std::to_string(eps)
                                    + " is below 4 edge layers (" + std::to_string(min_resolvable_eps(mesh))
                                    + ")");
    }
}

double smoothstep5(double s)
{
    s = std::clamp(s, 0.0, 1.0);
    return s * s * s * (s * (6.0 * s - 15.0) + 10.0);
}

// Points of the mesh as vectors in R^3; circles are embedded as the unit circle.
std::vector<Vec3> ambient_points(const DiscreteManifold& mesh)
{
    std::vector<Vec3> pts(mesh.vertex_count());
    for (std::size_t v = 0; v < pts.size(); ++v) {
        if (mesh.kind() == MeshKind::Circle) {
            const double th = 2.0 * std::numbers::pi * mesh.coordinate(v) / mesh.circle_length();
            pts[v] = Vec3(std::cos(th), std::sin(th), 0.0);
        } else {
            pts[v] = mesh.position(v);
        }
    }
    return pts;
}

ConformalFactor exp_of_terms(const std::vector<std::vector<double>>& terms, std::uint64_t seed, double amplitude)
{
    std::mt19937_64 gen(seed);
    std::vector<double> coeff(terms.size());
    for (double& c : coeff) c = amplitude * (2.0 * uniform01(gen()) - 1.0);
    const std::size_t n = terms.empty() ? 0 : terms.front().size();
    std::vector<double> out(n, 0.0);
    for (std::size_t k = 0; k < terms.size(); ++k) {
        for (std::size_t v = 0; v < n; ++v) out[v] += coeff[k] * terms[k][v];
    }
    for (double& x : out) x = std::exp(x);
    return ConformalFactor(std::move(out));
}

} // namespace

double uniform01(std::uint64_t bits)
{
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

ScalarField measure_density(const ConformalFactor& f, int m)
{
    return pointwise_power(f, 0.5 * m);
}

ScalarField energy_density_weight(const ConformalFactor& f, int m, double p)
{
    return pointwise_power(f, 0.5 * (m - p));
}

double plateau_value(double eps, double p, int m)
{
    if (!(p > m)) {
        throw std::invalid_argument("plateau_value: needs p > m");
    }
    return std::pow(eps, 4.0 * p / (m * (p - m)));
}

double min_resolvable_eps(const DiscreteManifold& mesh)
{
    double edge = mesh.max_edge_length();
    if (mesh.kind() == MeshKind::Circle) {
        edge *= 2.0 * std::numbers::pi / mesh.circle_length();
    } else {
        edge = 2.0 * std::asin(std::min(1.0, 0.5 * edge)); // chord -> arc
    }
    return 4.0 * edge;
}

ConformalFactor f_eps_singular(const DiscreteManifold& mesh, double eps, double p, int m)
{
    check_eps(mesh, eps, p, m, "f_eps_singular");
    const double plateau = plateau_value(eps, p, m);
    std::vector<double> out(mesh.vertex_count());
    for (std::size_t v = 0; v < out.size(); ++v) {
        out[v] = equator_distance(mesh, v) < eps ? 1.0 : plateau;
    }
    return ConformalFactor(std::move(out));
}

ConformalFactor f_eps_smooth(const DiscreteManifold& mesh, double eps, double p, int m)
{
    check_eps(mesh, eps, p, m, "f_eps_smooth");
    const double plateau = plateau_value(eps, p, m);
    std::vector<double> out(mesh.vertex_count());
    for (std::size_t v = 0; v < out.size(); ++v) {
        const double d = equator_distance(mesh, v);
        if (d >= eps) {
            out[v] = plateau;
        } else if (d <= 0.5 * eps) {
            out[v] = 1.0;
        } else {
            const double s = (eps - d) / (0.5 * eps);
            out[v] = std::min(plateau + (1.0 - plateau) * smoothstep5(s), 1.0);
        }
    }
    return ConformalFactor(std::move(out));
}

double volume(const DiscreteManifold& mesh, const ConformalFactor& f, int m)
{
    require_aligned(mesh, f.size(), "conformal factor");
    return integrate(mesh, measure_density(f, m));
}

ConformalFactor normalize_unit_volume(const DiscreteManifold& mesh, const ConformalFactor& f, int m)
{
    const double vol = volume(mesh, f, m);
    if (!(vol > 0.0) || !std::isfinite(vol)) {
        throw DegenerateInput("normalize_unit_volume: volume is not positive");
    }
    return f.scaled(std::pow(vol, -2.0 / m));
}

ConformalFactor random_smooth_factor(const DiscreteManifold& mesh, std::uint64_t seed, double amplitude)
{
    const auto pts = ambient_points(mesh);
    const std::size_t n = pts.size();
    std::vector<std::vector<double>> terms(9, std::vector<double>(n));
    for (std::size_t v = 0; v < n; ++v) {
        const double x = pts[v].x(), y = pts[v].y(), z = pts[v].z();
        const double t[9] = {x, y, z, x * y, y * z, z * x, x * x - y * y, 3 * z * z - 1, x * y * z};
        for (int k = 0; k < 9; ++k) terms[k][v] = t[k];
    }
    return exp_of_terms(terms, seed, amplitude);
}

ConformalFactor random_symmetric_factor(const DiscreteManifold& mesh, std::uint64_t seed, double amplitude)
{
    require_radial_mesh(mesh, "random_symmetric_factor");
    const auto pts = ambient_points(mesh);
    const Vec3 a = pts[*mesh.pole()];
    Vec3 e1, e2;
    orthonormal_complement(a, e1, e2);
    const std::size_t n = pts.size();
    std::vector<std::vector<double>> terms(7, std::vector<double>(n));
    for (std::size_t v = 0; v < n; ++v) {
        const double w = pts[v].dot(a), s = pts[v].dot(e1), t = pts[v].dot(e2);
        // every term is even in w
        const double tt[7] = {s, t, 3 * w * w - 1, s * t, s * s - t * t, w * w * s, w * w * t};
        for (int k = 0; k < 7; ++k) terms[k][v] = tt[k];
    }
    if (mesh.is_sphere_like()) {
        // average over mirror pairs so the symmetry is bitwise, not just to rounding
        const auto mirror = mirror_map(mesh);
        for (auto& term : terms) {
            std::vector<double> sym(n);
            for (std::size_t v = 0; v < n; ++v) sym[v] = 0.5 * (term[v] + term[mirror[v]]);
            term = std::move(sym);
        }
    }
    return exp_of_terms(terms, seed, amplitude);
}

} // namespace pspectra
