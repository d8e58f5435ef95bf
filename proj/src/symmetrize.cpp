#include "pspectra/psolve.hpp"

#include "powers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace pspectra {

double profile_value(std::span<const double> r, std::span<const double> values, double x)
{
    if (r.empty() || r.size() != values.size()) {
        throw std::invalid_argument("profile_value: empty or misaligned profile");
    }
    if (x <= r.front()) return values.front();
    if (x >= r.back()) return values.back();
    const auto k = static_cast<std::size_t>(std::upper_bound(r.begin(), r.end(), x) - r.begin()) - 1;
    const double s = (x - r[k]) / (r[k + 1] - r[k]);
    return values[k] + s * (values[k + 1] - values[k]);
}

namespace {

double profile_slope(std::span<const double> r, std::span<const double> values, double x)
{
    if (r.size() < 2 || x <= r.front() || x >= r.back()) return 0.0;
    const auto k = static_cast<std::size_t>(std::upper_bound(r.begin(), r.end(), x) - r.begin()) - 1;
    return (values[k + 1] - values[k]) / (r[k + 1] - r[k]);
}

// Longest edge measured as an angle in colatitude units.
double edge_angle(const DiscreteManifold& mesh)
{
    if (mesh.kind() == MeshKind::Circle) {
        return mesh.max_edge_length() * 2.0 * std::numbers::pi / mesh.circle_length();
    }
    return 2.0 * std::asin(std::min(1.0, 0.5 * mesh.max_edge_length()));
}

} // namespace

RadialProfile radial_average(const DiscreteManifold& mesh, const ScalarField& u, const ConformalFactor& f, double p,
                             int bands)
{
    if (!mesh.pole() || !(mesh.kind() == MeshKind::Circle || mesh.is_sphere_like())) {
        throw std::invalid_argument("radial_average: needs a circle or sphere mesh with a pole");
    }
    require_aligned(mesh, u.size(), "field");
    require_aligned(mesh, f.size(), "conformal factor");
    const auto r = colatitudes(mesh);
    const double rmax = mesh.kind() == MeshKind::Hemisphere ? 0.5 * std::numbers::pi : std::numbers::pi;
    const int finest = static_cast<int>(std::floor(rmax / (2.0 * edge_angle(mesh))));
    if (finest < 2) {
        throw std::invalid_argument("radial_average: mesh too coarse for two bands");
    }
    if (bands == 0) bands = finest;
    if (bands < 2 || bands > finest) {
        throw std::invalid_argument("radial_average: " + std::to_string(bands)
                                    + " bands would be thinner than two edge layers (max "
                                    + std::to_string(finest) + ")");
    }

    const detail::Powers pw(p);
    const auto mass = mesh.lumped_mass();
    const double width = rmax / bands;
    std::vector<double> sum(bands, 0.0), weight(bands, 0.0);
    for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
        const int k = std::min(bands - 1, static_cast<int>(r[v] / width));
        sum[k] += mass[v] * pw.abs_pow(u[v]);
        weight[k] += mass[v];
    }

    RadialProfile out;
    for (int k = 0; k <= bands; ++k) out.band_edges.push_back(k * width);
    for (int k = 0; k < bands; ++k) {
        if (!(weight[k] > 0.0)) {
            throw std::invalid_argument("radial_average: empty colatitude band");
        }
        out.r.push_back((k + 0.5) * width);
        out.ubar.push_back(std::pow(sum[k] / weight[k], 1.0 / p));
    }

    const int m = mesh.dim();
    const auto density = measure_density(f, m);
    for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
        out.pnorm_field += mass[v] * density[v] * pw.abs_pow(u[v]);
        out.pnorm_profile += mass[v] * density[v] * pw.abs_pow(profile_value(out.r, out.ubar, r[v]));
    }

    const RayleighFunctional rq(mesh, f, p);
    out.energy_field = rq.numerator(u.values());
    const auto ew = rq.element_weights();
    const int k = mesh.vertices_per_element();
    for (std::size_t e = 0; e < mesh.element_count(); ++e) {
        double re = 0.0;
        for (int v : mesh.element(e)) re += r[v];
        re /= k;
        out.energy_profile += ew[e] * pw.abs_pow(profile_slope(out.r, out.ubar, re));
    }
    return out;
}

SplitProfile split_band_plateau(std::span<const double> r, std::span<const double> ubar, double eps, double p)
{
    if (r.size() < 2 || r.size() != ubar.size()) {
        throw std::invalid_argument("split_band_plateau: profile needs at least two aligned points");
    }
    for (std::size_t i = 1; i < r.size(); ++i) {
        if (!(r[i] > r[i - 1])) throw std::invalid_argument("split_band_plateau: radii must increase");
    }
    const double half_pi = 0.5 * std::numbers::pi;
    const double rb = half_pi - eps;
    if (!(eps > 0.0) || rb < r.front() || rb > std::min(r.back(), half_pi)) {
        throw std::invalid_argument("split_band_plateau: pi/2 - eps lies outside the profile");
    }

    SplitProfile out;
    out.breakpoint = rb;
    const double wb = profile_value(r, ubar, rb);
    bool inserted = false;
    for (std::size_t i = 0; i < r.size() && r[i] <= half_pi; ++i) {
        if (!inserted && r[i] >= rb) {
            if (r[i] > rb) {
                out.r.push_back(rb);
                out.ubar.push_back(wb);
            }
            inserted = true;
        }
        out.r.push_back(r[i]);
        out.ubar.push_back(r[i] == rb ? wb : ubar[i]);
    }
    if (!inserted) {
        out.r.push_back(rb);
        out.ubar.push_back(wb);
    }

    const detail::Powers pw(p);
    const std::size_t n = out.r.size();
    out.v.resize(n);
    out.w.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.w[i] = out.r[i] <= rb ? out.ubar[i] : wb;
        out.v[i] = out.ubar[i] - out.w[i];
    }
    double scale_d = 0.0, scale_u = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double dr = out.r[i + 1] - out.r[i];
        scale_d = std::max(scale_d, pw.abs_pow((out.ubar[i + 1] - out.ubar[i]) / dr));
    }
    for (std::size_t i = 0; i < n; ++i) scale_u = std::max(scale_u, pw.abs_pow(out.ubar[i]));
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double dr = out.r[i + 1] - out.r[i];
        const double du = pw.abs_pow((out.ubar[i + 1] - out.ubar[i]) / dr);
        const double dv = pw.abs_pow((out.v[i + 1] - out.v[i]) / dr);
        const double dw = pw.abs_pow((out.w[i + 1] - out.w[i]) / dr);
        const double err = std::abs(du - dv - dw) / std::max(scale_d, std::numeric_limits<double>::min());
        out.derivative_identity_error = std::max(out.derivative_identity_error, err);
    }
    const double two_pm1 = std::pow(2.0, p - 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double excess = pw.abs_pow(out.ubar[i]) - two_pm1 * (pw.abs_pow(out.v[i]) + pw.abs_pow(out.w[i]));
        out.convexity_violation =
            std::max(out.convexity_violation, excess / std::max(scale_u, std::numeric_limits<double>::min()));
    }
    return out;
}

ScalarField reflect_even(const ScalarField& v, const DiscreteManifold& hemisphere, const DiscreteManifold& sphere)
{
    require_aligned(hemisphere, v.size(), "hemisphere field");
    const auto parent = hemisphere.parent_vertices();
    if (parent.size() != hemisphere.vertex_count()) {
        throw std::invalid_argument("reflect_even: hemisphere was not cut from a sphere mesh");
    }
    if (!sphere.pole() || !hemisphere.pole() || parent[*hemisphere.pole()] != *sphere.pole()) {
        throw std::invalid_argument("reflect_even: hemisphere and sphere poles differ");
    }
    const auto mirror = mirror_map(sphere);
    constexpr double unset = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> w(sphere.vertex_count(), unset);
    for (std::size_t i = 0; i < parent.size(); ++i) {
        if (parent[i] < 0 || static_cast<std::size_t>(parent[i]) >= w.size()) {
            throw std::invalid_argument("reflect_even: hemisphere parent index out of range");
        }
        w[parent[i]] = v[i];
    }
    for (std::size_t x = 0; x < w.size(); ++x) {
        if (std::isnan(w[x])) {
            const double mirrored = w[mirror[x]];
            if (std::isnan(mirrored)) {
                throw std::invalid_argument("reflect_even: vertex has no mirror image in the hemisphere");
            }
            w[x] = mirrored;
        }
    }
    return ScalarField(std::move(w));
}

void require_mirror_symmetric(const DiscreteManifold& sphere, const ConformalFactor& f)
{
    require_aligned(sphere, f.size(), "conformal factor");
    const auto mirror = mirror_map(sphere);
    for (std::size_t v = 0; v < f.size(); ++v) {
        const double a = f[v], b = f[mirror[v]];
        if (std::abs(a - b) > 1e-12 * std::max(a, b)) {
            throw std::invalid_argument("conformal factor is not symmetric under reflection through the equator");
        }
    }
}

CompareChain compare_chain(const DiscreteManifold& mesh, const ConformalFactor& smooth, const ConformalFactor& singular,
                           double p, const ScalarField& smooth_eigenfunction, double lambda_singular, double tolerance)
{
    require_aligned(mesh, smooth_eigenfunction.size(), "eigenfunction");
    const RayleighFunctional rs(mesh, smooth, p), re(mesh, singular, p);
    const auto& u = smooth_eigenfunction.data();
    CompareChain out;
    out.t = t_split_shift(u, re.vertex_weights(), p);
    std::vector<double> ut(u.size()), plus(u.size()), minus(u.size());
    for (std::size_t v = 0; v < u.size(); ++v) {
        plus[v] = std::max(u[v], 0.0);
        minus[v] = std::min(u[v], 0.0);
        ut[v] = out.t * plus[v] + minus[v];
    }
    out.smooth_quotient = rs.quotient(ut);
    out.singular_quotient = re.quotient(ut);
    out.lambda_singular = lambda_singular;
    out.plus_quotient = rs.quotient(plus);
    out.minus_quotient = rs.quotient(minus);
    out.majorant_ok = out.smooth_quotient >= out.singular_quotient * (1.0 - 1e-12);
    out.minimum_ok = out.singular_quotient >= lambda_singular * (1.0 - tolerance);
    out.halves_ok = std::abs(out.plus_quotient - out.minus_quotient)
                    <= 0.02 * std::max(out.plus_quotient, out.minus_quotient);
    return out;
}

} // namespace pspectra
