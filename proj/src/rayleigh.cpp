#include "pspectra/psolve.hpp"

#include "powers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pspectra {

RayleighFunctional::RayleighFunctional(const DiscreteManifold& mesh, const ConformalFactor& f, double p, double delta)
    : mesh_(&mesh), p_(p)
{
    if (!(p > 1.0) || !std::isfinite(p)) {
        throw std::invalid_argument("p must be a finite number > 1");
    }
    require_aligned(mesh, f.size(), "conformal factor");
    set_delta(delta);

    const int m = mesh.dim();
    const auto energy = energy_density_weight(f, m, p);
    const auto density = measure_density(f, m);
    const int k = mesh.vertices_per_element();
    element_weight_.resize(mesh.element_count());
    for (std::size_t e = 0; e < element_weight_.size(); ++e) {
        double mean = 0.0;
        for (int v : mesh.element(e)) mean += energy[v];
        element_weight_[e] = mesh.element_measure(e) * mean / k;
    }
    const auto mass = mesh.lumped_mass();
    vertex_weight_.resize(mesh.vertex_count());
    for (std::size_t v = 0; v < vertex_weight_.size(); ++v) {
        vertex_weight_[v] = mass[v] * density[v];
    }
}

void RayleighFunctional::set_delta(double delta)
{
    if (!(delta >= 0.0) || !std::isfinite(delta)) {
        throw std::invalid_argument("regularization delta must be finite and >= 0");
    }
    delta_ = delta;
    delta_p_ = delta > 0.0 ? std::pow(delta, p_) : 0.0;
}

void RayleighFunctional::element_gradients_sq(std::span<const double> u, std::span<double> s) const
{
    const auto& mesh = *mesh_;
    const bool segments = mesh.dim() == 1;
    for (std::size_t e = 0; e < mesh.element_count(); ++e) {
        auto el = mesh.element(e);
        const auto& g = mesh.inverse_gram(e);
        const double d1 = u[el[1]] - u[el[0]];
        if (segments) {
            s[e] = g[0] * d1 * d1;
        } else {
            const double d2 = u[el[2]] - u[el[0]];
            s[e] = std::max(0.0, g[0] * d1 * d1 + 2.0 * g[1] * d1 * d2 + g[2] * d2 * d2);
        }
    }
}

double RayleighFunctional::numerator(std::span<const double> u) const
{
    require_aligned(*mesh_, u.size(), "field");
    const detail::Powers pw(p_);
    const auto& mesh = *mesh_;
    const double d2 = delta_ * delta_;
    const bool segments = mesh.dim() == 1;
    double total = 0.0;
    for (std::size_t e = 0; e < mesh.element_count(); ++e) {
        auto el = mesh.element(e);
        const auto& g = mesh.inverse_gram(e);
        const double d1 = u[el[1]] - u[el[0]];
        double s;
        if (segments) {
            s = g[0] * d1 * d1;
        } else {
            const double dd = u[el[2]] - u[el[0]];
            s = std::max(0.0, g[0] * d1 * d1 + 2.0 * g[1] * d1 * dd + g[2] * dd * dd);
        }
        total += element_weight_[e] * (pw.half_pow(s + d2) - delta_p_);
    }
    return total;
}

double RayleighFunctional::numerator(std::span<const double> u, std::span<double> grad) const
{
    require_aligned(*mesh_, u.size(), "field");
    require_aligned(*mesh_, grad.size(), "gradient");
    const detail::Powers pw(p_);
    const auto& mesh = *mesh_;
    const double d2 = delta_ * delta_;
    const bool segments = mesh.dim() == 1;
    std::fill(grad.begin(), grad.end(), 0.0);
    double total = 0.0;
    for (std::size_t e = 0; e < mesh.element_count(); ++e) {
        auto el = mesh.element(e);
        const auto& g = mesh.inverse_gram(e);
        const double w = element_weight_[e];
        const double d1 = u[el[1]] - u[el[0]];
        if (segments) {
            const double s = g[0] * d1 * d1;
            total += w * (pw.half_pow(s + d2) - delta_p_);
            if (s + d2 > 0.0) {
                const double c = 2.0 * w * pw.half_pow_derivative(s + d2) * g[0] * d1;
                grad[el[1]] += c;
                grad[el[0]] -= c;
            }
        } else {
            const double dd = u[el[2]] - u[el[0]];
            const double s = std::max(0.0, g[0] * d1 * d1 + 2.0 * g[1] * d1 * dd + g[2] * dd * dd);
            total += w * (pw.half_pow(s + d2) - delta_p_);
            if (s + d2 > 0.0) {
                const double c = 2.0 * w * pw.half_pow_derivative(s + d2);
                const double g1 = c * (g[0] * d1 + g[1] * dd);
                const double g2 = c * (g[1] * d1 + g[2] * dd);
                grad[el[1]] += g1;
                grad[el[2]] += g2;
                grad[el[0]] -= g1 + g2;
            }
        }
    }
    return total;
}

double RayleighFunctional::denominator(std::span<const double> u) const
{
    require_aligned(*mesh_, u.size(), "field");
    const detail::Powers pw(p_);
    double total = 0.0;
    for (std::size_t v = 0; v < u.size(); ++v) {
        total += vertex_weight_[v] * pw.abs_pow(u[v]);
    }
    return total;
}

double RayleighFunctional::denominator(std::span<const double> u, std::span<double> grad) const
{
    require_aligned(*mesh_, u.size(), "field");
    require_aligned(*mesh_, grad.size(), "gradient");
    const detail::Powers pw(p_);
    double total = 0.0;
    for (std::size_t v = 0; v < u.size(); ++v) {
        total += vertex_weight_[v] * pw.abs_pow(u[v]);
        grad[v] = p_ * vertex_weight_[v] * pw.signed_pow(u[v]);
    }
    return total;
}

double RayleighFunctional::quotient(std::span<const double> u) const
{
    const double den = denominator(u);
    if (!(den > 0.0)) {
        throw DegenerateInput("Rayleigh quotient: zero denominator");
    }
    return numerator(u) / den;
}

double RayleighFunctional::constraint_integral(std::span<const double> u) const
{
    const detail::Powers pw(p_);
    double total = 0.0;
    for (std::size_t v = 0; v < u.size(); ++v) {
        total += vertex_weight_[v] * pw.signed_pow(u[v]);
    }
    return total;
}

namespace {

void require_nonconstant(std::span<const double> u, const char* what)
{
    const auto [lo, hi] = std::minmax_element(u.begin(), u.end());
    if (u.empty() || !(*hi - *lo > 1e-14 * std::max({1.0, std::abs(*lo), std::abs(*hi)}))) {
        throw DegenerateInput(std::string(what) + ": field is constant");
    }
}

} // namespace

double rayleigh_quotient(const DiscreteManifold& mesh, const ConformalFactor& f, double p, const ScalarField& u)
{
    require_aligned(mesh, u.size(), "field");
    require_nonconstant(u.values(), "rayleigh_quotient");
    return RayleighFunctional(mesh, f, p).quotient(u.values());
}

double admissible_quotient(const DiscreteManifold& mesh, const ConformalFactor& f, double p, const ScalarField& u)
{
    require_aligned(mesh, u.size(), "field");
    require_nonconstant(u.values(), "admissible_quotient");
    const RayleighFunctional rq(mesh, f, p);
    const double c = p_shift(u.values(), rq.vertex_weights(), p);
    std::vector<double> shifted(u.data());
    for (double& x : shifted) x -= c;
    return rq.quotient(shifted);
}

ScalarField constraint_weights(const DiscreteManifold& mesh, const ConformalFactor& f)
{
    const RayleighFunctional rq(mesh, f, 2.0);
    auto w = rq.vertex_weights();
    return ScalarField(std::vector<double>(w.begin(), w.end()));
}

} // namespace pspectra
