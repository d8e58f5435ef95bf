#include "pspectra/psolve.hpp"

#include "powers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace pspectra {

namespace {

void check_weights(std::span<const double> u, std::span<const double> weights, double p, const char* what)
{
    if (u.size() != weights.size()) {
        throw std::invalid_argument(std::string(what) + ": field and weights differ in length");
    }
    if (!(p > 1.0)) {
        throw std::invalid_argument(std::string(what) + ": needs p > 1");
    }
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw std::invalid_argument(std::string(what) + ": weights must be finite and >= 0");
        }
        total += w;
    }
    if (!(total > 0.0)) {
        throw std::invalid_argument(std::string(what) + ": weights are all zero");
    }
}

} // namespace

double p_shift(std::span<const double> u, std::span<const double> weights, double p)
{
    check_weights(u, weights, p, "p_shift");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    double wsum = 0.0, wmean = 0.0;
    for (std::size_t v = 0; v < u.size(); ++v) {
        if (weights[v] == 0.0) continue;
        lo = std::min(lo, u[v]);
        hi = std::max(hi, u[v]);
        wsum += weights[v];
        wmean += weights[v] * u[v];
    }
    if (!(hi > lo)) {
        throw DegenerateInput("p_shift: field is constant on the weighted vertices");
    }
    const detail::Powers pw(p);
    // g(c) = sum w phi(u - c) is strictly decreasing with g(lo) > 0 > g(hi)
    auto eval = [&](double c, double& slope, double& scale) {
        double g = 0.0;
        slope = 0.0;
        scale = 0.0;
        for (std::size_t v = 0; v < u.size(); ++v) {
            if (weights[v] == 0.0) continue;
            const double x = u[v] - c;
            const double phi = weights[v] * pw.signed_pow(x);
            g += phi;
            scale += std::abs(phi);
            slope -= weights[v] * pw.signed_pow_derivative(x);
        }
        return g;
    };

    double c = std::clamp(wmean / wsum, lo, hi);
    double step_old = hi - lo, step = step_old;
    for (int it = 0; it < 300; ++it) {
        double slope, scale;
        const double g = eval(c, slope, scale);
        if (g == 0.0 || std::abs(g) <= 1e-15 * scale) {
            return c;
        }
        (g > 0.0 ? lo : hi) = c;
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi))) {
            return c;
        }
        const double newton = std::isfinite(slope) && slope < 0.0 ? c - g / slope : std::numeric_limits<double>::quiet_NaN();
        step_old = step;
        if (std::isfinite(newton) && newton > lo && newton < hi && std::abs(2.0 * (newton - c)) <= std::abs(step_old)) {
            step = newton - c;
            c = newton;
        } else {
            step = 0.5 * (hi - lo);
            c = lo + step;
        }
    }
    return c;
}

double p_shift(const ScalarField& u, const ScalarField& weights, double p)
{
    return p_shift(u.values(), weights.values(), p);
}

// The balance s^{p-1} A+ = A- is solved in closed form.
double t_split_shift(std::span<const double> u, std::span<const double> weights, double p)
{
    check_weights(u, weights, p, "t_split_shift");
    const detail::Powers pw(p);
    double plus = 0.0, minus = 0.0;
    for (std::size_t v = 0; v < u.size(); ++v) {
        if (u[v] > 0.0) plus += weights[v] * pw.signed_pow(u[v]);
        else if (u[v] < 0.0) minus -= weights[v] * pw.signed_pow(u[v]);
    }
    if (!(plus > 0.0) || !(minus > 0.0)) {
        throw DegenerateInput("t_split_shift: field does not take both signs on the weighted vertices");
    }
    return std::pow(minus / plus, 1.0 / (p - 1.0));
}

double t_split_shift(const ScalarField& u, const ScalarField& weights, double p)
{
    return t_split_shift(u.values(), weights.values(), p);
}

} // namespace pspectra
