#include "pspectra/psolve.hpp"

#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>
#include <stdexcept>

namespace pspectra {

namespace {

using State = std::array<double, 2>; // (u, phi = |u'|^{p-2} u')

enum class Outcome { TooSmall, TooLarge };

// Integrate across (-h, h) and classify lambda by the far-end condition.
Outcome shoot(double p, ShootingMode mode, double h, double lambda)
{
    namespace ode = boost::numeric::odeint;
    const double q = 1.0 / (p - 1.0);
    auto rhs = [&](const State& x, State& dx, double) {
        dx[0] = std::copysign(std::pow(std::abs(x[1]), q), x[1]);
        dx[1] = -lambda * std::copysign(std::pow(std::abs(x[0]), p - 1.0), x[0]);
    };
    // scale-aware tolerances: u ~ h and phi ~ 1 (Dirichlet), u ~ 1 (Neumann)
    auto stepper = ode::make_dense_output(1e-14 * h, 1e-13, ode::runge_kutta_dopri5<State>());
    State x = mode == ShootingMode::Dirichlet ? State{0.0, 1.0} : State{1.0, 0.0};
    const double a = -h, b = h;
    stepper.initialize(x, a, 1e-3 * h);
    // Dirichlet: lambda too large once u returns to 0 inside (a, b).
    // Neumann: lambda too large once phi returns to 0 inside (a, b).
    const int watch = mode == ShootingMode::Dirichlet ? 0 : 1;
    bool left_start = false;
    while (stepper.current_time() < b) {
        stepper.do_step(rhs);
        const double t = stepper.current_time();
        State y = stepper.current_state();
        if (t >= b) {
            stepper.calc_state(b, y);
        }
        const double value = y[watch];
        // phi starts at exactly zero in the Neumann case and turns negative
        if (watch == 1 && !left_start) {
            if (value < 0.0) left_start = true;
            continue;
        }
        if (watch == 0 ? value <= 0.0 : value >= 0.0) {
            return t >= b && value == 0.0 ? Outcome::TooSmall : Outcome::TooLarge;
        }
    }
    return Outcome::TooSmall;
}

} // namespace

double shooting_oracle_1d(double p, ShootingMode mode, double halfwidth)
{
    if (!(p > 1.0) || !std::isfinite(p)) {
        throw std::invalid_argument("shooting_oracle_1d: needs p > 1");
    }
    if (!(halfwidth > 0.0) || !std::isfinite(halfwidth)) {
        throw std::invalid_argument("shooting_oracle_1d: halfwidth must be > 0");
    }
    // bracket by doubling from a scale-aware guess
    double lo = 0.25 * std::pow(halfwidth, -p), hi = 4.0 * std::pow(halfwidth, -p);
    int guard = 0;
    while (shoot(p, mode, halfwidth, lo) == Outcome::TooLarge) {
        hi = lo;
        lo *= 0.5;
        if (++guard > 200) throw std::runtime_error("shooting_oracle_1d: bracket failure (lower end)");
    }
    guard = 0;
    while (shoot(p, mode, halfwidth, hi) == Outcome::TooSmall) {
        lo = hi;
        hi *= 2.0;
        if (++guard > 200) throw std::runtime_error("shooting_oracle_1d: bracket failure (upper end)");
    }
    for (int it = 0; it < 200 && hi - lo > 2e-16 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (shoot(p, mode, halfwidth, mid) == Outcome::TooSmall ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace pspectra
