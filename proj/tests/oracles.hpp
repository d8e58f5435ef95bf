#pragma once

// Independent reference computations used only by the tests.

#include "pspectra/mesh.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace oracle {

// pi_p = 2 pi / (p sin(pi / p)); the first Dirichlet eigenvalue of (-h, h) is
// (p - 1) (pi_p / (2 h))^p.
inline double dirichlet_interval(double p, double h)
{
    const double pi_p = 2.0 * std::numbers::pi / (p * std::sin(std::numbers::pi / p));
    return (p - 1.0) * std::pow(pi_p / (2.0 * h), p);
}

// Neumann on (-h, h): the eigenfunction is a half period of the Dirichlet
// problem on an interval of the same length, so the value coincides.
inline double neumann_interval(double p, double h) { return dirichlet_interval(p, h); }

// Lumped P1 eigenvalue of the uniform n-gon of length L: (2 - 2 cos(2 pi / n)) / h^2.
inline double circle_p2_discrete(int n, double length)
{
    const double h = length / n;
    return (2.0 - 2.0 * std::cos(2.0 * std::numbers::pi / n)) / (h * h);
}

// int over S^2 of |z|^p = 4 pi / (p + 1)
inline double sphere_abs_moment(double p) { return 4.0 * std::numbers::pi / (p + 1.0); }

// s with sum w |s u+ + u-|^{p-2}(s u+ + u-) = 0, by plain bisection.
inline double t_shift_bisection(std::span<const double> u, std::span<const double> w, double p)
{
    auto g = [&](double s) {
        double acc = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double x = u[i] > 0 ? s * u[i] : u[i];
            acc += w[i] * std::copysign(std::pow(std::abs(x), p - 1.0), x);
        }
        return acc;
    };
    double lo = 0.0, hi = 1.0;
    while (g(hi) < 0.0) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Classical center-of-mass normalization: the ball automorphism T_b moving b to
// the origin balances the measure when b minimizes
//   E(b) = sum w log(|x - b|^2 / (1 - |b|^2)),
// which is convex along hyperbolic geodesics. Newton with a finite-difference
// Hessian of the analytic gradient, step-halving to stay inside the ball.
struct CenterOfMass {
    Eigen::Vector3d b = Eigen::Vector3d::Zero();
    std::vector<Eigen::Vector3d> image;
};

inline Eigen::Vector3d ball_map(const Eigen::Vector3d& b, const Eigen::Vector3d& x)
{
    const double d2 = (x - b).squaredNorm();
    return ((1.0 - b.squaredNorm()) * (x - b) - d2 * b) / d2;
}

inline CenterOfMass center_of_mass_balance(std::span<const Eigen::Vector3d> xs, std::span<const double> w)
{
    double total = 0.0;
    for (double x : w) total += x;
    auto energy = [&](const Eigen::Vector3d& b) {
        double e = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) e += w[i] * std::log((xs[i] - b).squaredNorm());
        return e / total - std::log(1.0 - b.squaredNorm());
    };
    auto grad = [&](const Eigen::Vector3d& b) {
        Eigen::Vector3d g = Eigen::Vector3d::Zero();
        for (std::size_t i = 0; i < xs.size(); ++i) g -= 2.0 * w[i] * (xs[i] - b) / (xs[i] - b).squaredNorm();
        return Eigen::Vector3d(g / total + 2.0 * b / (1.0 - b.squaredNorm()));
    };
    CenterOfMass out;
    Eigen::Vector3d& b = out.b;
    for (int it = 0; it < 100; ++it) {
        const Eigen::Vector3d g = grad(b);
        if (g.norm() < 1e-14) break;
        Eigen::Matrix3d H;
        const double h = 1e-7;
        for (int j = 0; j < 3; ++j) {
            Eigen::Vector3d e = Eigen::Vector3d::Zero();
            e[j] = h;
            H.col(j) = (grad(b + e) - grad(b - e)) / (2.0 * h);
        }
        Eigen::Vector3d step = -H.ldlt().solve(g);
        if (!step.allFinite() || step.dot(g) >= 0.0) step = -g;
        const double e0 = energy(b);
        double a = 1.0;
        while (a > 1e-12 && ((b + a * step).norm() >= 1.0 || !(energy(b + a * step) <= e0))) a *= 0.5;
        if (a <= 1e-12) break;
        b += a * step;
    }
    for (const auto& x : xs) out.image.push_back(ball_map(b, x));
    return out;
}

} // namespace oracle
