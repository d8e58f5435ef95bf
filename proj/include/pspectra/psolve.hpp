#pragma once

#include "pspectra/conformal.hpp"
#include "pspectra/mesh.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pspectra {

/// Discrete p-Rayleigh quotient N(u) / D(u) for the metric f * g.
///
/// N(u) = sum_e |E_e| * mean_e(f^{(m-p)/2}) * psi(|du|_e^2),
/// D(u) = sum_v M_v f_v^{m/2} |u_v|^p,
/// with psi(s) = (s + delta^2)^{p/2} - delta^p (psi(s) = s^{p/2} at delta = 0).
/// Keeps a reference to the mesh.
class RayleighFunctional {
public:
    RayleighFunctional(const DiscreteManifold& mesh, const ConformalFactor& f, double p, double delta = 0.0);

    const DiscreteManifold& mesh() const { return *mesh_; }
    double p() const { return p_; }
    int m() const { return mesh_->dim(); }
    double delta() const { return delta_; }
    void set_delta(double delta);

    /// |E_e| * element mean of f^{(m-p)/2}
    std::span<const double> element_weights() const { return element_weight_; }
    /// M_v * f_v^{m/2}; the weights of the admissibility constraint
    std::span<const double> vertex_weights() const { return vertex_weight_; }

    double numerator(std::span<const double> u) const;
    double denominator(std::span<const double> u) const;
    double numerator(std::span<const double> u, std::span<double> grad) const;
    double denominator(std::span<const double> u, std::span<double> grad) const;
    double quotient(std::span<const double> u) const;

    /// sum_v W_v |u_v|^{p-2} u_v
    double constraint_integral(std::span<const double> u) const;

    void element_gradients_sq(std::span<const double> u, std::span<double> s) const;

private:
    const DiscreteManifold* mesh_;
    double p_;
    double delta_ = 0.0;
    double delta_p_ = 0.0;
    std::vector<double> element_weight_;
    std::vector<double> vertex_weight_;
};

/// Quotient of u as given (no shift). Throws DegenerateInput for constant u.
double rayleigh_quotient(const DiscreteManifold& mesh, const ConformalFactor& f, double p, const ScalarField& u);

/// Quotient of u - p_shift(u), the admissible representative for closed and
/// Neumann problems.
double admissible_quotient(const DiscreteManifold& mesh, const ConformalFactor& f, double p, const ScalarField& u);

/// The c with sum_v w_v |u_v - c|^{p-2} (u_v - c) = 0. Unique, in [min u, max u].
double p_shift(std::span<const double> u, std::span<const double> weights, double p);
double p_shift(const ScalarField& u, const ScalarField& weights, double p);

/// The s >= 0 balancing s u^+ + u^- against the weights.
double t_split_shift(std::span<const double> u, std::span<const double> weights, double p);
double t_split_shift(const ScalarField& u, const ScalarField& weights, double p);

/// Per-vertex constraint weights M_v f_v^{m/2}.
ScalarField constraint_weights(const DiscreteManifold& mesh, const ConformalFactor& f);

struct SolveOptions {
    double p = 2.0;
    int max_iterations = 5000;
    double tolerance = 1e-13;         // relative quotient decrease counted as stagnation
    double residual_tolerance = 1e-7; // stationarity residual that ends the final stage
    double delta = 1e-8;              // final regularization
    bool continuation = true;         // delta stages 1e-2 -> delta (p < 2 only)
    int multistart = 3;
    std::uint64_t seed = 1;
    std::optional<ScalarField> warm_start;
};

struct SpectralResult {
    double lambda = 0.0;
    ScalarField eigenfunction;
    double constraint_defect = 0.0;
    double gradient_residual = 0.0; // |grad N - lambda grad D| / |grad N|
    int iterations = 0;
    int restarts = 0;
    bool converged = false;
    int best_start = 0;
    std::vector<double> start_lambdas;
    std::vector<double> trace;     // regularized quotient after each accepted step
    std::vector<int> trace_stage;  // continuation stage of each trace entry
};

void validate(const SolveOptions& opts);

SpectralResult solve_closed(const DiscreteManifold& mesh, const ConformalFactor& f, const SolveOptions& opts);
SpectralResult solve_neumann(const DiscreteManifold& mesh, const ConformalFactor& f, const SolveOptions& opts);
SpectralResult solve_dirichlet(const DiscreteManifold& mesh, const SolveOptions& opts);

enum class ShootingMode { Dirichlet, Neumann };

/// First eigenvalue of (|u'|^{p-2}u')' + lambda |u|^{p-2}u = 0 on (-h, h) by
/// shooting from the left end and bisecting lambda.
double shooting_oracle_1d(double p, ShootingMode mode, double halfwidth);

struct RadialProfile {
    std::vector<double> band_edges; // K + 1 colatitudes
    std::vector<double> r;          // band centers
    std::vector<double> ubar;       // (band mean of |u|^p)^{1/p}
    double pnorm_field = 0.0;       // int |u|^p f^{m/2}
    double pnorm_profile = 0.0;     // int ubar(r)^p f^{m/2}
    double energy_field = 0.0;      // int |du|^p f^{(m-p)/2}
    double energy_profile = 0.0;    // int |ubar'|^p f^{(m-p)/2}
};

/// Band averages over colatitude bands. bands = 0 picks the finest binning
/// with at least two edge layers per band; finer requests are rejected.
RadialProfile radial_average(const DiscreteManifold& mesh, const ScalarField& u, const ConformalFactor& f, double p,
                             int bands = 0);

/// Piecewise-linear interpolation of a profile, constant beyond its ends.
double profile_value(std::span<const double> r, std::span<const double> values, double x);

struct SplitProfile {
    std::vector<double> r; // input grid on [0, pi/2] plus the breakpoint pi/2 - eps
    std::vector<double> ubar;
    std::vector<double> v;
    std::vector<double> w;
    double breakpoint = 0.0;
    double derivative_identity_error = 0.0; // max | |u'|^p - |v'|^p - |w'|^p | over segments
    double convexity_violation = 0.0;       // max of |u|^p - 2^{p-1}(|v|^p + |w|^p) over nodes
};

SplitProfile split_band_plateau(std::span<const double> r, std::span<const double> ubar, double eps, double p);

/// Even extension of a hemisphere field to the sphere it was cut from.
ScalarField reflect_even(const ScalarField& v, const DiscreteManifold& hemisphere, const DiscreteManifold& sphere);

/// Throws unless f(x) = f(mirror x) to 1e-12 relative.
void require_mirror_symmetric(const DiscreteManifold& sphere, const ConformalFactor& f);

struct CompareChain {
    double t = 1.0;            // split shift making u_t admissible for the singular factor
    double smooth_quotient;    // R~(u_t)
    double singular_quotient;  // R_eps(u_t)
    double lambda_singular;    // solved with the singular factor
    double plus_quotient;      // R~(u^+)
    double minus_quotient;     // R~(u^-)
    bool majorant_ok;          // R~(u_t) >= R_eps(u_t)
    bool minimum_ok;           // R_eps(u_t) >= lambda_singular (within tolerance)
    bool halves_ok;            // R~(u^+), R~(u^-) within 2%
};

CompareChain compare_chain(const DiscreteManifold& mesh, const ConformalFactor& smooth, const ConformalFactor& singular,
                           double p, const ScalarField& smooth_eigenfunction, double lambda_singular,
                           double tolerance = 1e-6);

} // namespace pspectra
