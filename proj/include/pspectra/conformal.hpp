#pragma once

#include "pspectra/mesh.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace pspectra {

/// Strictly positive vertex field f; the metric it describes is f * g.
class ConformalFactor {
public:
    ConformalFactor() = default;
    explicit ConformalFactor(std::vector<double> values);

    static ConformalFactor constant(std::size_t size, double value);

    ConformalFactor scaled(double c) const;

    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    std::span<const double> values() const { return values_; }
    const std::vector<double>& data() const { return values_; }

private:
    std::vector<double> values_;
};

/// f^{m/2}: volume density of f * g against the base measure.
ScalarField measure_density(const ConformalFactor& f, int m);

/// f^{(m-p)/2}: weight turning base |du|^p into the energy density of f * g.
ScalarField energy_density_weight(const ConformalFactor& f, int m, double p);

/// eps^{4p / (m (p - m))}, the value of the blow-up family away from the band.
double plateau_value(double eps, double p, int m);

/// Smallest band half-width the mesh resolves: 4 edge layers, measured in
/// colatitude units.
double min_resolvable_eps(const DiscreteManifold& mesh);

/// Radial step factor: 1 within eps of the equator, the plateau value elsewhere.
ConformalFactor f_eps_singular(const DiscreteManifold& mesh, double eps, double p, int m);

/// Smooth minorant of f_eps_singular: 1 on the inner half band, plateau value
/// outside the band, quintic smoothstep in between.
ConformalFactor f_eps_smooth(const DiscreteManifold& mesh, double eps, double p, int m);

double volume(const DiscreteManifold& mesh, const ConformalFactor& f, int m);

/// volume^{-2/m} * f, so the rescaled metric has volume one.
ConformalFactor normalize_unit_volume(const DiscreteManifold& mesh, const ConformalFactor& f, int m);

/// exp of a random combination of low-degree polynomials in the ambient
/// coordinates; coefficients uniform in [-amplitude, amplitude].
ConformalFactor random_smooth_factor(const DiscreteManifold& mesh, std::uint64_t seed, double amplitude = 0.5);

/// Same family restricted to terms invariant under reflection through the
/// pole's equator, so f(x) = f(mirror x).
ConformalFactor random_symmetric_factor(const DiscreteManifold& mesh, std::uint64_t seed, double amplitude = 0.5);

/// Portable uniform draw in [0, 1) from a 64-bit engine state.
double uniform01(std::uint64_t bits);

} // namespace pspectra
