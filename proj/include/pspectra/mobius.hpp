#pragma once

#include "pspectra/conformal.hpp"
#include "pspectra/mesh.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace pspectra {

using Vec2 = Eigen::Vector2d;

/// Stereographic chart of S^2 from pole a onto the plane orthogonal to a,
/// expressed in the frame orthonormal_complement(a). Rejects x within 1e-9 of a.
Vec2 stereographic(const Vec3& a, const Vec3& x);
Vec3 inverse_stereographic(const Vec3& a, const Vec2& z);

/// The conformal dilation gamma_t^a of S^2: conjugate of z -> e^{(1-t)/t} z by
/// the stereographic chart from a. Fixes a and -a; t = 1 is the identity.
class MobiusMap {
public:
    MobiusMap(const Vec3& pole, double t);

    static MobiusMap identity() { return MobiusMap(Vec3::UnitZ(), 1.0); }

    /// v = log(dilation) * a; v = 0 is the identity. Inverse of boost_vector().
    static MobiusMap from_boost(const Vec3& v);

    const Vec3& pole() const { return pole_; }
    double t() const { return t_; }
    double dilation() const; // e^{(1-t)/t}, may overflow to inf for tiny t
    Vec3 boost_vector() const;

    Vec3 apply(const Vec3& x) const;
    std::vector<Vec3> apply(std::span<const Vec3> xs) const;

    /// gamma_t^{-a}, which undoes gamma_t^a.
    MobiusMap inverse() const { return MobiusMap(-pole_, t_); }

private:
    Vec3 pole_;
    double t_;
    double kappa_; // e^{-(1-t)/t} in [0, 1]
};

Vec3 apply_gamma(const MobiusMap& map, const Vec3& x);

/// F_i = (1 / total) sum_v W_v |(gamma phi)_i|^{p-2} (gamma phi)_i with W_v =
/// M_v * density_v and total = sum W_v.
struct MomentVector {
    Vec3 components = Vec3::Zero();
    double measure_total = 0.0;
    double norm() const { return components.norm(); }
};

MomentVector moment_vector(const DiscreteManifold& mesh, std::span<const Vec3> image, const ScalarField& density,
                           double p, const MobiusMap& map);

struct BalanceResult {
    MobiusMap map = MobiusMap::identity();
    double moment_norm = 0.0;
    int evaluations = 0;
    bool converged = false;
};

/// Finds gamma with |F| <= tol: grid over poles x log-spaced t, then damped
/// Newton in boost coordinates with a Nelder-Mead fallback. Returns the best
/// candidate, flagged, when tol is not reached.
BalanceResult balance(const DiscreteManifold& mesh, std::span<const Vec3> image, const ScalarField& density, double p,
                      double tol);

/// (n+1)^{|p/2-1|} * int |d psi|^p f^{(m-p)/2}, |d psi| the Hilbert-Schmidt norm
/// of the coordinate differentials of the (balanced) map psi. Requires unit
/// volume for f and a moment defect of at most 10 * tol.
double lemma2_bound(const DiscreteManifold& mesh, const ConformalFactor& f, std::span<const Vec3> balanced_image,
                    double p, int n, double tol);

/// int |d psi|^p f^{(m-p)/2} without prefactor or checks.
double map_p_energy(const DiscreteManifold& mesh, const ConformalFactor& f, std::span<const Vec3> image, double p);

/// Total area of the flat image triangles.
double image_area(const DiscreteManifold& mesh, std::span<const Vec3> image);

struct SupVolumeResult {
    double value = 0.0;
    MobiusMap map = MobiusMap::identity();
    double identity_value = 0.0;
    int evaluations = 0;
    bool budget_exhausted = false; // the value is a lower estimate either way
};

SupVolumeResult sup_volume_over_gamma(const DiscreteManifold& mesh, std::span<const Vec3> image, int budget = 4000);

/// Gaps of the elementary coordinate inequalities; each is <= 0 when the
/// inequality holds. psi is a unit vector of R^{n+1}; s holds the |d psi_i|^2.
///   num1 (p >= 2): sum s_i^{p/2} - (sum s_i)^{p/2}
///   den1 (p >= 2): (n+1)^{1-p/2} - sum |psi_i|^p
///   den2 (p <= 2): sum |psi_i|^2 - sum |psi_i|^p
///   num2 (p <= 2): sum s_i^{p/2} - (n+1)^{1-p/2} (sum s_i)^{p/2}
/// The num gaps are relative to (sum s_i)^{p/2}.
double gap_num1(std::span<const double> s, double p);
double gap_den1(std::span<const double> psi, double p);
double gap_den2(std::span<const double> psi, double p);
double gap_num2(std::span<const double> s, double p);

} // namespace pspectra
