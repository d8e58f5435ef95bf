#include "pspectra/bounds.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pspectra {

double theorem1_bound(double p, int m, int n, double vnc)
{
    if (!(p > 1.0)) throw std::invalid_argument("theorem1_bound: needs p > 1");
    if (p > m) throw std::invalid_argument("theorem1_bound: needs p <= m");
    if (m > n) throw std::invalid_argument("theorem1_bound: needs m <= n");
    if (!(vnc > 0.0) || !std::isfinite(vnc)) throw std::invalid_argument("theorem1_bound: Vnc must be > 0");
    return std::pow(m, 0.5 * p) * std::pow(n + 1.0, std::abs(0.5 * p - 1.0)) * std::pow(vnc, p / m);
}

double corollary_surface_bound(double p, int genus, bool orientable)
{
    if (!(p > 1.0) || p > 2.0) throw std::invalid_argument("corollary_surface_bound: needs 1 < p <= 2");
    if (genus < 0) throw std::invalid_argument("corollary_surface_bound: genus must be >= 0");
    const double e = std::abs(0.5 * p - 1.0);
    const double kp = orientable ? std::pow(3.0, e) * std::pow(8.0 * std::numbers::pi, 0.5 * p)
                                 : std::pow(5.0, e) * std::pow(24.0 * std::numbers::pi, 0.5 * p);
    return kp * std::pow(static_cast<double>((genus + 3) / 2), 0.5 * p);
}

CanonicalSphere parse_canonical_sphere(const std::string& tag)
{
    if (tag == "S1" || tag == "s1") return CanonicalSphere::S1;
    if (tag == "S2" || tag == "s2") return CanonicalSphere::S2;
    throw std::invalid_argument("unsupported manifold tag '" + tag + "' (expected S1 or S2)");
}

double canonical_conformal_volume(CanonicalSphere sphere)
{
    return conformal_volume_from_eigenvalue(sphere, sphere == CanonicalSphere::S1 ? 1.0 : 2.0);
}

double conformal_volume_from_eigenvalue(CanonicalSphere sphere, double lambda)
{
    if (!(lambda > 0.0)) throw std::invalid_argument("conformal_volume_from_eigenvalue: lambda must be > 0");
    const int m = sphere == CanonicalSphere::S1 ? 1 : 2;
    const double vol = sphere == CanonicalSphere::S1 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi;
    return std::pow(lambda / m, 0.5 * m) * vol;
}

double evaluate_bound(const BoundSource& source, double p, int m)
{
    if (source.kind == BoundSource::Kind::Theorem1) return theorem1_bound(p, m, source.n, source.vnc);
    if (m != 2) throw std::invalid_argument("corollary bound applies to surfaces only");
    return corollary_surface_bound(p, source.genus, source.orientable);
}

BoundReport compare_bound(const BoundSource& source, double p, int m, double lambda, double tolerance, bool converged)
{
    BoundReport r;
    r.source = source.kind == BoundSource::Kind::Theorem1 ? "theorem1" : "corollary";
    r.bound_value = evaluate_bound(source, p, m);
    r.computed_lambda = lambda;
    r.slack = r.bound_value - lambda;
    r.p = p;
    r.m = m;
    r.n = source.n;
    r.vnc = source.vnc;
    r.genus = source.genus;
    r.orientable = source.orientable;
    r.tolerance = tolerance;
    r.converged = converged;
    r.holds = std::isfinite(lambda) && lambda <= r.bound_value * (1.0 + tolerance);
    return r;
}

BoundReport verify_bound(const DiscreteManifold& mesh, const ConformalFactor& f, double p, const BoundSource& source,
                         double tolerance, const SolveOptions& base)
{
    const int m = mesh.dim();
    const double vol = volume(mesh, f, m);
    if (std::abs(vol - 1.0) > 1e-6) {
        throw std::invalid_argument("verify_bound: metric must have unit volume (got " + std::to_string(vol) + ")");
    }
    if (!(p > 1.0) || p > m) throw std::invalid_argument("verify_bound: needs 1 < p <= m");
    const double bound = evaluate_bound(source, p, m); // validate before the solve
    (void)bound;
    SolveOptions opts = base;
    opts.p = p;
    const auto res = solve_closed(mesh, f, opts);
    return compare_bound(source, p, m, res.lambda, tolerance, res.converged);
}

} // namespace pspectra
