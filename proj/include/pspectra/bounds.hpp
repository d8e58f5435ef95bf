#pragma once

#include "pspectra/conformal.hpp"
#include "pspectra/mesh.hpp"
#include "pspectra/psolve.hpp"

#include <string>

namespace pspectra {

/// m^{p/2} (n+1)^{|p/2-1|} Vnc^{p/m}; needs 1 < p <= m <= n and Vnc > 0.
double theorem1_bound(double p, int m, int n, double vnc);

/// k_p [(genus + 3) / 2]^{p/2} with k_p = 3^{|p/2-1|} (8 pi)^{p/2} (orientable)
/// or 5^{|p/2-1|} (24 pi)^{p/2}; needs 1 < p <= 2.
double corollary_surface_bound(double p, int genus, bool orientable);

enum class CanonicalSphere { S1, S2 };

CanonicalSphere parse_canonical_sphere(const std::string& tag);

/// Conformal volume of the round S^m: Vol(S^m, (lambda_{1,2} / m) can) with
/// lambda_{1,2} = m, i.e. 2 pi for S^1 and 4 pi for S^2.
double canonical_conformal_volume(CanonicalSphere sphere);

/// Vol(S^m, (lambda / m) can) = (lambda / m)^{m/2} Vol(S^m, can).
double conformal_volume_from_eigenvalue(CanonicalSphere sphere, double lambda);

struct BoundSource {
    enum class Kind { Theorem1, Corollary } kind = Kind::Theorem1;
    int n = 2;
    double vnc = 0.0;
    int genus = 0;
    bool orientable = true;

    static BoundSource theorem1(int n, double vnc) { return {Kind::Theorem1, n, vnc, 0, true}; }
    static BoundSource corollary(int genus, bool orientable) { return {Kind::Corollary, 2, 0.0, genus, orientable}; }
};

struct BoundReport {
    std::string source; // "theorem1" or "corollary"
    double bound_value = 0.0;
    double computed_lambda = 0.0;
    double slack = 0.0; // bound - lambda
    double p = 0.0;
    int m = 0;
    int n = 0;
    double vnc = 0.0;
    int genus = 0;
    bool orientable = true;
    double tolerance = 0.0;
    bool converged = false;
    bool holds = false; // lambda <= bound * (1 + tolerance)
};

double evaluate_bound(const BoundSource& source, double p, int m);

/// Fills a report from an already computed eigenvalue.
BoundReport compare_bound(const BoundSource& source, double p, int m, double lambda, double tolerance,
                          bool converged = true);

/// Solves the closed problem for f (unit volume within 1e-6 required) and
/// compares against the requested bound.
BoundReport verify_bound(const DiscreteManifold& mesh, const ConformalFactor& f, double p, const BoundSource& source,
                         double tolerance = 0.02, const SolveOptions& base = {});

} // namespace pspectra
