#include "pspectra/psolve.hpp"

#include "powers.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace pspectra {

void validate(const SolveOptions& opts)
{
    if (!(opts.p > 1.0) || !std::isfinite(opts.p)) {
        throw std::invalid_argument("solver: p must be a finite number > 1");
    }
    if (opts.max_iterations < 1) {
        throw std::invalid_argument("solver: max_iterations must be >= 1");
    }
    if (!(opts.tolerance > 0.0) || !(opts.residual_tolerance > 0.0)) {
        throw std::invalid_argument("solver: tolerances must be > 0");
    }
    if (!(opts.delta >= 0.0) || !std::isfinite(opts.delta)) {
        throw std::invalid_argument("solver: delta must be finite and >= 0");
    }
    if (opts.multistart < 1) {
        throw std::invalid_argument("solver: multistart must be >= 1");
    }
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

enum class Mode { Shift, Dirichlet };

// Sparse SPD system sum_e c_e B_e^T G_e^{-1} B_e + diag(d), factored with LDL^T.
// Fixed vertices get identity rows and columns.
class StiffnessSystem {
public:
    StiffnessSystem(const DiscreteManifold& mesh, std::vector<char> fixed) : mesh_(mesh), fixed_(std::move(fixed))
    {
        const int k = mesh.vertices_per_element();
        const std::size_t n = mesh.vertex_count();
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(mesh.element_count() * k * k + n);
        for (std::size_t e = 0; e < mesh.element_count(); ++e) {
            auto el = mesh.element(e);
            for (int a = 0; a < k; ++a)
                for (int b = 0; b < k; ++b) trip.emplace_back(el[a], el[b], 1.0);
        }
        for (std::size_t v = 0; v < n; ++v) trip.emplace_back(static_cast<int>(v), static_cast<int>(v), 1.0);
        matrix_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        matrix_.setFromTriplets(trip.begin(), trip.end());
        matrix_.makeCompressed();

        auto slot = [&](int row, int col) {
            const int* begin = matrix_.innerIndexPtr() + matrix_.outerIndexPtr()[col];
            const int* end = matrix_.innerIndexPtr() + matrix_.outerIndexPtr()[col + 1];
            return static_cast<int>(std::lower_bound(begin, end, row) - matrix_.innerIndexPtr());
        };
        slots_.resize(mesh.element_count() * k * k);
        for (std::size_t e = 0; e < mesh.element_count(); ++e) {
            auto el = mesh.element(e);
            for (int a = 0; a < k; ++a)
                for (int b = 0; b < k; ++b) slots_[(e * k + a) * k + b] = slot(el[a], el[b]);
        }
        diag_slots_.resize(n);
        for (std::size_t v = 0; v < n; ++v) diag_slots_[v] = slot(static_cast<int>(v), static_cast<int>(v));
        ldlt_.analyzePattern(matrix_);
    }

    void factor(std::span<const double> element_coef, std::span<const double> vertex_diag)
    {
        double* val = matrix_.valuePtr();
        std::fill(val, val + matrix_.nonZeros(), 0.0);
        const int k = mesh_.vertices_per_element();
        for (std::size_t e = 0; e < mesh_.element_count(); ++e) {
            const auto& g = mesh_.inverse_gram(e);
            const double c = element_coef[e];
            double local[3][3];
            if (k == 2) {
                local[0][0] = local[1][1] = g[0];
                local[0][1] = local[1][0] = -g[0];
            } else {
                local[1][1] = g[0];
                local[1][2] = local[2][1] = g[1];
                local[2][2] = g[2];
                local[0][1] = local[1][0] = -(g[0] + g[1]);
                local[0][2] = local[2][0] = -(g[1] + g[2]);
                local[0][0] = g[0] + 2.0 * g[1] + g[2];
            }
            const int* s = &slots_[e * k * k];
            for (int a = 0; a < k; ++a)
                for (int b = 0; b < k; ++b) val[s[a * k + b]] += c * local[a][b];
        }
        for (std::size_t v = 0; v < vertex_diag.size(); ++v) val[diag_slots_[v]] += vertex_diag[v];
        if (!fixed_.empty()) {
            for (Eigen::Index col = 0; col < matrix_.outerSize(); ++col) {
                for (SpMat::InnerIterator it(matrix_, col); it; ++it) {
                    if (fixed_[it.row()] || fixed_[col]) it.valueRef() = it.row() == col ? 1.0 : 0.0;
                }
            }
        }
        ldlt_.factorize(matrix_);
        if (ldlt_.info() != Eigen::Success) {
            throw std::runtime_error("solver: preconditioner factorization failed");
        }
    }

    Vec solve(const Vec& rhs) const { return ldlt_.solve(rhs); }

private:
    const DiscreteManifold& mesh_;
    std::vector<char> fixed_;
    SpMat matrix_;
    std::vector<int> slots_;
    std::vector<int> diag_slots_;
    Eigen::SimplicialLDLT<SpMat> ldlt_;
};

struct Problem {
    const DiscreteManifold& mesh;
    RayleighFunctional rq;
    Mode mode;
    std::vector<char> fixed;
    detail::Powers pw;

    Problem(const DiscreteManifold& mesh_, const ConformalFactor& f, double p, Mode mode_)
        : mesh(mesh_), rq(mesh_, f, p), mode(mode_), pw(p)
    {
        if (mode == Mode::Dirichlet) {
            fixed.assign(mesh.vertex_count(), 0);
            for (std::size_t v = 0; v < mesh.vertex_count(); ++v) fixed[v] = mesh.is_boundary(v);
        }
    }

    bool is_fixed(std::size_t v) const { return !fixed.empty() && fixed[v]; }

    // Shift (or clamp) and scale to unit base p-norm. False if u collapses.
    bool project(std::vector<double>& u) const
    {
        for (double x : u) {
            if (!std::isfinite(x)) return false;
        }
        if (mode == Mode::Shift) {
            double c;
            try {
                c = p_shift(u, rq.vertex_weights(), rq.p());
            } catch (const DegenerateInput&) {
                return false;
            }
            for (double& x : u) x -= c;
        } else {
            for (std::size_t v = 0; v < u.size(); ++v) {
                if (is_fixed(v)) u[v] = 0.0;
            }
        }
        const auto mass = mesh.lumped_mass();
        double norm = 0.0;
        for (std::size_t v = 0; v < u.size(); ++v) norm += mass[v] * pw.abs_pow(u[v]);
        if (!(norm > 0.0) || !std::isfinite(norm)) return false;
        const double scale = std::pow(norm, -1.0 / rq.p());
        for (double& x : u) x *= scale;
        return true;
    }
};

struct Evaluation {
    double num = 0.0, den = 0.0, quotient = 0.0, phi = 0.0;
    Vec grad_num, grad_den, grad; // grad of log N - log D, zero at fixed vertices
};

void evaluate(const Problem& pb, const std::vector<double>& u, Evaluation& ev)
{
    const std::size_t n = u.size();
    ev.grad_num.resize(static_cast<Eigen::Index>(n));
    ev.grad_den.resize(static_cast<Eigen::Index>(n));
    ev.num = pb.rq.numerator(u, std::span<double>(ev.grad_num.data(), n));
    ev.den = pb.rq.denominator(u, std::span<double>(ev.grad_den.data(), n));
    ev.quotient = ev.num / ev.den;
    ev.phi = std::log(ev.quotient);
    for (std::size_t v = 0; v < n; ++v) {
        if (pb.is_fixed(v)) ev.grad_num[v] = ev.grad_den[v] = 0.0;
    }
    ev.grad = ev.grad_num / ev.num - ev.grad_den / ev.den;
}

// |grad N - q grad D| / |grad N|, both in the A^{-1} norm of the current preconditioner.
double dual_residual(const StiffnessSystem& sys, const Evaluation& ev)
{
    const Vec r = ev.grad_num - ev.quotient * ev.grad_den;
    const double rr = r.dot(sys.solve(r));
    const double gg = ev.grad_num.dot(sys.solve(ev.grad_num));
    return gg > 0.0 ? std::sqrt(std::max(rr, 0.0) / gg) : 0.0;
}

double weighted_mean_sq(const DiscreteManifold& mesh, const std::vector<double>& u)
{
    const auto mass = mesh.lumped_mass();
    double s = 0.0, w = 0.0;
    for (std::size_t v = 0; v < u.size(); ++v) {
        s += mass[v] * u[v] * u[v];
        w += mass[v];
    }
    return s / w;
}

// Kacanov-type linearization K_p + R M_p of the quotient's Hessian.
void refresh_preconditioner(const Problem& pb, StiffnessSystem& sys, const std::vector<double>& u, double quotient)
{
    const auto& mesh = pb.mesh;
    const double p = pb.rq.p();
    const double d2 = pb.rq.delta() * pb.rq.delta();
    const auto ew = pb.rq.element_weights();
    std::vector<double> s(mesh.element_count());
    pb.rq.element_gradients_sq(u, s);
    double smean = 0.0, wsum = 0.0;
    for (std::size_t e = 0; e < s.size(); ++e) {
        smean += ew[e] * s[e];
        wsum += ew[e];
    }
    smean /= wsum;
    // p < 2: keep near-flat elements stiff (their true curvature blows up);
    // p > 2: keep them from going soft enough to make the system singular
    const double sfloor = (p < 2.0 ? 1e-12 : 1e-3) * smean;
    std::vector<double> coef(s.size());
    for (std::size_t e = 0; e < s.size(); ++e) {
        coef[e] = p == 2.0 ? ew[e] : ew[e] * pb.pw.half_pow_derivative(std::max(s[e], sfloor) + d2);
    }
    const double floor = 1e-12 * weighted_mean_sq(mesh, u);
    const auto vw = pb.rq.vertex_weights();
    std::vector<double> diag(u.size());
    for (std::size_t v = 0; v < u.size(); ++v) {
        const double m = p == 2.0 ? vw[v] : vw[v] * 0.5 * p * std::pow(std::max(u[v] * u[v], floor), 0.5 * (p - 2.0));
        diag[v] = quotient * m;
    }
    sys.factor(coef, diag);
}

struct RunResult {
    std::vector<double> u;
    double lambda = std::numeric_limits<double>::infinity();
    double residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
    std::vector<double> trace;
    std::vector<int> trace_stage;
    bool ok = false;
};

// Geometric continuation 1e-2 -> delta, only where the energy is nonsmooth (p < 2).
std::vector<double> delta_stages(const SolveOptions& opts)
{
    if (opts.p >= 2.0 || !opts.continuation || opts.delta >= 1e-2) {
        return {opts.delta};
    }
    const double first = 1e-2;
    const double last = opts.delta > 0.0 ? opts.delta : 1e-8;
    std::vector<double> out;
    for (int i = 0; i < 7; ++i) out.push_back(first * std::pow(last / first, i / 6.0));
    out.back() = last;
    if (opts.delta == 0.0) out.push_back(0.0);
    return out;
}

RunResult run_single(Problem& pb, StiffnessSystem& sys, std::vector<double> u, const SolveOptions& opts)
{
    RunResult out;
    if (!pb.project(u)) return out;
    const double p = pb.rq.p();
    const auto stages = delta_stages(opts);
    constexpr int memory = 10;
    constexpr double c1 = 1e-4;

    int iterations = 0;
    Evaluation ev, trial;
    for (std::size_t stage = 0; stage < stages.size(); ++stage) {
        pb.rq.set_delta(stages[stage]);
        const bool last_stage = stage + 1 == stages.size();
        const double target = last_stage ? opts.residual_tolerance : std::max(opts.residual_tolerance, 1e-4);
        evaluate(pb, u, ev);
        refresh_preconditioner(pb, sys, u, ev.quotient);
        int since_refresh = 0;
        std::deque<std::pair<Vec, Vec>> pairs; // (s, y)
        std::deque<double> rho;
        double gamma = 0.5 * ev.num;
        int stagnant = 0;
        for (;;) {
            if (p != 2.0 && since_refresh >= 25) {
                refresh_preconditioner(pb, sys, u, ev.quotient);
                since_refresh = 0;
            }
            if (iterations >= opts.max_iterations || dual_residual(sys, ev) <= target) break;
            auto direction = [&](bool use_memory) {
                Vec q = ev.grad;
                std::vector<double> alpha(pairs.size());
                if (use_memory) {
                    for (int i = static_cast<int>(pairs.size()) - 1; i >= 0; --i) {
                        alpha[i] = rho[i] * pairs[i].first.dot(q);
                        q -= alpha[i] * pairs[i].second;
                    }
                }
                Vec r = (use_memory && !pairs.empty() ? gamma : 0.5 * ev.num) * sys.solve(q);
                if (use_memory) {
                    for (std::size_t i = 0; i < pairs.size(); ++i) {
                        const double beta = rho[i] * pairs[i].second.dot(r);
                        r += (alpha[i] - beta) * pairs[i].first;
                    }
                }
                return Vec(-r);
            };
            Vec d = direction(true);
            if (!(d.dot(ev.grad) < 0.0)) {
                pairs.clear();
                rho.clear();
                d = direction(false);
            }
            bool accepted = false;
            std::vector<double> ut(u.size());
            for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
                const double slope = d.dot(ev.grad);
                double step = 1.0;
                for (int halving = 0; halving < 30; ++halving, step *= 0.5) {
                    for (std::size_t v = 0; v < u.size(); ++v) ut[v] = u[v] + step * d[v];
                    if (!pb.project(ut)) continue;
                    evaluate(pb, ut, trial);
                    if (std::isfinite(trial.phi) && trial.quotient < ev.quotient
                        && trial.phi <= ev.phi + c1 * step * slope) {
                        accepted = true;
                        break;
                    }
                }
                if (!accepted) {
                    if (pairs.empty()) break;
                    pairs.clear();
                    rho.clear();
                    d = direction(false);
                }
            }
            if (!accepted) break;

            ++iterations;
            ++since_refresh;
            const double decrease = ev.phi - trial.phi;
            Vec s(static_cast<Eigen::Index>(u.size()));
            for (std::size_t v = 0; v < u.size(); ++v) s[v] = ut[v] - u[v];
            Vec y = trial.grad - ev.grad;
            const double sy = s.dot(y);
            if (sy > 1e-12 * s.norm() * y.norm()) {
                if (static_cast<int>(pairs.size()) == memory) {
                    pairs.pop_front();
                    rho.pop_front();
                }
                const Vec hy = sys.solve(y);
                const double yhy = y.dot(hy);
                if (yhy > 0.0) gamma = sy / yhy;
                pairs.emplace_back(std::move(s), std::move(y));
                rho.push_back(1.0 / sy);
            }
            u.swap(ut);
            std::swap(ev, trial);
            out.trace.push_back(ev.quotient);
            out.trace_stage.push_back(static_cast<int>(stage));
            stagnant = decrease < opts.tolerance ? stagnant + 1 : 0;
            if (stagnant >= 5) break;
        }
    }

    // report the unregularized quotient at the final iterate
    pb.rq.set_delta(0.0);
    evaluate(pb, u, ev);
    refresh_preconditioner(pb, sys, u, ev.quotient);
    out.residual = dual_residual(sys, ev);
    out.u = std::move(u);
    out.lambda = ev.quotient;
    out.iterations = iterations;
    out.ok = std::isfinite(out.lambda);
    return out;
}

std::vector<double> coordinate_start(const DiscreteManifold& mesh, Mode mode)
{
    const std::size_t n = mesh.vertex_count();
    std::vector<double> u(n);
    if (mesh.dim() == 1) {
        double a = std::numeric_limits<double>::infinity(), b = -a;
        for (std::size_t v = 0; v < n; ++v) {
            a = std::min(a, mesh.coordinate(v));
            b = std::max(b, mesh.coordinate(v));
        }
        for (std::size_t v = 0; v < n; ++v) {
            const double x = mesh.coordinate(v);
            if (mode == Mode::Dirichlet) u[v] = (x - a) * (b - x);
            else if (mesh.kind() == MeshKind::Circle) u[v] = std::cos(2.0 * std::numbers::pi * x / mesh.circle_length());
            else u[v] = x - 0.5 * (a + b);
        }
        return u;
    }
    if (mesh.pole()) {
        const Vec3 a = mesh.position(*mesh.pole());
        Vec3 e1, e2;
        orthonormal_complement(a, e1, e2);
        for (std::size_t v = 0; v < n; ++v) {
            u[v] = mode == Mode::Dirichlet ? std::max(0.0, mesh.position(v).dot(a)) : mesh.position(v).dot(e1);
        }
        return u;
    }
    int axis = 0;
    double best = -1.0;
    for (int k = 0; k < 3; ++k) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t v = 0; v < n; ++v) {
            lo = std::min(lo, mesh.position(v)[k]);
            hi = std::max(hi, mesh.position(v)[k]);
        }
        if (hi - lo > best) {
            best = hi - lo;
            axis = k;
        }
    }
    for (std::size_t v = 0; v < n; ++v) u[v] = mesh.position(v)[axis];
    return u;
}

// Uniform noise smoothed twice by (K + sigma M)^{-1} M, keeping low frequencies.
std::vector<double> random_start(const Problem& pb, StiffnessSystem& smoother, std::mt19937_64& gen)
{
    const auto& mesh = pb.mesh;
    const std::size_t n = mesh.vertex_count();
    const auto mass = mesh.lumped_mass();
    Vec r(static_cast<Eigen::Index>(n));
    for (std::size_t v = 0; v < n; ++v) r[v] = pb.is_fixed(v) ? 0.0 : 2.0 * uniform01(gen()) - 1.0;
    for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t v = 0; v < n; ++v) r[v] *= pb.is_fixed(v) ? 0.0 : mass[v];
        r = smoother.solve(r);
    }
    return std::vector<double>(r.data(), r.data() + n);
}

SpectralResult solve_impl(const DiscreteManifold& mesh, const ConformalFactor& f, const SolveOptions& opts, Mode mode)
{
    validate(opts);
    require_aligned(mesh, f.size(), "conformal factor");
    Problem pb(mesh, f, opts.p, mode);
    StiffnessSystem sys(mesh, pb.fixed);

    std::vector<std::vector<double>> starts;
    if (opts.warm_start) {
        require_aligned(mesh, opts.warm_start->size(), "warm start");
        starts.push_back(opts.warm_start->data());
    }
    if (opts.p == 2.0) {
        starts.push_back(coordinate_start(mesh, mode));
    } else {
        SolveOptions lin = opts;
        lin.p = 2.0;
        Problem pb2(mesh, f, 2.0, mode);
        RunResult r2 = run_single(pb2, sys, coordinate_start(mesh, mode), lin);
        starts.push_back(r2.ok ? std::move(r2.u) : coordinate_start(mesh, mode));
    }
    if (opts.multistart > 1) {
        StiffnessSystem smoother(mesh, pb.fixed);
        std::vector<double> coef(mesh.element_measures().begin(), mesh.element_measures().end());
        const double sigma = 40.0 * std::numbers::pi * std::numbers::pi / std::pow(mesh.total_measure(), 2.0 / mesh.dim());
        std::vector<double> diag(mesh.lumped_mass().begin(), mesh.lumped_mass().end());
        for (double& x : diag) x *= sigma;
        smoother.factor(coef, diag);
        std::mt19937_64 gen(opts.seed);
        for (int k = 1; k < opts.multistart; ++k) starts.push_back(random_start(pb, smoother, gen));
    }

    SpectralResult result;
    RunResult best;
    int best_index = -1;
    bool best_converged = false;
    constexpr double converged_residual = 1e-6;
    for (std::size_t k = 0; k < starts.size(); ++k) {
        RunResult run = run_single(pb, sys, std::move(starts[k]), opts);
        result.start_lambdas.push_back(run.lambda);
        if (!run.ok) continue;
        const bool conv = run.residual <= converged_residual;
        const bool better = best_index < 0 || (conv && !best_converged) || (conv == best_converged && run.lambda < best.lambda);
        if (better) {
            best = std::move(run);
            best_index = static_cast<int>(k);
            best_converged = conv;
        }
    }
    if (best_index < 0) {
        throw std::runtime_error("solver: every start collapsed to a constant field");
    }

    // normalize to int |u|^p f^{m/2} = 1
    std::vector<double> u = std::move(best.u);
    const double den = pb.rq.denominator(u);
    const double scale = std::pow(den, -1.0 / opts.p);
    for (double& x : u) x *= scale;

    result.lambda = best.lambda;
    result.constraint_defect = mode == Mode::Shift ? std::abs(pb.rq.constraint_integral(u)) : 0.0;
    result.eigenfunction = ScalarField(std::move(u));
    result.gradient_residual = best.residual;
    result.iterations = best.iterations;
    result.restarts = static_cast<int>(starts.size());
    result.converged = best_converged;
    result.best_start = best_index;
    result.trace = std::move(best.trace);
    result.trace_stage = std::move(best.trace_stage);
    return result;
}

} // namespace

SpectralResult solve_closed(const DiscreteManifold& mesh, const ConformalFactor& f, const SolveOptions& opts)
{
    if (mesh.has_boundary()) {
        throw std::invalid_argument("solve_closed: mesh has boundary vertices");
    }
    return solve_impl(mesh, f, opts, Mode::Shift);
}

SpectralResult solve_neumann(const DiscreteManifold& mesh, const ConformalFactor& f, const SolveOptions& opts)
{
    if (!mesh.has_boundary()) {
        throw std::invalid_argument("solve_neumann: mesh has no boundary");
    }
    return solve_impl(mesh, f, opts, Mode::Shift);
}

SpectralResult solve_dirichlet(const DiscreteManifold& mesh, const SolveOptions& opts)
{
    if (!mesh.has_boundary()) {
        throw std::invalid_argument("solve_dirichlet: mesh has no boundary vertices");
    }
    return solve_impl(mesh, ConformalFactor::constant(mesh.vertex_count(), 1.0), opts, Mode::Dirichlet);
}

} // namespace pspectra
