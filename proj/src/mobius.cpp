#include "pspectra/mobius.hpp"

#include "pspectra/psolve.hpp"
#include "powers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>

namespace pspectra {

namespace {

constexpr double kMinT = 1e-6;
const double kMaxBoost = (1.0 - kMinT) / kMinT;

void require_unit(const Vec3& a, const char* what)
{
    if (!a.allFinite() || std::abs(a.norm() - 1.0) > 1e-12) {
        throw std::invalid_argument(std::string(what) + ": pole must be a unit vector");
    }
}

void require_on_sphere(std::span<const Vec3> image)
{
    for (const auto& x : image) {
        if (!x.allFinite() || std::abs(x.norm() - 1.0) > 1e-9) {
            throw std::invalid_argument("mapped mesh: image points must lie on the unit sphere");
        }
    }
}

// Evaluates fn(i) for i in [0, n) on all cores; results land in index order.
template <class Fn>
std::vector<double> parallel_map(std::size_t n, Fn fn)
{
    std::vector<double> out(n);
    const std::size_t workers = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 16);
    if (workers == 1 || n < 64) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) out[i] = fn(i);
        });
    }
    for (auto& t : pool) t.join();
    return out;
}

// Lowest index among the minimizers.
std::size_t argmin(const std::vector<double>& v)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] < v[best]) best = i;
    }
    return best;
}

// 162 pole directions x 32 log-spaced t in [1e-3, 1]; the last t is 1.
struct Grid {
    std::vector<Vec3> poles;
    std::vector<double> ts;

    Grid()
    {
        const auto ico = build_icosphere(2);
        poles.assign(ico.positions().begin(), ico.positions().end());
        for (auto& a : poles) a.normalize();
        for (int k = 0; k < 32; ++k) ts.push_back(std::pow(10.0, -3.0 + 3.0 * k / 31.0));
        ts.back() = 1.0;
    }
    std::size_t size() const { return poles.size() * ts.size(); }
    MobiusMap map(std::size_t i) const { return MobiusMap(poles[i / ts.size()], ts[i % ts.size()]); }
};

Vec3 clamp_boost(const Vec3& v)
{
    const double r = v.norm();
    return r > kMaxBoost ? Vec3(v * (kMaxBoost / r)) : v;
}

// Nelder-Mead on a function of R^3.
template <class Fn>
Vec3 nelder_mead(Fn fn, const Vec3& start, double size, int max_evals, int& evals, double target)
{
    std::array<Vec3, 4> x;
    std::array<double, 4> y;
    x[0] = start;
    for (int i = 0; i < 3; ++i) {
        x[i + 1] = start;
        x[i + 1][i] += size;
    }
    for (int i = 0; i < 4; ++i) {
        y[i] = fn(x[i]);
        ++evals;
    }
    int budget = max_evals;
    while (budget > 0) {
        std::array<int, 4> order{0, 1, 2, 3};
        std::sort(order.begin(), order.end(), [&](int a, int b) { return y[a] < y[b]; });
        const int best = order[0], worst = order[3], second = order[2];
        if (y[best] <= target) break;
        if ((x[worst] - x[best]).norm() < 1e-14 * (1.0 + x[best].norm())) break;
        Vec3 centroid = (x[order[0]] + x[order[1]] + x[order[2]]) / 3.0;
        auto trial = [&](double coef) {
            Vec3 p = centroid + coef * (x[worst] - centroid);
            --budget;
            ++evals;
            return std::pair{p, fn(p)};
        };
        auto [xr, yr] = trial(-1.0);
        if (yr < y[best]) {
            auto [xe, ye] = trial(-2.0);
            if (ye < yr) {
                x[worst] = xe, y[worst] = ye;
            } else {
                x[worst] = xr, y[worst] = yr;
            }
        } else if (yr < y[second]) {
            x[worst] = xr, y[worst] = yr;
        } else {
            auto [xc, yc] = yr < y[worst] ? trial(-0.5) : trial(0.5);
            if (yc < std::min(yr, y[worst])) {
                x[worst] = xc, y[worst] = yc;
            } else {
                for (int i : {order[1], order[2], order[3]}) {
                    x[i] = x[best] + 0.5 * (x[i] - x[best]);
                    y[i] = fn(x[i]);
                    --budget;
                    ++evals;
                }
            }
        }
    }
    return x[static_cast<std::size_t>(std::min_element(y.begin(), y.end()) - y.begin())];
}

} // namespace

Vec2 stereographic(const Vec3& a, const Vec3& x)
{
    require_unit(a, "stereographic");
    if ((x - a).norm() < 1e-9) {
        throw std::invalid_argument("stereographic: point coincides with the projection pole");
    }
    Vec3 e1, e2;
    orthonormal_complement(a, e1, e2);
    const double denom = 1.0 - x.dot(a);
    return Vec2(e1.dot(x) / denom, e2.dot(x) / denom);
}

Vec3 inverse_stereographic(const Vec3& a, const Vec2& z)
{
    require_unit(a, "inverse_stereographic");
    Vec3 e1, e2;
    orthonormal_complement(a, e1, e2);
    const double r2 = z.squaredNorm();
    return (2.0 * (z.x() * e1 + z.y() * e2) + (r2 - 1.0) * a) / (r2 + 1.0);
}

MobiusMap::MobiusMap(const Vec3& pole, double t) : pole_(pole), t_(t)
{
    require_unit(pole, "MobiusMap");
    if (!(t > 0.0) || !(t <= 1.0)) {
        throw std::invalid_argument("MobiusMap: t must lie in (0, 1]");
    }
    kappa_ = std::exp(-(1.0 - t) / t);
}

MobiusMap MobiusMap::from_boost(const Vec3& v)
{
    const double r = v.norm();
    if (!std::isfinite(r)) throw std::invalid_argument("MobiusMap::from_boost: non-finite boost");
    if (r == 0.0) return identity();
    return MobiusMap(v / r, std::max(kMinT, 1.0 / (1.0 + r)));
}

double MobiusMap::dilation() const { return std::exp((1.0 - t_) / t_); }

Vec3 MobiusMap::boost_vector() const { return ((1.0 - t_) / t_) * pole_; }

// Closed form of the stereographic conjugate: with s = <x, a>, y = x - s a,
// gamma(x) = (2 k y + ((1 + s) - k^2 (1 - s)) a) / ((1 + s) + k^2 (1 - s)).
Vec3 MobiusMap::apply(const Vec3& x) const
{
    if (t_ == 1.0) return x;
    const double s = x.dot(pole_);
    // 1 +- s without cancellation near the poles
    const double sp = 0.5 * (x + pole_).squaredNorm(), sm = 0.5 * (x - pole_).squaredNorm();
    const double k2 = kappa_ * kappa_;
    const double denom = sp + k2 * sm;
    if (!(denom > 0.0)) return -pole_;
    const Vec3 y = x - s * pole_;
    Vec3 out = (2.0 * kappa_ * y + (sp - k2 * sm) * pole_) / denom;
    return out / out.norm();
}

std::vector<Vec3> MobiusMap::apply(std::span<const Vec3> xs) const
{
    std::vector<Vec3> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(apply(x));
    return out;
}

Vec3 apply_gamma(const MobiusMap& map, const Vec3& x) { return map.apply(x); }

MomentVector moment_vector(const DiscreteManifold& mesh, std::span<const Vec3> image, const ScalarField& density,
                           double p, const MobiusMap& map)
{
    require_aligned(mesh, image.size(), "image");
    require_aligned(mesh, density.size(), "density");
    if (!(p > 1.0)) throw std::invalid_argument("moment_vector: needs p > 1");
    const detail::Powers pw(p);
    const auto mass = mesh.lumped_mass();
    MomentVector out;
    for (std::size_t v = 0; v < image.size(); ++v) {
        const double w = mass[v] * density[v];
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw std::invalid_argument("moment_vector: density must be finite and >= 0");
        }
        if (w == 0.0) continue;
        const Vec3 y = map.apply(image[v]);
        for (int i = 0; i < 3; ++i) out.components[i] += w * pw.signed_pow(y[i]);
        out.measure_total += w;
    }
    if (!(out.measure_total > 0.0)) {
        throw std::invalid_argument("moment_vector: density has zero total measure");
    }
    out.components /= out.measure_total;
    return out;
}

BalanceResult balance(const DiscreteManifold& mesh, std::span<const Vec3> image, const ScalarField& density, double p,
                      double tol)
{
    if (!(tol > 0.0)) throw std::invalid_argument("balance: tol must be > 0");
    require_on_sphere(image);
    {
        const auto mass = mesh.lumped_mass();
        int support = 0;
        require_aligned(mesh, density.size(), "density");
        for (std::size_t v = 0; v < density.size(); ++v) support += mass[v] * density[v] > 0.0;
        if (support < 2) {
            throw DegenerateInput("balance: measure is concentrated on a single vertex");
        }
    }

    BalanceResult res;
    auto F = [&](const Vec3& v) {
        return moment_vector(mesh, image, density, p, MobiusMap::from_boost(clamp_boost(v))).components;
    };
    auto consider = [&](const Vec3& v, double norm) {
        if (norm < res.moment_norm) {
            res.moment_norm = norm;
            res.map = MobiusMap::from_boost(clamp_boost(v));
        }
    };

    res.moment_norm = F(Vec3::Zero()).norm();
    res.evaluations = 1;
    if (res.moment_norm <= tol) {
        res.converged = true;
        return res;
    }

    const Grid grid;
    const auto norms = parallel_map(grid.size(), [&](std::size_t i) {
        return moment_vector(mesh, image, density, p, grid.map(i)).norm();
    });
    res.evaluations += static_cast<int>(grid.size());
    const std::size_t g = argmin(norms);
    consider(grid.map(g).boost_vector(), norms[g]);

    // damped Newton with a central-difference Jacobian in boost coordinates
    Vec3 v = res.map.boost_vector();
    Vec3 Fv = F(v);
    ++res.evaluations;
    for (int it = 0; it < 60 && Fv.norm() > tol; ++it) {
        const double h = 1e-6 * (1.0 + v.norm());
        Eigen::Matrix3d J;
        for (int j = 0; j < 3; ++j) {
            Vec3 dv = Vec3::Zero();
            dv[j] = h;
            J.col(j) = (F(v + dv) - F(v - dv)) / (2.0 * h);
        }
        res.evaluations += 6;
        const Vec3 step = J.colPivHouseholderQr().solve(-Fv);
        if (!step.allFinite()) break;
        double damp = 1.0;
        bool accepted = false;
        for (int k = 0; k < 30; ++k, damp *= 0.5) {
            const Vec3 trial = clamp_boost(v + damp * step);
            const Vec3 Ft = F(trial);
            ++res.evaluations;
            if (Ft.norm() < (1.0 - 1e-4 * damp) * Fv.norm()) {
                v = trial;
                Fv = Ft;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
    }
    consider(v, Fv.norm());

    if (res.moment_norm > tol) {
        int evals = 0;
        auto obj = [&](const Vec3& x) { return F(x).norm(); };
        const Vec3 start = res.map.boost_vector();
        const Vec3 best = nelder_mead(obj, start, 0.1 * (1.0 + start.norm()), 3000, evals, tol);
        res.evaluations += evals;
        consider(best, obj(best));
        ++res.evaluations;
    }
    res.converged = res.moment_norm <= tol;
    return res;
}

double map_p_energy(const DiscreteManifold& mesh, const ConformalFactor& f, std::span<const Vec3> image, double p)
{
    require_aligned(mesh, image.size(), "image");
    const RayleighFunctional rq(mesh, f, p);
    const auto ew = rq.element_weights();
    const std::size_t ne = mesh.element_count();
    std::vector<double> coord(image.size()), s(ne), total(ne, 0.0);
    for (int i = 0; i < 3; ++i) {
        for (std::size_t v = 0; v < image.size(); ++v) coord[v] = image[v][i];
        rq.element_gradients_sq(coord, s);
        for (std::size_t e = 0; e < ne; ++e) total[e] += s[e];
    }
    const detail::Powers pw(p);
    double energy = 0.0;
    for (std::size_t e = 0; e < ne; ++e) energy += ew[e] * pw.half_pow(total[e]);
    return energy;
}

double lemma2_bound(const DiscreteManifold& mesh, const ConformalFactor& f, std::span<const Vec3> balanced_image,
                    double p, int n, double tol)
{
    if (n != 2) throw std::invalid_argument("lemma2_bound: only maps into S^2 (n = 2) are supported");
    if (!(p > 1.0)) throw std::invalid_argument("lemma2_bound: needs p > 1");
    if (!(tol > 0.0)) throw std::invalid_argument("lemma2_bound: tol must be > 0");
    require_aligned(mesh, balanced_image.size(), "image");
    require_aligned(mesh, f.size(), "conformal factor");
    require_on_sphere(balanced_image);
    const int m = mesh.dim();
    const double vol = volume(mesh, f, m);
    if (std::abs(vol - 1.0) > 1e-6) {
        throw std::invalid_argument("lemma2_bound: metric must have unit volume (got " + std::to_string(vol) + ")");
    }
    const double defect =
        moment_vector(mesh, balanced_image, measure_density(f, m), p, MobiusMap::identity()).norm();
    if (defect > 10.0 * tol) {
        throw std::invalid_argument("lemma2_bound: map is not balanced (moment norm " + std::to_string(defect) + ")");
    }
    return std::pow(n + 1.0, std::abs(0.5 * p - 1.0)) * map_p_energy(mesh, f, balanced_image, p);
}

double image_area(const DiscreteManifold& mesh, std::span<const Vec3> image)
{
    if (mesh.dim() != 2) throw std::invalid_argument("image_area: needs a triangle mesh");
    require_aligned(mesh, image.size(), "image");
    double area = 0.0;
    for (std::size_t e = 0; e < mesh.element_count(); ++e) {
        auto el = mesh.element(e);
        area += 0.5 * (image[el[1]] - image[el[0]]).cross(image[el[2]] - image[el[0]]).norm();
    }
    return area;
}

SupVolumeResult sup_volume_over_gamma(const DiscreteManifold& mesh, std::span<const Vec3> image, int budget)
{
    if (mesh.dim() != 2) throw std::invalid_argument("sup_volume_over_gamma: needs a surface mesh");
    if (budget < 1) throw std::invalid_argument("sup_volume_over_gamma: budget must be >= 1");
    require_aligned(mesh, image.size(), "image");
    require_on_sphere(image);

    auto area_of = [&](const MobiusMap& map) {
        double area = 0.0;
        for (std::size_t e = 0; e < mesh.element_count(); ++e) {
            auto el = mesh.element(e);
            const Vec3 a = map.apply(image[el[0]]);
            area += 0.5 * (map.apply(image[el[1]]) - a).cross(map.apply(image[el[2]]) - a).norm();
        }
        return area;
    };

    SupVolumeResult res;
    res.identity_value = area_of(MobiusMap::identity());
    const Grid grid;
    const auto areas = parallel_map(grid.size(), [&](std::size_t i) { return -area_of(grid.map(i)); });
    res.evaluations = 1 + static_cast<int>(grid.size());
    const std::size_t g = argmin(areas);
    res.value = -areas[g];
    res.map = grid.map(g);
    if (res.identity_value >= res.value) {
        res.value = res.identity_value;
        res.map = MobiusMap::identity();
    }

    // compass search in boost coordinates
    Vec3 v = res.map.boost_vector();
    double step = 0.25;
    int used = 0;
    while (step > 1e-8 && used < budget) {
        bool improved = false;
        for (int j = 0; j < 6 && used < budget; ++j) {
            Vec3 trial = v;
            trial[j / 2] += j % 2 ? -step : step;
            trial = clamp_boost(trial);
            const MobiusMap map = MobiusMap::from_boost(trial);
            const double a = area_of(map);
            ++used;
            if (a > res.value) {
                res.value = a;
                res.map = map;
                v = trial;
                improved = true;
                break;
            }
        }
        if (!improved) step *= 0.5;
    }
    res.evaluations += used;
    res.budget_exhausted = used >= budget && step > 1e-8;
    return res;
}

double gap_num1(std::span<const double> s, double p)
{
    const detail::Powers pw(p);
    double sum = 0.0, sum_pow = 0.0;
    for (double x : s) {
        sum += x;
        sum_pow += pw.half_pow(x);
    }
    const double rhs = pw.half_pow(sum);
    return rhs > 0.0 ? (sum_pow - rhs) / rhs : sum_pow;
}

double gap_den1(std::span<const double> psi, double p)
{
    const detail::Powers pw(p);
    double sum_pow = 0.0;
    for (double x : psi) sum_pow += pw.abs_pow(x);
    return std::pow(static_cast<double>(psi.size()), 1.0 - 0.5 * p) - sum_pow;
}

double gap_den2(std::span<const double> psi, double p)
{
    const detail::Powers pw(p);
    double sum_sq = 0.0, sum_pow = 0.0;
    for (double x : psi) {
        sum_sq += x * x;
        sum_pow += pw.abs_pow(x);
    }
    return sum_sq - sum_pow;
}

double gap_num2(std::span<const double> s, double p)
{
    const detail::Powers pw(p);
    double sum = 0.0, sum_pow = 0.0;
    for (double x : s) {
        sum += x;
        sum_pow += pw.half_pow(x);
    }
    const double rhs = std::pow(static_cast<double>(s.size()), 1.0 - 0.5 * p) * pw.half_pow(sum);
    return rhs > 0.0 ? (sum_pow - rhs) / rhs : sum_pow;
}

} // namespace pspectra
