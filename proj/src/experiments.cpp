#include "pspectra/experiments.hpp"

#include "pspectra/bounds.hpp"
#include "pspectra/mobius.hpp"
#include "pspectra/report.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

namespace pspectra {

using nlohmann::json;

namespace {

// ---- config access -------------------------------------------------------

const json& require_key(const json& obj, const char* key, const char* where)
{
    if (!obj.is_object() || !obj.contains(key)) {
        throw ConfigError(std::string(where) + ": missing required key '" + key + "'");
    }
    return obj.at(key);
}

double get_number(const json& obj, const char* key, const char* where)
{
    const auto& v = require_key(obj, key, where);
    if (!v.is_number()) throw ConfigError(std::string(where) + ": '" + key + "' must be a number");
    return v.get<double>();
}

double get_number_or(const json& obj, const char* key, double fallback, const char* where)
{
    return obj.is_object() && obj.contains(key) ? get_number(obj, key, where) : fallback;
}

int get_int(const json& obj, const char* key, const char* where)
{
    const auto& v = require_key(obj, key, where);
    if (!v.is_number_integer()) throw ConfigError(std::string(where) + ": '" + key + "' must be an integer");
    return v.get<int>();
}

int get_int_or(const json& obj, const char* key, int fallback, const char* where)
{
    return obj.is_object() && obj.contains(key) ? get_int(obj, key, where) : fallback;
}

std::uint64_t get_seed_or(const json& obj, const char* key, std::uint64_t fallback, const char* where)
{
    if (!obj.is_object() || !obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
        throw ConfigError(std::string(where) + ": '" + key + "' must be a nonnegative integer");
    }
    return v.get<std::uint64_t>();
}

bool get_bool_or(const json& obj, const char* key, bool fallback, const char* where)
{
    if (!obj.is_object() || !obj.contains(key)) return fallback;
    if (!obj.at(key).is_boolean()) throw ConfigError(std::string(where) + ": '" + key + "' must be true or false");
    return obj.at(key).get<bool>();
}

std::string get_string(const json& obj, const char* key, const char* where)
{
    const auto& v = require_key(obj, key, where);
    if (!v.is_string()) throw ConfigError(std::string(where) + ": '" + key + "' must be a string");
    return v.get<std::string>();
}

std::vector<double> get_number_list(const json& obj, const char* key, const char* where)
{
    const auto& v = require_key(obj, key, where);
    if (!v.is_array() || v.empty()) throw ConfigError(std::string(where) + ": '" + key + "' must be a nonempty list");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) throw ConfigError(std::string(where) + ": '" + key + "' must hold numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

double get_p(const json& config)
{
    const double p = get_number(config, "p", "config");
    if (!(p > 1.0) || !std::isfinite(p)) throw ConfigError("config: p must be a finite number > 1");
    return p;
}

Vec3 get_vec3(const json& obj, const char* key, const char* where)
{
    const auto& v = require_key(obj, key, where);
    if (!v.is_array() || v.size() != 3) throw ConfigError(std::string(where) + ": '" + key + "' must be [x, y, z]");
    Vec3 out(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
    if (!(out.norm() > 0.0)) throw ConfigError(std::string(where) + ": '" + key + "' must be nonzero");
    return out.normalized();
}

// ---- output helpers ------------------------------------------------------

struct Output {
    const RunOptions& opts;
    std::filesystem::path dir;

    explicit Output(const RunOptions& o) : opts(o), dir(o.out_dir)
    {
        if (opts.write_files) std::filesystem::create_directories(dir);
    }
    std::string path(const char* name) const { return (dir / name).string(); }

    void mesh(const DiscreteManifold& m) const
    {
        if (!opts.write_files) return;
        if (m.dim() == 2) write_off(m, path("mesh.off"));
        else write_mesh_csv(m, path("mesh.csv"));
    }
    void table(const CsvTable& t, const char* name = "rows.csv") const
    {
        if (opts.write_files) t.write(path(name));
    }
    void results(const json& doc) const
    {
        if (opts.write_files) write_json(path("results.json"), doc);
    }
    void svg(const std::string& text) const
    {
        if (opts.write_files) write_text(path("chart.svg"), text);
    }
};

json mesh_summary(const DiscreteManifold& m)
{
    return {{"kind", to_string(m.kind())},
            {"dim", m.dim()},
            {"vertices", m.vertex_count()},
            {"elements", m.element_count()},
            {"max_edge", m.max_edge_length()}};
}

json solve_summary(const SpectralResult& r)
{
    return {{"lambda", r.lambda},
            {"converged", r.converged},
            {"iterations", r.iterations},
            {"restarts", r.restarts},
            {"gradient_residual", r.gradient_residual},
            {"constraint_defect", r.constraint_defect},
            {"best_start", r.best_start},
            {"start_lambdas", r.start_lambdas}};
}

json map_summary(const BalanceResult& b)
{
    const auto& a = b.map.pole();
    return {{"pole", {a.x(), a.y(), a.z()}},
            {"t", b.map.t()},
            {"moment_norm", b.moment_norm},
            {"evaluations", b.evaluations},
            {"converged", b.converged}};
}

const json& section(const json& config, const char* key)
{
    static const json empty = json::object();
    if (!config.contains(key)) return empty;
    const auto& s = config.at(key);
    if (!s.is_object()) throw ConfigError(std::string("config: '") + key + "' must be an object");
    return s;
}

// Batch of sampled factors: {"count", "seed", "amplitude"}.
struct Batch {
    int count;
    std::uint64_t seed;
    double amplitude;
};

Batch batch_from_config(const json& spec)
{
    Batch b{get_int(spec, "count", "factors"), get_seed_or(spec, "seed", 1, "factors"),
            get_number_or(spec, "amplitude", 0.5, "factors")};
    if (b.count < 1) throw ConfigError("factors: count must be >= 1");
    if (!(b.amplitude >= 0.0)) throw ConfigError("factors: amplitude must be >= 0");
    return b;
}

// ---- commands ------------------------------------------------------------

CommandResult cmd_eigen(const json& config, const RunOptions& opts)
{
    const double p = get_p(config);
    const auto mesh = mesh_from_config(require_key(config, "mesh", "config"));
    const std::string problem = get_string(config, "problem", "config");
    const SolveOptions so = solver_from_config(section(config, "solver"), p);

    SpectralResult res;
    json doc = {{"command", "eigen"}, {"p", p}, {"problem", problem}, {"mesh", mesh_summary(mesh)}};
    if (problem == "dirichlet") {
        if (config.contains("factor")) throw ConfigError("eigen: the Dirichlet problem uses the base metric only");
        res = solve_dirichlet(mesh, so);
    } else {
        const ConformalFactor f = config.contains("factor")
                                      ? factor_from_config(mesh, config.at("factor"))
                                      : ConformalFactor::constant(mesh.vertex_count(), 1.0);
        doc["volume"] = volume(mesh, f, mesh.dim());
        if (problem == "closed") res = solve_closed(mesh, f, so);
        else if (problem == "neumann") res = solve_neumann(mesh, f, so);
        else throw ConfigError("eigen: problem must be closed, neumann or dirichlet");
    }
    doc["result"] = solve_summary(res);

    CsvTable trace("eigen", {"step", "stage", "quotient"});
    for (std::size_t i = 0; i < res.trace.size(); ++i) {
        trace.add_row({static_cast<double>(i), static_cast<double>(res.trace_stage[i]), res.trace[i]});
    }
    CsvTable field("eigen", {"vertex", "u"});
    for (std::size_t v = 0; v < res.eigenfunction.size(); ++v) {
        field.add_row({static_cast<double>(v), res.eigenfunction[v]});
    }
    const Output out(opts);
    out.mesh(mesh);
    out.table(trace);
    out.table(field, "eigenfunction.csv");
    out.results(doc);

    CommandResult cr;
    cr.results = doc;
    cr.csv = trace.body();
    cr.exit_code = res.converged ? kExitOk : kExitNotConverged;
    cr.message = "lambda = " + format_double(res.lambda) + (res.converged ? "" : " (not converged)");
    return cr;
}

CommandResult cmd_sweep_eps(const json& config, const RunOptions& opts)
{
    const double p = get_p(config);
    const auto mesh = mesh_from_config(require_key(config, "mesh", "config"));
    const auto eps = get_number_list(config, "eps", "config");
    const std::string profile = config.contains("profile") ? get_string(config, "profile", "config") : "smooth";
    if (profile != "smooth" && profile != "singular") throw ConfigError("sweep-eps: profile must be smooth or singular");
    const int m = mesh.dim();
    if (!(p > m)) throw ConfigError("sweep-eps: needs p > m");
    const double floor_eps = min_resolvable_eps(mesh);
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (i > 0 && !(eps[i] < eps[i - 1])) throw ConfigError("sweep-eps: eps list must be strictly decreasing");
        if (eps[i] < floor_eps) {
            throw ConfigError("sweep-eps: eps = " + format_double(eps[i]) + " is below the resolvable "
                              + format_double(floor_eps));
        }
    }
    const SolveOptions base = solver_from_config(section(config, "solver"), p);

    struct Row {
        double lambda, vol, scaled;
        SpectralResult res;
    };
    // a warm-started chain is sequential; otherwise the eps cases are independent
    const bool warm = get_bool_or(config, "warm_start", true, "config");
    std::vector<Row> rows(eps.size());
    auto run = [&](std::size_t i) {
        const auto f = profile == "smooth" ? f_eps_smooth(mesh, eps[i], p, m) : f_eps_singular(mesh, eps[i], p, m);
        const double vol = volume(mesh, f, m);
        const auto h = normalize_unit_volume(mesh, f, m);
        SolveOptions so = base;
        so.seed = derive_seed(base.seed, i);
        if (warm && i > 0) so.warm_start = rows[i - 1].res.eigenfunction;
        auto res = solve_closed(mesh, h, so);
        rows[i] = {res.lambda, vol, res.lambda * std::pow(eps[i], p / m), std::move(res)};
    };
    if (warm) {
        for (std::size_t i = 0; i < eps.size(); ++i) run(i);
    } else {
        parallel_for(eps.size(), opts.jobs, run);
    }

    CsvTable table("sweep-eps", {"eps", "lambda", "volume_before_normalization", "lambda_times_eps_p_over_m",
                                 "converged"});
    bool increasing = true, nondecreasing = true, converged = true;
    json cases = json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        table.add_row({eps[i], rows[i].lambda, rows[i].vol, rows[i].scaled, rows[i].res.converged ? 1.0 : 0.0});
        cases.push_back({{"eps", eps[i]}, {"volume_before_normalization", rows[i].vol},
                         {"lambda_times_eps_p_over_m", rows[i].scaled}, {"result", solve_summary(rows[i].res)}});
        converged = converged && rows[i].res.converged;
        if (i > 0) {
            increasing = increasing && rows[i].lambda > rows[i - 1].lambda;
            nondecreasing = nondecreasing && rows[i].scaled >= rows[i - 1].scaled;
        }
    }
    const double growth = rows.back().lambda / rows.front().lambda;
    json doc = {{"command", "sweep-eps"},
                {"p", p},
                {"m", m},
                {"profile", profile},
                {"warm_start", warm},
                {"mesh", mesh_summary(mesh)},
                {"cases", cases},
                {"checks",
                 {{"lambda_strictly_increasing", increasing},
                  {"scaled_nondecreasing", nondecreasing},
                  {"growth_ratio", growth}}}};

    std::vector<double> lam, scaled;
    for (const auto& r : rows) lam.push_back(r.lambda), scaled.push_back(r.scaled);
    const Output out(opts);
    out.mesh(mesh);
    out.table(table);
    out.results(doc);
    out.svg(loglog_svg("first p-eigenvalue along the eps sweep", "eps", "value",
                       {{"lambda", eps, lam}, {"lambda * eps^(p/m)", eps, scaled}}));

    CommandResult cr;
    cr.results = doc;
    cr.csv = table.body();
    cr.exit_code = !converged ? kExitNotConverged : increasing && nondecreasing ? kExitOk : kExitCheckFailed;
    cr.message = std::string("lambda ") + (increasing ? "strictly increasing" : "NOT strictly increasing")
                 + ", scaled column " + (nondecreasing ? "nondecreasing" : "NOT nondecreasing") + ", growth "
                 + format_double(growth);
    return cr;
}

BoundSource bound_from_config(const json& spec)
{
    const std::string src = get_string(spec, "source", "bound");
    if (src == "theorem1") {
        const auto& v = require_key(spec, "vnc", "bound");
        const double vnc = v.is_string() ? canonical_conformal_volume(parse_canonical_sphere(v.get<std::string>()))
                                         : get_number(spec, "vnc", "bound");
        return BoundSource::theorem1(get_int(spec, "n", "bound"), vnc);
    }
    if (src == "corollary") {
        return BoundSource::corollary(get_int(spec, "genus", "bound"), get_bool_or(spec, "orientable", true, "bound"));
    }
    throw ConfigError("bound: source must be theorem1 or corollary");
}

CommandResult cmd_verify_bound(const json& config, const RunOptions& opts)
{
    const double p = get_p(config);
    const auto mesh = mesh_from_config(require_key(config, "mesh", "config"));
    const int m = mesh.dim();
    if (p > m) throw ConfigError("verify-bound: needs p <= m");
    const BoundSource source = bound_from_config(require_key(config, "bound", "config"));
    const double tol = get_number_or(config, "tolerance", 0.02, "config");
    const bool corrupt = get_bool_or(config, "self_test_corrupt_bound", false, "config");
    const bool include_round = get_bool_or(config, "include_round", false, "config");
    const Batch batch = batch_from_config(require_key(config, "factors", "config"));
    const SolveOptions base = solver_from_config(section(config, "solver"), p);
    evaluate_bound(source, p, m); // validate before any solve

    const std::size_t total = batch.count + (include_round ? 1 : 0);
    std::vector<BoundReport> reports(total);
    std::vector<std::uint64_t> seeds(total, 0);
    parallel_for(total, opts.jobs, [&](std::size_t i) {
        const bool round = include_round && i == 0;
        const std::size_t k = include_round ? i - 1 : i;
        ConformalFactor f = ConformalFactor::constant(mesh.vertex_count(), 1.0);
        if (!round) {
            seeds[i] = derive_seed(batch.seed, k);
            f = random_smooth_factor(mesh, seeds[i], batch.amplitude);
        }
        f = normalize_unit_volume(mesh, f, m);
        SolveOptions so = base;
        so.seed = derive_seed(base.seed, i);
        reports[i] = verify_bound(mesh, f, p, source, tol, so);
        if (corrupt) {
            reports[i] = compare_bound(source, p, m, reports[i].computed_lambda, tol, reports[i].converged);
            reports[i].bound_value *= 0.5;
            reports[i].slack = reports[i].bound_value - reports[i].computed_lambda;
            reports[i].holds = reports[i].computed_lambda <= reports[i].bound_value * (1.0 + tol);
        }
    });

    CsvTable table("verify-bound", {"case", "factor_seed", "p", "lambda", "bound", "slack", "ratio", "tolerance",
                                    "holds", "converged"});
    json rows = json::array();
    bool all_hold = true, converged = true;
    double max_ratio = 0.0;
    for (std::size_t i = 0; i < total; ++i) {
        const auto& r = reports[i];
        const double ratio = r.computed_lambda / r.bound_value;
        max_ratio = std::max(max_ratio, ratio);
        table.add_row({static_cast<double>(i), static_cast<double>(seeds[i]), p, r.computed_lambda, r.bound_value,
                       r.slack, ratio, tol, r.holds ? 1.0 : 0.0, r.converged ? 1.0 : 0.0});
        rows.push_back({{"case", i},
                        {"round", include_round && i == 0},
                        {"factor_seed", seeds[i]},
                        {"source", r.source},
                        {"bound_value", r.bound_value},
                        {"computed_lambda", r.computed_lambda},
                        {"slack", r.slack},
                        {"p", r.p},
                        {"m", r.m},
                        {"n", r.n},
                        {"vnc", r.vnc},
                        {"genus", r.genus},
                        {"orientable", r.orientable},
                        {"tolerance", r.tolerance},
                        {"holds", r.holds},
                        {"converged", r.converged}});
        all_hold = all_hold && r.holds;
        converged = converged && r.converged;
    }
    json doc = {{"command", "verify-bound"}, {"p", p},          {"mesh", mesh_summary(mesh)},
                {"reports", rows},           {"all_hold", all_hold}, {"max_ratio", max_ratio},
                {"self_test_corrupt_bound", corrupt}};
    const Output out(opts);
    out.mesh(mesh);
    out.table(table);
    out.results(doc);

    CommandResult cr;
    cr.results = doc;
    cr.csv = table.body();
    cr.exit_code = !converged ? kExitNotConverged : all_hold ? kExitOk : kExitCheckFailed;
    cr.message = std::string(all_hold ? "all" : "NOT all") + " eigenvalues within the bound; max lambda/bound "
                 + format_double(max_ratio);
    return cr;
}

CommandResult cmd_reflect(const json& config, const RunOptions& opts)
{
    const double p = get_p(config);
    const int level = get_int(config, "level", "config");
    if (level < 1 || level > 7) throw ConfigError("reflect: level must be in 1..7");
    const double tol = get_number_or(config, "tolerance", 0.02, "config");
    const SolveOptions base = solver_from_config(section(config, "solver"), p);
    const auto sphere = build_icosphere(level, EquatorRing::Conform);
    const auto hemi = extract_hemisphere(sphere);
    const auto parent = hemi.parent_vertices();

    // factors: "constant" or a symmetric batch; an explicit vertex list is checked for symmetry
    std::vector<ConformalFactor> factors;
    std::vector<std::uint64_t> seeds;
    const auto& fs = require_key(config, "factors", "config");
    if (fs.is_string() && fs.get<std::string>() == "constant") {
        factors.push_back(ConformalFactor::constant(sphere.vertex_count(), 1.0));
        seeds.push_back(0);
    } else if (fs.is_object() && fs.contains("values")) {
        factors.emplace_back(fs.at("values").get<std::vector<double>>());
        require_aligned(sphere, factors.back().size(), "factor values");
        seeds.push_back(0);
    } else {
        const Batch b = batch_from_config(fs);
        for (int k = 0; k < b.count; ++k) {
            seeds.push_back(derive_seed(b.seed, k));
            factors.push_back(random_symmetric_factor(sphere, seeds.back(), b.amplitude));
        }
    }
    for (const auto& f : factors) require_mirror_symmetric(sphere, f);

    struct Row {
        SpectralResult closed, neumann;
        double reflected = 0.0, defect = 0.0;
    };
    std::vector<Row> rows(factors.size());
    parallel_for(factors.size(), opts.jobs, [&](std::size_t i) {
        const auto& f = factors[i];
        std::vector<double> fh(hemi.vertex_count());
        for (std::size_t v = 0; v < fh.size(); ++v) fh[v] = f[parent[v]];
        SolveOptions so = base;
        so.seed = derive_seed(base.seed, i);
        rows[i].closed = solve_closed(sphere, f, so);
        rows[i].neumann = solve_neumann(hemi, ConformalFactor(std::move(fh)), so);
        const auto w = reflect_even(rows[i].neumann.eigenfunction, hemi, sphere);
        const RayleighFunctional rq(sphere, f, p);
        rows[i].reflected = rq.quotient(w.values());
        double scale = 0.0;
        const auto wt = rq.vertex_weights();
        for (std::size_t v = 0; v < w.size(); ++v) scale += wt[v] * std::pow(std::abs(w[v]), p - 1.0);
        rows[i].defect = std::abs(rq.constraint_integral(w.values())) / scale;
    });

    CsvTable table("reflect", {"case", "factor_seed", "p", "lambda_closed", "lambda_neumann", "reflected_quotient",
                               "constraint_defect", "slack", "holds"});
    json cases = json::array();
    bool all_hold = true, converged = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const double slack = r.neumann.lambda * (1.0 + tol) - r.closed.lambda;
        const bool holds = slack >= 0.0 && r.closed.lambda <= r.reflected * (1.0 + 1e-9);
        all_hold = all_hold && holds;
        converged = converged && r.closed.converged && r.neumann.converged;
        table.add_row({static_cast<double>(i), static_cast<double>(seeds[i]), p, r.closed.lambda, r.neumann.lambda,
                       r.reflected, r.defect, slack, holds ? 1.0 : 0.0});
        cases.push_back({{"factor_seed", seeds[i]},
                         {"closed", solve_summary(r.closed)},
                         {"neumann", solve_summary(r.neumann)},
                         {"reflected_quotient", r.reflected},
                         {"constraint_defect", r.defect},
                         {"relative_gap", (r.neumann.lambda - r.closed.lambda) / r.neumann.lambda},
                         {"slack", slack},
                         {"holds", holds}});
    }
    json doc = {{"command", "reflect"},    {"p", p},          {"tolerance", tol}, {"mesh", mesh_summary(sphere)},
                {"hemisphere", mesh_summary(hemi)}, {"cases", cases}, {"all_hold", all_hold}};
    const Output out(opts);
    out.mesh(sphere);
    out.table(table);
    out.results(doc);

    CommandResult cr;
    cr.results = doc;
    cr.csv = table.body();
    cr.exit_code = !converged ? kExitNotConverged : all_hold ? kExitOk : kExitCheckFailed;
    cr.message = std::string("closed <= Neumann chain ") + (all_hold ? "holds" : "FAILS") + " for "
                 + std::to_string(rows.size()) + " factor(s)";
    return cr;
}

double relative_spread(const std::vector<double>& v)
{
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return (*hi - *lo) / std::abs(*hi);
}

CommandResult cmd_dirichlet_scaling(const json& config, const RunOptions& opts)
{
    const double p = get_p(config);
    const auto eps = get_number_list(config, "eps", "config");
    for (double e : eps) {
        if (!(e > 0.0) || !std::isfinite(e)) throw ConfigError("dirichlet-scaling: eps values must be > 0");
    }
    const int n = get_int(config, "n", "config");
    if (n < 2) throw ConfigError("dirichlet-scaling: n must be >= 2");
    const SolveOptions base = solver_from_config(section(config, "solver"), p);

    std::vector<double> fem(eps.size()), oracle(eps.size());
    std::vector<char> conv(eps.size());
    parallel_for(eps.size(), opts.jobs, [&](std::size_t i) {
        SolveOptions so = base;
        so.seed = derive_seed(base.seed, i);
        const auto res = solve_dirichlet(build_interval(n, -eps[i], eps[i]), so);
        fem[i] = res.lambda;
        conv[i] = res.converged;
        oracle[i] = shooting_oracle_1d(p, ShootingMode::Dirichlet, eps[i]);
    });

    CsvTable table("dirichlet-scaling", {"eps", "lambda_fem", "lambda_fem_times_eps_p", "lambda_oracle",
                                         "lambda_oracle_times_eps_p", "fem_vs_oracle"});
    std::vector<double> fs, os;
    double agreement = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        const double ep = std::pow(eps[i], p);
        fs.push_back(fem[i] * ep);
        os.push_back(oracle[i] * ep);
        const double rel = std::abs(fem[i] - oracle[i]) / oracle[i];
        agreement = std::max(agreement, rel);
        table.add_row({eps[i], fem[i], fs.back(), oracle[i], os.back(), rel});
    }
    const double fem_spread = relative_spread(fs), oracle_spread = relative_spread(os);
    const bool ok = fem_spread <= 1e-6 && oracle_spread <= 1e-9 && agreement <= 5e-3;
    const bool converged = std::all_of(conv.begin(), conv.end(), [](char c) { return c != 0; });
    json doc = {{"command", "dirichlet-scaling"},
                {"p", p},
                {"n", n},
                {"eps", eps},
                {"lambda_fem", fem},
                {"lambda_oracle", oracle},
                {"checks",
                 {{"fem_scaled_spread", fem_spread},
                  {"oracle_scaled_spread", oracle_spread},
                  {"fem_vs_oracle", agreement},
                  {"passed", ok}}}};
    const Output out(opts);
    out.mesh(build_interval(n, -eps.front(), eps.front()));
    out.table(table);
    out.results(doc);

    CommandResult cr;
    cr.results = doc;
    cr.csv = table.body();
    cr.exit_code = !converged ? kExitNotConverged : ok ? kExitOk : kExitCheckFailed;
    cr.message = "scaled spread fem " + format_double(fem_spread) + ", oracle " + format_double(oracle_spread)
                 + ", fem vs oracle " + format_double(agreement);
    return cr;
}

ConformalFactor density_from_config(const DiscreteManifold& mesh, const json& spec)
{
    const std::string kind = get_string(spec, "kind", "density");
    if (kind == "uniform") return ConformalFactor::constant(mesh.vertex_count(), 1.0);
    if (kind == "cap") {
        return cap_density(mesh, get_vec3(spec, "center", "density"), get_number(spec, "concentration", "density"));
    }
    if (kind == "random") {
        return random_smooth_factor(mesh, get_seed_or(spec, "seed", 1, "density"),
                                    get_number_or(spec, "amplitude", 0.5, "density"));
    }
    throw ConfigError("density: kind must be uniform, cap or random");
}

CommandResult cmd_balance(const json& config, const RunOptions& opts)
{
    const double p = get_p(config);
    const auto mesh = mesh_from_config(require_key(config, "mesh", "config"));
    if (mesh.kind() != MeshKind::Sphere) throw ConfigError("balance: needs a sphere mesh (identity immersion)");
    const double tol = get_number_or(config, "tolerance", 1e-6, "config");
    const double slack = get_number_or(config, "slack", 0.02, "config");
    const SolveOptions base = solver_from_config(section(config, "solver"), p);
    std::vector<json> specs;
    if (config.contains("densities")) {
        const auto& list = config.at("densities");
        if (!list.is_array() || list.empty()) throw ConfigError("balance: 'densities' must be a nonempty list");
        for (const auto& d : list) specs.push_back(d);
    } else {
        specs.push_back(require_key(config, "density", "config"));
    }
    const int m = mesh.dim();
    std::vector<ConformalFactor> factors;
    for (const auto& s : specs) {
        // the density is f^{m/2}
        const auto d = density_from_config(mesh, s);
        std::vector<double> f(d.size());
        for (std::size_t v = 0; v < f.size(); ++v) f[v] = std::pow(d[v], 2.0 / m);
        factors.push_back(normalize_unit_volume(mesh, ConformalFactor(std::move(f)), m));
    }

    struct Row {
        BalanceResult bal;
        double bound = 0.0;
        SpectralResult res;
    };
    std::vector<Row> rows(factors.size());
    parallel_for(factors.size(), opts.jobs, [&](std::size_t i) {
        const auto& f = factors[i];
        rows[i].bal = balance(mesh, mesh.positions(), measure_density(f, m), p, tol);
        const auto psi = rows[i].bal.map.apply(mesh.positions());
        rows[i].bound = rows[i].bal.converged ? lemma2_bound(mesh, f, psi, p, 2, tol)
                                              : std::pow(3.0, std::abs(0.5 * p - 1.0)) * map_p_energy(mesh, f, psi, p);
        SolveOptions so = base;
        so.seed = derive_seed(base.seed, i);
        rows[i].res = solve_closed(mesh, f, so);
    });

    CsvTable table("balance", {"case", "p", "t", "moment_norm", "evaluations", "bound", "lambda", "slack", "holds"});
    json cases = json::array();
    bool balanced = true, holds_all = true, converged = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const bool holds = r.res.lambda <= r.bound * (1.0 + slack);
        balanced = balanced && r.bal.converged;
        holds_all = holds_all && holds;
        converged = converged && r.res.converged;
        table.add_row({static_cast<double>(i), p, r.bal.map.t(), r.bal.moment_norm,
                       static_cast<double>(r.bal.evaluations), r.bound, r.res.lambda, r.bound - r.res.lambda,
                       holds ? 1.0 : 0.0});
        cases.push_back({{"density", specs[i]},
                         {"map", map_summary(r.bal)},
                         {"bound", r.bound},
                         {"result", solve_summary(r.res)},
                         {"slack", r.bound - r.res.lambda},
                         {"holds", holds}});
    }
    json doc = {{"command", "balance"}, {"p", p},        {"tolerance", tol},
                {"mesh", mesh_summary(mesh)}, {"cases", cases}, {"all_hold", holds_all}};
    const Output out(opts);
    out.mesh(mesh);
    out.table(table);
    out.results(doc);

    CommandResult cr;
    cr.results = doc;
    cr.csv = table.body();
    cr.exit_code = !balanced || !converged ? kExitNotConverged : holds_all ? kExitOk : kExitCheckFailed;
    cr.message = std::string(balanced ? "balanced" : "balancing NOT converged") + "; lambda <= bound "
                 + (holds_all ? "holds" : "FAILS");
    return cr;
}

} // namespace

// ---- public --------------------------------------------------------------

DiscreteManifold mesh_from_config(const json& spec)
{
    const std::string kind = get_string(spec, "kind", "mesh");
    if (kind == "interval") {
        return build_interval(get_int(spec, "n", "mesh"), get_number(spec, "a", "mesh"), get_number(spec, "b", "mesh"));
    }
    if (kind == "circle") return build_circle(get_int(spec, "n", "mesh"), get_number(spec, "length", "mesh"));
    if (kind == "icosphere") {
        const int level = get_int(spec, "level", "mesh");
        if (level < 0 || level > 7) throw ConfigError("mesh: icosphere level must be in 0..7");
        return build_icosphere(level,
                               get_bool_or(spec, "equator_ring", false, "mesh") ? EquatorRing::Conform : EquatorRing::None);
    }
    if (kind == "hemisphere") {
        const int level = get_int(spec, "level", "mesh");
        if (level < 1 || level > 7) throw ConfigError("mesh: hemisphere level must be in 1..7");
        return extract_hemisphere(build_icosphere(level, EquatorRing::Conform));
    }
    if (kind == "off") return read_off(get_string(spec, "path", "mesh"));
    if (kind == "csv") return read_mesh_csv(get_string(spec, "path", "mesh"));
    throw ConfigError("mesh: kind must be interval, circle, icosphere, hemisphere, off or csv");
}

ConformalFactor factor_from_config(const DiscreteManifold& mesh, const json& spec)
{
    const std::string kind = get_string(spec, "kind", "factor");
    const int m = mesh.dim();
    ConformalFactor f;
    if (kind == "constant") {
        f = ConformalFactor::constant(mesh.vertex_count(), get_number_or(spec, "value", 1.0, "factor"));
    } else if (kind == "random") {
        f = random_smooth_factor(mesh, get_seed_or(spec, "seed", 1, "factor"),
                                 get_number_or(spec, "amplitude", 0.5, "factor"));
    } else if (kind == "symmetric") {
        f = random_symmetric_factor(mesh, get_seed_or(spec, "seed", 1, "factor"),
                                    get_number_or(spec, "amplitude", 0.5, "factor"));
    } else if (kind == "eps_smooth" || kind == "eps_singular") {
        const double eps = get_number(spec, "eps", "factor");
        const double p = get_number(spec, "p", "factor");
        f = kind == "eps_smooth" ? f_eps_smooth(mesh, eps, p, m) : f_eps_singular(mesh, eps, p, m);
    } else if (kind == "file") {
        const auto field = read_field_csv(get_string(spec, "path", "factor"));
        require_aligned(mesh, field.size(), "factor file");
        f = ConformalFactor(field.data());
    } else {
        throw ConfigError("factor: kind must be constant, random, symmetric, eps_smooth, eps_singular or file");
    }
    if (get_bool_or(spec, "normalize", false, "factor")) f = normalize_unit_volume(mesh, f, m);
    return f;
}

SolveOptions solver_from_config(const json& spec, double p)
{
    SolveOptions o;
    o.p = p;
    static const char* known[] = {"max_iterations", "tolerance", "residual_tolerance", "delta",
                                  "continuation",   "multistart", "seed"};
    for (const auto& [key, _] : spec.items()) {
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; })
            == std::end(known)) {
            throw ConfigError("solver: unknown option '" + key + "'");
        }
    }
    o.max_iterations = get_int_or(spec, "max_iterations", o.max_iterations, "solver");
    o.tolerance = get_number_or(spec, "tolerance", o.tolerance, "solver");
    o.residual_tolerance = get_number_or(spec, "residual_tolerance", o.residual_tolerance, "solver");
    o.delta = get_number_or(spec, "delta", o.delta, "solver");
    o.continuation = get_bool_or(spec, "continuation", o.continuation, "solver");
    o.multistart = get_int_or(spec, "multistart", o.multistart, "solver");
    o.seed = get_seed_or(spec, "seed", o.seed, "solver");
    try {
        validate(o);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return o;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index)
{
    // splitmix64 finalizer over a golden-ratio stride
    std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn)
{
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
    std::vector<std::exception_ptr> errors(n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i; (i = next.fetch_add(1)) < n;) {
                    try {
                        fn(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

ConformalFactor cap_density(const DiscreteManifold& mesh, const Vec3& center, double kappa)
{
    if (!mesh.is_sphere_like()) throw std::invalid_argument("cap_density: needs a sphere mesh");
    if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw std::invalid_argument("cap_density: concentration must be >= 0");
    const Vec3 c = center.normalized();
    std::vector<double> d(mesh.vertex_count());
    // shifted so the largest value is 1 and nothing overflows
    for (std::size_t v = 0; v < d.size(); ++v) d[v] = std::exp(kappa * (mesh.position(v).dot(c) - 1.0));
    return ConformalFactor(std::move(d));
}

const std::vector<std::string>& command_names()
{
    static const std::vector<std::string> names = {"eigen",   "sweep-eps",         "verify-bound",
                                                   "reflect", "dirichlet-scaling", "balance"};
    return names;
}

std::string command_help()
{
    return R"(rows.csv columns (first line is a '# pspectra <command> generated <timestamp>' comment):
  eigen              step,stage,quotient  (also eigenfunction.csv: vertex,u)
  sweep-eps          eps,lambda,volume_before_normalization,lambda_times_eps_p_over_m,converged
  verify-bound       case,factor_seed,p,lambda,bound,slack,ratio,tolerance,holds,converged
  reflect            case,factor_seed,p,lambda_closed,lambda_neumann,reflected_quotient,constraint_defect,slack,holds
  dirichlet-scaling  eps,lambda_fem,lambda_fem_times_eps_p,lambda_oracle,lambda_oracle_times_eps_p,fem_vs_oracle
  balance            case,p,t,moment_norm,evaluations,bound,lambda,slack,holds
Floats carry 17 significant digits; flags are 1/0.
Exit codes: 0 ok, 1 invalid config or I/O error, 2 numerical non-convergence, 3 a checked inequality or trend failed.)";
}

CommandResult run_command(const std::string& command, const json& config, const RunOptions& opts)
{
    CommandResult cr;
    try {
        if (!config.is_object()) throw ConfigError("config: top level must be a JSON object");
        if (config.contains("command") && config.at("command") != command) {
            throw ConfigError("config: written for command '" + config.at("command").get<std::string>() + "'");
        }
        if (opts.jobs < 1) throw ConfigError("--jobs must be >= 1");
        if (command == "eigen") cr = cmd_eigen(config, opts);
        else if (command == "sweep-eps") cr = cmd_sweep_eps(config, opts);
        else if (command == "verify-bound") cr = cmd_verify_bound(config, opts);
        else if (command == "reflect") cr = cmd_reflect(config, opts);
        else if (command == "dirichlet-scaling") cr = cmd_dirichlet_scaling(config, opts);
        else if (command == "balance") cr = cmd_balance(config, opts);
        else throw ConfigError("unknown command '" + command + "'");
    } catch (const json::exception& e) {
        cr = {};
        cr.exit_code = kExitInvalid;
        cr.message = std::string("config: ") + e.what();
    } catch (const std::exception& e) {
        cr = {};
        cr.exit_code = kExitInvalid;
        cr.message = e.what();
    }
    return cr;
}

} // namespace pspectra
