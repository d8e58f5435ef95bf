#include "pspectra/bounds.hpp"
#include "pspectra/conformal.hpp"
#include "pspectra/experiments.hpp"
#include "pspectra/mesh.hpp"
#include "pspectra/mobius.hpp"
#include "pspectra/psolve.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace pspectra;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a)
{
    if (a.ndim() != 1) throw std::invalid_argument("expected a one-dimensional array");
    return {a.data(), a.data() + a.size()};
}

Array to_array(std::span<const double> v)
{
    Array out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

ConformalFactor factor(const Array& f) { return ConformalFactor(to_vector(f)); }

std::vector<Vec3> points(const Array& a)
{
    if (a.ndim() != 2 || a.shape(1) != 3) throw std::invalid_argument("expected an (n, 3) array of points");
    std::vector<Vec3> out(static_cast<std::size_t>(a.shape(0)));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = Vec3(a.at(i, 0), a.at(i, 1), a.at(i, 2));
    return out;
}

Array points_array(std::span<const Vec3> pts)
{
    Array out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{3}});
    auto r = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (int k = 0; k < 3; ++k) r(i, k) = pts[i][k];
    }
    return out;
}

SolveOptions options(double p, int max_iterations, double residual_tolerance, double delta, int multistart,
                     std::uint64_t seed, std::optional<Array> warm_start)
{
    SolveOptions o;
    o.p = p;
    o.max_iterations = max_iterations;
    o.residual_tolerance = residual_tolerance;
    o.delta = delta;
    o.multistart = multistart;
    o.seed = seed;
    if (warm_start) o.warm_start = ScalarField(to_vector(*warm_start));
    return o;
}

py::dict result_dict(const SpectralResult& r)
{
    py::dict d;
    d["lambda"] = r.lambda;
    d["eigenfunction"] = to_array(r.eigenfunction.values());
    d["constraint_defect"] = r.constraint_defect;
    d["gradient_residual"] = r.gradient_residual;
    d["iterations"] = r.iterations;
    d["restarts"] = r.restarts;
    d["converged"] = r.converged;
    d["start_lambdas"] = r.start_lambdas;
    return d;
}

#define SOLVE_ARGS                                                                                                    \
    py::arg("p"), py::arg("max_iterations") = 5000, py::arg("residual_tolerance") = 1e-7, py::arg("delta") = 1e-8,  \
        py::arg("multistart") = 3, py::arg("seed") = 1, py::arg("warm_start") = py::none()

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "First p-Laplacian eigenvalues on meshes under conformal metrics";

    py::register_exception<DegenerateInput>(m, "DegenerateInput", PyExc_ValueError);

    py::class_<DiscreteManifold>(m, "Mesh")
        .def_property_readonly("kind", [](const DiscreteManifold& s) { return std::string(to_string(s.kind())); })
        .def_property_readonly("dim", &DiscreteManifold::dim)
        .def_property_readonly("vertex_count", &DiscreteManifold::vertex_count)
        .def_property_readonly("element_count", &DiscreteManifold::element_count)
        .def_property_readonly("total_measure", &DiscreteManifold::total_measure)
        .def_property_readonly("positions", [](const DiscreteManifold& s) { return points_array(s.positions()); })
        .def_property_readonly("lumped_mass", [](const DiscreteManifold& s) { return to_array(s.lumped_mass()); })
        .def_property_readonly("elements",
                               [](const DiscreteManifold& s) {
                                   const auto k = static_cast<py::ssize_t>(s.vertices_per_element());
                                   py::array_t<int> out({static_cast<py::ssize_t>(s.element_count()), k});
                                   std::copy(s.elements().begin(), s.elements().end(), out.mutable_data());
                                   return out;
                               })
        .def_property_readonly("pole", &DiscreteManifold::pole)
        .def("__repr__", [](const DiscreteManifold& s) {
            return "<Mesh " + std::string(to_string(s.kind())) + " with " + std::to_string(s.vertex_count())
                   + " vertices>";
        });

    m.def("build_interval", &build_interval, py::arg("n"), py::arg("a"), py::arg("b"));
    m.def("build_circle", &build_circle, py::arg("n"), py::arg("length"));
    m.def("build_icosphere",
          [](int level, bool equator_ring) {
              return build_icosphere(level, equator_ring ? EquatorRing::Conform : EquatorRing::None);
          },
          py::arg("level"), py::arg("equator_ring") = false);
    m.def("extract_hemisphere", py::overload_cast<const DiscreteManifold&>(&extract_hemisphere), py::arg("sphere"));
    m.def("read_off", &read_off);
    m.def("write_off", &write_off);

    m.def("volume", [](const DiscreteManifold& s, const Array& f) { return volume(s, factor(f), s.dim()); });
    m.def("normalize_unit_volume", [](const DiscreteManifold& s, const Array& f) {
        return to_array(normalize_unit_volume(s, factor(f), s.dim()).values());
    });
    m.def("random_smooth_factor",
          [](const DiscreteManifold& s, std::uint64_t seed, double amp) {
              return to_array(random_smooth_factor(s, seed, amp).values());
          },
          py::arg("mesh"), py::arg("seed"), py::arg("amplitude") = 0.5);
    m.def("random_symmetric_factor",
          [](const DiscreteManifold& s, std::uint64_t seed, double amp) {
              return to_array(random_symmetric_factor(s, seed, amp).values());
          },
          py::arg("mesh"), py::arg("seed"), py::arg("amplitude") = 0.5);
    m.def("f_eps_smooth", [](const DiscreteManifold& s, double eps, double p) {
        return to_array(f_eps_smooth(s, eps, p, s.dim()).values());
    });
    m.def("f_eps_singular", [](const DiscreteManifold& s, double eps, double p) {
        return to_array(f_eps_singular(s, eps, p, s.dim()).values());
    });
    m.def("plateau_value", &plateau_value, py::arg("eps"), py::arg("p"), py::arg("m"));

    m.def("rayleigh_quotient", [](const DiscreteManifold& s, const Array& f, double p, const Array& u) {
        return rayleigh_quotient(s, factor(f), p, ScalarField(to_vector(u)));
    });
    m.def("admissible_quotient", [](const DiscreteManifold& s, const Array& f, double p, const Array& u) {
        return admissible_quotient(s, factor(f), p, ScalarField(to_vector(u)));
    });
    m.def("p_shift", [](const Array& u, const Array& w, double p) { return p_shift(to_vector(u), to_vector(w), p); },
          py::arg("u"), py::arg("weights"), py::arg("p"));
    m.def("t_split_shift",
          [](const Array& u, const Array& w, double p) { return t_split_shift(to_vector(u), to_vector(w), p); },
          py::arg("u"), py::arg("weights"), py::arg("p"));

    m.def("solve_closed",
          [](const DiscreteManifold& s, const Array& f, double p, int it, double rt, double d, int ms,
             std::uint64_t seed, std::optional<Array> warm) {
              return result_dict(solve_closed(s, factor(f), options(p, it, rt, d, ms, seed, warm)));
          },
          py::arg("mesh"), py::arg("f"), SOLVE_ARGS);
    m.def("solve_neumann",
          [](const DiscreteManifold& s, const Array& f, double p, int it, double rt, double d, int ms,
             std::uint64_t seed, std::optional<Array> warm) {
              return result_dict(solve_neumann(s, factor(f), options(p, it, rt, d, ms, seed, warm)));
          },
          py::arg("mesh"), py::arg("f"), SOLVE_ARGS);
    m.def("solve_dirichlet",
          [](const DiscreteManifold& s, double p, int it, double rt, double d, int ms, std::uint64_t seed,
             std::optional<Array> warm) {
              return result_dict(solve_dirichlet(s, options(p, it, rt, d, ms, seed, warm)));
          },
          py::arg("mesh"), SOLVE_ARGS);
    m.def("shooting_oracle_1d",
          [](double p, const std::string& mode, double h) {
              if (mode != "dirichlet" && mode != "neumann") throw std::invalid_argument("mode: dirichlet or neumann");
              return shooting_oracle_1d(p, mode == "dirichlet" ? ShootingMode::Dirichlet : ShootingMode::Neumann, h);
          },
          py::arg("p"), py::arg("mode"), py::arg("halfwidth"));

    py::class_<MobiusMap>(m, "MobiusMap")
        .def(py::init<const Vec3&, double>(), py::arg("pole"), py::arg("t"))
        .def_static("identity", &MobiusMap::identity)
        .def_property_readonly("pole", &MobiusMap::pole)
        .def_property_readonly("t", &MobiusMap::t)
        .def_property_readonly("dilation", &MobiusMap::dilation)
        .def("apply", [](const MobiusMap& g, const Vec3& x) { return g.apply(x); })
        .def("apply_points", [](const MobiusMap& g, const Array& xs) { return points_array(g.apply(points(xs))); })
        .def("inverse", &MobiusMap::inverse);
    m.def("stereographic", &stereographic, py::arg("pole"), py::arg("x"));
    m.def("inverse_stereographic", &inverse_stereographic, py::arg("pole"), py::arg("z"));
    m.def("moment_vector",
          [](const DiscreteManifold& s, const Array& image, const Array& density, double p, const MobiusMap& g) {
              const auto pts = points(image);
              return Vec3(moment_vector(s, pts, ScalarField(to_vector(density)), p, g).components);
          });
    m.def("balance",
          [](const DiscreteManifold& s, const Array& image, const Array& density, double p, double tol) {
              const auto pts = points(image);
              const auto b = balance(s, pts, ScalarField(to_vector(density)), p, tol);
              py::dict d;
              d["map"] = b.map;
              d["moment_norm"] = b.moment_norm;
              d["evaluations"] = b.evaluations;
              d["converged"] = b.converged;
              return d;
          },
          py::arg("mesh"), py::arg("image"), py::arg("density"), py::arg("p"), py::arg("tol") = 1e-6);
    m.def("lemma2_bound",
          [](const DiscreteManifold& s, const Array& f, const Array& image, double p, int n, double tol) {
              const auto pts = points(image);
              return lemma2_bound(s, factor(f), pts, p, n, tol);
          },
          py::arg("mesh"), py::arg("f"), py::arg("image"), py::arg("p"), py::arg("n") = 2, py::arg("tol") = 1e-6);

    m.def("theorem1_bound", &theorem1_bound, py::arg("p"), py::arg("m"), py::arg("n"), py::arg("vnc"));
    m.def("corollary_surface_bound", &corollary_surface_bound, py::arg("p"), py::arg("genus"),
          py::arg("orientable") = true);
    m.def("canonical_conformal_volume",
          [](const std::string& tag) { return canonical_conformal_volume(parse_canonical_sphere(tag)); });

    m.def("_run_command",
          [](const std::string& command, const std::string& config, const std::string& out_dir, int jobs,
             bool write_files) {
              const auto r = run_command(command, nlohmann::json::parse(config), {jobs, out_dir, write_files});
              return py::make_tuple(r.exit_code, r.results.dump(), r.csv, r.message);
          });
    m.attr("COMMANDS") = command_names();
}
