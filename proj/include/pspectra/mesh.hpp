#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pspectra {

using Vec3 = Eigen::Vector3d;

/// Input that makes a quantity undefined (constant field, single-signed field, ...).
class DegenerateInput : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Real values attached to the vertices of one mesh.
class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(std::vector<double> values);

    static ScalarField constant(std::size_t size, double value);

    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    const std::vector<double>& data() const { return values_; }

private:
    std::vector<double> values_;
};

enum class MeshKind { Interval, Circle, Sphere, Hemisphere, Surface };

const char* to_string(MeshKind kind);

/// Simplicial model of a 1- or 2-manifold with base-metric element measures.
///
/// Immutable after construction. One-dimensional meshes keep their scalar
/// coordinate in the x component of the position. Two-dimensional meshes are
/// triangle meshes embedded in R^3; gradients are taken in each triangle's
/// tangent plane.
class DiscreteManifold {
public:
    struct Data {
        MeshKind kind = MeshKind::Surface;
        int dim = 2;
        std::vector<Vec3> positions;
        std::vector<int> elements;  // flat, dim + 1 indices per element
        std::vector<char> boundary; // empty means "no boundary"
        std::optional<int> pole;
        double circle_length = 0.0;
        std::vector<int> parent_vertices; // submesh -> source mesh, optional
        bool equator_ring = false;
    };

    explicit DiscreteManifold(Data data);

    MeshKind kind() const { return kind_; }
    int dim() const { return dim_; }
    std::size_t vertex_count() const { return positions_.size(); }
    std::size_t element_count() const { return measures_.size(); }
    int vertices_per_element() const { return dim_ + 1; }

    std::span<const int> element(std::size_t e) const
    {
        return {elements_.data() + e * static_cast<std::size_t>(dim_ + 1),
                static_cast<std::size_t>(dim_ + 1)};
    }
    std::span<const int> elements() const { return elements_; }

    const Vec3& position(std::size_t v) const { return positions_[v]; }
    std::span<const Vec3> positions() const { return positions_; }
    double coordinate(std::size_t v) const { return positions_[v].x(); }

    double element_measure(std::size_t e) const { return measures_[e]; }
    std::span<const double> element_measures() const { return measures_; }
    double total_measure() const { return total_measure_; }

    /// Vertex share of the element measures, sum over incident elements of
    /// measure / (dim + 1).
    std::span<const double> lumped_mass() const { return lumped_mass_; }

    bool is_boundary(std::size_t v) const { return !boundary_.empty() && boundary_[v] != 0; }
    bool has_boundary() const { return boundary_count_ > 0; }
    std::vector<int> boundary_vertices() const;

    std::optional<int> pole() const { return pole_; }
    double circle_length() const { return circle_length_; }
    bool has_equator_ring() const { return equator_ring_; }
    std::span<const int> parent_vertices() const { return parent_; }

    /// Inverse Gram matrix (g11, g12, g22) of a triangle's edge frame, or
    /// (1 / length^2, 0, 0) for a segment. |grad u|^2 = d^T G^{-1} d where
    /// d holds the value differences to the element's first vertex.
    const std::array<double, 3>& inverse_gram(std::size_t e) const { return inverse_gram_[e]; }

    double max_edge_length() const { return max_edge_; }
    double min_edge_length() const { return min_edge_; }

    bool is_sphere_like() const { return kind_ == MeshKind::Sphere || kind_ == MeshKind::Hemisphere; }

private:
    MeshKind kind_;
    int dim_;
    std::vector<Vec3> positions_;
    std::vector<int> elements_;
    std::vector<char> boundary_;
    std::size_t boundary_count_ = 0;
    std::optional<int> pole_;
    double circle_length_;
    std::vector<int> parent_;
    bool equator_ring_;

    std::vector<double> measures_;
    std::vector<double> lumped_mass_;
    std::vector<std::array<double, 3>> inverse_gram_;
    double total_measure_ = 0.0;
    double max_edge_ = 0.0;
    double min_edge_ = 0.0;
};

DiscreteManifold build_interval(int n, double a, double b);
DiscreteManifold build_circle(int n, double length);

enum class EquatorRing { None, Conform };

/// Subdivided icosahedron on the unit sphere, symmetric under z -> -z, pole at
/// the vertex nearest (0, 0, 1). With EquatorRing::Conform the triangles that
/// cross z = 0 are split so the equator is a vertex ring (needed by
/// extract_hemisphere); the element count then exceeds 20 * 4^level.
DiscreteManifold build_icosphere(int level, EquatorRing ring = EquatorRing::None);

DiscreteManifold extract_hemisphere(const DiscreteManifold& sphere, int pole);
DiscreteManifold extract_hemisphere(const DiscreteManifold& sphere);

/// Geodesic distance to the pole in [0, pi]. On a circle the arc distance is
/// rescaled so the antipodal point sits at pi.
double colatitude(const DiscreteManifold& mesh, std::size_t vertex);
std::vector<double> colatitudes(const DiscreteManifold& mesh);

/// |pi/2 - colatitude|, evaluated without cancellation so mirrored vertices
/// get bitwise equal values.
double equator_distance(const DiscreteManifold& mesh, std::size_t vertex);

/// Index of the vertex mirrored across the equator of the pole (sphere and
/// hemisphere meshes only; throws when the mesh has no exact mirror pairing).
std::vector<int> mirror_map(const DiscreteManifold& sphere);

double integrate(const DiscreteManifold& mesh, const ScalarField& density);
double integrate(const DiscreteManifold& mesh, std::span<const double> density);

/// Squared norm of the piecewise-linear gradient on each element.
std::vector<double> pl_gradient_sq(const DiscreteManifold& mesh, const ScalarField& u);

void require_aligned(const DiscreteManifold& mesh, std::size_t size, const char* what);

/// Deterministic orthonormal completion (e1, e2) of a unit vector a:
/// Gram-Schmidt against the coordinate axis least aligned with a.
void orthonormal_complement(const Vec3& a, Vec3& e1, Vec3& e2);

// OFF (surfaces) and CSV (1-D meshes) exchange formats.
void write_off(const DiscreteManifold& mesh, const std::string& path);
DiscreteManifold read_off(const std::string& path);
void write_mesh_csv(const DiscreteManifold& mesh, const std::string& path);
DiscreteManifold read_mesh_csv(const std::string& path);
void write_field_csv(const ScalarField& field, const std::string& path, const char* column = "value");
ScalarField read_field_csv(const std::string& path);

} // namespace pspectra
