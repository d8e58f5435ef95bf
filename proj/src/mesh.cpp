#include "pspectra/mesh.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

namespace pspectra {

ScalarField::ScalarField(std::vector<double> values) : values_(std::move(values))
{
    for (double v : values_) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("ScalarField: non-finite value");
        }
    }
}

ScalarField ScalarField::constant(std::size_t size, double value)
{
    return ScalarField(std::vector<double>(size, value));
}

const char* to_string(MeshKind kind)
{
    switch (kind) {
    case MeshKind::Interval: return "interval";
    case MeshKind::Circle: return "circle";
    case MeshKind::Sphere: return "sphere";
    case MeshKind::Hemisphere: return "hemisphere";
    case MeshKind::Surface: return "surface";
    }
    return "unknown";
}

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x)
    {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

} // namespace

DiscreteManifold::DiscreteManifold(Data data)
    : kind_(data.kind),
      dim_(data.dim),
      positions_(std::move(data.positions)),
      elements_(std::move(data.elements)),
      boundary_(std::move(data.boundary)),
      pole_(data.pole),
      circle_length_(data.circle_length),
      parent_(std::move(data.parent_vertices)),
      equator_ring_(data.equator_ring)
{
    if (dim_ != 1 && dim_ != 2) {
        throw std::invalid_argument("DiscreteManifold: dimension must be 1 or 2");
    }
    const std::size_t nv = positions_.size();
    const std::size_t stride = static_cast<std::size_t>(dim_ + 1);
    if (nv == 0 || elements_.empty() || elements_.size() % stride != 0) {
        throw std::invalid_argument("DiscreteManifold: empty or malformed element list");
    }
    if (!boundary_.empty() && boundary_.size() != nv) {
        throw std::invalid_argument("DiscreteManifold: boundary flags misaligned");
    }
    if (pole_ && (*pole_ < 0 || static_cast<std::size_t>(*pole_) >= nv)) {
        throw std::invalid_argument("DiscreteManifold: pole out of range");
    }
    if (kind_ == MeshKind::Circle && !(circle_length_ > 0.0)) {
        throw std::invalid_argument("DiscreteManifold: circle needs a positive length");
    }
    for (int idx : elements_) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= nv) {
            throw std::invalid_argument("DiscreteManifold: element index out of range");
        }
    }
    if (is_sphere_like()) {
        for (const auto& x : positions_) {
            if (std::abs(x.norm() - 1.0) > 1e-12) {
                throw std::invalid_argument("DiscreteManifold: sphere vertex off the unit sphere");
            }
        }
    }

    const std::size_t ne = elements_.size() / stride;
    measures_.resize(ne);
    inverse_gram_.resize(ne);
    lumped_mass_.assign(nv, 0.0);
    max_edge_ = 0.0;
    min_edge_ = std::numeric_limits<double>::infinity();
    UnionFind components(nv);
    std::vector<char> used(nv, 0);

    for (std::size_t e = 0; e < ne; ++e) {
        auto el = element(e);
        double measure = 0.0;
        if (dim_ == 1) {
            const double len = kind_ == MeshKind::Circle
                ? std::min(std::abs(positions_[el[1]].x() - positions_[el[0]].x()),
                           circle_length_ - std::abs(positions_[el[1]].x() - positions_[el[0]].x()))
                : std::abs(positions_[el[1]].x() - positions_[el[0]].x());
            measure = len;
            inverse_gram_[e] = {len > 0.0 ? 1.0 / (len * len) : 0.0, 0.0, 0.0};
            max_edge_ = std::max(max_edge_, len);
            min_edge_ = std::min(min_edge_, len);
        } else {
            const Vec3 e1 = positions_[el[1]] - positions_[el[0]];
            const Vec3 e2 = positions_[el[2]] - positions_[el[0]];
            const double g11 = e1.dot(e1);
            const double g12 = e1.dot(e2);
            const double g22 = e2.dot(e2);
            const double cross = e1.cross(e2).squaredNorm();
            measure = 0.5 * std::sqrt(cross);
            if (cross > 0.0) {
                inverse_gram_[e] = {g22 / cross, -g12 / cross, g11 / cross};
            }
            const double e3 = (positions_[el[2]] - positions_[el[1]]).norm();
            for (double len : {std::sqrt(g11), std::sqrt(g22), e3}) {
                max_edge_ = std::max(max_edge_, len);
                min_edge_ = std::min(min_edge_, len);
            }
        }
        if (!(measure > 0.0) || !std::isfinite(measure)) {
            throw std::invalid_argument("DiscreteManifold: degenerate element " + std::to_string(e));
        }
        measures_[e] = measure;
        total_measure_ += measure;
        const double share = measure / static_cast<double>(stride);
        for (int v : el) {
            lumped_mass_[v] += share;
            used[v] = 1;
            components.unite(el[0], v);
        }
    }

    const int root = components.find(0);
    for (std::size_t v = 0; v < nv; ++v) {
        if (!used[v]) {
            throw std::invalid_argument("DiscreteManifold: vertex " + std::to_string(v) + " is not in any element");
        }
        if (components.find(static_cast<int>(v)) != root) {
            throw std::invalid_argument("DiscreteManifold: mesh is not connected");
        }
    }
    boundary_count_ = static_cast<std::size_t>(std::count(boundary_.begin(), boundary_.end(), char{1}));
}

std::vector<int> DiscreteManifold::boundary_vertices() const
{
    std::vector<int> out;
    for (std::size_t v = 0; v < boundary_.size(); ++v) {
        if (boundary_[v]) {
            out.push_back(static_cast<int>(v));
        }
    }
    return out;
}

void require_aligned(const DiscreteManifold& mesh, std::size_t size, const char* what)
{
    if (size != mesh.vertex_count()) {
        throw std::invalid_argument(std::string(what) + ": field has " + std::to_string(size)
                                    + " values but the mesh has " + std::to_string(mesh.vertex_count())
                                    + " vertices");
    }
}

void orthonormal_complement(const Vec3& a, Vec3& e1, Vec3& e2)
{
    const Vec3 axes[3] = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
    int best = 0;
    for (int k = 1; k < 3; ++k) {
        if (std::abs(a.dot(axes[k])) < std::abs(a.dot(axes[best]))) best = k;
    }
    e1 = (axes[best] - a.dot(axes[best]) * a).normalized();
    e2 = a.cross(e1);
}

DiscreteManifold build_interval(int n, double a, double b)
{
    if (n < 2) {
        throw std::invalid_argument("build_interval: need n >= 2");
    }
    if (!(a < b)) {
        throw std::invalid_argument("build_interval: need a < b");
    }
    DiscreteManifold::Data d;
    d.kind = MeshKind::Interval;
    d.dim = 1;
    d.positions.resize(n + 1);
    const double h = (b - a) / n;
    for (int i = 0; i <= n; ++i) {
        // Endpoints exactly, interior by the symmetric formula so (a, b) = (-c, c) stays mirror symmetric.
        const double x = i == n ? b : (i == 0 ? a : 0.5 * (a + b) + (i - 0.5 * n) * h);
        d.positions[i] = Vec3(x, 0.0, 0.0);
        if (i < n) {
            d.elements.push_back(i);
            d.elements.push_back(i + 1);
        }
    }
    d.boundary.assign(n + 1, 0);
    d.boundary.front() = 1;
    d.boundary.back() = 1;
    d.pole = 0;
    return DiscreteManifold(std::move(d));
}

DiscreteManifold build_circle(int n, double length)
{
    if (n < 3) {
        throw std::invalid_argument("build_circle: need n >= 3");
    }
    if (!(length > 0.0) || !std::isfinite(length)) {
        throw std::invalid_argument("build_circle: length must be positive");
    }
    DiscreteManifold::Data d;
    d.kind = MeshKind::Circle;
    d.dim = 1;
    d.circle_length = length;
    d.positions.resize(n);
    for (int i = 0; i < n; ++i) {
        d.positions[i] = Vec3(length * i / n, 0.0, 0.0);
        d.elements.push_back(i);
        d.elements.push_back((i + 1) % n);
    }
    d.pole = 0;
    return DiscreteManifold(std::move(d));
}

namespace {

using EdgeKey = std::pair<int, int>;

EdgeKey edge_key(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

struct TriangleSoup {
    std::vector<Vec3> positions;
    std::vector<std::array<int, 3>> triangles;
};

TriangleSoup icosahedron()
{
    const double phi = 0.5 * (1.0 + std::sqrt(5.0));
    TriangleSoup soup;
    soup.positions = {
        {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
        {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
        {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1},
    };
    const int n = static_cast<int>(soup.positions.size());
    auto adjacent = [&](int i, int j) {
        return std::abs((soup.positions[i] - soup.positions[j]).squaredNorm() - 4.0) < 1e-9;
    };
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (!adjacent(i, j)) continue;
            for (int k = j + 1; k < n; ++k) {
                if (!adjacent(i, k) || !adjacent(j, k)) continue;
                const Vec3& a = soup.positions[i];
                const Vec3& b = soup.positions[j];
                const Vec3& c = soup.positions[k];
                if ((b - a).cross(c - a).dot(a + b + c) > 0.0) {
                    soup.triangles.push_back({i, j, k});
                } else {
                    soup.triangles.push_back({i, k, j});
                }
            }
        }
    }
    for (auto& x : soup.positions) {
        x.normalize();
    }
    return soup;
}

void subdivide(TriangleSoup& soup)
{
    std::map<EdgeKey, int> midpoints;
    auto midpoint = [&](int a, int b) {
        auto [it, inserted] = midpoints.try_emplace(edge_key(a, b), 0);
        if (inserted) {
            Vec3 m = 0.5 * (soup.positions[a] + soup.positions[b]);
            m.normalize();
            it->second = static_cast<int>(soup.positions.size());
            soup.positions.push_back(m);
        }
        return it->second;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(soup.triangles.size() * 4);
    for (const auto& [a, b, c] : soup.triangles) {
        const int ab = midpoint(a, b);
        const int bc = midpoint(b, c);
        const int ca = midpoint(c, a);
        next.push_back({a, ab, ca});
        next.push_back({ab, b, bc});
        next.push_back({ca, bc, c});
        next.push_back({ab, bc, ca});
    }
    soup.triangles = std::move(next);
}

double soup_min_edge(const TriangleSoup& soup)
{
    double m = std::numeric_limits<double>::infinity();
    for (const auto& t : soup.triangles) {
        for (int k = 0; k < 3; ++k) {
            m = std::min(m, (soup.positions[t[k]] - soup.positions[t[(k + 1) % 3]]).norm());
        }
    }
    return m;
}

// Splits every triangle that straddles z = 0 so the equator becomes an edge loop.
// Equator-crossing edges always join mirror vertices, so the cut point is shared
// by the mirrored triangles and the result stays mirror symmetric.
void conform_equator(TriangleSoup& soup)
{
    auto sign = [&](int v) {
        const double z = soup.positions[v].z();
        return z > 0.0 ? 1 : (z < 0.0 ? -1 : 0);
    };
    std::map<EdgeKey, int> cuts;
    auto cut = [&](int a, int b) {
        auto [it, inserted] = cuts.try_emplace(edge_key(a, b), 0);
        if (inserted) {
            const auto [lo, hi] = edge_key(a, b);
            const Vec3& pa = soup.positions[lo];
            const Vec3& pb = soup.positions[hi];
            const double t = pa.z() / (pa.z() - pb.z());
            Vec3 q(pa.x() + t * (pb.x() - pa.x()), pa.y() + t * (pb.y() - pa.y()), 0.0);
            q.normalize();
            it->second = static_cast<int>(soup.positions.size());
            soup.positions.push_back(q);
        }
        return it->second;
    };

    std::vector<std::array<int, 3>> out;
    out.reserve(soup.triangles.size() + soup.triangles.size() / 4);
    for (const auto& tri : soup.triangles) {
        const std::array<int, 3> s = {sign(tri[0]), sign(tri[1]), sign(tri[2])};
        const bool has_pos = std::count(s.begin(), s.end(), 1) > 0;
        const bool has_neg = std::count(s.begin(), s.end(), -1) > 0;
        if (!has_pos || !has_neg) {
            out.push_back(tri);
            continue;
        }
        const int zeros = static_cast<int>(std::count(s.begin(), s.end(), 0));
        if (zeros == 1) {
            int r = 0;
            while (s[r] != 0) ++r;
            const int v0 = tri[r], v1 = tri[(r + 1) % 3], v2 = tri[(r + 2) % 3];
            const int q = cut(v1, v2);
            out.push_back({v0, v1, q});
            out.push_back({v0, q, v2});
            continue;
        }
        // Lone vertex: the one whose sign differs from the other two.
        int r = 0;
        for (int k = 0; k < 3; ++k) {
            if (s[k] != s[(k + 1) % 3] && s[k] != s[(k + 2) % 3]) r = k;
        }
        const int v0 = tri[r], v1 = tri[(r + 1) % 3], v2 = tri[(r + 2) % 3];
        const int q1 = cut(v0, v1);
        const int q2 = cut(v0, v2);
        out.push_back({v0, q1, q2});
        const double d_q1v2 = (soup.positions[q1] - soup.positions[v2]).norm();
        const double d_v1q2 = (soup.positions[v1] - soup.positions[q2]).norm();
        bool use_q1v2 = d_q1v2 < d_v1q2;
        if (d_q1v2 == d_v1q2) {
            const Vec3& a = soup.positions[v1];
            const Vec3& b = soup.positions[v2];
            use_q1v2 = std::make_pair(a.x(), a.y()) < std::make_pair(b.x(), b.y());
        }
        if (use_q1v2) {
            out.push_back({q1, v1, v2});
            out.push_back({q1, v2, q2});
        } else {
            out.push_back({q1, v1, q2});
            out.push_back({v1, v2, q2});
        }
    }
    soup.triangles = std::move(out);
}

} // namespace

DiscreteManifold build_icosphere(int level, EquatorRing ring)
{
    if (level < 0 || level > 8) {
        throw std::invalid_argument("build_icosphere: level must be in [0, 8]");
    }
    if (ring == EquatorRing::Conform && level < 1) {
        throw std::invalid_argument("build_icosphere: an equator ring needs level >= 1");
    }
    TriangleSoup soup = icosahedron();
    for (int k = 0; k < level; ++k) {
        subdivide(soup);
    }

    // Snap near-equator vertices. Mirror pairs move together since |z| is equal.
    const double snap = 0.25 * soup_min_edge(soup);
    for (auto& x : soup.positions) {
        const double lat = std::atan2(std::abs(x.z()), std::hypot(x.x(), x.y()));
        if (x.z() != 0.0 && lat < snap) {
            x.z() = 0.0;
            x.normalize();
        }
    }
    if (ring == EquatorRing::Conform) {
        conform_equator(soup);
    }

    DiscreteManifold::Data d;
    d.kind = MeshKind::Sphere;
    d.dim = 2;
    d.positions = std::move(soup.positions);
    d.elements.reserve(soup.triangles.size() * 3);
    for (const auto& t : soup.triangles) {
        d.elements.insert(d.elements.end(), t.begin(), t.end());
    }
    int pole = 0;
    double best = -2.0;
    for (std::size_t v = 0; v < d.positions.size(); ++v) {
        if (d.positions[v].z() > best) {
            best = d.positions[v].z();
            pole = static_cast<int>(v);
        }
    }
    d.pole = pole;
    d.equator_ring = ring == EquatorRing::Conform;
    return DiscreteManifold(std::move(d));
}

double colatitude(const DiscreteManifold& mesh, std::size_t vertex)
{
    if (!mesh.pole()) {
        throw std::invalid_argument("colatitude: mesh has no pole");
    }
    const int pole = *mesh.pole();
    if (mesh.kind() == MeshKind::Circle) {
        const double len = mesh.circle_length();
        double d = std::abs(mesh.coordinate(vertex) - mesh.coordinate(pole));
        d = std::min(d, len - d);
        return std::numbers::pi * d / (0.5 * len);
    }
    if (mesh.dim() == 1) {
        throw std::invalid_argument("colatitude: intervals have no colatitude");
    }
    const Vec3& p = mesh.position(pole);
    const Vec3& x = mesh.position(vertex);
    return std::atan2(p.cross(x).norm(), p.dot(x));
}

std::vector<double> colatitudes(const DiscreteManifold& mesh)
{
    std::vector<double> r(mesh.vertex_count());
    for (std::size_t v = 0; v < r.size(); ++v) {
        r[v] = colatitude(mesh, v);
    }
    return r;
}

double equator_distance(const DiscreteManifold& mesh, std::size_t vertex)
{
    if (!mesh.pole()) {
        throw std::invalid_argument("equator_distance: mesh has no pole");
    }
    const int pole = *mesh.pole();
    if (mesh.kind() == MeshKind::Circle) {
        const double len = mesh.circle_length();
        double d = std::abs(mesh.coordinate(vertex) - mesh.coordinate(pole));
        d = std::min(d, len - d);
        return std::numbers::pi * std::abs(0.25 * len - d) / (0.5 * len);
    }
    const Vec3& p = mesh.position(pole);
    const Vec3& x = mesh.position(vertex);
    return std::atan2(std::abs(p.dot(x)), p.cross(x).norm());
}

std::vector<int> mirror_map(const DiscreteManifold& sphere)
{
    if (!sphere.is_sphere_like() || !sphere.pole()) {
        throw std::invalid_argument("mirror_map: needs a sphere mesh with a pole");
    }
    const Vec3 p = sphere.position(*sphere.pole());
    std::map<std::array<double, 3>, int> lookup;
    for (std::size_t v = 0; v < sphere.vertex_count(); ++v) {
        const Vec3& x = sphere.position(v);
        lookup.emplace(std::array<double, 3>{x.x(), x.y(), x.z()}, static_cast<int>(v));
    }
    std::vector<int> mirror(sphere.vertex_count());
    for (std::size_t v = 0; v < sphere.vertex_count(); ++v) {
        const Vec3& x = sphere.position(v);
        const Vec3 y = x - 2.0 * x.dot(p) * p;
        auto it = lookup.find({y.x(), y.y(), y.z()});
        if (it == lookup.end()) {
            throw std::invalid_argument("mirror_map: mesh is not mirror symmetric about the pole's equator");
        }
        mirror[v] = it->second;
    }
    return mirror;
}

DiscreteManifold extract_hemisphere(const DiscreteManifold& sphere)
{
    if (!sphere.pole()) {
        throw std::invalid_argument("extract_hemisphere: mesh has no pole");
    }
    return extract_hemisphere(sphere, *sphere.pole());
}

DiscreteManifold extract_hemisphere(const DiscreteManifold& sphere, int pole)
{
    if (sphere.kind() != MeshKind::Sphere) {
        throw std::invalid_argument("extract_hemisphere: needs a sphere mesh");
    }
    if (pole < 0 || static_cast<std::size_t>(pole) >= sphere.vertex_count()) {
        throw std::invalid_argument("extract_hemisphere: pole out of range");
    }
    const Vec3 p = sphere.position(pole);
    const double half_pi = 0.5 * std::numbers::pi;
    std::vector<double> r(sphere.vertex_count());
    for (std::size_t v = 0; v < r.size(); ++v) {
        const Vec3& x = sphere.position(v);
        r[v] = std::atan2(p.cross(x).norm(), p.dot(x));
    }

    std::vector<int> kept;
    std::map<EdgeKey, int> edge_count;
    for (std::size_t e = 0; e < sphere.element_count(); ++e) {
        auto el = sphere.element(e);
        if (std::all_of(el.begin(), el.end(), [&](int v) { return r[v] <= half_pi + 1e-9; })) {
            kept.push_back(static_cast<int>(e));
            for (int k = 0; k < 3; ++k) {
                ++edge_count[edge_key(el[k], el[(k + 1) % 3])];
            }
        }
    }
    std::vector<char> on_equator(sphere.vertex_count(), 0);
    for (std::size_t v = 0; v < r.size(); ++v) {
        on_equator[v] = std::abs(sphere.position(v).dot(p)) <= 1e-12;
    }
    for (const auto& [edge, count] : edge_count) {
        if (count == 1 && !(on_equator[edge.first] && on_equator[edge.second])) {
            throw std::invalid_argument(
                "extract_hemisphere: mesh has no snapped equator ring (build it with EquatorRing::Conform)");
        }
    }

    std::vector<int> local(sphere.vertex_count(), -1);
    DiscreteManifold::Data d;
    d.kind = MeshKind::Hemisphere;
    d.dim = 2;
    for (int e : kept) {
        for (int v : sphere.element(e)) {
            if (local[v] < 0) {
                local[v] = static_cast<int>(d.positions.size());
                d.positions.push_back(sphere.position(v));
                d.parent_vertices.push_back(v);
                d.boundary.push_back(on_equator[v]);
            }
            d.elements.push_back(local[v]);
        }
    }
    d.pole = local[pole];
    d.equator_ring = true;
    return DiscreteManifold(std::move(d));
}

double integrate(const DiscreteManifold& mesh, std::span<const double> density)
{
    require_aligned(mesh, density.size(), "integrate");
    const int k = mesh.vertices_per_element();
    double total = 0.0;
    for (std::size_t e = 0; e < mesh.element_count(); ++e) {
        double mean = 0.0;
        for (int v : mesh.element(e)) {
            mean += density[v];
        }
        total += mesh.element_measure(e) * mean / k;
    }
    return total;
}

double integrate(const DiscreteManifold& mesh, const ScalarField& density)
{
    return integrate(mesh, density.values());
}

std::vector<double> pl_gradient_sq(const DiscreteManifold& mesh, const ScalarField& u)
{
    require_aligned(mesh, u.size(), "pl_gradient_sq");
    std::vector<double> out(mesh.element_count());
    for (std::size_t e = 0; e < out.size(); ++e) {
        auto el = mesh.element(e);
        const auto& g = mesh.inverse_gram(e);
        const double d1 = u[el[1]] - u[el[0]];
        if (mesh.dim() == 1) {
            out[e] = g[0] * d1 * d1;
        } else {
            const double d2 = u[el[2]] - u[el[0]];
            out[e] = g[0] * d1 * d1 + 2.0 * g[1] * d1 * d2 + g[2] * d2 * d2;
        }
    }
    return out;
}

} // namespace pspectra
