#include "pspectra/mesh.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace pspectra {

namespace {

std::ofstream open_out(const std::string& path)
{
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open " + path + " for writing");
    }
    out << std::setprecision(17);
    return out;
}

std::ifstream open_in(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    return in;
}

// Next non-empty line with '#' comments stripped.
bool next_content_line(std::istream& in, std::string& line)
{
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        if (line.find_first_not_of(" \t\r") != std::string::npos) {
            return true;
        }
    }
    return false;
}

} // namespace

void write_off(const DiscreteManifold& mesh, const std::string& path)
{
    if (mesh.dim() != 2) {
        throw std::invalid_argument("write_off: OFF export needs a triangle mesh");
    }
    auto out = open_out(path);
    out << "OFF\n" << mesh.vertex_count() << ' ' << mesh.element_count() << " 0\n";
    for (const auto& x : mesh.positions()) {
        out << x.x() << ' ' << x.y() << ' ' << x.z() << '\n';
    }
    for (std::size_t e = 0; e < mesh.element_count(); ++e) {
        auto el = mesh.element(e);
        out << "3 " << el[0] << ' ' << el[1] << ' ' << el[2] << '\n';
    }
}

DiscreteManifold read_off(const std::string& path)
{
    auto in = open_in(path);
    std::string line;
    if (!next_content_line(in, line) || line.substr(0, 3) != "OFF") {
        throw std::runtime_error(path + ": missing OFF header");
    }
    std::istringstream rest(line.substr(3));
    std::size_t nv = 0, nf = 0, ne = 0;
    if (!(rest >> nv >> nf >> ne)) {
        if (!next_content_line(in, line)) {
            throw std::runtime_error(path + ": missing counts line");
        }
        std::istringstream counts(line);
        if (!(counts >> nv >> nf >> ne)) {
            throw std::runtime_error(path + ": malformed counts line");
        }
    }
    DiscreteManifold::Data d;
    d.dim = 2;
    d.positions.resize(nv);
    for (std::size_t v = 0; v < nv; ++v) {
        if (!next_content_line(in, line)) {
            throw std::runtime_error(path + ": truncated vertex list");
        }
        std::istringstream row(line);
        double x, y, z;
        if (!(row >> x >> y >> z)) {
            throw std::runtime_error(path + ": malformed vertex line " + std::to_string(v));
        }
        d.positions[v] = Vec3(x, y, z);
    }
    std::map<std::pair<int, int>, int> edge_count;
    for (std::size_t f = 0; f < nf; ++f) {
        if (!next_content_line(in, line)) {
            throw std::runtime_error(path + ": truncated face list");
        }
        std::istringstream row(line);
        int k, a, b, c;
        if (!(row >> k >> a >> b >> c) || k != 3) {
            throw std::runtime_error(path + ": only triangle faces \"3 i j k\" are supported");
        }
        d.elements.insert(d.elements.end(), {a, b, c});
        for (auto [i, j] : {std::pair{a, b}, std::pair{b, c}, std::pair{c, a}}) {
            ++edge_count[{std::min(i, j), std::max(i, j)}];
        }
    }
    d.boundary.assign(nv, 0);
    bool any_boundary = false;
    for (const auto& [edge, count] : edge_count) {
        if (count == 1) {
            d.boundary[edge.first] = d.boundary[edge.second] = 1;
            any_boundary = true;
        }
    }

    bool on_sphere = true;
    for (const auto& x : d.positions) {
        on_sphere = on_sphere && std::abs(x.norm() - 1.0) <= 1e-12;
    }
    if (on_sphere) {
        d.kind = any_boundary ? MeshKind::Hemisphere : MeshKind::Sphere;
        int pole = 0;
        for (std::size_t v = 0; v < nv; ++v) {
            if (d.positions[v].z() > d.positions[pole].z()) pole = static_cast<int>(v);
        }
        d.pole = pole;
        bool ring = any_boundary;
        if (any_boundary) {
            for (std::size_t v = 0; v < nv; ++v) {
                if (d.boundary[v] && std::abs(d.positions[v].z()) > 1e-12) ring = false;
            }
        }
        d.equator_ring = ring;
    } else {
        d.kind = MeshKind::Surface;
    }
    if (!any_boundary) {
        d.boundary.clear();
    }
    return DiscreteManifold(std::move(d));
}

void write_mesh_csv(const DiscreteManifold& mesh, const std::string& path)
{
    if (mesh.dim() != 1) {
        throw std::invalid_argument("write_mesh_csv: CSV export is for 1-D meshes");
    }
    auto out = open_out(path);
    out << "# kind=" << to_string(mesh.kind());
    if (mesh.kind() == MeshKind::Circle) {
        out << " length=" << mesh.circle_length();
    }
    out << '\n' << "vertex,coordinate,boundary\n";
    for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
        out << v << ',' << mesh.coordinate(v) << ',' << (mesh.is_boundary(v) ? 1 : 0) << '\n';
    }
}

DiscreteManifold read_mesh_csv(const std::string& path)
{
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("# kind=", 0) != 0) {
        throw std::runtime_error(path + ": missing '# kind=' header");
    }
    std::istringstream header(line.substr(7));
    std::string kind;
    header >> kind;
    double length = 0.0;
    std::string token;
    while (header >> token) {
        if (token.rfind("length=", 0) == 0) length = std::stod(token.substr(7));
    }
    if (!std::getline(in, line) || line.rfind("vertex,coordinate,boundary", 0) != 0) {
        throw std::runtime_error(path + ": missing column header");
    }
    DiscreteManifold::Data d;
    d.dim = 1;
    std::vector<char> boundary;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string idx, coord, flag;
        std::getline(row, idx, ',');
        std::getline(row, coord, ',');
        std::getline(row, flag, ',');
        d.positions.emplace_back(std::stod(coord), 0.0, 0.0);
        boundary.push_back(flag == "1");
    }
    const int n = static_cast<int>(d.positions.size());
    if (kind == "circle") {
        d.kind = MeshKind::Circle;
        d.circle_length = length;
        for (int i = 0; i < n; ++i) {
            d.elements.insert(d.elements.end(), {i, (i + 1) % n});
        }
    } else if (kind == "interval") {
        d.kind = MeshKind::Interval;
        for (int i = 0; i + 1 < n; ++i) {
            d.elements.insert(d.elements.end(), {i, i + 1});
        }
        d.boundary = std::move(boundary);
    } else {
        throw std::runtime_error(path + ": unsupported 1-D mesh kind '" + kind + "'");
    }
    d.pole = 0;
    return DiscreteManifold(std::move(d));
}

void write_field_csv(const ScalarField& field, const std::string& path, const char* column)
{
    auto out = open_out(path);
    out << "vertex," << column << '\n';
    for (std::size_t v = 0; v < field.size(); ++v) {
        out << v << ',' << field[v] << '\n';
    }
}

ScalarField read_field_csv(const std::string& path)
{
    auto in = open_in(path);
    std::string line;
    std::vector<double> values;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (header) {
            header = false;
            if (line.rfind("vertex,", 0) == 0) continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw std::runtime_error(path + ": expected 'vertex,value' rows");
        }
        const auto index = std::stoul(line.substr(0, comma));
        if (index != values.size()) {
            throw std::runtime_error(path + ": vertex indices must be 0, 1, 2, ... in order");
        }
        values.push_back(std::stod(line.substr(comma + 1)));
    }
    return ScalarField(std::move(values));
}

} // namespace pspectra
