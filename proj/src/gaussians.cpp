#include "gsattack/gaussians.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gsattack/error.hpp"

namespace gsattack {

GaussianSet::GaussianSet(std::size_t n)
    : positions(n, Vec3::Zero()), opacities(n, 0.0), scales(n, Vec3::Zero()),
      rotations(n, Vec4::Zero()), colors(n, Vec3::Zero()) {}

void GaussianSet::check_shape() const {
    const std::size_t n = positions.size();
    if (n == 0) throw ShapeMismatch("Gaussian set is empty");
    if (opacities.size() != n || scales.size() != n || rotations.size() != n ||
        colors.size() != n) {
        throw ShapeMismatch("Gaussian set arrays disagree in length");
    }
}

Eigen::VectorXd GaussianSet::flatten() const {
    Eigen::VectorXd flat(static_cast<Eigen::Index>(size()) * kDofPerGaussian);
    for (std::size_t i = 0; i < size(); ++i) {
        auto row = flat.segment(static_cast<Eigen::Index>(i) * kDofPerGaussian, kDofPerGaussian);
        row.segment<3>(dof::kPosition) = positions[i];
        row[dof::kOpacity] = opacities[i];
        row.segment<3>(dof::kScale) = scales[i];
        row.segment<4>(dof::kRotation) = rotations[i];
        row.segment<3>(dof::kColor) = colors[i];
    }
    return flat;
}

GaussianSet GaussianSet::unflatten(const Eigen::VectorXd &flat) {
    if (flat.size() % kDofPerGaussian != 0) throw ShapeMismatch("flat vector is not N x 14");
    GaussianSet g(static_cast<std::size_t>(flat.size() / kDofPerGaussian));
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto row = flat.segment(static_cast<Eigen::Index>(i) * kDofPerGaussian, kDofPerGaussian);
        g.positions[i] = row.segment<3>(dof::kPosition);
        g.opacities[i] = row[dof::kOpacity];
        g.scales[i] = row.segment<3>(dof::kScale);
        g.rotations[i] = row.segment<4>(dof::kRotation);
        g.colors[i] = row.segment<3>(dof::kColor);
    }
    return g;
}

GaussianSet &GaussianSet::operator+=(const GaussianSet &o) {
    require_same_size(*this, o, "GaussianSet::operator+=");
    for (std::size_t i = 0; i < size(); ++i) {
        positions[i] += o.positions[i];
        opacities[i] += o.opacities[i];
        scales[i] += o.scales[i];
        rotations[i] += o.rotations[i];
        colors[i] += o.colors[i];
    }
    return *this;
}

void require_same_size(const GaussianSet &a, const GaussianSet &b, const char *what) {
    if (a.size() != b.size()) {
        throw ShapeMismatch(std::string(what) + ": " + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()) + " Gaussians");
    }
}

GaussianDelta GaussianDelta::between(const GaussianSet &current, const GaussianSet &baseline) {
    require_same_size(current, baseline, "GaussianDelta");
    GaussianDelta d;
    const std::size_t n = current.size();
    d.positions.resize(n);
    d.opacities.resize(n);
    d.scales.resize(n);
    d.rotations.resize(n);
    d.colors.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        d.positions[i] = current.positions[i] - baseline.positions[i];
        d.opacities[i] = current.opacities[i] - baseline.opacities[i];
        d.scales[i] = current.scales[i] - baseline.scales[i];
        d.rotations[i] = current.rotations[i] - baseline.rotations[i];
        d.colors[i] = current.colors[i] - baseline.colors[i];
    }
    return d;
}

// ---------------------------------------------------------------------------
// PLY

namespace {

constexpr std::array<const char *, 14> kPlyFields = {
    "x",     "y",     "z",     "opacity", "scale_0", "scale_1", "scale_2",
    "rot_0", "rot_1", "rot_2", "rot_3",   "red_f",   "green_f", "blue_f"};

struct PlyProperty {
    std::string name;
    std::string type;
    std::size_t offset = 0;
    std::size_t bytes = 0;
};

std::size_t type_bytes(const std::string &t) {
    static const std::map<std::string, std::size_t> sizes = {
        {"char", 1},   {"uchar", 1},  {"int8", 1},   {"uint8", 1},   {"short", 2},
        {"ushort", 2}, {"int16", 2},  {"uint16", 2}, {"int", 4},     {"uint", 4},
        {"int32", 4},  {"uint32", 4}, {"float", 4},  {"float32", 4}, {"double", 8},
        {"float64", 8}};
    auto it = sizes.find(t);
    if (it == sizes.end()) throw MalformedAsset("unsupported PLY property type '" + t + "'");
    return it->second;
}

static_assert(std::endian::native == std::endian::little,
              "PLY reader assumes a little-endian host");

double read_scalar(const char *p, const std::string &type) {
    if (type == "float" || type == "float32") {
        float f;
        std::memcpy(&f, p, 4);
        return f;
    }
    if (type == "double" || type == "float64") {
        double d;
        std::memcpy(&d, p, 8);
        return d;
    }
    throw MalformedAsset("Gaussian property stored as non-float type '" + type + "'");
}

void check_domain(const GaussianSet &g) {
    constexpr double tol = 1e-6;
    auto finite3 = [](const Vec3 &v) { return v.allFinite(); };
    for (std::size_t i = 0; i < g.size(); ++i) {
        const std::string at = " at vertex " + std::to_string(i);
        if (!finite3(g.positions[i]) || !std::isfinite(g.opacities[i]) ||
            !finite3(g.scales[i]) || !g.rotations[i].allFinite() || !finite3(g.colors[i])) {
            throw ValueDomain("non-finite value" + at);
        }
        if (g.opacities[i] < -tol || g.opacities[i] > 1.0 + tol) {
            throw ValueDomain("opacity " + std::to_string(g.opacities[i]) + " outside [0,1]" + at);
        }
        if ((g.colors[i].array() < -tol).any() || (g.colors[i].array() > 1.0 + tol).any()) {
            throw ValueDomain("color outside [0,1]" + at);
        }
        if ((g.scales[i].array() <= 0.0).any()) throw ValueDomain("nonpositive scale" + at);
    }
}

} // namespace

GaussianSet load_gaussians(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MalformedAsset("cannot open asset '" + path.string() + "'");

    std::string line;
    std::getline(in, line);
    if (line != "ply") throw MalformedAsset("'" + path.string() + "' is not a PLY file");

    std::vector<PlyProperty> props;
    std::size_t vertex_count = 0;
    std::size_t stride = 0;
    bool in_vertex = false;
    bool saw_vertex = false;
    bool binary_le = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            binary_le = fmt == "binary_little_endian";
        } else if (word == "element") {
            std::string name;
            ls >> name;
            in_vertex = name == "vertex";
            if (in_vertex) {
                if (!(ls >> vertex_count)) throw MalformedAsset("bad vertex element count");
                saw_vertex = true;
            } else if (!saw_vertex) {
                throw MalformedAsset("elements before 'vertex' are not supported");
            }
        } else if (word == "property" && in_vertex) {
            PlyProperty p;
            ls >> p.type;
            if (p.type == "list") throw MalformedAsset("list properties are not supported");
            ls >> p.name;
            p.bytes = type_bytes(p.type);
            p.offset = stride;
            stride += p.bytes;
            props.push_back(p);
        } else if (word == "end_header") {
            break;
        }
    }
    if (!binary_le) throw MalformedAsset("only binary_little_endian PLY is supported");
    if (!saw_vertex) throw MalformedAsset("missing 'vertex' element");
    if (vertex_count == 0) throw MalformedAsset("vertex element is empty");

    std::array<const PlyProperty *, 14> slot{};
    for (std::size_t f = 0; f < kPlyFields.size(); ++f) {
        auto it = std::find_if(props.begin(), props.end(),
                               [&](const PlyProperty &p) { return p.name == kPlyFields[f]; });
        if (it == props.end()) {
            throw MalformedAsset(std::string("missing vertex property '") + kPlyFields[f] + "'");
        }
        slot[f] = &*it;
    }

    std::vector<char> body(vertex_count * stride);
    in.read(body.data(), static_cast<std::streamsize>(body.size()));
    if (static_cast<std::size_t>(in.gcount()) != body.size()) {
        throw MalformedAsset("vertex data truncated: expected " + std::to_string(vertex_count) +
                             " vertices");
    }

    GaussianSet g(vertex_count);
    for (std::size_t i = 0; i < vertex_count; ++i) {
        const char *row = body.data() + i * stride;
        auto get = [&](int f) { return read_scalar(row + slot[f]->offset, slot[f]->type); };
        g.positions[i] = Vec3(get(0), get(1), get(2));
        g.opacities[i] = get(3);
        g.scales[i] = Vec3(get(4), get(5), get(6));
        g.rotations[i] = Vec4(get(7), get(8), get(9), get(10));
        g.colors[i] = Vec3(get(11), get(12), get(13));
    }
    check_domain(g);
    return g;
}

void save_gaussians(const GaussianSet &g, const std::filesystem::path &path,
                    const std::string &provenance) {
    g.check_shape();
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MalformedAsset("cannot write asset '" + path.string() + "'");
    out << "ply\nformat binary_little_endian 1.0\nelement vertex " << g.size() << "\n";
    for (const char *name : kPlyFields) out << "property float " << name << "\n";
    out << "end_header\n";

    std::vector<float> row(kPlyFields.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto &p = g.positions[i];
        const auto &s = g.scales[i];
        const auto &q = g.rotations[i];
        const auto &c = g.colors[i];
        const double values[14] = {p.x(), p.y(), p.z(), g.opacities[i], s.x(), s.y(), s.z(),
                                   q[0],  q[1],  q[2],  q[3],           c.x(), c.y(), c.z()};
        for (int f = 0; f < 14; ++f) row[f] = static_cast<float>(values[f]);
        out.write(reinterpret_cast<const char *>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }

    nlohmann::json sidecar = {{"count", g.size()},
                              {"units", "scene"},
                              {"rotation_order", "wxyz"},
                              {"provenance", provenance}};
    std::ofstream meta(path.string() + ".json");
    meta << sidecar.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Regularizers

double shape_loss(const GaussianSet &g, const GaussianSet &g0, const ShapeWeights &w) {
    GaussianSet unused;
    return shape_loss(g, g0, w, unused, 0.0);
}

double shape_loss(const GaussianSet &g, const GaussianSet &g0, const ShapeWeights &w,
                  GaussianSet &grad, double scale) {
    require_same_size(g, g0, "shape_loss");
    const bool want_grad = scale != 0.0;
    if (want_grad) require_same_size(grad, g, "shape_loss gradient");
    double total = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec3 dmu = g.positions[i] - g0.positions[i];
        const Vec3 ds = g.scales[i] - g0.scales[i];
        const Vec4 dq = g.rotations[i] - g0.rotations[i];
        const double unit = g.rotations[i].squaredNorm() - 1.0;
        total += w.position * dmu.squaredNorm() + w.scale * ds.squaredNorm() +
                 w.rotation * dq.squaredNorm() + w.unit_quaternion * unit * unit;
        if (want_grad) {
            grad.positions[i] += scale * 2.0 * w.position * dmu;
            grad.scales[i] += scale * 2.0 * w.scale * ds;
            grad.rotations[i] += scale * (2.0 * w.rotation * dq +
                                          4.0 * w.unit_quaternion * unit * g.rotations[i]);
        }
    }
    return total;
}

SideDeltaTerms side_delta_terms(const GaussianSet &g, const GaussianSet &g0) {
    require_same_size(g, g0, "side_delta");
    SideDeltaTerms t;
    const double n = static_cast<double>(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        t.position += (g.positions[i] - g0.positions[i]).norm();
        t.rotation += (g.rotations[i] - g0.rotations[i]).norm();
        const double da = g.opacities[i] - g0.opacities[i];
        t.opacity += da * da;
        t.scale += (g.scales[i] - g0.scales[i]).squaredNorm() / 3.0;
        t.color += (g.colors[i] - g0.colors[i]).squaredNorm() / 3.0;
    }
    t.position /= n;
    t.rotation /= n;
    t.opacity /= n;
    t.scale /= n;
    t.color /= n;
    return t;
}

double side_delta(const GaussianSet &g, const GaussianSet &g0) {
    return side_delta_terms(g, g0).total();
}

void project_feasible_inplace(GaussianSet &g) {
    for (std::size_t i = 0; i < g.size(); ++i) {
        g.opacities[i] = std::clamp(g.opacities[i], 0.0, 1.0);
        g.colors[i] = g.colors[i].cwiseMax(0.0).cwiseMin(1.0);
        g.scales[i] = g.scales[i].cwiseMax(kMinScale);
    }
}

GaussianSet project_feasible(GaussianSet g) {
    project_feasible_inplace(g);
    return g;
}

} // namespace gsattack
