#include "lprnet/cloud.hpp"

#include "lprnet/errors.hpp"
#include "lprnet/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace lprnet {

namespace {

bool blank_line(const std::string& s) {
    return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

struct Bounds {
    Vec3 lo, hi;
};

Bounds bounding_box(const PointCloud& cloud) {
    Bounds b{Vec3::Constant(std::numeric_limits<double>::infinity()),
             Vec3::Constant(-std::numeric_limits<double>::infinity())};
    for (const Vec3& p : cloud.points) {
        b.lo = b.lo.cwiseMin(p);
        b.hi = b.hi.cwiseMax(p);
    }
    return b;
}

}  // namespace

PointCloud load_xyz(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    PointCloud cloud;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank_line(line)) continue;
        std::istringstream fields(line);
        double x, y, z;
        if (!(fields >> x >> y >> z))
            throw ParseError("malformed xyz record in " + path, line_no);
        cloud.points.emplace_back(x, y, z);
    }
    if (cloud.points.empty()) throw std::invalid_argument("empty point cloud file: " + path);
    return cloud;
}

void save_xyz(const PointCloud& cloud, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    char buf[128];
    const bool flags = cloud.has_ground_flags();
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        const Vec3& p = cloud.points[i];
        if (flags)
            std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g %d\n", p.x(), p.y(), p.z(),
                          int(cloud.ground_flag[i]));
        else
            std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", p.x(), p.y(), p.z());
        out << buf;
    }
    if (!out) throw IoError("write failed: " + path);
}

namespace {

struct PlyProperty {
    std::string name;
    int byte_size = 0;
    bool is_double = false;
    bool is_float = false;
};

int ply_type_size(const std::string& t) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" ||
        t == "float32")
        return 4;
    if (t == "double" || t == "float64") return 8;
    return 0;
}

}  // namespace

PointCloud load_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);

    std::string line;
    if (!std::getline(in, line) || line.rfind("ply", 0) != 0)
        throw UnsupportedFormatError(path + ": not a PLY file");

    bool binary = false;
    std::size_t vertex_count = 0;
    std::vector<PlyProperty> props;
    bool in_vertex_element = false;
    bool seen_vertex = false;

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream fields(line);
        std::string key;
        fields >> key;
        if (key == "comment" || key == "obj_info") continue;
        if (key == "format") {
            std::string fmt, version;
            fields >> fmt >> version;
            if (fmt == "ascii")
                binary = false;
            else if (fmt == "binary_little_endian")
                binary = true;
            else
                throw UnsupportedFormatError(path + ": unsupported PLY format " + fmt);
        } else if (key == "element") {
            std::string name;
            std::size_t count;
            fields >> name >> count;
            if (name == "vertex") {
                vertex_count = count;
                in_vertex_element = true;
                seen_vertex = true;
            } else {
                if (!seen_vertex)
                    throw UnsupportedFormatError(path + ": element before vertex not supported");
                in_vertex_element = false;
            }
        } else if (key == "property") {
            if (!in_vertex_element) continue;
            std::string type, name;
            fields >> type;
            if (type == "list")
                throw UnsupportedFormatError(path + ": list property on vertex");
            fields >> name;
            PlyProperty p;
            p.name = name;
            p.byte_size = ply_type_size(type);
            p.is_double = (type == "double" || type == "float64");
            p.is_float = (type == "float" || type == "float32");
            if (p.byte_size == 0)
                throw UnsupportedFormatError(path + ": unknown property type " + type);
            props.push_back(p);
        } else if (key == "end_header") {
            break;
        }
    }

    int xi = -1, yi = -1, zi = -1;
    for (std::size_t i = 0; i < props.size(); ++i) {
        if (props[i].name == "x") xi = int(i);
        if (props[i].name == "y") yi = int(i);
        if (props[i].name == "z") zi = int(i);
    }
    if (xi < 0 || yi < 0 || zi < 0)
        throw UnsupportedFormatError(path + ": vertex element lacks x/y/z properties");
    for (int i : {xi, yi, zi})
        if (!props[i].is_double && !props[i].is_float)
            throw UnsupportedFormatError(path + ": x/y/z must be float or double");
    if (vertex_count == 0) throw std::invalid_argument("empty point cloud file: " + path);

    PointCloud cloud;
    cloud.points.reserve(vertex_count);

    if (binary) {
        std::size_t stride = 0;
        for (const auto& p : props) stride += p.byte_size;
        std::vector<char> row(stride);
        std::vector<std::size_t> offsets(props.size());
        std::size_t off = 0;
        for (std::size_t i = 0; i < props.size(); ++i) {
            offsets[i] = off;
            off += props[i].byte_size;
        }
        for (std::size_t v = 0; v < vertex_count; ++v) {
            if (!in.read(row.data(), std::streamsize(stride)))
                throw IntegrityError(path + ": truncated vertex data at vertex " +
                                     std::to_string(v));
            Vec3 p;
            const int ids[3] = {xi, yi, zi};
            for (int a = 0; a < 3; ++a) {
                const PlyProperty& pr = props[ids[a]];
                if (pr.is_double) {
                    double d;
                    std::memcpy(&d, row.data() + offsets[ids[a]], 8);
                    p[a] = d;
                } else {
                    float f;
                    std::memcpy(&f, row.data() + offsets[ids[a]], 4);
                    p[a] = f;
                }
            }
            cloud.points.push_back(p);
        }
    } else {
        std::size_t v = 0;
        long line_no = 0;
        while (v < vertex_count) {
            if (!std::getline(in, line))
                throw IntegrityError(path + ": truncated vertex data at vertex " +
                                     std::to_string(v));
            ++line_no;
            if (blank_line(line)) continue;
            std::istringstream fields(line);
            std::vector<double> vals(props.size());
            for (std::size_t i = 0; i < props.size(); ++i)
                if (!(fields >> vals[i]))
                    throw ParseError(path + ": malformed vertex line", line_no);
            cloud.points.emplace_back(vals[xi], vals[yi], vals[zi]);
            ++v;
        }
    }
    return cloud;
}

void save_ply(const PointCloud& cloud, const std::string& path, bool binary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << "ply\n";
    out << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n");
    out << "element vertex " << cloud.points.size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    out << "end_header\n";
    if (binary) {
        for (const Vec3& p : cloud.points) {
            double row[3] = {p.x(), p.y(), p.z()};
            out.write(reinterpret_cast<const char*>(row), sizeof(row));
        }
    } else {
        char buf[128];
        for (const Vec3& p : cloud.points) {
            std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", p.x(), p.y(), p.z());
            out << buf;
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

namespace {

NormRecord record_from_points(const std::vector<const PointCloud*>& clouds) {
    std::size_t n = 0;
    Vec3 sum = Vec3::Zero();
    for (const PointCloud* c : clouds) {
        for (const Vec3& p : c->points) sum += p;
        n += c->points.size();
    }
    if (n == 0) throw std::invalid_argument("normalize: empty cloud");
    NormRecord rec;
    rec.centroid = sum / double(n);
    double max_r = 0.0;
    for (const PointCloud* c : clouds)
        for (const Vec3& p : c->points) max_r = std::max(max_r, (p - rec.centroid).norm());
    if (max_r <= 0.0) {
        rec.scale = 1.0;
        rec.degenerate = true;
    } else {
        rec.scale = max_r;
    }
    return rec;
}

}  // namespace

std::pair<PointCloud, NormRecord> normalize(const PointCloud& cloud) {
    const NormRecord rec = record_from_points({&cloud});
    return {apply_norm(cloud, rec), rec};
}

NormRecord pair_union_record(const PointCloud& a, const PointCloud& b) {
    return record_from_points({&a, &b});
}

PointCloud apply_norm(const PointCloud& cloud, const NormRecord& rec) {
    PointCloud out = cloud;
    for (auto& p : out.points) p = rec.to_normalized(p);
    return out;
}

PointCloud invert_norm(const PointCloud& cloud, const NormRecord& rec) {
    PointCloud out = cloud;
    for (auto& p : out.points) p = rec.to_world(p);
    return out;
}

PointCloud ground_filter(const PointCloud& cloud, double cell, double height_threshold) {
    if (cell <= 0) throw std::invalid_argument("ground_filter: cell must be positive");
    if (height_threshold < 0)
        throw std::invalid_argument("ground_filter: height_threshold must be >= 0");
    if (cloud.points.empty()) throw std::invalid_argument("ground_filter: empty cloud");

    const Bounds b = bounding_box(cloud);
    const int nx = std::max(1, int(std::floor((b.hi.x() - b.lo.x()) / cell)) + 1);
    const int ny = std::max(1, int(std::floor((b.hi.y() - b.lo.y()) / cell)) + 1);
    const std::size_t ncells = std::size_t(nx) * ny;

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> min_z(ncells, inf);
    std::vector<int> cell_of(cloud.points.size());
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        int ix = std::clamp(int((cloud.points[i].x() - b.lo.x()) / cell), 0, nx - 1);
        int iy = std::clamp(int((cloud.points[i].y() - b.lo.y()) / cell), 0, ny - 1);
        cell_of[i] = iy * nx + ix;
        min_z[cell_of[i]] = std::min(min_z[cell_of[i]], cloud.points[i].z());
    }

    // one smoothing pass: min over the 3x3 neighborhood (empty cells stay empty)
    std::vector<double> smooth(ncells, inf);
    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) {
            double m = inf;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int jx = ix + dx, jy = iy + dy;
                    if (jx < 0 || jx >= nx || jy < 0 || jy >= ny) continue;
                    m = std::min(m, min_z[std::size_t(jy) * nx + jx]);
                }
            }
            smooth[std::size_t(iy) * nx + ix] = m;
        }
    }

    PointCloud out = cloud;
    out.ground_flag.resize(cloud.points.size());
    for (std::size_t i = 0; i < cloud.points.size(); ++i)
        out.ground_flag[i] = (cloud.points[i].z() - smooth[cell_of[i]] <= height_threshold) ? 1 : 0;
    return out;
}

namespace {

GridDSM dsm_on_grid(const PointCloud& cloud, double ox, double oy, double cell, int nx, int ny) {
    GridDSM dsm;
    dsm.origin = Eigen::Vector2d(ox, oy);
    dsm.cell_size = cell;
    dsm.nx = nx;
    dsm.ny = ny;
    dsm.max_z.resize(std::size_t(nx) * ny);
    dsm.occupied.resize(std::size_t(nx) * ny);
    kernels::grid_max_bin(cloud.points.data(), cloud.points.size(), ox, oy, cell, nx, ny,
                          dsm.max_z.data(), dsm.occupied.data());
    return dsm;
}

}  // namespace

GridDSM build_dsm(const PointCloud& cloud, double cell) {
    if (cell <= 0) throw std::invalid_argument("build_dsm: cell must be positive");
    if (cloud.points.empty()) throw std::invalid_argument("build_dsm: empty cloud");
    const Bounds b = bounding_box(cloud);
    const int nx = std::max(1, int(std::floor((b.hi.x() - b.lo.x()) / cell)) + 1);
    const int ny = std::max(1, int(std::floor((b.hi.y() - b.lo.y()) / cell)) + 1);
    return dsm_on_grid(cloud, b.lo.x(), b.lo.y(), cell, nx, ny);
}

std::pair<GridDSM, GridDSM> build_dsm_pair(const PointCloud& a, const PointCloud& b, double cell) {
    if (cell <= 0) throw std::invalid_argument("build_dsm_pair: cell must be positive");
    if (a.points.empty() || b.points.empty())
        throw std::invalid_argument("build_dsm_pair: empty cloud");
    const Bounds ba = bounding_box(a);
    const Bounds bb = bounding_box(b);
    const Vec3 lo = ba.lo.cwiseMin(bb.lo);
    const Vec3 hi = ba.hi.cwiseMax(bb.hi);
    const int nx = std::max(1, int(std::floor((hi.x() - lo.x()) / cell)) + 1);
    const int ny = std::max(1, int(std::floor((hi.y() - lo.y()) / cell)) + 1);
    return {dsm_on_grid(a, lo.x(), lo.y(), cell, nx, ny),
            dsm_on_grid(b, lo.x(), lo.y(), cell, nx, ny)};
}

void save_dsm_xyz(const GridDSM& dsm, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    char buf[128];
    for (int iy = 0; iy < dsm.ny; ++iy) {
        for (int ix = 0; ix < dsm.nx; ++ix) {
            if (!dsm.occupied_at(ix, iy)) continue;
            const double cx = dsm.origin.x() + (ix + 0.5) * dsm.cell_size;
            const double cy = dsm.origin.y() + (iy + 0.5) * dsm.cell_size;
            std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", cx, cy, dsm.at(ix, iy));
            out << buf;
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace lprnet
