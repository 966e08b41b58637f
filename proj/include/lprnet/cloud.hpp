#pragma once

#include "lprnet/geometry.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace lprnet {

// N points in meters. ground_flag is empty until a filter sets it; when
// present it has one entry per point (1 = ground).
struct PointCloud {
    std::vector<Vec3> points;
    std::vector<std::uint8_t> ground_flag;
    std::string source_label;

    std::size_t size() const { return points.size(); }
    bool has_ground_flags() const { return ground_flag.size() == points.size(); }
};

// Per-cell maximum elevation over a regular XY grid.
struct GridDSM {
    Eigen::Vector2d origin = Eigen::Vector2d::Zero();
    double cell_size = 1.0;
    int nx = 0, ny = 0;
    std::vector<double> max_z;        // nx*ny, row-major (iy*nx + ix)
    std::vector<std::uint8_t> occupied;

    double at(int ix, int iy) const { return max_z[std::size_t(iy) * nx + ix]; }
    bool occupied_at(int ix, int iy) const { return occupied[std::size_t(iy) * nx + ix] != 0; }
};

// Centering/scaling record: normalized = (p - centroid) / scale.
struct NormRecord {
    Vec3 centroid = Vec3::Zero();
    double scale = 1.0;
    bool degenerate = false;  // all points identical; scale forced to 1

    Vec3 to_normalized(const Vec3& p) const { return (p - centroid) / scale; }
    Vec3 to_world(const Vec3& p) const { return p * scale + centroid; }
};

// XYZ text: one "x y z" line per point, extra trailing fields ignored.
PointCloud load_xyz(const std::string& path);
void save_xyz(const PointCloud& cloud, const std::string& path);

// PLY: ASCII or binary_little_endian 1.0 with float/double x y z vertex
// properties. save_ply writes binary double, lossless on roundtrip.
PointCloud load_ply(const std::string& path);
void save_ply(const PointCloud& cloud, const std::string& path, bool binary = true);

// Centers at the centroid and scales so the max radius is 1.
std::pair<PointCloud, NormRecord> normalize(const PointCloud& cloud);

// Shared record for a source/target pair, computed from their union, so the
// relative rigid transform survives up to the common scale.
NormRecord pair_union_record(const PointCloud& a, const PointCloud& b);
PointCloud apply_norm(const PointCloud& cloud, const NormRecord& rec);
PointCloud invert_norm(const PointCloud& cloud, const NormRecord& rec);

// Grid-minimum ground filter. A point is flagged ground iff
// z - smoothed_cell_min(z) <= height_threshold, where the smoothing pass takes
// the min over the 3x3 cell neighborhood. Partitions, never deletes.
PointCloud ground_filter(const PointCloud& cloud, double cell, double height_threshold);

GridDSM build_dsm(const PointCloud& cloud, double cell);

// Same grid geometry for two clouds (union footprint), needed to difference them.
std::pair<GridDSM, GridDSM> build_dsm_pair(const PointCloud& a, const PointCloud& b, double cell);

// DSM export: "cx cy max_z" per occupied cell.
void save_dsm_xyz(const GridDSM& dsm, const std::string& path);

}  // namespace lprnet
