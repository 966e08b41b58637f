#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lprnet/cloud.hpp"
#include "lprnet/geometry.hpp"

namespace lprnet {

// Parameters for generating one synthetic registration pair from a base
// cloud.  Defaults mirror a photogrammetry-vs-LiDAR setting: 0.1 m noise,
// moderate occlusion, rotations up to 30 degrees, translations up to 2 m.
struct SimPairSpec {
    double noise_sigma = 0.1;      // meters, isotropic Gaussian per point
    double occlusion_rate = 0.3;   // fraction of points removed, in [0, 1)
    double rot_max_deg = 30.0;     // rotation angle drawn uniform in [0, rot_max]
    double trans_max = 2.0;        // translation drawn uniform in the ball of this radius
    bool contiguous_occlusion = true;  // false: uniform random dropout instead
    bool vertical_axis_only = false;   // true: rotation axis fixed to +z
    std::uint64_t seed = 0;

    // Throws std::invalid_argument when a field is out of range.
    void validate() const;
};

struct SimPair {
    PointCloud source;   // occluded, transformed, noisy copy of the base
    PointCloud target;   // the base cloud, untouched
    RigidTransform gt;   // maps source points onto the target
};

// Builds a source/target pair: the target is the base cloud; the source is
// the base with a contiguous region removed (exactly round(rate * N)
// points), moved by a random rigid transform, and perturbed by Gaussian
// noise.  Independent seeded streams drive occlusion, transform, and noise,
// so switching one effect off never changes the draws of the others.
// Throws std::invalid_argument when base is empty or occlusion would remove
// every point.
SimPair generate_pair(const PointCloud& base, const SimPairSpec& spec);

// Procedural base scenes at realistic scale (tens of meters), each with a
// distinct anisotropy.  Always returns exactly `count` points and is
// deterministic in (name, count, seed).  Throws std::invalid_argument for
// an unknown name or count == 0.
PointCloud base_cloud_library(const std::string& name, std::size_t count, std::uint64_t seed);

// Names accepted by base_cloud_library, in a fixed order.
const std::vector<std::string>& base_cloud_names();

// A batch of pairs written to disk with a JSON manifest.
struct PairSetConfig {
    std::string base_name = "plane+boxes";
    std::size_t points = 2048;     // points per base cloud
    std::size_t pairs = 10;
    SimPairSpec spec;              // spec.seed seeds the whole set

    void validate() const;
};

// Generates cfg.pairs pairs (a fresh base cloud per pair), writes
// pair_NNNN/source.xyz and pair_NNNN/target.xyz under `directory`, and a
// manifest.json listing relative paths plus each ground-truth transform in
// 12-number text form.  Returns the manifest path.  Identical configs
// produce byte-identical manifests and point files.
std::string write_pair_set(const PairSetConfig& cfg, const std::string& directory);

// One manifest entry, as read back by load_pair_manifest.
struct PairEntry {
    std::string source_path;   // absolute path after loading
    std::string target_path;
    RigidTransform gt;
};

// Parses a manifest written by write_pair_set; relative paths are resolved
// against the manifest's directory.  Throws lprnet::IntegrityError on
// malformed content.
std::vector<PairEntry> load_pair_manifest(const std::string& manifest_path);

}  // namespace lprnet
