#pragma once

#include "lprnet/autodiff.hpp"
#include "lprnet/errors.hpp"

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace lprnet {

// Checkpoint container: magic "LPRN", a u32 format version, then records of
// (u32 name length, name bytes, u8 dtype, u32 rank, u32 dims..., payload)
// until end of file. dtype 0 = float32, 1 = float64, payload little-endian.
// Roundtrips are byte-exact.
struct CheckpointRecord {
    std::string name;
    std::uint8_t dtype = 0;
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> payload;

    std::size_t element_count() const {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const std::vector<CheckpointRecord>& records);
std::vector<CheckpointRecord> load_checkpoint(const std::string& path);

// typed helpers

template <typename T>
CheckpointRecord make_record(const std::string& name, std::vector<std::uint32_t> dims,
                             const std::vector<T>& values) {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    CheckpointRecord rec;
    rec.name = name;
    rec.dtype = std::is_same_v<T, float> ? 0 : 1;
    rec.dims = std::move(dims);
    if (rec.element_count() != values.size())
        throw ShapeError("checkpoint record " + name + ": dims do not match value count");
    rec.payload.resize(values.size() * sizeof(T));
    std::memcpy(rec.payload.data(), values.data(), rec.payload.size());
    return rec;
}

template <typename T>
std::vector<T> record_values(const CheckpointRecord& rec) {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    const std::uint8_t want = std::is_same_v<T, float> ? 0 : 1;
    if (rec.dtype != want)
        throw UnsupportedFormatError("checkpoint record " + rec.name + ": dtype mismatch");
    std::vector<T> out(rec.element_count());
    if (rec.payload.size() != out.size() * sizeof(T))
        throw IntegrityError("checkpoint record " + rec.name + ": payload size mismatch");
    std::memcpy(out.data(), rec.payload.data(), rec.payload.size());
    return out;
}

template <typename T>
CheckpointRecord param_record(const ad::Param<T>& p) {
    return make_record(p.name, {std::uint32_t(p.shape.rows), std::uint32_t(p.shape.cols)},
                       p.value);
}

}  // namespace lprnet
