#include "lprnet/checkpoint.hpp"

#include <fstream>

namespace lprnet {

namespace {

constexpr char kMagic[4] = {'L', 'P', 'R', 'N'};

template <typename U>
void write_le(std::ofstream& out, U v) {
    // this codebase targets little-endian hosts; a plain write is the format
    out.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <typename U>
bool read_le(std::ifstream& in, U& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(U));
    return bool(in);
}

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<CheckpointRecord>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(kMagic, 4);
    write_le(out, kCheckpointVersion);
    for (const CheckpointRecord& rec : records) {
        write_le(out, std::uint32_t(rec.name.size()));
        out.write(rec.name.data(), std::streamsize(rec.name.size()));
        write_le(out, rec.dtype);
        write_le(out, std::uint32_t(rec.dims.size()));
        for (std::uint32_t d : rec.dims) write_le(out, d);
        const std::size_t expect = rec.element_count() * (rec.dtype == 0 ? 4 : 8);
        if (rec.payload.size() != expect)
            throw IntegrityError("checkpoint record " + rec.name + ": payload size mismatch");
        out.write(reinterpret_cast<const char*>(rec.payload.data()),
                  std::streamsize(rec.payload.size()));
    }
    if (!out) throw IoError("write failed: " + path);
}

std::vector<CheckpointRecord> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw UnsupportedVersionError("not a checkpoint file: " + path);
    std::uint32_t version = 0;
    if (!read_le(in, version) || version != kCheckpointVersion)
        throw UnsupportedVersionError("unsupported checkpoint version " +
                                      std::to_string(version));

    std::vector<CheckpointRecord> records;
    while (true) {
        std::uint32_t name_len = 0;
        in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
        if (in.eof() && in.gcount() == 0) break;  // clean end of file
        if (!in) throw IntegrityError("truncated checkpoint header in " + path);

        CheckpointRecord rec;
        rec.name.resize(name_len);
        in.read(rec.name.data(), name_len);
        if (!in) throw IntegrityError("truncated record name in " + path);

        std::uint32_t rank = 0;
        if (!read_le(in, rec.dtype) || !read_le(in, rank))
            throw IntegrityError("truncated record " + rec.name);
        if (rec.dtype > 1)
            throw UnsupportedFormatError("checkpoint record " + rec.name + ": unknown dtype " +
                                         std::to_string(int(rec.dtype)));
        rec.dims.resize(rank);
        for (std::uint32_t i = 0; i < rank; ++i)
            if (!read_le(in, rec.dims[i])) throw IntegrityError("truncated record " + rec.name);

        rec.payload.resize(rec.element_count() * (rec.dtype == 0 ? 4 : 8));
        in.read(reinterpret_cast<char*>(rec.payload.data()),
                std::streamsize(rec.payload.size()));
        if (std::size_t(in.gcount()) != rec.payload.size())
            throw IntegrityError("truncated payload in record " + rec.name);
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace lprnet
