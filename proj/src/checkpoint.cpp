#include "keepout/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <zlib.h>

#include "keepout/error.hpp"

namespace keepout {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[off + i]) << (8 * i);
    return v;
}

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

} // namespace

EnvelopeWriter::EnvelopeWriter(const std::string& magic, std::uint32_t version,
                               const nlohmann::ordered_json& meta) {
    if (magic.size() != 4) throw ValidationError("envelope magic must be 4 bytes");
    bytes_.insert(bytes_.end(), magic.begin(), magic.end());
    put_u32(bytes_, version);
    const std::string meta_str = meta.dump();
    put_u32(bytes_, static_cast<std::uint32_t>(meta_str.size()));
    bytes_.insert(bytes_.end(), meta_str.begin(), meta_str.end());
}

void EnvelopeWriter::add_blob(const double* data, std::size_t count) {
    const std::size_t off = bytes_.size();
    bytes_.resize(off + count * 8);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint64_t bits = std::bit_cast<std::uint64_t>(data[i]);
        for (int b = 0; b < 8; ++b) {
            bytes_[off + i * 8 + b] = static_cast<std::uint8_t>(bits >> (8 * b));
        }
    }
}

void EnvelopeWriter::write(const std::string& path) const {
    std::vector<std::uint8_t> full = bytes_;
    put_u32(full, crc_of(full.data(), full.size()));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(full.data()),
              static_cast<std::streamsize>(full.size()));
    if (!out) throw IoError("write failed: " + path);
}

EnvelopeReader EnvelopeReader::open(const std::string& path,
                                    const std::string& expected_magic) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    EnvelopeReader r;
    r.bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    if (r.bytes_.size() < 16) throw IoError("truncated file: " + path);

    const std::size_t body = r.bytes_.size() - 4;
    const std::uint32_t stored_crc = get_u32(r.bytes_, body);
    if (crc_of(r.bytes_.data(), body) != stored_crc) {
        throw IoError("checksum mismatch: " + path);
    }
    if (std::memcmp(r.bytes_.data(), expected_magic.data(), 4) != 0) {
        throw IoError("bad magic in " + path + " (expected " + expected_magic + ")");
    }
    r.version_ = get_u32(r.bytes_, 4);
    const std::uint32_t meta_len = get_u32(r.bytes_, 8);
    if (12 + static_cast<std::size_t>(meta_len) > body) {
        throw IoError("corrupt metadata length: " + path);
    }
    try {
        r.meta_ = nlohmann::json::parse(r.bytes_.begin() + 12,
                                        r.bytes_.begin() + 12 + meta_len);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt metadata in " + path + ": " + e.what());
    }
    r.cursor_ = 12 + meta_len;
    r.payload_end_ = body;
    return r;
}

void EnvelopeReader::read_blob(double* out, std::size_t count) {
    if (cursor_ + count * 8 > payload_end_) {
        throw IoError("envelope blob read past end of payload");
    }
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) {
            bits |= static_cast<std::uint64_t>(bytes_[cursor_ + i * 8 + b]) << (8 * b);
        }
        out[i] = std::bit_cast<double>(bits);
    }
    cursor_ += count * 8;
}

double EnvelopeReader::read_scalar() {
    double v = 0.0;
    read_blob(&v, 1);
    return v;
}

std::size_t EnvelopeReader::remaining_doubles() const {
    return (payload_end_ - cursor_) / 8;
}

void EnvelopeReader::expect_consumed() const {
    if (cursor_ != payload_end_) {
        throw IoError("envelope has unread payload (size mismatch)");
    }
}

} // namespace keepout
