#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace keepout {

// Binary container shared by agent checkpoints ("SACK") and replay-buffer
// files ("SRPB"): magic, format version u32, length-prefixed JSON metadata,
// little-endian f64 blobs, trailing CRC32 over everything before it.
class EnvelopeWriter {
public:
    EnvelopeWriter(const std::string& magic, std::uint32_t version,
                   const nlohmann::ordered_json& meta);

    void add_blob(const double* data, std::size_t count);
    void add_scalar(double value) { add_blob(&value, 1); }

    void write(const std::string& path) const;

private:
    std::vector<std::uint8_t> bytes_;
};

class EnvelopeReader {
public:
    static EnvelopeReader open(const std::string& path, const std::string& expected_magic);

    const nlohmann::json& meta() const { return meta_; }
    std::uint32_t version() const { return version_; }

    // Blobs are consumed sequentially in write order.
    void read_blob(double* out, std::size_t count);
    double read_scalar();
    std::size_t remaining_doubles() const;
    void expect_consumed() const;

private:
    EnvelopeReader() = default;
    std::vector<std::uint8_t> bytes_;
    std::size_t cursor_ = 0;
    std::size_t payload_end_ = 0;
    std::uint32_t version_ = 0;
    nlohmann::json meta_;
};

} // namespace keepout
