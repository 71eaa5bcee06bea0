#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "core/array.hpp"

namespace lswap {

// Self-describing binary container: 8 magic bytes, a named config block, then
// named little-endian float32 parameter arrays, followed by an fnv1a-64
// checksum of everything before it. Loading verifies magic and checksum.
class Container {
  public:
    explicit Container(std::string magic);

    void put_config(const std::string& name, double value);
    void put_array(const std::string& name, const Array& a);

    double config_value(const std::string& name) const;
    bool has_config(const std::string& name) const;
    const Array& array(const std::string& name) const;

    const std::vector<std::pair<std::string, double>>& config_entries() const { return config_; }
    const std::vector<std::pair<std::string, Array>>& array_entries() const { return arrays_; }

    std::vector<uint8_t> serialize() const;  // includes checksum footer
    uint64_t checksum() const;               // checksum of the serialized payload

    void save(const std::string& path) const;
    static Container load(const std::string& path, const std::string& expect_magic);
    static Container parse(const std::vector<uint8_t>& bytes, const std::string& expect_magic);

  private:
    std::string magic_;
    std::vector<std::pair<std::string, double>> config_;
    std::vector<std::pair<std::string, Array>> arrays_;
};

// Rounds every element through float32. Parameter arrays are kept
// f32-representable at construction so save/load round-trips are lossless.
void quantize_f32(Array& a);

std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes);

}  // namespace lswap
