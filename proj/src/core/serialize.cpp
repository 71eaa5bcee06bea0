#include "core/serialize.hpp"

#include <cstring>
#include <fstream>

#include "core/rng.hpp"

namespace lswap {

namespace {

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<uint8_t>& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

void put_f64(std::vector<uint8_t>& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

void put_name(std::vector<uint8_t>& out, const std::string& s) {
    put_u16(out, static_cast<uint16_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

class Reader {
  public:
    Reader(const std::vector<uint8_t>& b) : b_(b) {}
    uint16_t u16() { return static_cast<uint16_t>(byte() | (byte() << 8)); }
    uint32_t u32() {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(byte()) << (8 * i);
        return v;
    }
    uint64_t u64() {
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(byte()) << (8 * i);
        return v;
    }
    float f32() {
        uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    double f64() {
        uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string name() {
        const size_t n = u16();
        check(n);
        std::string s(b_.begin() + static_cast<long>(pos_), b_.begin() + static_cast<long>(pos_ + n));
        pos_ += n;
        return s;
    }
    std::string raw(size_t n) {
        check(n);
        std::string s(b_.begin() + static_cast<long>(pos_), b_.begin() + static_cast<long>(pos_ + n));
        pos_ += n;
        return s;
    }
    size_t pos() const { return pos_; }

  private:
    uint8_t byte() {
        check(1);
        return b_[pos_++];
    }
    void check(size_t n) const {
        if (pos_ + n > b_.size()) throw IoError("container: truncated data");
    }
    const std::vector<uint8_t>& b_;
    size_t pos_ = 0;
};

}  // namespace

void quantize_f32(Array& a) {
    for (size_t i = 0; i < a.size(); ++i) a[i] = static_cast<double>(static_cast<float>(a[i]));
}

Container::Container(std::string magic) : magic_(std::move(magic)) {
    if (magic_.size() != 8) throw ContractError("container magic must be 8 bytes");
}

void Container::put_config(const std::string& name, double value) { config_.emplace_back(name, value); }

void Container::put_array(const std::string& name, const Array& a) { arrays_.emplace_back(name, a); }

double Container::config_value(const std::string& name) const {
    for (const auto& [k, v] : config_) {
        if (k == name) return v;
    }
    throw IoError("container: missing config entry '" + name + "'");
}

bool Container::has_config(const std::string& name) const {
    for (const auto& [k, v] : config_) {
        if (k == name) return true;
    }
    return false;
}

const Array& Container::array(const std::string& name) const {
    for (const auto& [k, v] : arrays_) {
        if (k == name) return v;
    }
    throw IoError("container: missing array '" + name + "'");
}

std::vector<uint8_t> Container::serialize() const {
    std::vector<uint8_t> out;
    out.insert(out.end(), magic_.begin(), magic_.end());
    put_u32(out, static_cast<uint32_t>(config_.size()));
    for (const auto& [k, v] : config_) {
        put_name(out, k);
        put_f64(out, v);
    }
    put_u32(out, static_cast<uint32_t>(arrays_.size()));
    for (const auto& [k, a] : arrays_) {
        put_name(out, k);
        put_u32(out, static_cast<uint32_t>(a.ndim()));
        for (size_t i = 0; i < a.ndim(); ++i) put_u32(out, static_cast<uint32_t>(a.dim(i)));
        for (size_t i = 0; i < a.size(); ++i) put_f32(out, static_cast<float>(a[i]));
    }
    put_u64(out, fnv1a64(out.data(), out.size()));
    return out;
}

uint64_t Container::checksum() const {
    const auto bytes = serialize();
    // footer is the checksum itself
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(bytes[bytes.size() - 8 + i]) << (8 * i);
    return v;
}

void Container::save(const std::string& path) const { write_file_bytes(path, serialize()); }

Container Container::parse(const std::vector<uint8_t>& bytes, const std::string& expect_magic) {
    if (bytes.size() < 16) throw IoError("container: file too short");
    Reader r(bytes);
    const std::string magic = r.raw(8);
    if (magic != expect_magic) {
        throw IoError("container: bad magic '" + magic + "', expected '" + expect_magic + "'");
    }
    Container c(magic);
    const uint32_t nc = r.u32();
    for (uint32_t i = 0; i < nc; ++i) {
        std::string k = r.name();
        const double v = r.f64();
        c.config_.emplace_back(std::move(k), v);
    }
    const uint32_t na = r.u32();
    for (uint32_t i = 0; i < na; ++i) {
        std::string k = r.name();
        const uint32_t ndim = r.u32();
        Shape shape(ndim);
        for (uint32_t d = 0; d < ndim; ++d) shape[d] = r.u32();
        Array a(shape);
        for (size_t j = 0; j < a.size(); ++j) a[j] = static_cast<double>(r.f32());
        c.arrays_.emplace_back(std::move(k), std::move(a));
    }
    const size_t payload = r.pos();
    const uint64_t stored = r.u64();
    const uint64_t actual = fnv1a64(bytes.data(), payload);
    if (stored != actual) throw IoError("container: checksum mismatch");
    return c;
}

Container Container::load(const std::string& path, const std::string& expect_magic) {
    return parse(read_file_bytes(path), expect_magic);
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<long>(bytes.size()));
    if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace lswap
