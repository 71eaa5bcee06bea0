#include "core/runio.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "core/serialize.hpp"

namespace lswap {

const char* kVersionString = "latentswap 0.1.0";

void ensure_dir(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw IoError("cannot create directory '" + path + "': " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
    if (dir.empty()) return name;
    return dir.back() == '/' ? dir + name : dir + "/" + name;
}

bool file_exists(const std::string& path) { return std::filesystem::exists(path); }

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_metrics_csv(const std::string& path, const RunLog& log) {
    std::ostringstream os;
    os << "step,id_loss,lp_loss,shape_loss,total,wall_ms\n";
    for (size_t i = 0; i < log.per_step.size(); ++i) {
        const LossBreakdown& b = log.per_step[i];
        os << (i + 1) << "," << fmt_double(b.id_loss) << "," << fmt_double(b.lp_loss) << ","
           << fmt_double(b.shape_loss) << "," << fmt_double(b.total) << "," << log.wall_ms[i] << "\n";
    }
    write_text_file(path, os.str());
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open metrics file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw IoError("metrics file '" + path + "' is empty");
    if (line.rfind("step,id_loss,lp_loss,shape_loss,total", 0) != 0) {
        throw IoError("metrics file '" + path + "' has an unexpected header");
    }
    std::vector<MetricsRow> rows;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        MetricsRow r;
        double wall = 0.0;
        if (std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf,%lf,%lf", &r.step, &r.losses.id_loss,
                        &r.losses.lp_loss, &r.losses.shape_loss, &r.losses.total, &wall) < 5) {
            throw IoError("metrics file '" + path + "': malformed line " + std::to_string(lineno));
        }
        rows.push_back(r);
    }
    return rows;
}

void write_xy(const std::string& path, const std::vector<std::pair<size_t, double>>& series) {
    std::ostringstream os;
    for (const auto& [x, y] : series) os << x << " " << fmt_double(y) << "\n";
    write_text_file(path, os.str());
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw IoError("failed writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_manifest(const std::string& path, const std::string& command, const RunConfig& config,
                    const std::vector<std::pair<std::string, std::string>>& extras) {
    std::ostringstream os;
    os << kVersionString << "\n";
    os << "command = " << command << "\n";
    os << "world_seed = " << config.get("world.seed") << "\n";
    for (const auto& [k, v] : extras) os << k << " = " << v << "\n";
    if (!config.overrides().empty()) {
        os << "\n[overrides]\n";
        for (const auto& [k, v] : config.overrides()) os << k << " = " << v << "\n";
    }
    os << "\n--- input config (verbatim) ---\n";
    os << config.raw_text();
    if (!config.raw_text().empty() && config.raw_text().back() != '\n') os << "\n";
    os << "--- end input config ---\n";
    write_text_file(path, os.str());
}

void write_image_file(const std::string& path, const Array& image) {
    if (image.ndim() != 3 || image.dim(1) != image.dim(2)) {
        throw DimensionError("image file: expects (C,R,R), got " + shape_str(image.shape()));
    }
    image.check_finite("image file");
    std::vector<uint8_t> bytes;
    const uint32_t res = static_cast<uint32_t>(image.dim(1));
    const uint32_t channels = static_cast<uint32_t>(image.dim(0));
    for (uint32_t v : {res, channels}) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
    }
    for (size_t i = 0; i < image.size(); ++i) {
        const float f = static_cast<float>(image[i]);
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<uint8_t>((bits >> (8 * b)) & 0xff));
    }
    write_file_bytes(path, bytes);
}

Array read_image_file(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    if (bytes.size() < 8) throw IoError("image file '" + path + "' is too short");
    auto u32_at = [&](size_t off) {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes[off + i]) << (8 * i);
        return v;
    };
    const uint32_t res = u32_at(0);
    const uint32_t channels = u32_at(4);
    const size_t expect = 8 + static_cast<size_t>(res) * res * channels * 4;
    if (bytes.size() != expect) {
        throw IoError("image file '" + path + "': size does not match header (" +
                      std::to_string(bytes.size()) + " vs " + std::to_string(expect) + " bytes)");
    }
    Array img(Shape{channels, res, res});
    for (size_t i = 0; i < img.size(); ++i) {
        const uint32_t bits = u32_at(8 + 4 * i);
        float f;
        std::memcpy(&f, &bits, 4);
        img[i] = static_cast<double>(f);
    }
    img.check_finite("image file " + path);
    return img;
}

void export_pnm(const std::string& path, const Array& image) {
    if (image.ndim() != 3) throw DimensionError("pnm export: expects (C,R,R)");
    const size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
    double lo = image[0], hi = image[0];
    for (size_t i = 0; i < image.size(); ++i) {
        lo = std::min(lo, image[i]);
        hi = std::max(hi, image[i]);
    }
    const double span = (hi > lo) ? (hi - lo) : 1.0;
    auto level = [&](double v) { return static_cast<int>(std::lround(255.0 * (v - lo) / span)); };

    std::ostringstream os;
    if (c == 3) {
        os << "P3\n" << w << " " << h << "\n255\n";
        for (size_t y = 0; y < h; ++y) {
            for (size_t x = 0; x < w; ++x) {
                os << level(image[0 * h * w + y * w + x]) << " " << level(image[1 * h * w + y * w + x])
                   << " " << level(image[2 * h * w + y * w + x]) << (x + 1 < w ? " " : "\n");
            }
        }
    } else {
        os << "P2\n" << w << " " << h << "\n255\n";
        for (size_t y = 0; y < h; ++y) {
            for (size_t x = 0; x < w; ++x) {
                os << level(image[y * w + x]) << (x + 1 < w ? " " : "\n");
            }
        }
    }
    write_text_file(path, os.str());
}

}  // namespace lswap
