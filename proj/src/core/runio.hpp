#pragma once

#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/trainer.hpp"

namespace lswap {

void ensure_dir(const std::string& path);
std::string join_path(const std::string& dir, const std::string& name);
bool file_exists(const std::string& path);

// %.17g: shortest representation that round-trips a double
std::string fmt_double(double v);

// fixed header: step,id_loss,lp_loss,shape_loss,total,wall_ms
void write_metrics_csv(const std::string& path, const RunLog& log);

struct MetricsRow {
    size_t step = 0;
    LossBreakdown losses;
};
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

// plot-ready two-column data
void write_xy(const std::string& path, const std::vector<std::pair<size_t, double>>& series);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

// run manifest: version, command, world seed, extras, overrides, and the
// verbatim input configuration
void write_manifest(const std::string& path, const std::string& command, const RunConfig& config,
                    const std::vector<std::pair<std::string, std::string>>& extras);

// flat binary image: 8-byte header (resolution, channels as u32 LE), then
// float32 planar channel data
void write_image_file(const std::string& path, const Array& image);
Array read_image_file(const std::string& path);

// text pixmap/graymap export for eyeballing; values min-max scaled
void export_pnm(const std::string& path, const Array& image);

extern const char* kVersionString;

}  // namespace lswap
