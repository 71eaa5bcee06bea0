#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core/inversion.hpp"
#include "core/trainer.hpp"
#include "core/world.hpp"

namespace lswap {

// Line-oriented key=value configuration with [sections]. Unknown keys are
// rejected; '#' and ';' start comments. The raw text is kept so manifests can
// echo it verbatim.
class RunConfig {
  public:
    static RunConfig defaults();
    static RunConfig load(const std::string& path);
    static RunConfig parse(const std::string& text, const std::string& origin = "<string>");

    // "section.key" -> value; records the override for the manifest
    void set(const std::string& dotted_key, const std::string& value);
    std::string get(const std::string& dotted_key) const;

    WorldConfig world() const;
    TrainConfig train() const;
    InversionConfig inversion() const;

    // [experiment]
    std::vector<double> sweep_grid() const;
    size_t eval_pairs() const;
    size_t retrieval_n() const;
    double divergence_threshold() const;
    std::pair<double, double> diffusion_window() const;  // fractions of the run
    size_t pca_samples() const;
    size_t pca_k() const;

    // [output]
    std::string output_dir() const;

    const std::string& raw_text() const { return raw_text_; }
    const std::vector<std::pair<std::string, std::string>>& overrides() const { return overrides_; }
    // the effective configuration as a loadable config file
    std::string render() const;

  private:
    RunConfig() = default;
    struct Entry {
        std::string key;  // dotted
        std::string value;
    };
    const Entry* find(const std::string& dotted) const;
    Entry* find(const std::string& dotted);
    double num(const std::string& dotted) const;
    size_t idx(const std::string& dotted) const;
    bool flag(const std::string& dotted) const;

    std::vector<Entry> entries_;
    std::string raw_text_;
    std::vector<std::pair<std::string, std::string>> overrides_;
};

Space space_from_string(const std::string& s);
const char* space_to_string(Space s);

}  // namespace lswap
