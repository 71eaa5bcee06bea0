#include "core/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace lswap {

namespace {

// single source of defaults; doubles as the schema for unknown-key rejection
const std::vector<std::pair<std::string, std::string>>& schema() {
    static const std::vector<std::pair<std::string, std::string>> s = {
        {"world.seed", "42"},
        {"world.d", "64"},
        {"world.layers", "18"},
        {"world.resolution", "32"},
        {"world.k_id", "16"},
        {"world.k_ex", "8"},
        {"world.k_po", "4"},
        {"world.k_landmarks", "68"},
        {"train.seed", "1"},
        {"train.batch_size", "64"},
        {"train.steps", "5000"},
        {"train.learning_rate", "0.0001"},
        {"train.same_pair_probability", "0.125"},
        {"train.beta1", "0.9"},
        {"train.beta2", "0.999"},
        {"train.adam_eps", "1e-8"},
        {"train.weight_decay", "0.01"},
        {"train.log_window", "250"},
        {"train.checkpoint_interval", "0"},
        {"train.early_stop", "true"},
        {"train.plateau_tol", "0.0001"},
        {"train.plateau_windows", "4"},
        {"train.space", "wplus"},
        {"train.precision", "f64"},
        {"train.fc_depth", "5"},
        {"train.hidden_width", "0"},
        {"loss.lambda", "100"},
        {"loss.mu", "0.1"},
        {"loss.alpha", "1"},
        {"invert.steps", "500"},
        {"invert.learning_rate", "0.01"},
        {"invert.pivotal_steps", "200"},
        {"invert.pivotal_learning_rate", "0.001"},
        {"invert.tolerance", "0.001"},
        {"experiment.sweep_grid", "0,0.01,0.1,1,10,100,1000"},
        {"experiment.eval_pairs", "50"},
        {"experiment.retrieval_n", "100"},
        {"experiment.divergence_threshold", "0.5"},
        {"experiment.diffusion_window", "0.1,0.5"},
        {"experiment.pca_samples", "512"},
        {"experiment.pca_k", "8"},
        {"output.dir", "lswap-out"},
    };
    return s;
}

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            size_t pos = 0;
            out.push_back(std::stod(item, &pos));
            if (pos != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("config: '" + key + "' has a non-numeric entry '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError("config: '" + key + "' is empty");
    return out;
}

}  // namespace

Space space_from_string(const std::string& s) {
    if (s == "z" || s == "Z") return Space::Z;
    if (s == "w" || s == "W") return Space::W;
    if (s == "wplus" || s == "w+" || s == "Wplus" || s == "W+") return Space::Wplus;
    throw ConfigError("config: unknown latent space '" + s + "' (z, w, wplus)");
}

const char* space_to_string(Space s) {
    switch (s) {
        case Space::Z: return "z";
        case Space::W: return "w";
        case Space::Wplus: return "wplus";
    }
    return "?";
}

RunConfig RunConfig::defaults() {
    RunConfig c;
    for (const auto& [k, v] : schema()) c.entries_.push_back({k, v});
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
    RunConfig c = defaults();
    c.raw_text_ = text;
    std::stringstream ss(text);
    std::string line, section;
    size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') {
                throw ConfigError("config: " + origin + ":" + std::to_string(lineno) +
                                  ": malformed section header '" + t + "'");
            }
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: " + origin + ":" + std::to_string(lineno) +
                              ": expected key=value, got '" + t + "'");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (section.empty()) {
            throw ConfigError("config: " + origin + ":" + std::to_string(lineno) + ": key '" + key +
                              "' appears before any [section]");
        }
        const std::string dotted = section + "." + key;
        Entry* e = c.find(dotted);
        if (!e) {
            throw ConfigError("config: " + origin + ":" + std::to_string(lineno) + ": unknown key '" +
                              dotted + "'");
        }
        e->value = value;
    }
    return c;
}

const RunConfig::Entry* RunConfig::find(const std::string& dotted) const {
    for (const Entry& e : entries_) {
        if (e.key == dotted) return &e;
    }
    return nullptr;
}

RunConfig::Entry* RunConfig::find(const std::string& dotted) {
    for (Entry& e : entries_) {
        if (e.key == dotted) return &e;
    }
    return nullptr;
}

void RunConfig::set(const std::string& dotted_key, const std::string& value) {
    Entry* e = find(dotted_key);
    if (!e) throw ConfigError("config: unknown key '" + dotted_key + "'");
    e->value = value;
    overrides_.emplace_back(dotted_key, value);
}

std::string RunConfig::get(const std::string& dotted_key) const {
    const Entry* e = find(dotted_key);
    if (!e) throw ConfigError("config: unknown key '" + dotted_key + "'");
    return e->value;
}

double RunConfig::num(const std::string& dotted) const {
    const std::string v = get(dotted);
    try {
        size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config: '" + dotted + "' must be numeric, got '" + v + "'");
    }
}

size_t RunConfig::idx(const std::string& dotted) const {
    const double x = num(dotted);
    if (x < 0.0 || x != std::floor(x)) {
        throw ConfigError("config: '" + dotted + "' must be a non-negative integer");
    }
    return static_cast<size_t>(x);
}

bool RunConfig::flag(const std::string& dotted) const {
    const std::string v = get(dotted);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: '" + dotted + "' must be a boolean, got '" + v + "'");
}

WorldConfig RunConfig::world() const {
    WorldConfig w;
    w.seed = static_cast<uint64_t>(num("world.seed"));
    w.d = idx("world.d");
    w.layers = idx("world.layers");
    w.resolution = idx("world.resolution");
    w.k_id = idx("world.k_id");
    w.k_ex = idx("world.k_ex");
    w.k_po = idx("world.k_po");
    w.k_landmarks = idx("world.k_landmarks");
    w.validate();
    return w;
}

TrainConfig RunConfig::train() const {
    TrainConfig t;
    t.seed = static_cast<uint64_t>(num("train.seed"));
    t.batch_size = idx("train.batch_size");
    t.steps = idx("train.steps");
    t.learning_rate = num("train.learning_rate");
    t.same_pair_probability = num("train.same_pair_probability");
    t.beta1 = num("train.beta1");
    t.beta2 = num("train.beta2");
    t.adam_eps = num("train.adam_eps");
    t.weight_decay = num("train.weight_decay");
    t.log_window = idx("train.log_window");
    t.checkpoint_interval = idx("train.checkpoint_interval");
    t.early_stop = flag("train.early_stop");
    t.plateau_tol = num("train.plateau_tol");
    t.plateau_windows = idx("train.plateau_windows");
    t.space = space_from_string(get("train.space"));
    const std::string prec = get("train.precision");
    if (prec == "f64") {
        t.precision = Precision::f64;
    } else if (prec == "f32") {
        t.precision = Precision::f32;
    } else {
        throw ConfigError("config: 'train.precision' must be f64 or f32");
    }
    t.fc_depth = idx("train.fc_depth");
    t.hidden_width = idx("train.hidden_width");
    t.weights.lambda = num("loss.lambda");
    t.weights.mu = num("loss.mu");
    t.alpha = num("loss.alpha");
    t.validate();
    return t;
}

InversionConfig RunConfig::inversion() const {
    InversionConfig i;
    i.steps = idx("invert.steps");
    i.learning_rate = num("invert.learning_rate");
    i.pivotal_steps = idx("invert.pivotal_steps");
    i.pivotal_learning_rate = num("invert.pivotal_learning_rate");
    i.reconstruction_tolerance = num("invert.tolerance");
    i.validate();
    return i;
}

std::vector<double> RunConfig::sweep_grid() const {
    return parse_list("experiment.sweep_grid", get("experiment.sweep_grid"));
}

size_t RunConfig::eval_pairs() const { return idx("experiment.eval_pairs"); }
size_t RunConfig::retrieval_n() const { return idx("experiment.retrieval_n"); }
double RunConfig::divergence_threshold() const { return num("experiment.divergence_threshold"); }

std::pair<double, double> RunConfig::diffusion_window() const {
    const auto v = parse_list("experiment.diffusion_window", get("experiment.diffusion_window"));
    if (v.size() != 2 || v[0] <= 0.0 || v[1] <= v[0] || v[1] > 1.0) {
        throw ConfigError("config: 'experiment.diffusion_window' must be two fractions lo,hi in (0,1]");
    }
    return {v[0], v[1]};
}

size_t RunConfig::pca_samples() const { return idx("experiment.pca_samples"); }
size_t RunConfig::pca_k() const { return idx("experiment.pca_k"); }

std::string RunConfig::output_dir() const { return get("output.dir"); }

std::string RunConfig::render() const {
    std::ostringstream os;
    std::string section;
    for (const Entry& e : entries_) {
        const size_t dotpos = e.key.find('.');
        const std::string sec = e.key.substr(0, dotpos);
        if (sec != section) {
            if (!section.empty()) os << "\n";
            os << "[" << sec << "]\n";
            section = sec;
        }
        os << e.key.substr(dotpos + 1) << " = " << e.value << "\n";
    }
    return os.str();
}

}  // namespace lswap
