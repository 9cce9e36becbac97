#include "vsrt/config.hpp"

#include <fstream>
#include <sstream>

#include "vsrt/errors.hpp"

namespace vsrt {

const std::vector<ConfigEntry>& config_registry() {
    static const std::vector<ConfigEntry> entries = {
        // model
        {"frames", "3", "frames per sequence window (T)"},
        {"channels", "12", "feature channels (C), divisible by 6"},
        {"scale", "4", "super-resolution factor, power of two"},
        {"patch_w", "2", "attention patch width"},
        {"patch_h", "2", "attention patch height"},
        {"stride", "auto", "unfold stride; auto = patch side (non-overlapping)"},
        {"heads", "1", "attention heads"},
        {"extractor_blocks", "2", "residual blocks in the feature extractor"},
        {"recon_blocks", "4", "residual blocks in the reconstruction head"},
        {"prop_blocks", "4", "residual blocks per propagation direction"},
        {"num_transformer_blocks", "auto", "transformer blocks; auto = frames"},
        {"leaky_slope", "0.01", "LeakyReLU negative slope"},
        {"ln_eps", "1e-5", "layer norm epsilon"},
        {"boff_concat", "frames", "propagation input paired with warps: frames|value"},
        {"global_residual", "bilinear", "upsampled-frame residual: bilinear|bicubic"},
        {"pe_mode", "input", "positional encoding added at: input|per_block"},
        {"flow_estimator", "ground_truth", "flow source: ground_truth|spynet|zero"},
        // train
        {"lr0", "2e-4", "initial learning rate"},
        {"lr_min", "1e-7", "final learning rate of each cosine period"},
        {"beta1", "0.9", "Adam beta1"},
        {"beta2", "0.99", "Adam beta2"},
        {"periods", "1000,1000", "cosine annealing period lengths"},
        {"restart_weights", "1,0.5", "per-period restart weights"},
        {"iterations", "2000", "training iterations"},
        {"batch", "2", "sequences per step; gradients are averaged"},
        {"charbonnier_eps", "1e-8", "Charbonnier loss epsilon"},
        {"seed", "0", "master RNG seed"},
        {"ablation", "full", "full|no_stcsa|no_boff|no_flow"},
        {"crop", "16", "LR crop size during training"},
        {"eval_every", "100", "evaluation cadence in steps"},
        {"augment", "1", "random flip/rotation augmentation (0 or 1)"},
        {"adam_eps", "1e-8", "Adam epsilon"},
        // data
        {"sequences", "16", "number of sequences to generate"},
        {"hr_size", "64", "HR frame side length"},
        {"kinds", "gaussian-blobs,stripes,checker,band-limited-noise", "pattern kinds cycled per sequence"},
        {"motion_min", "1.0", "minimum |translation| per frame, HR pixels"},
        {"motion_max", "4.0", "maximum |translation| per frame, HR pixels"},
        {"format", "ppm", "on-disk frame format: ppm|vsrt"},
    };
    return entries;
}

bool is_known_key(const std::string& key) {
    for (const auto& e : config_registry()) {
        if (key == e.key) return true;
    }
    return false;
}

static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

ConfigMap ConfigMap::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    ConfigMap m;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected key = value");
        }
        m.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return m;
}

void ConfigMap::apply_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key=value: " + kv);
    set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
}

void ConfigMap::set(const std::string& key, const std::string& value) {
    if (!is_known_key(key)) {
        std::string valid;
        for (const auto& e : config_registry()) {
            if (!valid.empty()) valid += ", ";
            valid += e.key;
        }
        throw ConfigError("unknown config key '" + key + "'; valid keys: " + valid);
    }
    values_[key] = value;
}

bool ConfigMap::has(const std::string& key) const { return values_.count(key) != 0; }

std::string ConfigMap::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it != values_.end()) return it->second;
    for (const auto& e : config_registry()) {
        if (key == e.key) return e.def;
    }
    throw ConfigError("unknown config key '" + key + "'");
}

int ConfigMap::get_int(const std::string& key) const {
    try {
        return std::stoi(get(key));
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' is not an integer: " + get(key));
    }
}

float ConfigMap::get_float(const std::string& key) const {
    try {
        return std::stof(get(key));
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' is not a number: " + get(key));
    }
}

std::uint64_t ConfigMap::get_u64(const std::string& key) const {
    try {
        return std::stoull(get(key));
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' is not an unsigned integer: " + get(key));
    }
}

std::vector<int> ConfigMap::get_int_list(const std::string& key) const {
    std::vector<int> out;
    std::stringstream ss(get(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (trim(item).empty()) continue;
        out.push_back(std::stoi(trim(item)));
    }
    return out;
}

std::vector<float> ConfigMap::get_float_list(const std::string& key) const {
    std::vector<float> out;
    std::stringstream ss(get(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (trim(item).empty()) continue;
        out.push_back(std::stof(trim(item)));
    }
    return out;
}

void ConfigMap::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config file: " + path);
    for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
}

ModelConfig ModelConfig::from_map(const ConfigMap& m) {
    ModelConfig c;
    c.frames = m.get_int("frames");
    c.channels = m.get_int("channels");
    c.scale = m.get_int("scale");
    c.patch_w = m.get_int("patch_w");
    c.patch_h = m.get_int("patch_h");
    c.stride = m.get("stride") == "auto" ? std::min(c.patch_w, c.patch_h) : m.get_int("stride");
    c.heads = m.get_int("heads");
    c.extractor_blocks = m.get_int("extractor_blocks");
    c.recon_blocks = m.get_int("recon_blocks");
    c.prop_blocks = m.get_int("prop_blocks");
    c.num_transformer_blocks = m.get("num_transformer_blocks") == "auto"
                                   ? c.frames
                                   : m.get_int("num_transformer_blocks");
    c.leaky_slope = m.get_float("leaky_slope");
    c.ln_eps = m.get_float("ln_eps");
    c.boff_concat = m.get("boff_concat");
    c.global_residual = m.get("global_residual");
    c.pe_mode = m.get("pe_mode");
    c.flow_estimator = m.get("flow_estimator");
    c.validate();
    return c;
}

void ModelConfig::validate() const {
    if (frames < 1) throw ConfigError("frames must be >= 1");
    if (channels % 6 != 0) {
        throw ConfigError("channels must be divisible by 6 for the positional encoding, got " +
                          std::to_string(channels));
    }
    if (scale < 1 || (scale & (scale - 1)) != 0) {
        throw ConfigError("scale must be a power of two, got " + std::to_string(scale));
    }
    if (patch_w < 1 || patch_h < 1 || stride < 1) throw ConfigError("patch/stride must be positive");
    if (heads < 1) throw ConfigError("heads must be >= 1");
    if (num_transformer_blocks < 0) throw ConfigError("num_transformer_blocks must be >= 0");
    if (boff_concat != "frames" && boff_concat != "value") {
        throw ConfigError("boff_concat must be frames|value");
    }
    if (global_residual != "bilinear" && global_residual != "bicubic") {
        throw ConfigError("global_residual must be bilinear|bicubic");
    }
    if (pe_mode != "input" && pe_mode != "per_block") throw ConfigError("pe_mode must be input|per_block");
    if (flow_estimator != "ground_truth" && flow_estimator != "spynet" && flow_estimator != "zero") {
        throw ConfigError("flow_estimator must be ground_truth|spynet|zero");
    }
}

ConfigMap ModelConfig::to_map() const {
    ConfigMap m;
    m.set("frames", std::to_string(frames));
    m.set("channels", std::to_string(channels));
    m.set("scale", std::to_string(scale));
    m.set("patch_w", std::to_string(patch_w));
    m.set("patch_h", std::to_string(patch_h));
    m.set("stride", std::to_string(stride));
    m.set("heads", std::to_string(heads));
    m.set("extractor_blocks", std::to_string(extractor_blocks));
    m.set("recon_blocks", std::to_string(recon_blocks));
    m.set("prop_blocks", std::to_string(prop_blocks));
    m.set("num_transformer_blocks", std::to_string(num_transformer_blocks));
    m.set("leaky_slope", std::to_string(leaky_slope));
    m.set("ln_eps", std::to_string(ln_eps));
    m.set("boff_concat", boff_concat);
    m.set("global_residual", global_residual);
    m.set("pe_mode", pe_mode);
    m.set("flow_estimator", flow_estimator);
    return m;
}

TrainConfig TrainConfig::from_map(const ConfigMap& m) {
    TrainConfig c;
    c.lr0 = m.get_float("lr0");
    c.lr_min = m.get_float("lr_min");
    c.beta1 = m.get_float("beta1");
    c.beta2 = m.get_float("beta2");
    c.periods = m.get_int_list("periods");
    c.restart_weights = m.get_float_list("restart_weights");
    c.iterations = m.get_int("iterations");
    c.batch = m.get_int("batch");
    c.charbonnier_eps = m.get_float("charbonnier_eps");
    c.seed = m.get_u64("seed");
    c.ablation = m.get("ablation");
    c.crop = m.get_int("crop");
    c.eval_every = m.get_int("eval_every");
    c.augment = m.get_int("augment");
    c.adam_eps = m.get_float("adam_eps");
    c.validate();
    return c;
}

void TrainConfig::validate() const {
    if (periods.size() != restart_weights.size()) {
        throw ConfigError("periods and restart_weights must have equal lengths");
    }
    if (lr_min >= lr0) throw ConfigError("lr_min must be below lr0");
    if (iterations < 0 || batch < 1) throw ConfigError("bad iterations/batch");
    if (ablation != "full" && ablation != "no_stcsa" && ablation != "no_boff" &&
        ablation != "no_flow") {
        throw ConfigError("ablation must be full|no_stcsa|no_boff|no_flow");
    }
    if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
}

DataConfig DataConfig::from_map(const ConfigMap& m) {
    DataConfig c;
    c.sequences = m.get_int("sequences");
    c.frames = m.get_int("frames");
    c.hr_size = m.get_int("hr_size");
    c.scale = m.get_int("scale");
    c.kinds = m.get("kinds");
    c.motion_min = m.get_float("motion_min");
    c.motion_max = m.get_float("motion_max");
    c.seed = m.get_u64("seed");
    c.format = m.get("format");
    c.validate();
    return c;
}

void DataConfig::validate() const {
    if (sequences < 0) throw ConfigError("sequences must be >= 0");
    if (kinds.empty()) throw ConfigError("kinds must list at least one pattern kind");
    if (frames < 1) throw ConfigError("frames must be >= 1");
    if (hr_size < 4) throw ConfigError("hr_size too small");
    if (scale < 1 || (scale & (scale - 1)) != 0) throw ConfigError("scale must be a power of two");
    if (motion_max > 4.0f + 1e-6f || motion_min < 0.0f || motion_min > motion_max) {
        throw ConfigError("motion range must satisfy 0 <= min <= max <= 4");
    }
    if (format != "ppm" && format != "vsrt") throw ConfigError("format must be ppm|vsrt");
}

} // namespace vsrt
