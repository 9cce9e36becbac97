#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace vsrt {

// Flat key=value config shared by the config file format, CLI overrides and
// checkpoint metadata. Keys mirror the ModelConfig/TrainConfig field names.
struct ConfigEntry {
    const char* key;
    const char* def;
    const char* help;
};

const std::vector<ConfigEntry>& config_registry();
bool is_known_key(const std::string& key);

class ConfigMap {
public:
    ConfigMap() = default;

    static ConfigMap from_file(const std::string& path);
    // "key=value"; unknown keys raise ConfigError listing the valid ones.
    void apply_override(const std::string& kv);
    void set(const std::string& key, const std::string& value);

    bool has(const std::string& key) const;
    std::string get(const std::string& key) const; // registry default if unset
    int get_int(const std::string& key) const;
    float get_float(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    std::vector<int> get_int_list(const std::string& key) const;
    std::vector<float> get_float_list(const std::string& key) const;

    void save(const std::string& path) const;
    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

struct ModelConfig {
    int frames = 3;
    int channels = 12;
    int scale = 4;
    int patch_w = 2;
    int patch_h = 2;
    int stride = 2;
    int heads = 1;
    int extractor_blocks = 2;
    int recon_blocks = 4;
    int prop_blocks = 4;
    int num_transformer_blocks = 3;
    float leaky_slope = 0.01f;
    float ln_eps = 1e-5f;
    std::string boff_concat = "frames";      // frames | value
    std::string global_residual = "bilinear"; // bilinear | bicubic
    std::string pe_mode = "input";            // input | per_block
    std::string flow_estimator = "ground_truth"; // ground_truth | spynet | zero

    static ModelConfig from_map(const ConfigMap& m);
    void validate() const;
    ConfigMap to_map() const;
};

struct TrainConfig {
    float lr0 = 2e-4f;
    float lr_min = 1e-7f;
    float beta1 = 0.9f;
    float beta2 = 0.99f;
    std::vector<int> periods = {1000, 1000};
    std::vector<float> restart_weights = {1.0f, 0.5f};
    int iterations = 2000;
    int batch = 2;
    float charbonnier_eps = 1e-8f;
    std::uint64_t seed = 0;
    std::string ablation = "full"; // full | no_stcsa | no_boff | no_flow
    int crop = 16;
    int eval_every = 100;
    int augment = 1;
    float adam_eps = 1e-8f;

    static TrainConfig from_map(const ConfigMap& m);
    void validate() const;
};

struct DataConfig {
    int sequences = 16;
    int frames = 3;
    int hr_size = 64;
    int scale = 4;
    std::string kinds = "gaussian-blobs,stripes,checker,band-limited-noise";
    float motion_min = 1.0f;
    float motion_max = 4.0f;
    std::uint64_t seed = 0;
    std::string format = "ppm"; // ppm | vsrt

    static DataConfig from_map(const ConfigMap& m);
    void validate() const;
};

} // namespace vsrt
