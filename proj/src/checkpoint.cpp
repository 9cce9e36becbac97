#include "vsrt/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "vsrt/errors.hpp"

namespace vsrt {

namespace {

std::string dims_token(const Shape& dims) {
    std::string s;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(dims[i]);
    }
    return s;
}

} // namespace

void save_checkpoint(const VsrTransformer& model, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    model.config().to_map().save(dir + "/config.txt");
    std::ofstream m(dir + "/manifest.txt");
    if (!m) throw IoError("cannot write checkpoint manifest in " + dir);
    for (const auto& e : model.params().all()) {
        const std::string file = e.name + ".vsrt";
        m << e.name << " " << dims_token(e.tensor.dims()) << " " << file << "\n";
        save_vsrt(e.tensor, dir + "/" + file);
    }
}

ModelConfig checkpoint_config(const std::string& dir) {
    return ModelConfig::from_map(ConfigMap::from_file(dir + "/config.txt"));
}

void load_checkpoint(VsrTransformer& model, const std::string& dir) {
    std::ifstream m(dir + "/manifest.txt");
    if (!m) throw IoError("missing checkpoint manifest: " + dir + "/manifest.txt");
    std::size_t loaded = 0;
    std::string name, dims, file;
    while (m >> name >> dims >> file) {
        Tensor* dst = model.params().find(name);
        if (!dst) throw ParseError("checkpoint tensor '" + name + "' not present in this model");
        Tensor t = load_vsrt(dir + "/" + file);
        if (dims_token(t.dims()) != dims) {
            throw ParseError("checkpoint manifest dims mismatch for " + name);
        }
        if (t.dims() != dst->dims()) {
            throw ShapeError("checkpoint tensor " + name + " has shape " + shape_str(t.dims()) +
                             ", model expects " + shape_str(dst->dims()));
        }
        dst->vec() = t.vec();
        ++loaded;
    }
    if (loaded != model.params().all().size()) {
        throw ParseError("checkpoint is missing parameters: loaded " + std::to_string(loaded) + " of " +
                         std::to_string(model.params().all().size()));
    }
}

} // namespace vsrt
