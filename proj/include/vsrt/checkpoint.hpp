#pragma once

#include <string>

#include "vsrt/model.hpp"

namespace vsrt {

// Checkpoint directory: config.txt (flat key=value mirroring ModelConfig),
// manifest.txt (one "name dims file" line per tensor), and one VSRT file per
// parameter.
void save_checkpoint(const VsrTransformer& model, const std::string& dir);
ModelConfig checkpoint_config(const std::string& dir);
void load_checkpoint(VsrTransformer& model, const std::string& dir);

} // namespace vsrt
