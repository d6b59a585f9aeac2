#pragma once

#include <filesystem>

#include "ctxnmt/model.hpp"

namespace ctxnmt {

// Text manifest at `path` (config plus tensor names and shapes in
// serialization order) and a little-endian float32 blob at `path` + ".bin".
void save_checkpoint(const ModelParams<float>& params, const std::filesystem::path& path);
ModelParams<float> load_checkpoint(const std::filesystem::path& path);

std::filesystem::path checkpoint_blob_path(const std::filesystem::path& manifest);

}  // namespace ctxnmt
