#pragma once

#include <lcslesa/harness.hpp>

#include <filesystem>
#include <string>
#include <string_view>

namespace lcslesa {

inline constexpr std::uint32_t kModelVersion = 1;

/// Flat little-endian archive: "LCSLESA\0", u32 version, i32 roi_size,
/// block_w, block_h, u32 block count, then per block the mode, dictionary
/// (rows, cols, atoms column-major, labels, scales), A, W, objective trace
/// and training parameters.
std::string encode_model(const ModelArchive& model);
ModelArchive decode_model(std::string_view bytes);

nlohmann::ordered_json model_sidecar(const ModelArchive& model);

/// Writes the archive and `<path>.json` with the parameters.
void save_model(const std::filesystem::path& path, const ModelArchive& model);
ModelArchive load_model(const std::filesystem::path& path);

}  // namespace lcslesa
