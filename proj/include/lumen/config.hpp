#pragma once

// File formats: TOML accelerator config, JSON model manifest, and the LUMW
// weight blob.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lumen/arch_sim.hpp"

namespace lumen {

/// "all", "none" or a comma list of fpv, thermal, heterodyne, pd.
NoiseConfig parse_noise(std::string_view text);
std::string to_string(const NoiseConfig& noise);

/// Parses TOML text layered over AcceleratorConfig::defaults(). Unknown keys
/// and mistyped values raise ConfigError naming the field.
AcceleratorConfig parse_accelerator_config(std::string_view toml_text,
                                           std::string_view source = "config");
AcceleratorConfig load_accelerator_config(const std::filesystem::path& path);

/// The full default configuration, every constant spelled out.
std::string default_config_toml();

struct DatasetSpec {
    std::string kind = "synthetic_digits";
    std::uint64_t seed = 7;
    int count = 500;
};

struct ModelBundle {
    Model model;
    DatasetSpec dataset;
};

inline constexpr char kBlobMagic[4] = {'L', 'U', 'M', 'W'};
inline constexpr std::uint8_t kBlobVersion = 1;

/// Length-prefixed little-endian float32 records after the magic and version.
std::vector<std::vector<float>> read_weight_blob(const std::filesystem::path& path);
void write_weight_blob(const std::filesystem::path& path, const std::vector<std::vector<float>>& records);

/// Parses a manifest; weights are read from the blob named in it, relative to
/// `base_dir`.
ModelBundle parse_model_manifest(std::string_view json_text, const std::filesystem::path& base_dir);
ModelBundle load_model(const std::filesystem::path& manifest_path);

/// Writes <dir>/<stem>.json and <dir>/<stem>.lumw.
void save_model(const ModelBundle& bundle, const std::filesystem::path& dir, const std::string& stem);

}  // namespace lumen
