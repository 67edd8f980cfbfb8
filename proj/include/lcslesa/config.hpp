#pragma once

#include <lcslesa/dictlearn.hpp>
#include <lcslesa/ensemble.hpp>
#include <lcslesa/mias.hpp>

#include <json.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace lcslesa {

enum class Decision : std::uint8_t { bbmap, bbll };
enum class DataSource : std::uint8_t { synthetic, roi_cache };
enum class EpsMode : std::uint8_t { relative, absolute };

std::string_view to_string(Decision d);
std::string_view to_string(DataSource s);
std::string_view to_string(EpsMode m);

/// Generator settings for the synthetic lesion dataset.
struct SynthSpec {
  int roi_size = 64;
  int block_size = 16;
  int atoms_per_class = 4;   ///< ground-truth atoms per class and block position
  int sparsity = 2;          ///< atoms mixed into each block
  double noise_sigma = 0.05; ///< per-pixel white noise
  int samples_per_class = 40;
  double coef_min = 0.5;
  double coef_max = 1.5;

  void validate() const;
};

struct ExperimentConfig {
  int roi_size = 64;
  std::vector<int> block_sizes{64, 32, 16, 8};
  int k_folds = 10;
  DlMode dl_mode = DlMode::none;
  Decision decision = Decision::bbll;
  TrainParams train;
  EpsMode eps_mode = EpsMode::relative;
  double eps = 0.05;  ///< fraction of ||y|| (relative) or absolute bound
  double tau = 0.0;
  LlsRoles roles;
  std::uint64_t seed = 20;
  int threads = 0;  ///< 0 = hardware concurrency
  DataSource data_source = DataSource::roi_cache;
  std::string roi_manifest;
  SynthSpec synth;
  std::string output_dir = "out";
  std::vector<int> grid_k_folds{10, 20, 30};
  std::vector<DlMode> grid_dl_modes{DlMode::none, DlMode::lcksvd1, DlMode::lcksvd2};

  void validate() const;
  double eps_for(const Vector& y) const { return eps_mode == EpsMode::relative ? eps * y.norm() : eps; }
};

/// Every key accepted by parse_config()/apply_setting().
const std::vector<std::string>& config_keys();

/// Sets one key; throws ConfigError for unknown keys or bad values.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Parses "key = value" lines ('#' starts a comment) on top of `base`.
ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {});

/// Canonical "key = value" rendering that parse_config() reads back.
std::string format_config(const ExperimentConfig& cfg);
nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);

}  // namespace lcslesa
