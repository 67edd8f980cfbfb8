#pragma once

#include <lcslesa/config.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lcslesa {

/// Fold index per sample. Each class is shuffled with the seeded generator
/// and dealt round-robin; the second class continues dealing where the
/// first stopped, so total fold sizes also differ by at most one.
std::vector<int> stratified_folds(std::span<const ClassId> labels, int k, std::uint64_t seed);

struct Confusion {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::size_t total() const { return tp + tn + fp + fn; }
};

/// Malignant is the positive class. Rates are percentages; a rate whose
/// denominator is zero is NaN.
struct Metrics {
  Confusion confusion;
  double tpr = 0.0;
  double tnr = 0.0;
  double acc = 0.0;
  double auc = 0.0;  ///< percent; NaN when only one class is present
  RocCurve roc;
};

Metrics compute_metrics(std::span<const ClassId> predictions, std::span<const ClassId> truths,
                        std::span<const double> scores);

/// Synthetic lesion ROIs: for each class and block position a set of
/// nonnegative unit-norm ground-truth atoms (distinct per class); each
/// sample block mixes `sparsity` of its class atoms with positive weights,
/// adds white noise and clips at zero. Benign samples come first.
std::vector<RoiSample> synth_dataset(const SynthSpec& spec, std::uint64_t seed);

struct SampleOutcome {
  std::size_t index = 0;
  std::string source_id;
  ClassId truth = ClassId::benign;
  int fold = 0;
  EnsembleDecision decision;
  std::size_t degenerate_blocks = 0;
  std::size_t raised_eps_blocks = 0;
};

struct FoldStatus {
  int fold = 0;
  std::size_t train = 0;
  std::size_t test = 0;
  bool complete = true;
  std::string error;
};

/// Block decisions for every sample, fused both ways. Shared by the two
/// decision functions so a grid cell evaluates each block only once.
struct CvRun {
  int block_size = 0;
  int k_folds = 0;
  DlMode dl_mode = DlMode::none;
  std::vector<SampleOutcome> samples;  ///< only samples of complete folds, ascending index
  std::vector<FoldStatus> folds;
};

CvRun run_cv(const ExperimentConfig& cfg, std::span<const RoiSample> data, int block_size, int k_folds, DlMode mode);

struct FoldMetrics {
  FoldStatus status;
  Metrics metrics;
};

struct EvalReport {
  ExperimentConfig config;
  int block_size = 0;
  int k_folds = 0;
  DlMode dl_mode = DlMode::none;
  Decision decision = Decision::bbll;
  std::vector<SampleOutcome> samples;
  std::vector<ClassId> predictions;
  std::vector<double> scores;
  std::vector<FoldMetrics> folds;
  Metrics pooled;
  bool complete = true;
};

EvalReport make_report(const ExperimentConfig& cfg, const CvRun& run, Decision decision);

/// Loads the dataset named by the config (ROI cache or synthetic generator).
std::vector<RoiSample> load_dataset(const ExperimentConfig& cfg);

/// One report per configured block size, for the configured k, mode and
/// decision function.
std::vector<EvalReport> run_experiment(const ExperimentConfig& cfg, std::span<const RoiSample> data);
std::vector<EvalReport> run_experiment(const ExperimentConfig& cfg);

/// Full grid: decision x k_folds x block size x dictionary mode.
std::vector<EvalReport> run_grid(const ExperimentConfig& cfg, std::span<const RoiSample> data);

/// Per-block dictionaries learned on a full training set.
struct BlockModel {
  DlMode mode = DlMode::none;
  Dictionary dictionary;
  Matrix a;
  Matrix w;
  TrainParams params;
  std::vector<double> objective_trace;
};

struct ModelArchive {
  int roi_size = 0;
  int block_w = 0;
  int block_h = 0;
  std::vector<BlockModel> blocks;
};

/// Derived per-block seed so block dictionaries do not share random draws.
std::uint64_t block_seed(std::uint64_t seed, int fold, std::size_t block);

ModelArchive train_model(const ExperimentConfig& cfg, std::span<const RoiSample> training, int block_size,
                         DlMode mode);

/// Classifies every sample with a trained model.
std::vector<EnsembleDecision> classify(const ExperimentConfig& cfg, const ModelArchive& model,
                                       std::span<const RoiSample> samples);

/// Atoms de-vectorized row-major, min-max scaled to 0..255 (constant atoms
/// become 128), tiled on a near-square grid with 1 px white separators.
GrayImage dictionary_mosaic(const Dictionary& dict, int block_w, int block_h);

}  // namespace lcslesa
