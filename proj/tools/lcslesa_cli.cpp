#include <lcslesa/harness.hpp>
#include <lcslesa/model_io.hpp>
#include <lcslesa/report.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>

using namespace lcslesa;
namespace fs = std::filesystem;

namespace {

// One "--some-key" flag per config key; values set on the command line are
// applied after the config file.
class ConfigFlags {
public:
  void attach(CLI::App* app) {
    app->add_option("--config", path_, "key = value experiment config file");
    for (const auto& key : config_keys()) {
      std::string flag = key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      auto& slot = values_[key];
      options_[key] = app->add_option("--" + flag, slot, "override config key " + key)->group("Config overrides");
    }
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg = path_.empty() ? ExperimentConfig{} : load_config(path_);
    for (const auto& key : config_keys()) {
      if (options_.at(key)->count() == 0) continue;
      try {
        apply_setting(cfg, key, values_.at(key));
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("command line: ") + e.what());
      }
    }
    cfg.validate();
    return cfg;
  }

private:
  std::string path_;
  std::map<std::string, std::string> values_;
  std::map<std::string, CLI::Option*> options_;
};

void print_rows(const std::vector<EvalReport>& reports) {
  std::cout << summary_csv_header();
  for (const auto& r : reports) std::cout << summary_csv_row(r);
}

int exit_code(const std::string& category) {
  if (category == "config") return 3;
  if (category == "io") return 4;
  if (category == "parse") return 5;
  if (category == "solver") return 6;
  return 7;
}

void diagnostic(const std::string& command, const std::string& category, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = category;
  j["command"] = command;
  j["message"] = message;
  std::cerr << j.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block-based sparse lesion classification with label-consistent dictionaries"};
  app.require_subcommand(1);

  // prepare-rois
  auto* prep = app.add_subcommand("prepare-rois", "Extract lesion ROIs from MIAS mammograms into a cache");
  std::string data_dir, readings, out_dir, y_origin = "bottom";
  int roi_size = 64;
  bool strict = false;
  prep->add_option("--data-dir", data_dir, "directory holding mdbNNN.pgm files")->required();
  prep->add_option("--readings", readings, "radiological readings file")->required();
  prep->add_option("--roi-size", roi_size, "ROI side in pixels")->capture_default_str();
  prep->add_option("--out", out_dir, "output directory for ROIs and manifest.json")->required();
  prep->add_option("--y-origin", y_origin, "centroid y origin: bottom or top")->capture_default_str();
  prep->add_flag("--strict", strict, "abort on the first malformed readings line");

  // train / evaluate / cv / grid
  auto* train = app.add_subcommand("train", "Learn per-block dictionaries on the configured dataset");
  ConfigFlags train_flags;
  train_flags.attach(train);
  std::string train_model_path;
  train->add_option("--model", train_model_path, "output archive (default <output_dir>/model_<mode>_b<block>.bin)");

  auto* eval = app.add_subcommand("evaluate", "Classify the configured dataset with a trained model");
  ConfigFlags eval_flags;
  eval_flags.attach(eval);
  std::string eval_model_path;
  eval->add_option("--model", eval_model_path, "model archive")->required();

  auto* cv = app.add_subcommand("cv", "Cross-validated experiment for each configured block size");
  ConfigFlags cv_flags;
  cv_flags.attach(cv);

  auto* grid = app.add_subcommand("grid", "Full grid: decision x folds x block size x dictionary mode");
  ConfigFlags grid_flags;
  grid_flags.attach(grid);

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic ROI dataset as an ROI cache");
  std::string spec_path, synth_out;
  std::uint64_t synth_seed = 20;
  synth->add_option("--spec", spec_path, "config file with synth_* keys");
  synth->add_option("--seed", synth_seed, "generator seed")->capture_default_str();
  synth->add_option("--out", synth_out, "output directory")->required();

  // mosaic
  auto* mosaic = app.add_subcommand("mosaic", "Render one block dictionary as a PGM mosaic");
  std::string mosaic_model, mosaic_out;
  std::size_t mosaic_block = 0;
  mosaic->add_option("--model", mosaic_model, "model archive")->required();
  mosaic->add_option("--block", mosaic_block, "block index")->capture_default_str();
  mosaic->add_option("--out", mosaic_out, "output PGM")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    diagnostic(app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name(), "usage", e.what());
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (*prep) {
      const auto s = prepare_roi_cache(data_dir, readings, roi_size, out_dir, y_origin_from_string(y_origin), strict);
      for (const auto& issue : s.issues)
        std::cerr << "warning: " << readings << ": line " << issue.line << ": " << issue.message << '\n';
      for (const auto& id : s.missing_images) std::cerr << "warning: missing image " << id << ".pgm\n";
      std::cout << "selected " << s.selected << " lesions (" << s.lesions.benign << " benign, " << s.lesions.malignant
                << " malignant); wrote " << s.written << " ROIs to " << out_dir << '\n';
    } else if (*train) {
      const auto cfg = train_flags.resolve();
      const auto data = load_dataset(cfg);
      const int bs = cfg.block_sizes.front();
      const auto model = train_model(cfg, data, bs, cfg.dl_mode);
      fs::path out = train_model_path;
      if (out.empty())
        out = fs::path(cfg.output_dir) / ("model_" + std::string(to_string(cfg.dl_mode)) + "_b" + std::to_string(bs) + ".bin");
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      save_model(out, model);
      std::cout << "trained " << model.blocks.size() << " block dictionaries on " << data.size() << " ROIs; wrote "
                << out.string() << '\n';
    } else if (*eval) {
      const auto cfg = eval_flags.resolve();
      const auto model = load_model(eval_model_path);
      if (model.roi_size != cfg.roi_size)
        throw ConfigError("model ROI size " + std::to_string(model.roi_size) + " differs from roi_size " +
                          std::to_string(cfg.roi_size));
      const auto data = load_dataset(cfg);
      const auto decisions = classify(cfg, model, data);
      CvRun run;
      run.block_size = model.block_w;
      run.k_folds = 1;
      run.dl_mode = model.blocks.empty() ? DlMode::none : model.blocks.front().mode;
      run.folds.push_back({0, 0, data.size(), true, {}});
      for (std::size_t i = 0; i < data.size(); ++i)
        run.samples.push_back({i, data[i].source_id, data[i].label, 0, decisions[i], 0, 0});
      const auto report = make_report(cfg, run, cfg.decision);
      const fs::path out = fs::path(cfg.output_dir) / ("eval_" + std::string(to_string(cfg.decision)) + "_" +
                                                       std::string(to_string(run.dl_mode)) + "_b" +
                                                       std::to_string(run.block_size) + ".json");
      write_text(out, report_to_json(report).dump(2) + "\n");
      print_rows({report});
    } else if (*cv) {
      const auto cfg = cv_flags.resolve();
      const auto reports = run_experiment(cfg);
      for (const auto& r : reports) write_report(cfg.output_dir, r);
      write_summary(fs::path(cfg.output_dir) / "cv_summary.csv", reports);
      print_rows(reports);
    } else if (*grid) {
      const auto cfg = grid_flags.resolve();
      const auto data = load_dataset(cfg);
      const auto reports = run_grid(cfg, data);
      for (const auto& r : reports) write_report(cfg.output_dir, r);
      write_summary(fs::path(cfg.output_dir) / "grid_summary.csv", reports);
      print_rows(reports);
    } else if (*synth) {
      ExperimentConfig cfg;
      if (!spec_path.empty()) cfg = load_config(spec_path);
      const auto rois = synth_dataset(cfg.synth, synth_seed);
      std::vector<CachedRoi> cached;
      for (const auto& r : rois) cached.push_back({r, {}, r.source_id + "_roi" + std::to_string(cfg.synth.roi_size) + ".pgm", 1.0});
      write_roi_cache(synth_out, cached, cfg.synth.roi_size, YOrigin::top);
      std::cout << "wrote " << rois.size() << " synthetic ROIs to " << synth_out << '\n';
    } else if (*mosaic) {
      const auto model = load_model(mosaic_model);
      if (mosaic_block >= model.blocks.size())
        throw InputError("block " + std::to_string(mosaic_block) + " out of range (model has " +
                         std::to_string(model.blocks.size()) + " blocks)");
      const fs::path out = mosaic_out;
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      write_pgm(out, dictionary_mosaic(model.blocks[mosaic_block].dictionary, model.block_w, model.block_h));
      std::cout << "wrote " << out.string() << '\n';
    }
  } catch (const Error& e) {
    diagnostic(command, e.category(), e.what());
    return exit_code(e.category());
  } catch (const std::exception& e) {
    diagnostic(command, "internal", e.what());
    return 1;
  }
  return 0;
}
