#include <lcslesa/harness.hpp>
#include <lcslesa/parallel.hpp>
#include <lcslesa/rng.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace lcslesa {

std::vector<int> stratified_folds(std::span<const ClassId> labels, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("k must be at least 2");
  if (static_cast<std::size_t>(k) > labels.size())
    throw ConfigError("k = " + std::to_string(k) + " exceeds the number of samples (" +
                      std::to_string(labels.size()) + ")");
  std::array<std::vector<std::size_t>, 2> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[index_of(labels[i])].push_back(i);
  for (ClassId c : kClasses)
    if (members[index_of(c)].empty()) throw InputError("class '" + std::string(to_string(c)) + "' has no samples");

  Rng rng(seed);
  std::vector<int> fold(labels.size(), -1);
  std::size_t next = 0;
  for (ClassId c : kClasses) {
    auto idx = members[index_of(c)];
    rng.shuffle(idx);
    for (std::size_t i : idx) {
      fold[i] = static_cast<int>(next % static_cast<std::size_t>(k));
      ++next;
    }
  }
  return fold;
}

Metrics compute_metrics(std::span<const ClassId> predictions, std::span<const ClassId> truths,
                        std::span<const double> scores) {
  if (predictions.empty()) throw InputError("no predictions to score");
  if (predictions.size() != truths.size() || scores.size() != truths.size())
    throw DimensionError("prediction, truth and score counts differ");
  Metrics m;
  auto& c = m.confusion;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const bool pos = truths[i] == ClassId::malignant;
    const bool said_pos = predictions[i] == ClassId::malignant;
    if (pos && said_pos) ++c.tp;
    else if (pos) ++c.fn;
    else if (said_pos) ++c.fp;
    else ++c.tn;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto pct = [&](std::size_t num, std::size_t den) {
    return den == 0 ? nan : 100.0 * static_cast<double>(num) / static_cast<double>(den);
  };
  m.tpr = pct(c.tp, c.tp + c.fn);
  m.tnr = pct(c.tn, c.tn + c.fp);
  m.acc = pct(c.tp + c.tn, c.total());
  if (c.tp + c.fn > 0 && c.tn + c.fp > 0) {
    m.roc = roc_auc(scores, truths);
    m.auc = 100.0 * m.roc.auc;
  } else {
    m.auc = nan;
  }
  return m;
}

std::vector<RoiSample> synth_dataset(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  const int per_side = spec.roi_size / spec.block_size;
  const int nbl = per_side * per_side;
  const Eigen::Index d = static_cast<Eigen::Index>(spec.block_size) * spec.block_size;

  // atoms[class][block] is d x atoms_per_class.
  std::array<std::vector<Matrix>, 2> atoms;
  for (ClassId c : kClasses) {
    for (int j = 0; j < nbl; ++j) {
      Matrix a(d, spec.atoms_per_class);
      for (Eigen::Index k = 0; k < a.cols(); ++k) {
        do {
          for (Eigen::Index i = 0; i < d; ++i) a(i, k) = std::max(0.0, rng.normal());
        } while (a.col(k).norm() == 0.0);
        a.col(k).normalize();
      }
      atoms[index_of(c)].push_back(std::move(a));
    }
  }

  std::vector<RoiSample> out;
  out.reserve(static_cast<std::size_t>(2 * spec.samples_per_class));
  std::vector<int> order(static_cast<std::size_t>(spec.atoms_per_class));
  for (ClassId c : kClasses) {
    for (int s = 0; s < spec.samples_per_class; ++s) {
      RoiSample roi;
      roi.label = c;
      roi.source_id = std::string(c == ClassId::benign ? "synth_b_" : "synth_m_") + std::to_string(s);
      roi.centroid_x = roi.centroid_y = spec.roi_size / 2.0;
      roi.radius = spec.roi_size / 2.0;
      roi.pixels.resize(spec.roi_size, spec.roi_size);
      for (int j = 0; j < nbl; ++j) {
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        Vector block = Vector::Zero(d);
        for (int t = 0; t < spec.sparsity; ++t)
          block += rng.uniform(spec.coef_min, spec.coef_max) * atoms[index_of(c)][static_cast<std::size_t>(j)].col(order[static_cast<std::size_t>(t)]);
        for (Eigen::Index i = 0; i < d; ++i) block(i) = std::max(0.0, block(i) + spec.noise_sigma * rng.normal());
        const int by = j / per_side, bx = j % per_side;
        roi.pixels.block(by * spec.block_size, bx * spec.block_size, spec.block_size, spec.block_size) =
            devectorize_block(block, spec.block_size, spec.block_size);
      }
      out.push_back(std::move(roi));
    }
  }
  return out;
}

std::uint64_t block_seed(std::uint64_t seed, int fold, std::size_t block) {
  // splitmix64 finalizer over the combined key
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(fold + 1) * 0x100000001b3ULL + block + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

Dictionary build_block_dictionary(const ExperimentConfig& cfg, const Matrix& y, std::span<const ClassId> labels,
                                  DlMode mode, std::uint64_t seed, BlockModel* model = nullptr) {
  if (mode == DlMode::none) {
    Dictionary d = Dictionary::from_raw(y, std::vector<ClassId>(labels.begin(), labels.end()));
    if (model) {
      model->mode = mode;
      model->dictionary = d;
    }
    return d;
  }
  TrainParams params = cfg.train;
  params.seed = seed;
  // Train on unit-norm blocks so the label terms are on the same scale as
  // the reconstruction term regardless of raw intensity range.
  const Matrix yn = normalize_columns(y).columns;
  DiscriminativeDictionary dd = lcksvd_train(yn, labels, params, mode);
  if (model) {
    model->mode = mode;
    model->dictionary = dd.dictionary;
    model->a = dd.a;
    model->w = dd.w;
    model->params = params;
    model->objective_trace = dd.objective_trace;
  }
  return std::move(dd.dictionary);
}

void check_dataset(std::span<const RoiSample> data, int roi_size) {
  if (data.empty()) throw InputError("dataset is empty");
  for (const auto& r : data)
    if (r.pixels.rows() != roi_size || r.pixels.cols() != roi_size)
      throw DimensionError("ROI " + r.source_id + " is " + std::to_string(r.pixels.cols()) + "x" +
                           std::to_string(r.pixels.rows()) + ", expected " + std::to_string(roi_size));
}

}  // namespace

CvRun run_cv(const ExperimentConfig& cfg, std::span<const RoiSample> data, int block_size, int k_folds, DlMode mode) {
  check_dataset(data, cfg.roi_size);
  check_block_geometry(cfg.roi_size, cfg.roi_size, block_size, block_size);

  std::vector<ClassId> labels;
  for (const auto& r : data) labels.push_back(r.label);
  const std::vector<int> fold = stratified_folds(labels, k_folds, cfg.seed);

  std::vector<BlockGrid> grids;
  grids.reserve(data.size());
  for (const auto& r : data) grids.push_back(decompose_roi(r, block_size, block_size));
  const std::size_t nbl = grids.front().nbl();
  const Eigen::Index dim = static_cast<Eigen::Index>(block_size) * block_size;

  std::vector<std::vector<std::size_t>> train(static_cast<std::size_t>(k_folds)), test(static_cast<std::size_t>(k_folds));
  for (std::size_t i = 0; i < data.size(); ++i)
    for (int f = 0; f < k_folds; ++f) (fold[i] == f ? test : train)[static_cast<std::size_t>(f)].push_back(i);

  // decisions[i][j]: block j of sample i, filled by the task of i's fold.
  std::vector<std::vector<BlockDecision>> decisions(data.size(), std::vector<BlockDecision>(nbl));
  std::vector<std::string> task_error(static_cast<std::size_t>(k_folds) * nbl);

  parallel_for(task_error.size(), cfg.threads, [&](std::size_t task) {
    const auto f = task / nbl;
    const auto j = task % nbl;
    try {
      const auto& tr = train[f];
      Matrix y(dim, static_cast<Eigen::Index>(tr.size()));
      std::vector<ClassId> tr_labels;
      tr_labels.reserve(tr.size());
      for (std::size_t c = 0; c < tr.size(); ++c) {
        y.col(static_cast<Eigen::Index>(c)) = grids[tr[c]].vectors[j];
        tr_labels.push_back(labels[tr[c]]);
      }
      const Dictionary dict = build_block_dictionary(cfg, y, tr_labels, mode, block_seed(cfg.seed, static_cast<int>(f), j));
      const BpdnSolver solver(dict);
      for (std::size_t i : test[f]) {
        const Vector& v = grids[i].vectors[j];
        decisions[i][j] = block_decision(solver, v, cfg.eps_for(v), cfg.roles, j);
      }
    } catch (const std::exception& e) {
      task_error[task] = "block " + std::to_string(j) + ": " + e.what();
    }
  });

  CvRun run;
  run.block_size = block_size;
  run.k_folds = k_folds;
  run.dl_mode = mode;
  for (int f = 0; f < k_folds; ++f) {
    FoldStatus st;
    st.fold = f;
    st.train = train[static_cast<std::size_t>(f)].size();
    st.test = test[static_cast<std::size_t>(f)].size();
    for (std::size_t j = 0; j < nbl; ++j) {
      const auto& err = task_error[static_cast<std::size_t>(f) * nbl + j];
      if (!err.empty()) {
        st.complete = false;
        st.error = err;
        break;
      }
    }
    run.folds.push_back(std::move(st));
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!run.folds[static_cast<std::size_t>(fold[i])].complete) continue;
    SampleOutcome s;
    s.index = i;
    s.source_id = data[i].source_id;
    s.truth = labels[i];
    s.fold = fold[i];
    s.decision = fuse(decisions[i], cfg.tau, cfg.roles);
    for (const auto& d : decisions[i]) {
      s.degenerate_blocks += d.degenerate;
      s.raised_eps_blocks += d.eps_raised;
    }
    run.samples.push_back(std::move(s));
  }
  return run;
}

EvalReport make_report(const ExperimentConfig& cfg, const CvRun& run, Decision decision) {
  EvalReport r;
  r.config = cfg;
  r.block_size = run.block_size;
  r.k_folds = run.k_folds;
  r.dl_mode = run.dl_mode;
  r.decision = decision;
  r.samples = run.samples;
  for (const auto& s : run.samples) {
    const bool map = decision == Decision::bbmap;
    r.predictions.push_back(map ? s.decision.label_bbmap : s.decision.label_bbll);
    r.scores.push_back(map ? s.decision.vote_score : s.decision.bbll_malignant_score());
  }
  for (const auto& st : run.folds) {
    FoldMetrics fm;
    fm.status = st;
    r.complete = r.complete && st.complete;
    if (st.complete) {
      std::vector<ClassId> p, t;
      std::vector<double> sc;
      for (std::size_t i = 0; i < r.samples.size(); ++i)
        if (r.samples[i].fold == st.fold) {
          p.push_back(r.predictions[i]);
          t.push_back(r.samples[i].truth);
          sc.push_back(r.scores[i]);
        }
      if (!p.empty()) fm.metrics = compute_metrics(p, t, sc);
    }
    r.folds.push_back(std::move(fm));
  }
  if (r.samples.empty()) throw InputError("every fold failed; no predictions to report");
  std::vector<ClassId> truths;
  for (const auto& s : r.samples) truths.push_back(s.truth);
  r.pooled = compute_metrics(r.predictions, truths, r.scores);
  return r;
}

std::vector<RoiSample> load_dataset(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.data_source == DataSource::synthetic) return synth_dataset(cfg.synth, cfg.seed);
  auto data = load_roi_cache(cfg.roi_manifest);
  check_dataset(data, cfg.roi_size);
  return data;
}

std::vector<EvalReport> run_experiment(const ExperimentConfig& cfg, std::span<const RoiSample> data) {
  cfg.validate();
  std::vector<EvalReport> out;
  for (int b : cfg.block_sizes) out.push_back(make_report(cfg, run_cv(cfg, data, b, cfg.k_folds, cfg.dl_mode), cfg.decision));
  return out;
}

std::vector<EvalReport> run_experiment(const ExperimentConfig& cfg) {
  const auto data = load_dataset(cfg);
  return run_experiment(cfg, data);
}

std::vector<EvalReport> run_grid(const ExperimentConfig& cfg, std::span<const RoiSample> data) {
  cfg.validate();
  std::vector<CvRun> runs;
  for (int k : cfg.grid_k_folds)
    for (int b : cfg.block_sizes)
      for (DlMode m : cfg.grid_dl_modes) runs.push_back(run_cv(cfg, data, b, k, m));
  std::vector<EvalReport> out;
  for (Decision d : {Decision::bbmap, Decision::bbll})
    for (const auto& run : runs) {
      ExperimentConfig c = cfg;
      c.k_folds = run.k_folds;
      c.block_sizes = {run.block_size};
      c.dl_mode = run.dl_mode;
      c.decision = d;
      out.push_back(make_report(c, run, d));
    }
  return out;
}

ModelArchive train_model(const ExperimentConfig& cfg, std::span<const RoiSample> training, int block_size,
                         DlMode mode) {
  check_dataset(training, cfg.roi_size);
  check_block_geometry(cfg.roi_size, cfg.roi_size, block_size, block_size);
  std::vector<ClassId> labels;
  for (const auto& r : training) labels.push_back(r.label);
  ModelArchive model;
  model.roi_size = cfg.roi_size;
  model.block_w = model.block_h = block_size;
  const std::size_t nbl = static_cast<std::size_t>((cfg.roi_size / block_size) * (cfg.roi_size / block_size));
  model.blocks.resize(nbl);
  std::vector<std::string> errors(nbl);
  parallel_for(nbl, cfg.threads, [&](std::size_t j) {
    try {
      const Matrix y = block_training_matrix(training, j, block_size, block_size);
      build_block_dictionary(cfg, y, labels, mode, block_seed(cfg.seed, -1, j), &model.blocks[j]);
      if (mode == DlMode::none) model.blocks[j].params = cfg.train;
    } catch (const std::exception& e) {
      errors[j] = e.what();
    }
  });
  for (std::size_t j = 0; j < nbl; ++j)
    if (!errors[j].empty()) throw InputError("training block " + std::to_string(j) + " failed: " + errors[j]);
  return model;
}

std::vector<EnsembleDecision> classify(const ExperimentConfig& cfg, const ModelArchive& model,
                                       std::span<const RoiSample> samples) {
  check_dataset(samples, model.roi_size);
  const std::size_t nbl = model.blocks.size();
  std::vector<BlockGrid> grids;
  for (const auto& s : samples) grids.push_back(decompose_roi(s, model.block_w, model.block_h));
  if (!grids.empty() && grids.front().nbl() != nbl) throw DimensionError("model block count does not match ROI tiling");
  std::vector<std::vector<BlockDecision>> decisions(samples.size(), std::vector<BlockDecision>(nbl));
  std::vector<std::string> errors(nbl);
  parallel_for(nbl, cfg.threads, [&](std::size_t j) {
    try {
      const BpdnSolver solver(model.blocks[j].dictionary);
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const Vector& v = grids[i].vectors[j];
        decisions[i][j] = block_decision(solver, v, cfg.eps_for(v), cfg.roles, j);
      }
    } catch (const std::exception& e) {
      errors[j] = e.what();
    }
  });
  for (std::size_t j = 0; j < nbl; ++j)
    if (!errors[j].empty()) throw InputError("block " + std::to_string(j) + ": " + errors[j]);
  std::vector<EnsembleDecision> out;
  for (const auto& d : decisions) out.push_back(fuse(d, cfg.tau, cfg.roles));
  return out;
}

GrayImage dictionary_mosaic(const Dictionary& dict, int block_w, int block_h) {
  if (dict.dim() != static_cast<Eigen::Index>(block_w) * block_h)
    throw DimensionError("atom length " + std::to_string(dict.dim()) + " does not match block " +
                         std::to_string(block_w) + "x" + std::to_string(block_h));
  const int n = static_cast<int>(dict.size());
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  const int rows = (n + cols - 1) / cols;
  GrayImage img;
  img.width = cols * block_w + (cols - 1);
  img.height = rows * block_h + (rows - 1);
  img.maxval = 255;
  img.pixels.assign(static_cast<std::size_t>(img.width) * img.height, 255);
  for (int k = 0; k < n; ++k) {
    const Matrix tile = devectorize_block(dict.atoms().col(k), block_w, block_h);
    const double lo = tile.minCoeff(), hi = tile.maxCoeff();
    const int ox = (k % cols) * (block_w + 1);
    const int oy = (k / cols) * (block_h + 1);
    for (int r = 0; r < block_h; ++r)
      for (int c = 0; c < block_w; ++c) {
        const double v = hi > lo ? std::round(255.0 * (tile(r, c) - lo) / (hi - lo)) : 128.0;
        img.pixels[static_cast<std::size_t>(oy + r) * img.width + ox + c] = static_cast<std::uint16_t>(v);
      }
  }
  // Unused grid cells stay black so they are not mistaken for atoms.
  for (int k = n; k < rows * cols; ++k) {
    const int ox = (k % cols) * (block_w + 1);
    const int oy = (k / cols) * (block_h + 1);
    for (int r = 0; r < block_h; ++r)
      for (int c = 0; c < block_w; ++c) img.pixels[static_cast<std::size_t>(oy + r) * img.width + ox + c] = 0;
  }
  return img;
}

}  // namespace lcslesa
