#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"

#include <lcslesa/harness.hpp>
#include <lcslesa/report.hpp>

#include <cmath>
#include <map>

using namespace lcslesa;
using namespace lcslesa::testing;

namespace {

constexpr ClassId B = ClassId::benign;
constexpr ClassId M = ClassId::malignant;

std::vector<ClassId> class_list(std::size_t benign, std::size_t malignant) {
  std::vector<ClassId> v(benign, B);
  v.insert(v.end(), malignant, M);
  return v;
}

// Small synthetic experiment that runs in well under a second.
ExperimentConfig small_config() {
  ExperimentConfig c;
  c.data_source = DataSource::synthetic;
  c.roi_size = 32;
  c.block_sizes = {16};
  c.k_folds = 5;
  c.synth.roi_size = 32;
  c.synth.block_size = 16;
  c.synth.samples_per_class = 10;
  c.roles.prefer_larger_l1 = true;
  c.threads = 1;
  return c;
}

}  // namespace

TEST_CASE("stratified folds") {
  const auto labels = class_list(36, 37);
  const auto folds = stratified_folds(labels, 10, 20);
  std::map<int, std::array<int, 2>> per_fold;
  for (std::size_t i = 0; i < labels.size(); ++i) ++per_fold[folds[i]][index_of(labels[i])];
  REQUIRE(per_fold.size() == 10u);
  for (const auto& [f, n] : per_fold) {
    CHECK(n[0] + n[1] >= 7);
    CHECK(n[0] + n[1] <= 8);
    CHECK(n[0] >= 3);
    CHECK(n[0] <= 4);
    CHECK(n[1] >= 3);
    CHECK(n[1] <= 4);
  }
  CHECK(stratified_folds(labels, 10, 20) == folds);
  CHECK(stratified_folds(labels, 10, 21) != folds);

  const auto loo = stratified_folds(labels, 73, 1);
  std::vector<int> sorted = loo;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 73; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);

  CHECK_THROWS_AS(stratified_folds(labels, 74, 1), ConfigError);
  CHECK_THROWS_AS(stratified_folds(labels, 1, 1), ConfigError);
  CHECK_THROWS_AS(stratified_folds(class_list(5, 0), 2, 1), InputError);

  SUBCASE("partition property over many shapes") {
    for (std::size_t nb = 1; nb < 12; ++nb)
      for (std::size_t nm = 1; nm < 12; ++nm)
        for (int k = 2; k <= static_cast<int>(nb + nm); k += 3) {
          const auto l = class_list(nb, nm);
          const auto f = stratified_folds(l, k, nb * 100 + nm);
          std::vector<std::array<int, 2>> count(static_cast<std::size_t>(k), {0, 0});
          for (std::size_t i = 0; i < l.size(); ++i) {
            REQUIRE(f[i] >= 0);
            REQUIRE(f[i] < k);
            ++count[static_cast<std::size_t>(f[i])][index_of(l[i])];
          }
          for (int c = 0; c < 2; ++c) {
            int lo = 1 << 30, hi = 0, total_lo = 1 << 30, total_hi = 0;
            for (const auto& n : count) {
              lo = std::min(lo, n[static_cast<std::size_t>(c)]);
              hi = std::max(hi, n[static_cast<std::size_t>(c)]);
              total_lo = std::min(total_lo, n[0] + n[1]);
              total_hi = std::max(total_hi, n[0] + n[1]);
            }
            CHECK(hi - lo <= 1);
            CHECK(total_hi - total_lo <= 1);
          }
        }
  }
}

TEST_CASE("metrics") {
  const std::vector<double> s4{0.1, 0.2, 0.8, 0.9};
  const auto perfect = compute_metrics(std::vector<ClassId>{B, B, M, M}, std::vector<ClassId>{B, B, M, M}, s4);
  CHECK(perfect.tpr == 100.0);
  CHECK(perfect.tnr == 100.0);
  CHECK(perfect.acc == 100.0);
  CHECK(perfect.auc == 100.0);

  const auto all_benign = compute_metrics(std::vector<ClassId>{B, B, B, B}, std::vector<ClassId>{B, B, M, M}, s4);
  CHECK(all_benign.tpr == 0.0);
  CHECK(all_benign.tnr == 100.0);
  CHECK(all_benign.acc == 50.0);

  SUBCASE("hand-tabulated 8-sample case") {
    const std::vector<ClassId> truth{M, M, M, B, B, B, B, M};
    const std::vector<ClassId> pred{M, B, M, B, M, B, B, M};
    const std::vector<double> scores{0.9, 0.3, 0.8, 0.1, 0.7, 0.2, 0.4, 0.6};
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < 8; ++i) {
      if (truth[i] == M && pred[i] == M) ++tp;
      if (truth[i] == B && pred[i] == B) ++tn;
      if (truth[i] == B && pred[i] == M) ++fp;
      if (truth[i] == M && pred[i] == B) ++fn;
    }
    const auto m = compute_metrics(pred, truth, scores);
    CHECK(m.confusion.tp == tp);
    CHECK(m.confusion.tn == tn);
    CHECK(m.confusion.fp == fp);
    CHECK(m.confusion.fn == fn);
    CHECK(m.tpr == doctest::Approx(75.0));
    CHECK(m.tnr == doctest::Approx(75.0));
    CHECK(m.acc == doctest::Approx(75.0));
    std::vector<bool> pos;
    for (ClassId c : truth) pos.push_back(c == M);
    CHECK(m.auc == doctest::Approx(100.0 * pair_count_auc(scores, pos)));
    CHECK(std::lround(m.acc * 8 / 100.0) == static_cast<long>(tp + tn));
  }

  const auto one_class = compute_metrics(std::vector<ClassId>{B}, std::vector<ClassId>{B}, std::vector<double>{0.0});
  CHECK(std::isnan(one_class.auc));
  CHECK(std::isnan(one_class.tpr));
  CHECK(one_class.tnr == 100.0);

  CHECK_THROWS_AS(compute_metrics({}, {}, {}), InputError);
  CHECK_THROWS_AS(compute_metrics(std::vector<ClassId>{B}, std::vector<ClassId>{B, M}, s4), DimensionError);
}

TEST_CASE("synthetic dataset") {
  SynthSpec spec;
  spec.roi_size = 32;
  spec.block_size = 16;
  spec.samples_per_class = 6;
  const auto a = synth_dataset(spec, 3);
  REQUIRE(a.size() == 12u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].label == (i < 6 ? B : M));
    CHECK(a[i].pixels.rows() == 32);
    CHECK(a[i].pixels.minCoeff() >= 0.0);
  }
  const auto b = synth_dataset(spec, 3);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].pixels == b[i].pixels);
  CHECK(synth_dataset(spec, 4)[0].pixels != a[0].pixels);

  spec.block_size = 12;
  CHECK_THROWS_AS(synth_dataset(spec, 1), ConfigError);
}

TEST_CASE("noise-free synthetic data is separable by single-block SRC") {
  ExperimentConfig c = small_config();
  c.synth.noise_sigma = 0.0;
  c.block_sizes = {32};
  const auto data = synth_dataset(c.synth, c.seed);
  const auto run = run_cv(c, data, 32, 5, DlMode::none);
  for (Decision d : {Decision::bbmap, Decision::bbll}) CHECK(make_report(c, run, d).pooled.acc == 100.0);
}

TEST_CASE("cross-validation run") {
  ExperimentConfig c = small_config();
  const auto data = synth_dataset(c.synth, c.seed);
  const auto run = run_cv(c, data, 16, 5, DlMode::none);
  REQUIRE(run.samples.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(run.samples[i].index == i);
    CHECK(run.samples[i].truth == data[i].label);
  }
  REQUIRE(run.folds.size() == 5u);
  for (const auto& f : run.folds) {
    CHECK(f.complete);
    CHECK(f.train + f.test == data.size());
  }

  SUBCASE("reports do not depend on the thread count") {
    ExperimentConfig threaded = c;
    threaded.threads = 3;
    const auto r1 = report_to_json(make_report(c, run_cv(c, data, 16, 5, DlMode::lcksvd2), Decision::bbll)).dump();
    const auto r3 =
        report_to_json(make_report(threaded, run_cv(threaded, data, 16, 5, DlMode::lcksvd2), Decision::bbll)).dump();
    CHECK(r1 == r3);
  }

  SUBCASE("single block with no learning is plain SRC") {
    const auto single = run_cv(c, data, 32, 5, DlMode::none);
    const auto folds = stratified_folds(std::vector<ClassId>(class_list(10, 10)), 5, c.seed);
    for (const auto& s : single.samples) {
      std::vector<RoiSample> train;
      for (std::size_t i = 0; i < data.size(); ++i)
        if (folds[i] != s.fold) train.push_back(data[i]);
      const auto dict = assemble_block_dictionaries(train, 32, 32).front();
      const Vector y = decompose_roi(data[s.index], 32, 32).vectors[0];
      const auto d = block_decision(dict, y, c.eps_for(y), c.roles);
      CHECK(s.decision.label_bbmap == d.hard_label);
      CHECK(s.decision.ells == d.lls);
    }
  }

  SUBCASE("incomplete folds are excluded from pooled metrics") {
    CvRun broken = run;
    broken.folds[2].complete = false;
    broken.folds[2].error = "block 0: solver failed";
    std::erase_if(broken.samples, [](const SampleOutcome& s) { return s.fold == 2; });
    const auto r = make_report(c, broken, Decision::bbmap);
    CHECK(!r.complete);
    CHECK(r.pooled.confusion.total() == broken.samples.size());
    const auto j = report_to_json(r);
    CHECK(j["folds"][2]["complete"] == false);
    CHECK(j["folds"][2]["error"] == "block 0: solver failed");
  }

  CHECK_THROWS_AS(run_cv(c, data, 12, 5, DlMode::none), ConfigError);
  CHECK_THROWS_AS(run_cv(c, data, 16, 21, DlMode::none), ConfigError);
}

TEST_CASE("accuracy does not improve as noise grows") {
  std::array<double, 3> mean{};
  const std::array<double, 3> sigmas{0.0, 0.05, 0.2};
  for (std::size_t s = 0; s < 3; ++s)
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      ExperimentConfig c = small_config();
      c.seed = seed;
      c.synth.noise_sigma = sigmas[s];
      c.synth.atoms_per_class = 6;
      c.synth.sparsity = 3;
      const auto data = synth_dataset(c.synth, seed);
      mean[s] += make_report(c, run_cv(c, data, 16, 5, DlMode::none), Decision::bbll).pooled.acc / 5.0;
    }
  CHECK(mean[0] >= mean[1]);
  CHECK(mean[1] >= mean[2]);
}

TEST_CASE("report serialization") {
  ExperimentConfig c = small_config();
  const auto data = synth_dataset(c.synth, c.seed);
  const auto r = make_report(c, run_cv(c, data, 16, 5, DlMode::none), Decision::bbmap);
  CHECK(report_stem(r) == "cv_bbmap_none_k5_b16");
  const auto j = report_to_json(r);
  CHECK(j["samples"].size() == data.size());
  CHECK(j["config"]["seed"] == 20);
  CHECK(!j["config"].contains("threads"));
  CHECK(summary_csv_header().rfind("decision,dl_mode,k_folds,block_size", 0) == 0);
  CHECK(summary_csv_row(r).rfind("bbmap,none,5,16,", 0) == 0);

  Metrics m;
  m.tpr = std::nan("");
  CHECK(metrics_to_json(m)["tpr"].is_null());
}

TEST_CASE("model training and classification") {
  ExperimentConfig c = small_config();
  c.train.iterations = 5;
  const auto data = synth_dataset(c.synth, c.seed);
  const auto model = train_model(c, data, 16, DlMode::lcksvd2);
  CHECK(model.blocks.size() == 4u);
  CHECK(model.blocks[0].dictionary.size() == 20);
  CHECK(model.blocks[0].w.rows() == 2);
  CHECK(!model.blocks[0].objective_trace.empty());
  const auto decisions = classify(c, model, data);
  REQUIRE(decisions.size() == data.size());
  int correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) correct += decisions[i].label_bbll == data[i].label;
  CHECK(correct >= 18);
  CHECK(block_seed(20, 0, 1) != block_seed(20, 1, 0));
  CHECK(block_seed(20, 0, 1) == block_seed(20, 0, 1));
}

TEST_CASE("dictionary mosaic") {
  std::mt19937_64 rng(1);
  Matrix atoms = random_matrix(rng, 64, 64);
  atoms.col(5).setConstant(2.0);
  const auto d = Dictionary::from_raw(atoms);
  const auto img = dictionary_mosaic(d, 8, 8);
  CHECK(img.width == 71);
  CHECK(img.height == 71);
  CHECK(img.at(8, 0) == 255);
  // Atom 5 sits in grid column 5, row 0.
  CHECK(img.at(5 * 9 + 3, 4) == 128);
  std::uint16_t lo = 255, hi = 0;
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      lo = std::min(lo, img.at(x, y));
      hi = std::max(hi, img.at(x, y));
    }
  CHECK(lo == 0);
  CHECK(hi == 255);

  const auto three = dictionary_mosaic(Dictionary::from_raw(random_matrix(rng, 6, 3)), 3, 2);
  CHECK(three.width == 2 * 3 + 1);
  CHECK(three.height == 2 * 2 + 1);
  CHECK_THROWS_AS(dictionary_mosaic(d, 4, 4), DimensionError);
}

TEST_CASE("config files") {
  const auto c = parse_config(
      "# experiment\n"
      "roi_size = 32\n"
      "block_sizes = 16, 8\n"
      "k_folds = 20   # trailing comment\n"
      "dl_mode = lcksvd1\n"
      "decision = bbmap\n"
      "alpha = 0.5\n"
      "bbll_rule = larger_l1\n"
      "swap_lls_roles = true\n"
      "grid_dl_modes = none,lcksvd2\n");
  CHECK(c.roi_size == 32);
  CHECK(c.block_sizes == std::vector<int>{16, 8});
  CHECK(c.k_folds == 20);
  CHECK(c.dl_mode == DlMode::lcksvd1);
  CHECK(c.decision == Decision::bbmap);
  CHECK(c.train.alpha == 0.5);
  CHECK(c.roles.prefer_larger_l1);
  CHECK(c.roles.m == B);
  CHECK(c.grid_dl_modes == std::vector<DlMode>{DlMode::none, DlMode::lcksvd2});

  const auto again = parse_config(format_config(c));
  CHECK(config_to_json(again) == config_to_json(c));

  CHECK_THROWS_WITH_AS(parse_config("roi_size = 64\nbogus = 1\n"), doctest::Contains("line 2"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("k_folds = ten\n"), doctest::Contains("k_folds"), ConfigError);
  CHECK_THROWS_AS(parse_config("roi_size\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("bbll_rule = biggest\n"), ConfigError);

  ExperimentConfig bad = small_config();
  bad.block_sizes = {12};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = small_config();
  bad.data_source = DataSource::roi_cache;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("roi_manifest"), ConfigError);

  for (const auto& key : config_keys()) CHECK(key.find('-') == std::string::npos);
}
