#include <lcslesa/report.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lcslesa {

namespace {

nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

std::string csv_number(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

nlohmann::ordered_json metrics_to_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["tp"] = m.confusion.tp;
  j["tn"] = m.confusion.tn;
  j["fp"] = m.confusion.fp;
  j["fn"] = m.confusion.fn;
  j["tpr"] = number_or_null(m.tpr);
  j["tnr"] = number_or_null(m.tnr);
  j["acc"] = number_or_null(m.acc);
  j["auc"] = number_or_null(m.auc);
  return j;
}

nlohmann::ordered_json report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["decision"] = std::string(to_string(r.decision));
  j["dl_mode"] = std::string(to_string(r.dl_mode));
  j["k_folds"] = r.k_folds;
  j["block_size"] = r.block_size;
  j["seed"] = r.config.seed;
  j["complete"] = r.complete;
  j["config"] = config_to_json(r.config);
  j["pooled"] = metrics_to_json(r.pooled);

  auto roc = nlohmann::ordered_json::array();
  for (const auto& p : r.pooled.roc.points)
    roc.push_back({{"threshold", number_or_null(p.threshold)}, {"fpr", p.fpr}, {"tpr", p.tpr}});
  j["roc"] = std::move(roc);

  auto folds = nlohmann::ordered_json::array();
  for (const auto& f : r.folds) {
    nlohmann::ordered_json e;
    e["fold"] = f.status.fold;
    e["train"] = f.status.train;
    e["test"] = f.status.test;
    e["complete"] = f.status.complete;
    if (f.status.complete) e["metrics"] = metrics_to_json(f.metrics);
    else e["error"] = f.status.error;
    folds.push_back(std::move(e));
  }
  j["folds"] = std::move(folds);

  auto samples = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    const auto& s = r.samples[i];
    nlohmann::ordered_json e;
    e["index"] = s.index;
    e["id"] = s.source_id;
    e["fold"] = s.fold;
    e["truth"] = std::string(to_string(s.truth));
    e["prediction"] = std::string(to_string(r.predictions[i]));
    e["score"] = number_or_null(r.scores[i]);
    e["posterior_malignant"] = s.decision.posterior[index_of(ClassId::malignant)];
    e["ells"] = number_or_null(s.decision.ells);
    e["degenerate_blocks"] = s.degenerate_blocks;
    e["raised_eps_blocks"] = s.raised_eps_blocks;
    samples.push_back(std::move(e));
  }
  j["samples"] = std::move(samples);
  return j;
}

std::string report_stem(const EvalReport& r) {
  std::ostringstream os;
  os << "cv_" << to_string(r.decision) << '_' << to_string(r.dl_mode) << "_k" << r.k_folds << "_b" << r.block_size;
  return os.str();
}

std::string summary_csv_header() {
  return "decision,dl_mode,k_folds,block_size,tp,tn,fp,fn,tpr,tnr,acc,auc,complete\n";
}

std::string summary_csv_row(const EvalReport& r) {
  const auto& m = r.pooled;
  std::ostringstream os;
  os << to_string(r.decision) << ',' << to_string(r.dl_mode) << ',' << r.k_folds << ',' << r.block_size << ','
     << m.confusion.tp << ',' << m.confusion.tn << ',' << m.confusion.fp << ',' << m.confusion.fn << ','
     << csv_number(m.tpr) << ',' << csv_number(m.tnr) << ',' << csv_number(m.acc) << ',' << csv_number(m.auc)
     << ',' << (r.complete ? "yes" : "no") << '\n';
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path write_report(const std::filesystem::path& dir, const EvalReport& r) {
  const std::string stem = report_stem(r);
  const auto json_path = dir / (stem + ".json");
  write_text(json_path, report_to_json(r).dump(2) + "\n");
  write_text(dir / (stem + "_summary.csv"), summary_csv_header() + summary_csv_row(r));
  write_text(dir / (stem + "_roc.csv"), roc_csv(r.pooled.roc));
  write_text(dir / (stem + "_roc.svg"), roc_svg(r.pooled.roc, stem));
  return json_path;
}

std::filesystem::path write_summary(const std::filesystem::path& path, const std::vector<EvalReport>& reports) {
  std::string text = summary_csv_header();
  for (const auto& r : reports) text += summary_csv_row(r);
  write_text(path, text);
  return path;
}

}  // namespace lcslesa
