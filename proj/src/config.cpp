#include <lcslesa/config.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace lcslesa {

std::string_view to_string(Decision d) { return d == Decision::bbmap ? "bbmap" : "bbll"; }
std::string_view to_string(DataSource s) { return s == DataSource::synthetic ? "synthetic" : "roi_cache"; }
std::string_view to_string(EpsMode m) { return m == EpsMode::relative ? "relative" : "absolute"; }

void SynthSpec::validate() const {
  if (roi_size < 1 || block_size < 1 || roi_size % block_size != 0)
    throw ConfigError("synthetic block size " + std::to_string(block_size) + " does not divide ROI size " +
                      std::to_string(roi_size));
  if (atoms_per_class < 1) throw ConfigError("synth_atoms_per_class must be at least 1");
  if (sparsity < 1 || sparsity > atoms_per_class)
    throw ConfigError("synth_sparsity must be in 1..synth_atoms_per_class");
  if (!(noise_sigma >= 0.0)) throw ConfigError("synth_noise_sigma must be nonnegative");
  if (samples_per_class < 1) throw ConfigError("synth_samples_per_class must be at least 1");
  if (!(coef_min > 0.0) || !(coef_max >= coef_min)) throw ConfigError("synthetic coefficient range is invalid");
}

void ExperimentConfig::validate() const {
  if (roi_size < 1) throw ConfigError("roi_size must be positive");
  if (block_sizes.empty()) throw ConfigError("block_sizes is empty");
  for (int b : block_sizes) check_block_geometry(roi_size, roi_size, b, b);
  if (k_folds < 2) throw ConfigError("k_folds must be at least 2");
  for (int k : grid_k_folds)
    if (k < 2) throw ConfigError("grid_k_folds entries must be at least 2");
  train.validate();
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  if (threads < 0) throw ConfigError("threads must be nonnegative");
  if (data_source == DataSource::synthetic) {
    synth.validate();
    if (synth.roi_size != roi_size)
      throw ConfigError("synth_roi_size (" + std::to_string(synth.roi_size) + ") differs from roi_size (" +
                        std::to_string(roi_size) + ")");
  } else if (roi_manifest.empty()) {
    throw ConfigError("roi_manifest is required when data_source = roi_cache");
  }
}

namespace {

template <class T>
T parse_num(const std::string& key, const std::string& v) {
  T out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError("bad value '" + v + "' for key '" + key + "'");
  return out;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::vector<int> int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const auto& s : split_list(v)) out.push_back(parse_num<int>(key, s));
  if (out.empty()) throw ConfigError("key '" + key + "' needs at least one value");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("bad boolean '" + v + "' for key '" + key + "'");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"roi_size", [](auto& c, auto& k, auto& v) { c.roi_size = parse_num<int>(k, v); }},
      {"block_sizes", [](auto& c, auto& k, auto& v) { c.block_sizes = int_list(k, v); }},
      {"k_folds", [](auto& c, auto& k, auto& v) { c.k_folds = parse_num<int>(k, v); }},
      {"dl_mode", [](auto& c, auto&, auto& v) { c.dl_mode = dl_mode_from_string(v); }},
      {"decision",
       [](auto& c, auto&, auto& v) {
         if (v == "bbmap") c.decision = Decision::bbmap;
         else if (v == "bbll") c.decision = Decision::bbll;
         else throw ConfigError("decision must be bbmap or bbll, got '" + v + "'");
       }},
      {"atoms", [](auto& c, auto& k, auto& v) { c.train.atoms = parse_num<int>(k, v); }},
      {"sparsity", [](auto& c, auto& k, auto& v) { c.train.sparsity = parse_num<int>(k, v); }},
      {"alpha", [](auto& c, auto& k, auto& v) { c.train.alpha = parse_num<double>(k, v); }},
      {"beta", [](auto& c, auto& k, auto& v) { c.train.beta = parse_num<double>(k, v); }},
      {"iterations", [](auto& c, auto& k, auto& v) { c.train.iterations = parse_num<int>(k, v); }},
      {"ridge", [](auto& c, auto& k, auto& v) { c.train.ridge = parse_num<double>(k, v); }},
      {"min_improvement", [](auto& c, auto& k, auto& v) { c.train.min_improvement = parse_num<double>(k, v); }},
      {"eps_mode",
       [](auto& c, auto&, auto& v) {
         if (v == "relative") c.eps_mode = EpsMode::relative;
         else if (v == "absolute") c.eps_mode = EpsMode::absolute;
         else throw ConfigError("eps_mode must be relative or absolute, got '" + v + "'");
       }},
      {"eps", [](auto& c, auto& k, auto& v) { c.eps = parse_num<double>(k, v); }},
      {"tau", [](auto& c, auto& k, auto& v) { c.tau = parse_num<double>(k, v); }},
      {"swap_lls_roles",
       [](auto& c, auto& k, auto& v) {
         const bool larger = c.roles.prefer_larger_l1;
         c.roles = parse_bool(k, v) ? LlsRoles{}.swapped() : LlsRoles{};
         c.roles.prefer_larger_l1 = larger;
       }},
      {"bbll_rule",
       [](auto& c, auto&, auto& v) {
         if (v == "smaller_l1") c.roles.prefer_larger_l1 = false;
         else if (v == "larger_l1") c.roles.prefer_larger_l1 = true;
         else throw ConfigError("bbll_rule must be smaller_l1 or larger_l1, got '" + v + "'");
       }},
      {"seed", [](auto& c, auto& k, auto& v) { c.seed = parse_num<std::uint64_t>(k, v); }},
      {"threads", [](auto& c, auto& k, auto& v) { c.threads = parse_num<int>(k, v); }},
      {"data_source",
       [](auto& c, auto&, auto& v) {
         if (v == "synthetic") c.data_source = DataSource::synthetic;
         else if (v == "roi_cache") c.data_source = DataSource::roi_cache;
         else throw ConfigError("data_source must be synthetic or roi_cache, got '" + v + "'");
       }},
      {"roi_manifest", [](auto& c, auto&, auto& v) { c.roi_manifest = v; }},
      {"output_dir", [](auto& c, auto&, auto& v) { c.output_dir = v; }},
      {"synth_roi_size", [](auto& c, auto& k, auto& v) { c.synth.roi_size = parse_num<int>(k, v); }},
      {"synth_block_size", [](auto& c, auto& k, auto& v) { c.synth.block_size = parse_num<int>(k, v); }},
      {"synth_atoms_per_class", [](auto& c, auto& k, auto& v) { c.synth.atoms_per_class = parse_num<int>(k, v); }},
      {"synth_sparsity", [](auto& c, auto& k, auto& v) { c.synth.sparsity = parse_num<int>(k, v); }},
      {"synth_noise_sigma", [](auto& c, auto& k, auto& v) { c.synth.noise_sigma = parse_num<double>(k, v); }},
      {"synth_samples_per_class",
       [](auto& c, auto& k, auto& v) { c.synth.samples_per_class = parse_num<int>(k, v); }},
      {"synth_coef_min", [](auto& c, auto& k, auto& v) { c.synth.coef_min = parse_num<double>(k, v); }},
      {"synth_coef_max", [](auto& c, auto& k, auto& v) { c.synth.coef_max = parse_num<double>(k, v); }},
      {"grid_k_folds", [](auto& c, auto& k, auto& v) { c.grid_k_folds = int_list(k, v); }},
      {"grid_dl_modes",
       [](auto& c, auto&, auto& v) {
         c.grid_dl_modes.clear();
         for (const auto& s : split_list(v)) c.grid_dl_modes.push_back(dl_mode_from_string(s));
         if (c.grid_dl_modes.empty()) throw ConfigError("grid_dl_modes needs at least one value");
       }},
  };
  return table;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(cfg, key, value);
}

ExperimentConfig parse_config(std::string_view text, ExperimentConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(n) + ": expected 'key = value'");
    auto trim = [](std::string s) {
      const auto first = s.find_first_not_of(" \t\r");
      const auto last = s.find_last_not_of(" \t\r");
      return first == std::string::npos ? std::string{} : s.substr(first, last - first + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      apply_setting(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(n) + ": " + e.what());
    }
  }
  return base;
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string format_config(const ExperimentConfig& c) {
  std::ostringstream os;
  const auto j = config_to_json(c);
  for (const auto& [key, value] : j.items()) {
    os << key << " = ";
    if (value.is_string()) os << value.get<std::string>();
    else if (value.is_array()) {
      for (std::size_t i = 0; i < value.size(); ++i)
        os << (i ? "," : "") << (value[i].is_string() ? value[i].get<std::string>() : value[i].dump());
    } else if (value.is_number_float()) {
      os << fmt(value.get<double>());
    } else os << value.dump();
    os << '\n';
  }
  return os.str();
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["roi_size"] = c.roi_size;
  j["block_sizes"] = c.block_sizes;
  j["k_folds"] = c.k_folds;
  j["dl_mode"] = std::string(to_string(c.dl_mode));
  j["decision"] = std::string(to_string(c.decision));
  j["atoms"] = c.train.atoms;
  j["sparsity"] = c.train.sparsity;
  j["alpha"] = c.train.alpha;
  j["beta"] = c.train.beta;
  j["iterations"] = c.train.iterations;
  j["ridge"] = c.train.ridge;
  j["min_improvement"] = c.train.min_improvement;
  j["eps_mode"] = std::string(to_string(c.eps_mode));
  j["eps"] = c.eps;
  j["tau"] = c.tau;
  j["swap_lls_roles"] = c.roles.m != ClassId::malignant;
  j["bbll_rule"] = c.roles.prefer_larger_l1 ? "larger_l1" : "smaller_l1";
  j["seed"] = c.seed;
  j["data_source"] = std::string(to_string(c.data_source));
  j["roi_manifest"] = c.roi_manifest;
  j["synth_roi_size"] = c.synth.roi_size;
  j["synth_block_size"] = c.synth.block_size;
  j["synth_atoms_per_class"] = c.synth.atoms_per_class;
  j["synth_sparsity"] = c.synth.sparsity;
  j["synth_noise_sigma"] = c.synth.noise_sigma;
  j["synth_samples_per_class"] = c.synth.samples_per_class;
  j["synth_coef_min"] = c.synth.coef_min;
  j["synth_coef_max"] = c.synth.coef_max;
  j["grid_k_folds"] = c.grid_k_folds;
  std::vector<std::string> modes;
  for (DlMode m : c.grid_dl_modes) modes.emplace_back(to_string(m));
  j["grid_dl_modes"] = modes;
  // threads and output_dir are not part of the echo.
  return j;
}

}  // namespace lcslesa
