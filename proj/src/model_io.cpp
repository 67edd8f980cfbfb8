#include <lcslesa/model_io.hpp>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace lcslesa {

namespace {

constexpr char kMagic[8] = {'L', 'C', 'S', 'L', 'E', 'S', 'A', '\0'};

class Writer {
public:
  template <class T>
  void put(T v) {
    static_assert(std::is_arithmetic_v<T>);
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    out_.append(reinterpret_cast<const char*>(b), sizeof(T));
  }

  void matrix(const Matrix& m) {
    put<std::uint32_t>(static_cast<std::uint32_t>(m.rows()));
    put<std::uint32_t>(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) put<double>(m(r, c));
  }

  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

private:
  std::string out_;
};

class Reader {
public:
  explicit Reader(std::string_view in) : in_(in) {}

  template <class T>
  T get() {
    need(sizeof(T));
    unsigned char b[sizeof(T)];
    std::memcpy(b, in_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
  }

  Matrix matrix() {
    const auto rows = get<std::uint32_t>();
    const auto cols = get<std::uint32_t>();
    need(static_cast<std::size_t>(rows) * cols * sizeof(double));
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = get<double>();
    return m;
  }

  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == in_.size(); }

private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n)
      throw ParseError("model archive truncated at byte " + std::to_string(pos_), 0);
  }

  std::string_view in_;
  std::size_t pos_ = 0;
};

ClassId class_from_byte(std::uint8_t b) {
  if (b > 1) throw ParseError("bad atom label byte " + std::to_string(b), 0);
  return static_cast<ClassId>(b);
}

}  // namespace

std::string encode_model(const ModelArchive& model) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.put<std::uint32_t>(kModelVersion);
  w.put<std::int32_t>(model.roi_size);
  w.put<std::int32_t>(model.block_w);
  w.put<std::int32_t>(model.block_h);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.blocks.size()));
  for (const auto& b : model.blocks) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(b.mode));
    const Dictionary& d = b.dictionary;
    w.matrix(d.atoms());
    w.put<std::uint8_t>(d.labeled() ? 1 : 0);
    for (ClassId c : d.atom_labels()) w.put<std::uint8_t>(static_cast<std::uint8_t>(c));
    for (Eigen::Index k = 0; k < d.size(); ++k) w.put<double>(d.scales()(k));
    w.matrix(b.a);
    w.matrix(b.w);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(b.objective_trace.size()));
    for (double v : b.objective_trace) w.put<double>(v);
    const TrainParams& p = b.params;
    w.put<std::int32_t>(p.atoms);
    w.put<std::int32_t>(p.sparsity);
    w.put<double>(p.alpha);
    w.put<double>(p.beta);
    w.put<std::int32_t>(p.iterations);
    w.put<std::uint64_t>(p.seed);
    w.put<double>(p.ridge);
    w.put<double>(p.min_improvement);
  }
  return w.take();
}

ModelArchive decode_model(std::string_view bytes) {
  Reader r(bytes);
  if (r.bytes(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic))
    throw ParseError("not a model archive (bad magic)", 0);
  const auto version = r.get<std::uint32_t>();
  if (version != kModelVersion)
    throw ParseError("unsupported model archive version " + std::to_string(version), 0);
  ModelArchive m;
  m.roi_size = r.get<std::int32_t>();
  m.block_w = r.get<std::int32_t>();
  m.block_h = r.get<std::int32_t>();
  const auto nbl = r.get<std::uint32_t>();
  if (m.block_w <= 0 || m.block_h <= 0 || m.roi_size <= 0)
    throw ParseError("model archive has invalid geometry", 0);
  for (std::uint32_t j = 0; j < nbl; ++j) {
    BlockModel b;
    const auto mode = r.get<std::uint8_t>();
    if (mode > 2) throw ParseError("block " + std::to_string(j) + ": bad mode " + std::to_string(mode), 0);
    b.mode = static_cast<DlMode>(mode);
    Matrix atoms = r.matrix();
    if (atoms.rows() != static_cast<Eigen::Index>(m.block_w) * m.block_h)
      throw ParseError("block " + std::to_string(j) + ": atom length does not match block size", 0);
    std::vector<ClassId> labels;
    if (r.get<std::uint8_t>())
      for (Eigen::Index k = 0; k < atoms.cols(); ++k) labels.push_back(class_from_byte(r.get<std::uint8_t>()));
    Vector scales(atoms.cols());
    for (Eigen::Index k = 0; k < atoms.cols(); ++k) scales(k) = r.get<double>();
    b.dictionary = Dictionary::from_normalized(std::move(atoms), std::move(scales), std::move(labels));
    b.a = r.matrix();
    b.w = r.matrix();
    const auto n = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) b.objective_trace.push_back(r.get<double>());
    TrainParams& p = b.params;
    p.atoms = r.get<std::int32_t>();
    p.sparsity = r.get<std::int32_t>();
    p.alpha = r.get<double>();
    p.beta = r.get<double>();
    p.iterations = r.get<std::int32_t>();
    p.seed = r.get<std::uint64_t>();
    p.ridge = r.get<double>();
    p.min_improvement = r.get<double>();
    m.blocks.push_back(std::move(b));
  }
  if (!r.done()) throw ParseError("trailing bytes after model archive", 0);
  return m;
}

nlohmann::ordered_json model_sidecar(const ModelArchive& model) {
  nlohmann::ordered_json j;
  j["format_version"] = kModelVersion;
  j["roi_size"] = model.roi_size;
  j["block_w"] = model.block_w;
  j["block_h"] = model.block_h;
  j["blocks"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < model.blocks.size(); ++i) {
    const auto& b = model.blocks[i];
    nlohmann::ordered_json e;
    e["block"] = i;
    e["mode"] = std::string(to_string(b.mode));
    e["atoms"] = b.dictionary.size();
    e["atoms_benign"] = b.dictionary.atoms_in_class(ClassId::benign);
    e["atoms_malignant"] = b.dictionary.atoms_in_class(ClassId::malignant);
    e["sparsity"] = b.params.sparsity;
    e["alpha"] = b.params.alpha;
    e["beta"] = b.params.beta;
    e["iterations"] = b.params.iterations;
    e["seed"] = b.params.seed;
    e["ridge"] = b.params.ridge;
    e["min_improvement"] = b.params.min_improvement;
    e["objective_trace"] = b.objective_trace;
    j["blocks"].push_back(std::move(e));
  }
  return j;
}

void save_model(const std::filesystem::path& path, const ModelArchive& model) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write model " + path.string());
    const std::string bytes = encode_model(model);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing model " + path.string());
  }
  std::ofstream side(path.string() + ".json");
  if (!side) throw IoError("cannot write " + path.string() + ".json");
  side << model_sidecar(model).dump(2) << '\n';
}

ModelArchive load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_model(ss.str());
}

}  // namespace lcslesa
