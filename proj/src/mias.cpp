#include <lcslesa/mias.hpp>

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace lcslesa {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// PGM

namespace {

class HeaderReader {
public:
  explicit HeaderReader(std::string_view bytes) : b_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      const char c = b_[pos_];
      if (c == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n' && b_[pos_] != '\r') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    while (pos_ < b_.size() && std::isdigit(static_cast<unsigned char>(b_[pos_]))) ++pos_;
    if (start == pos_) throw ParseError(std::string("PGM: expected ") + what);
    long v = 0;
    const auto res = std::from_chars(b_.data() + start, b_.data() + pos_, v);
    if (res.ec != std::errc()) throw ParseError(std::string("PGM: ") + what + " out of range");
    return v;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

private:
  std::string_view b_;
  std::size_t pos_ = 0;
};

}  // namespace

GrayImage parse_pgm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '2'))
    throw ParseError("PGM: bad magic (expected P5 or P2)");
  const bool binary = bytes[1] == '5';
  HeaderReader r(bytes);
  r.advance(2);
  GrayImage img;
  const long w = r.number("width");
  const long h = r.number("height");
  const long maxval = r.number("maxval");
  if (w < 1 || h < 1) throw ParseError("PGM: image dimensions must be positive");
  if (maxval < 1 || maxval > 65535) throw ParseError("PGM: maxval must be in 1..65535, got " + std::to_string(maxval));
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.maxval = static_cast<int>(maxval);
  const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  img.pixels.resize(count);

  if (binary) {
    // Exactly one whitespace byte separates the header from the raster.
    if (r.pos() >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[r.pos()])))
      throw ParseError("PGM: missing whitespace after maxval");
    r.advance(1);
    const std::size_t sample = maxval > 255 ? 2 : 1;
    const std::size_t expected = count * sample;
    const std::size_t available = bytes.size() - r.pos();
    if (available < expected)
      throw ParseError("PGM: truncated raster, expected " + std::to_string(expected) + " bytes, got " +
                       std::to_string(available));
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + r.pos());
    for (std::size_t i = 0; i < count; ++i) {
      const unsigned v = sample == 2 ? (static_cast<unsigned>(p[2 * i]) << 8) | p[2 * i + 1] : p[i];
      if (static_cast<long>(v) > maxval) throw ParseError("PGM: sample exceeds maxval");
      img.pixels[i] = static_cast<std::uint16_t>(v);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      long v;
      try {
        v = r.number("sample");
      } catch (const ParseError&) {
        throw ParseError("PGM: truncated raster, expected " + std::to_string(count) + " samples, got " +
                         std::to_string(i));
      }
      if (v > maxval) throw ParseError("PGM: sample exceeds maxval");
      img.pixels[i] = static_cast<std::uint16_t>(v);
    }
  }
  return img;
}

std::string encode_pgm(const GrayImage& img, bool binary) {
  if (img.pixels.size() != static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height))
    throw DimensionError("pixel count does not match image dimensions");
  std::ostringstream os;
  os << (binary ? "P5" : "P2") << '\n' << img.width << ' ' << img.height << '\n' << img.maxval << '\n';
  if (binary) {
    for (std::uint16_t v : img.pixels) {
      if (img.maxval > 255) os.put(static_cast<char>(v >> 8));
      os.put(static_cast<char>(v & 0xff));
    }
  } else {
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
      os << img.pixels[i] << ((i + 1) % static_cast<std::size_t>(img.width) == 0 ? '\n' : ' ');
  }
  return os.str();
}

GrayImage read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_pgm(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_pgm(const fs::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << encode_pgm(img);
  if (!out) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Readings

std::optional<ClassId> MiasRecord::label() const {
  switch (severity) {
    case Severity::benign: return ClassId::benign;
    case Severity::malignant: return ClassId::malignant;
    case Severity::none: return std::nullopt;
  }
  return std::nullopt;
}

namespace {

double parse_number(const std::string& tok, const char* what, std::size_t line) {
  double v = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() || !std::isfinite(v))
    throw ParseError(std::string("non-numeric ") + what + " '" + tok + "'", line);
  return v;
}

MiasRecord parse_line(const std::vector<std::string>& tok, std::size_t line) {
  if (tok.size() < 3) throw ParseError("expected at least 3 fields, got " + std::to_string(tok.size()), line);
  if (tok.size() == 5 || tok.size() == 6 || tok.size() > 7)
    throw ParseError("expected 3, 4 or 7 fields, got " + std::to_string(tok.size()), line);
  MiasRecord r;
  r.line = line;
  r.ref_id = tok[0];
  if (tok[1].size() != 1) throw ParseError("tissue code must be a single character, got '" + tok[1] + "'", line);
  r.tissue = tok[1][0];
  r.abnormality = tok[2];
  if (tok.size() >= 4) {
    if (tok[3] == "B") r.severity = Severity::benign;
    else if (tok[3] == "M") r.severity = Severity::malignant;
    else throw ParseError("unknown severity '" + tok[3] + "'", line);
  }
  if (tok.size() == 7) {
    r.x = parse_number(tok[4], "x coordinate", line);
    r.y = parse_number(tok[5], "y coordinate", line);
    r.radius = parse_number(tok[6], "radius", line);
    if (!(r.radius > 0.0)) throw ParseError("radius must be positive", line);
    r.has_centroid = true;
  }
  return r;
}

}  // namespace

MetadataParse parse_metadata(std::string_view text, bool strict) {
  MetadataParse out;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty() || tok[0][0] == '#') continue;
    try {
      out.records.push_back(parse_line(tok, line));
    } catch (const ParseError& e) {
      if (strict) throw;
      out.issues.push_back({line, e.what()});
    }
  }
  return out;
}

std::vector<MiasRecord> filter_lesions(const std::vector<MiasRecord>& records, int roi_size) {
  std::vector<MiasRecord> out;
  for (const auto& r : records)
    if (r.severity != Severity::none && r.has_centroid && 2.0 * r.radius >= static_cast<double>(roi_size))
      out.push_back(r);
  return out;
}

LesionCounts count_lesion_mammograms(const std::vector<MiasRecord>& records) {
  std::set<std::string> benign, malignant;
  for (const auto& r : records) {
    if (r.severity == Severity::benign) benign.insert(r.ref_id);
    if (r.severity == Severity::malignant) malignant.insert(r.ref_id);
  }
  return {benign.size(), malignant.size()};
}

LesionCounts count_lesions(const std::vector<MiasRecord>& records) {
  LesionCounts c;
  for (const auto& r : records) {
    c.benign += r.severity == Severity::benign;
    c.malignant += r.severity == Severity::malignant;
  }
  return c;
}

YOrigin y_origin_from_string(std::string_view s) {
  if (s == "top") return YOrigin::top;
  if (s == "bottom") return YOrigin::bottom;
  throw ConfigError("y_origin must be 'top' or 'bottom', got '" + std::string(s) + "'");
}

std::string_view to_string(YOrigin o) { return o == YOrigin::top ? "top" : "bottom"; }

RoiWindow roi_window(const GrayImage& img, const MiasRecord& rec, int roi_size, YOrigin origin) {
  if (!rec.has_centroid) throw InputError("record " + rec.ref_id + " has no centroid");
  if (roi_size < 1 || roi_size > std::min(img.width, img.height))
    throw InputError("ROI size " + std::to_string(roi_size) + " larger than image " + std::to_string(img.width) + "x" +
                     std::to_string(img.height));
  const long cx = std::lround(rec.x);
  const long cy = origin == YOrigin::bottom ? static_cast<long>(img.height) - 1 - std::lround(rec.y) : std::lround(rec.y);
  const long half = roi_size / 2;
  RoiWindow w;
  w.x0 = static_cast<int>(std::clamp<long>(cx - half, 0, img.width - roi_size));
  w.y0 = static_cast<int>(std::clamp<long>(cy - half, 0, img.height - roi_size));
  return w;
}

RoiSample extract_roi(const GrayImage& img, const MiasRecord& rec, int roi_size, YOrigin origin, RoiWindow* window) {
  const RoiWindow w = roi_window(img, rec, roi_size, origin);
  RoiSample roi;
  roi.pixels.resize(roi_size, roi_size);
  for (int r = 0; r < roi_size; ++r)
    for (int c = 0; c < roi_size; ++c) roi.pixels(r, c) = img.at(w.x0 + c, w.y0 + r);
  roi.label = rec.label().value_or(ClassId::benign);
  roi.source_id = rec.ref_id;
  roi.centroid_x = rec.x;
  roi.centroid_y = rec.y;
  roi.radius = rec.radius;
  if (window) *window = w;
  return roi;
}

// ---------------------------------------------------------------------------
// ROI cache

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_byte_image(const Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double v = m.data()[i];
    if (v < 0.0 || v > 255.0 || v != std::floor(v)) return false;
  }
  return true;
}

}  // namespace

void write_roi_cache(const fs::path& out_dir, const std::vector<CachedRoi>& rois, int roi_size, YOrigin origin) {
  fs::create_directories(out_dir);
  json entries = json::array();
  for (const auto& c : rois) {
    const Matrix& px = c.roi.pixels;
    GrayImage img;
    img.width = static_cast<int>(px.cols());
    img.height = static_cast<int>(px.rows());
    double scale = 1.0;
    if (is_byte_image(px)) {
      img.maxval = 255;
    } else {
      if (px.minCoeff() < 0.0) throw InputError("ROI " + c.roi.source_id + " has negative intensities");
      const double top = px.maxCoeff();
      img.maxval = 65535;
      scale = top > 0.0 ? top / 65535.0 : 1.0;
    }
    img.pixels.resize(static_cast<std::size_t>(px.size()));
    for (int r = 0; r < img.height; ++r)
      for (int col = 0; col < img.width; ++col)
        img.pixels[static_cast<std::size_t>(r) * img.width + col] =
            static_cast<std::uint16_t>(std::lround(px(r, col) / scale));
    write_pgm(out_dir / c.file, img);
    json e;
    e["ref_id"] = c.roi.source_id;
    e["label"] = std::string(to_string(c.roi.label));
    e["centroid"] = {c.roi.centroid_x, c.roi.centroid_y};
    e["radius"] = c.roi.radius;
    e["window_origin"] = {c.window.x0, c.window.y0};
    e["file"] = c.file;
    if (scale != 1.0) e["intensity_scale"] = scale;
    entries.push_back(e);
  }
  json manifest;
  manifest["roi_size"] = roi_size;
  manifest["y_origin"] = std::string(to_string(origin));
  manifest["rois"] = entries;
  std::ofstream out(out_dir / "manifest.json");
  if (!out) throw IoError("cannot write manifest in " + out_dir.string());
  out << manifest.dump(2) << '\n';
}

PrepareSummary prepare_roi_cache(const fs::path& data_dir, const fs::path& readings, int roi_size,
                                 const fs::path& out_dir, YOrigin origin, bool strict) {
  const auto parsed = parse_metadata(read_text(readings), strict);
  const auto selected = filter_lesions(parsed.records, roi_size);
  PrepareSummary summary;
  summary.issues = parsed.issues;
  summary.selected = selected.size();
  summary.lesions = count_lesions(selected);

  std::vector<CachedRoi> rois;
  std::map<std::string, int> seen;
  for (const auto& rec : selected) {
    fs::path image = data_dir / (rec.ref_id + ".pgm");
    if (!fs::exists(image)) {
      summary.missing_images.push_back(rec.ref_id);
      continue;
    }
    const GrayImage img = read_pgm(image);
    CachedRoi c;
    c.roi = extract_roi(img, rec, roi_size, origin, &c.window);
    const int n = ++seen[rec.ref_id];
    c.file = rec.ref_id + (n > 1 ? "_" + std::to_string(n) : "") + "_roi" + std::to_string(roi_size) + ".pgm";
    rois.push_back(std::move(c));
  }
  write_roi_cache(out_dir, rois, roi_size, origin);
  summary.written = rois.size();
  return summary;
}

std::vector<RoiSample> load_roi_cache(const fs::path& manifest_path) {
  json manifest;
  try {
    manifest = json::parse(read_text(manifest_path));
  } catch (const json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  const fs::path dir = manifest_path.parent_path();
  std::vector<RoiSample> out;
  try {
    for (const auto& e : manifest.at("rois")) {
      const GrayImage img = read_pgm(dir / e.at("file").get<std::string>());
      const double scale = e.value("intensity_scale", 1.0);
      RoiSample roi;
      roi.pixels.resize(img.height, img.width);
      for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) roi.pixels(r, c) = scale * img.at(c, r);
      roi.label = class_from_string(e.at("label").get<std::string>());
      roi.source_id = e.at("ref_id").get<std::string>();
      roi.centroid_x = e.at("centroid").at(0).get<double>();
      roi.centroid_y = e.at("centroid").at(1).get<double>();
      roi.radius = e.at("radius").get<double>();
      out.push_back(std::move(roi));
    }
  } catch (const json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace lcslesa
