#pragma once

#include <lcslesa/blockify.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lcslesa {

// ---------------------------------------------------------------------------
// PGM images

struct GrayImage {
  int width = 0;
  int height = 0;
  int maxval = 255;
  std::vector<std::uint16_t> pixels;  ///< row-major, row 0 at the top

  std::uint16_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const GrayImage&) const = default;
};

/// Decodes binary (P5) or ASCII (P2) PGM. Samples are two bytes big-endian
/// when maxval > 255.
GrayImage parse_pgm(std::string_view bytes);

/// Encodes as P5 (or P2 when `binary` is false).
std::string encode_pgm(const GrayImage& img, bool binary = true);

GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& img);

// ---------------------------------------------------------------------------
// Radiological readings

enum class Severity : std::uint8_t { none, benign, malignant };

struct MiasRecord {
  std::string ref_id;
  char tissue = '?';
  std::string abnormality;
  Severity severity = Severity::none;
  bool has_centroid = false;
  double x = 0.0;  ///< column, pixels
  double y = 0.0;  ///< row, pixels, in the file's convention (bottom-left origin for MIAS)
  double radius = 0.0;
  std::size_t line = 0;

  std::optional<ClassId> label() const;
};

struct LineIssue {
  std::size_t line = 0;
  std::string message;
};

struct MetadataParse {
  std::vector<MiasRecord> records;
  std::vector<LineIssue> issues;  ///< skipped lines (lenient mode only)
};

/// Parses whitespace-separated lines "ref_id tissue class [severity [x y radius]]".
/// Blank lines and lines starting with '#' are ignored. In strict mode the
/// first malformed line throws ParseError; otherwise it is recorded in
/// `issues` and skipped.
MetadataParse parse_metadata(std::string_view text, bool strict = true);

/// Keeps benign/malignant records with coordinates whose lesion diameter
/// (2 * radius) is at least `roi_size`.
std::vector<MiasRecord> filter_lesions(const std::vector<MiasRecord>& records, int roi_size);

struct LesionCounts {
  std::size_t benign = 0;
  std::size_t malignant = 0;
};

/// Distinct mammograms (ref_ids) carrying at least one benign / malignant
/// reading.
LesionCounts count_lesion_mammograms(const std::vector<MiasRecord>& records);

/// Lesion records per class.
LesionCounts count_lesions(const std::vector<MiasRecord>& records);

enum class YOrigin : std::uint8_t { top, bottom };
YOrigin y_origin_from_string(std::string_view s);
std::string_view to_string(YOrigin o);

struct RoiWindow {
  int x0 = 0;  ///< first column
  int y0 = 0;  ///< first row (top-left origin)
};

/// Square window of side `roi_size` centered on the record's centroid and
/// shifted as needed to lie inside the image.
RoiWindow roi_window(const GrayImage& img, const MiasRecord& rec, int roi_size, YOrigin origin);

RoiSample extract_roi(const GrayImage& img, const MiasRecord& rec, int roi_size, YOrigin origin = YOrigin::bottom,
                      RoiWindow* window = nullptr);

// ---------------------------------------------------------------------------
// ROI cache: <ref_id>_roi<size>.pgm files plus manifest.json

struct PrepareSummary {
  std::size_t selected = 0;
  std::size_t written = 0;
  LesionCounts lesions;
  std::vector<std::string> missing_images;
  std::vector<LineIssue> issues;
};

PrepareSummary prepare_roi_cache(const std::filesystem::path& data_dir, const std::filesystem::path& readings,
                                 int roi_size, const std::filesystem::path& out_dir, YOrigin origin = YOrigin::bottom,
                                 bool strict = false);

struct CachedRoi {
  RoiSample roi;
  RoiWindow window;
  std::string file;
  double intensity_scale = 1.0;
};

/// Writes ROIs as PGM plus manifest.json. ROIs with intensities that are not
/// 8-bit integers are stored as 16-bit with a recorded scale factor.
void write_roi_cache(const std::filesystem::path& out_dir, const std::vector<CachedRoi>& rois, int roi_size,
                     YOrigin origin);

std::vector<RoiSample> load_roi_cache(const std::filesystem::path& manifest);

}  // namespace lcslesa
