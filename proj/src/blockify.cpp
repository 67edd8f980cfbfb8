#include <lcslesa/blockify.hpp>

#include <sstream>

namespace lcslesa {

std::vector<int> valid_block_sizes(int extent) {
  std::vector<int> out;
  for (int b = 1; b <= extent; ++b)
    if (extent % b == 0) out.push_back(b);
  return out;
}

void check_block_geometry(int roi_w, int roi_h, int block_w, int block_h) {
  if (roi_w < 1 || roi_h < 1) throw ConfigError("ROI must be non-empty");
  if (block_w < 1 || block_h < 1 || block_w > roi_w || block_h > roi_h || roi_w % block_w != 0 ||
      roi_h % block_h != 0) {
    std::ostringstream os;
    os << "block " << block_w << "x" << block_h << " does not tile a " << roi_w << "x" << roi_h
       << " ROI; valid block widths:";
    for (int b : valid_block_sizes(roi_w)) os << ' ' << b;
    if (roi_h != roi_w) {
      os << "; valid block heights:";
      for (int b : valid_block_sizes(roi_h)) os << ' ' << b;
    }
    throw ConfigError(os.str());
  }
}

Vector vectorize_block(const Matrix& block) {
  Vector v(block.size());
  for (Eigen::Index r = 0; r < block.rows(); ++r)
    for (Eigen::Index c = 0; c < block.cols(); ++c) v(r * block.cols() + c) = block(r, c);
  return v;
}

Matrix devectorize_block(const Vector& v, int block_w, int block_h) {
  if (v.size() != static_cast<Eigen::Index>(block_w) * block_h)
    throw DimensionError("vector length " + std::to_string(v.size()) + " does not match block " +
                         std::to_string(block_w) + "x" + std::to_string(block_h));
  Matrix m(block_h, block_w);
  for (int r = 0; r < block_h; ++r)
    for (int c = 0; c < block_w; ++c) m(r, c) = v(r * block_w + c);
  return m;
}

BlockGrid decompose(const Matrix& pixels, int block_w, int block_h) {
  const int w = static_cast<int>(pixels.cols());
  const int h = static_cast<int>(pixels.rows());
  check_block_geometry(w, h, block_w, block_h);
  BlockGrid g;
  g.block_w = block_w;
  g.block_h = block_h;
  g.blocks_across = w / block_w;
  g.blocks_down = h / block_h;
  g.vectors.reserve(static_cast<std::size_t>(g.blocks_across * g.blocks_down));
  for (int by = 0; by < g.blocks_down; ++by)
    for (int bx = 0; bx < g.blocks_across; ++bx)
      g.vectors.push_back(vectorize_block(pixels.block(by * block_h, bx * block_w, block_h, block_w)));
  return g;
}

BlockGrid decompose_roi(const RoiSample& roi, int block_w, int block_h) {
  return decompose(roi.pixels, block_w, block_h);
}

Matrix reassemble(const BlockGrid& g) {
  Matrix m(g.blocks_down * g.block_h, g.blocks_across * g.block_w);
  for (int by = 0; by < g.blocks_down; ++by)
    for (int bx = 0; bx < g.blocks_across; ++bx)
      m.block(by * g.block_h, bx * g.block_w, g.block_h, g.block_w) =
          devectorize_block(g.vectors[static_cast<std::size_t>(by * g.blocks_across + bx)], g.block_w, g.block_h);
  return m;
}

namespace {

void check_same_size(std::span<const RoiSample> training) {
  if (training.empty()) throw InputError("no training ROIs");
  const auto rows = training.front().pixels.rows();
  const auto cols = training.front().pixels.cols();
  for (const auto& roi : training)
    if (roi.pixels.rows() != rows || roi.pixels.cols() != cols)
      throw DimensionError("mixed ROI sizes: " + std::to_string(cols) + "x" + std::to_string(rows) + " and " +
                           std::to_string(roi.pixels.cols()) + "x" + std::to_string(roi.pixels.rows()) + " (" +
                           roi.source_id + ")");
}

}  // namespace

Matrix block_training_matrix(std::span<const RoiSample> training, std::size_t block, int block_w, int block_h) {
  check_same_size(training);
  const auto& first = training.front().pixels;
  check_block_geometry(static_cast<int>(first.cols()), static_cast<int>(first.rows()), block_w, block_h);
  const int across = static_cast<int>(first.cols()) / block_w;
  const int down = static_cast<int>(first.rows()) / block_h;
  if (block >= static_cast<std::size_t>(across * down)) throw DimensionError("block index out of range");
  const int by = static_cast<int>(block) / across;
  const int bx = static_cast<int>(block) % across;
  Matrix y(static_cast<Eigen::Index>(block_w) * block_h, static_cast<Eigen::Index>(training.size()));
  for (std::size_t i = 0; i < training.size(); ++i)
    y.col(static_cast<Eigen::Index>(i)) =
        vectorize_block(training[i].pixels.block(by * block_h, bx * block_w, block_h, block_w));
  return y;
}

std::vector<Dictionary> assemble_block_dictionaries(std::span<const RoiSample> training, int block_w, int block_h) {
  check_same_size(training);
  const auto& first = training.front().pixels;
  check_block_geometry(static_cast<int>(first.cols()), static_cast<int>(first.rows()), block_w, block_h);
  const std::size_t nbl = static_cast<std::size_t>((first.cols() / block_w) * (first.rows() / block_h));
  std::vector<ClassId> labels;
  for (const auto& roi : training) labels.push_back(roi.label);
  std::vector<Dictionary> out;
  out.reserve(nbl);
  for (std::size_t j = 0; j < nbl; ++j)
    out.push_back(Dictionary::from_raw(block_training_matrix(training, j, block_w, block_h), labels));
  return out;
}

}  // namespace lcslesa
