#pragma once

#include <lcslesa/sparse.hpp>

#include <span>
#include <string>
#include <vector>

namespace lcslesa {

/// Square grayscale patch cut around a lesion, with its provenance.
struct RoiSample {
  Matrix pixels;  ///< rows x cols = height x width
  ClassId label = ClassId::benign;
  std::string source_id;
  double centroid_x = 0.0;
  double centroid_y = 0.0;
  double radius = 0.0;
};

/// Non-overlapping tiling of an ROI. Blocks are ordered row-major over block
/// positions, and each block is vectorized row-major: pixel (r, c) of the
/// block lands at index r * block_w + c.
struct BlockGrid {
  int block_w = 0;
  int block_h = 0;
  int blocks_across = 0;
  int blocks_down = 0;
  std::vector<Vector> vectors;

  std::size_t nbl() const { return vectors.size(); }
};

/// Block sizes in {1..extent} that divide `extent` exactly.
std::vector<int> valid_block_sizes(int extent);

BlockGrid decompose(const Matrix& pixels, int block_w, int block_h);
BlockGrid decompose_roi(const RoiSample& roi, int block_w, int block_h);

/// Inverse of decompose().
Matrix reassemble(const BlockGrid& grid);

Vector vectorize_block(const Matrix& block);
Matrix devectorize_block(const Vector& v, int block_w, int block_h);

/// Raw training matrix for block position j: column i is block j of
/// training[i] (d x s).
Matrix block_training_matrix(std::span<const RoiSample> training, std::size_t block, int block_w, int block_h);

/// One dictionary per block position; column i of dictionary j is the
/// normalized block j of training image i, labeled with that image's class.
std::vector<Dictionary> assemble_block_dictionaries(std::span<const RoiSample> training, int block_w, int block_h);

/// Throws ConfigError unless both block dimensions divide the ROI extent.
void check_block_geometry(int roi_w, int roi_h, int block_w, int block_h);

}  // namespace lcslesa
