#pragma once

#include <lcslesa/sparse.hpp>

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace lcslesa {

enum class DlMode : std::uint8_t { none = 0, lcksvd1 = 1, lcksvd2 = 2 };

std::string_view to_string(DlMode m);
DlMode dl_mode_from_string(std::string_view s);

struct TrainParams {
  int atoms = 0;       ///< K; 0 means one atom per training sample
  int sparsity = 16;   ///< T, capped at K - 1
  double alpha = 1.0;  ///< weight of the label-consistency term
  double beta = 1.0;   ///< weight of the classification term
  int iterations = 30;
  std::uint64_t seed = 20;
  double ridge = 1e-3;            ///< ridge used to initialize A and W
  double min_improvement = 1e-5;  ///< relative objective gain for early stop; 0 disables

  void validate() const;
  int effective_atoms(Eigen::Index samples) const;
  int effective_sparsity(int atoms) const;
};

struct LabelMatrices {
  Matrix q;  ///< atoms x samples, 1 where atom and sample share a class
  Matrix h;  ///< 2 x samples, one-hot sample labels (row = index_of(class))
};

LabelMatrices build_label_matrices(std::span<const ClassId> sample_labels, std::span<const ClassId> atom_labels);

struct KsvdIteration {
  double after_coding = 0.0;  ///< ||Y - DX||^2 right after sparse coding
  double after_update = 0.0;  ///< same, after all atom updates
  int replaced_atoms = 0;
};

struct KsvdResult {
  Dictionary dictionary;
  Matrix codes;
  std::vector<KsvdIteration> iterations;

  std::vector<double> objective_trace() const;
};

/// K-SVD from an explicit initial dictionary. When `sample_labels` is
/// non-empty and the dictionary is labeled, an unused atom is replaced only
/// by a sample of its own class.
KsvdResult ksvd(const Matrix& y, const TrainParams& params, const Dictionary& initial,
                std::span<const ClassId> sample_labels = {});

/// K-SVD initialized from a seeded selection of the training columns.
KsvdResult ksvd(const Matrix& y, const TrainParams& params);

struct LcksvdInit {
  Dictionary dictionary;
  Matrix codes;
  Matrix a;
  Matrix w;
};

LcksvdInit init_lcksvd(const Matrix& y, std::span<const ClassId> sample_labels, const TrainParams& params);

struct DiscriminativeDictionary {
  Dictionary dictionary;  ///< renormalized image-space atoms; labels fixed from initialization
  Matrix a;               ///< label-consistency transform (rows = atoms of the initial dictionary)
  Matrix w;               ///< linear classifier, 2 x K; empty unless mode == lcksvd2
  DlMode mode = DlMode::none;
  TrainParams params;
  std::vector<double> objective_trace;
  std::vector<KsvdIteration> iterations;
  Matrix codes;  ///< training codes w.r.t. the stacked, pre-split dictionary
};

/// Label-consistent K-SVD on the stacked system
/// [Y; sqrt(alpha) Q; sqrt(beta) H] ~ [D; sqrt(alpha) A; sqrt(beta) W] X.
DiscriminativeDictionary lcksvd_train(const Matrix& y, std::span<const ClassId> sample_labels,
                                      const TrainParams& params, DlMode mode);

/// ||Y - DX||^2 + alpha ||Q - AX||^2 + beta ||H - WX||^2; a weight of zero
/// (or an empty matrix) drops the corresponding term.
double lcksvd_objective(const Matrix& y, const Matrix& d, const Matrix& q, const Matrix& a, const Matrix& h,
                        const Matrix& w, const Matrix& x, double alpha, double beta);

/// Vertically stacks [top; sqrt(alpha) mid; sqrt(beta) bottom], omitting
/// blocks whose weight is zero or that are empty.
Matrix stack_weighted(const Matrix& top, const Matrix& mid, double alpha, const Matrix& bottom, double beta);

}  // namespace lcslesa
