#pragma once

#include <lcslesa/types.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <array>
#include <vector>

namespace lcslesa {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Columns whose original norm falls below this are treated as all-zero.
inline constexpr double kDegenerateNorm = 1e-12;

/// Guard applied to class l1 norms before taking logarithms.
inline constexpr double kLogGuard = 1e-12;

struct NormalizedColumns {
  Matrix columns;
  Vector scales;  ///< original column norms
  std::vector<bool> degenerate;
};

/// Scale every column of `m` to unit l2 norm. Columns with norm below
/// kDegenerateNorm become zero and are flagged. Throws InputError on
/// non-finite input.
NormalizedColumns normalize_columns(const Matrix& m);

/// A column-atom dictionary. Atoms are unit norm except degenerate ones,
/// which are exactly zero. `atom_labels` is either empty (unlabeled) or has
/// one entry per atom.
class Dictionary {
public:
  Dictionary() = default;

  /// Normalizes `raw` and attaches labels.
  static Dictionary from_raw(const Matrix& raw, std::vector<ClassId> labels = {});

  /// Adopts already normalized atoms. Validates the unit-norm invariant.
  static Dictionary from_normalized(Matrix atoms, Vector scales, std::vector<ClassId> labels = {});

  const Matrix& atoms() const { return atoms_; }
  const Vector& scales() const { return scales_; }
  const std::vector<ClassId>& atom_labels() const { return labels_; }
  const std::vector<bool>& degenerate() const { return degenerate_; }

  Eigen::Index dim() const { return atoms_.rows(); }
  Eigen::Index size() const { return atoms_.cols(); }
  bool labeled() const { return !labels_.empty(); }
  bool is_degenerate(Eigen::Index k) const { return degenerate_[static_cast<std::size_t>(k)]; }
  Eigen::Index usable_atoms() const;
  std::size_t atoms_in_class(ClassId c) const;

private:
  Matrix atoms_;
  Vector scales_;
  std::vector<ClassId> labels_;
  std::vector<bool> degenerate_;
};

struct SparseCode {
  Vector coefficients;
  std::vector<Eigen::Index> support;  ///< ascending nonzero indices
  double residual_norm = 0.0;
  int iterations = 0;

  /// Rebuilds `support` from the nonzero pattern of `coefficients`.
  void refresh_support();
};

/// Greedy l0 pursuit: adds the atom most correlated with the residual and
/// refits all selected coefficients by least squares, until the residual is
/// at most `eps` or `max_atoms` atoms are selected. Degenerate atoms are
/// never selected.
SparseCode omp(const Dictionary& dict, const Vector& y, int max_atoms, double eps);

/// Same as omp() but records the residual norm after every greedy step
/// (first entry is ||y||).
SparseCode omp(const Dictionary& dict, const Vector& y, int max_atoms, double eps,
               std::vector<double>* residual_trace);

struct BpdnOptions {
  int max_bisections = 30;
  int max_inner_iterations = 1000;
  double inner_tolerance = 1e-6;
  double bracket_tolerance = 1e-5;  ///< relative width of the lambda bracket
};

/// Thrown when the noise bound cannot be met. Carries the iterate with the
/// smallest residual that was found.
class SolverError : public Error {
public:
  SolverError(const std::string& what, SparseCode best)
      : Error("solver", what), best_(std::move(best)) {}
  const SparseCode& best_iterate() const noexcept { return best_; }

private:
  SparseCode best_;
};

/// Solves min ||x||_1 s.t. ||D x - y||_2 <= eps for one dictionary.
///
/// The constrained problem is reached through its penalized form
/// min 0.5||Dx - y||^2 + lambda ||x||_1, solved by accelerated iterative
/// shrinkage, with a bisection on log(lambda) that keeps the largest lambda
/// whose solution satisfies the bound. The Gram matrix and Lipschitz
/// constant are computed once, so a solver can be reused for many signals.
class BpdnSolver {
public:
  explicit BpdnSolver(const Dictionary& dict, BpdnOptions options = {});

  SparseCode solve(const Vector& y, double eps) const;

  /// Residual of the least-squares fit of y over all usable atoms. Any eps
  /// below this value is infeasible.
  double least_squares_residual(const Vector& y) const;

  const Dictionary& dictionary() const { return dict_; }

private:
  Vector shrinkage(const Vector& dty, double lambda, Vector x, int* iterations) const;

  Dictionary dict_;
  BpdnOptions options_;
  Matrix gram_;
  Eigen::LDLT<Matrix> ls_factor_;
  double lipschitz_ = 1.0;
};

SparseCode bpdn(const Dictionary& dict, const Vector& y, double eps, BpdnOptions options = {});

/// Default noise bound: a fixed fraction of the signal energy.
inline double default_eps(const Vector& y, double factor = 0.05) { return factor * y.norm(); }

/// Class-restricted reconstruction residuals and coefficient l1 norms,
/// indexed by index_of(ClassId).
struct ClassScores {
  std::array<double, 2> residual{};
  std::array<double, 2> l1{};
};

/// Zeroes every coefficient whose atom is not of class `c`.
Vector restrict_to_class(const Dictionary& dict, const Vector& x, ClassId c);

ClassScores class_residuals(const Dictionary& dict, const Vector& x, const Vector& y);

/// Largest absolute inner product between distinct non-degenerate atoms.
double mutual_coherence(const Dictionary& dict);

}  // namespace lcslesa
