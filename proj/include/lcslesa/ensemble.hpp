#pragma once

#include <lcslesa/sparse.hpp>

#include <span>
#include <string>
#include <vector>

namespace lcslesa {

/// Class roles in the log-likelihood score -log(|x_m|_1 / |x_n|_1). The
/// default is m = malignant, n = benign.
///
/// With the score as written, a positive value (label m) means class m has
/// the smaller l1 mass. `prefer_larger_l1` negates the score so that class m
/// wins when its coefficients carry more l1 mass, the usual SRC reading.
struct LlsRoles {
  ClassId m = ClassId::malignant;
  ClassId n = ClassId::benign;
  bool prefer_larger_l1 = false;

  LlsRoles swapped() const { return {n, m, prefer_larger_l1}; }
  bool operator==(const LlsRoles&) const = default;
};

struct BlockDecision {
  std::size_t block_index = 0;
  SparseCode code;
  ClassScores scores;
  ClassId hard_label = ClassId::benign;
  double lls = 0.0;
  double eps_used = 0.0;
  bool degenerate = false;  ///< all-zero block; label and score are the benign prior
  bool eps_raised = false;  ///< requested bound was below the least-squares residual
};

/// -log(max(l1_m, eta) / max(l1_n, eta)), negated under prefer_larger_l1.
double log_likelihood_score(const ClassScores& scores, LlsRoles roles = {});

/// Class with the smaller class-restricted residual; exact ties go to malignant.
ClassId residual_rule(const ClassScores& scores);

/// Codes one block against its dictionary and derives the per-block
/// hard label and log-likelihood score. When `eps` is below the best
/// achievable least-squares residual r, the bound is raised to
/// sqrt(r^2 + eps^2) and the decision is flagged.
BlockDecision block_decision(const BpdnSolver& solver, const Vector& y, double eps, LlsRoles roles = {},
                             std::size_t block_index = 0);
BlockDecision block_decision(const Dictionary& dict, const Vector& y, double eps, LlsRoles roles = {},
                             std::size_t block_index = 0);

struct BbmapResult {
  std::array<double, 2> posterior{};  ///< fraction of block votes per class
  ClassId label = ClassId::malignant;
  double vote_score = 0.0;  ///< posterior of malignant
};

/// Majority vote of the per-block hard labels; ties go to malignant.
BbmapResult bbmap(std::span<const BlockDecision> decisions);

struct BbllResult {
  double ells = 0.0;   ///< mean block score, summed in ascending block order
  double score = 0.0;  ///< ells - tau
  ClassId label = ClassId::malignant;
};

/// Mean log-likelihood score thresholded at tau: class m when ells - tau >= 0.
BbllResult bbll(std::span<const BlockDecision> decisions, double tau, LlsRoles roles = {});

struct EnsembleDecision {
  std::array<double, 2> posterior{};
  double vote_score = 0.0;
  double ells = 0.0;
  double tau = 0.0;
  ClassId label_bbmap = ClassId::malignant;
  ClassId label_bbll = ClassId::malignant;
  LlsRoles roles;

  /// BBLL soft score oriented so that larger means more malignant.
  double bbll_malignant_score() const { return roles.m == ClassId::malignant ? ells - tau : tau - ells; }
};

EnsembleDecision fuse(std::span<const BlockDecision> decisions, double tau, LlsRoles roles = {});

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  ///< from (0,0) to (1,1)
  double auc = 0.0;              ///< fraction in [0, 1]
};

/// ROC with malignant as the positive class; one step per distinct score,
/// trapezoidal area (tied scores contribute half credit).
RocCurve roc_auc(std::span<const double> scores, std::span<const ClassId> truth);

std::string roc_csv(const RocCurve& roc);
std::string roc_svg(const RocCurve& roc, const std::string& title);

}  // namespace lcslesa
