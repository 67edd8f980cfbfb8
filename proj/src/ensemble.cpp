#include <lcslesa/ensemble.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

namespace lcslesa {

double log_likelihood_score(const ClassScores& s, LlsRoles roles) {
  const double lm = std::max(s.l1[index_of(roles.m)], kLogGuard);
  const double ln = std::max(s.l1[index_of(roles.n)], kLogGuard);
  const double v = -std::log(lm / ln);
  return roles.prefer_larger_l1 ? -v : v;
}

ClassId residual_rule(const ClassScores& s) {
  return s.residual[index_of(ClassId::benign)] < s.residual[index_of(ClassId::malignant)] ? ClassId::benign
                                                                                            : ClassId::malignant;
}

BlockDecision block_decision(const BpdnSolver& solver, const Vector& y, double eps, LlsRoles roles,
                             std::size_t block_index) {
  const Dictionary& dict = solver.dictionary();
  BlockDecision out;
  out.block_index = block_index;
  if (y.size() != dict.dim()) throw DimensionError("block length does not match dictionary dimension");
  if (y.norm() < kDegenerateNorm) {
    out.degenerate = true;
    out.code.coefficients = Vector::Zero(dict.size());
    out.scores = class_residuals(dict, out.code.coefficients, y);
    out.hard_label = ClassId::benign;
    out.lls = 0.0;
    return out;
  }
  double bound = eps;
  const double floor = solver.least_squares_residual(y);
  if (floor >= eps) {
    bound = std::hypot(floor, eps);
    out.eps_raised = true;
  }
  try {
    out.code = solver.solve(y, bound);
  } catch (const SolverError& e) {
    // The shrinkage iterations did not get close enough to the
    // least-squares fit; relax relative to what they did reach.
    bound = std::hypot(e.best_iterate().residual_norm, eps);
    out.eps_raised = true;
    out.code = solver.solve(y, bound);
  }
  out.eps_used = bound;
  out.scores = class_residuals(dict, out.code.coefficients, y);
  out.hard_label = residual_rule(out.scores);
  out.lls = log_likelihood_score(out.scores, roles);
  return out;
}

BlockDecision block_decision(const Dictionary& dict, const Vector& y, double eps, LlsRoles roles,
                             std::size_t block_index) {
  return block_decision(BpdnSolver(dict), y, eps, roles, block_index);
}

BbmapResult bbmap(std::span<const BlockDecision> decisions) {
  if (decisions.empty()) throw InputError("BBMAP fusion needs at least one block decision");
  std::array<std::size_t, 2> votes{0, 0};
  for (const auto& d : decisions) ++votes[index_of(d.hard_label)];
  BbmapResult r;
  const double nb = static_cast<double>(decisions.size());
  r.posterior = {static_cast<double>(votes[0]) / nb, static_cast<double>(votes[1]) / nb};
  r.label = votes[0] > votes[1] ? ClassId::benign : ClassId::malignant;
  r.vote_score = r.posterior[index_of(ClassId::malignant)];
  return r;
}

BbllResult bbll(std::span<const BlockDecision> decisions, double tau, LlsRoles roles) {
  if (decisions.empty()) throw InputError("BBLL fusion needs at least one block decision");
  std::vector<const BlockDecision*> ordered;
  ordered.reserve(decisions.size());
  for (const auto& d : decisions) ordered.push_back(&d);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const BlockDecision* a, const BlockDecision* b) { return a->block_index < b->block_index; });
  double sum = 0.0;
  for (const auto* d : ordered) sum += d->lls;
  BbllResult r;
  r.ells = sum / static_cast<double>(decisions.size());
  r.score = r.ells - tau;
  r.label = r.score >= 0.0 ? roles.m : roles.n;
  return r;
}

EnsembleDecision fuse(std::span<const BlockDecision> decisions, double tau, LlsRoles roles) {
  const auto map = bbmap(decisions);
  const auto ll = bbll(decisions, tau, roles);
  EnsembleDecision e;
  e.posterior = map.posterior;
  e.vote_score = map.vote_score;
  e.label_bbmap = map.label;
  e.ells = ll.ells;
  e.tau = tau;
  e.label_bbll = ll.label;
  e.roles = roles;
  return e;
}

RocCurve roc_auc(std::span<const double> scores, std::span<const ClassId> truth) {
  if (scores.size() != truth.size()) throw DimensionError("score and label counts differ");
  std::size_t pos = 0;
  for (ClassId c : truth) pos += c == ClassId::malignant;
  const std::size_t neg = truth.size() - pos;
  if (pos == 0 || neg == 0) throw InputError("ROC needs both classes in the ground truth");
  for (double s : scores)
    if (!std::isfinite(s)) throw InputError("non-finite score");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve roc;
  roc.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  double area = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    const double thr = scores[order[i]];
    const std::size_t tp0 = tp, fp0 = fp;
    while (i < order.size() && scores[order[i]] == thr) {
      if (truth[order[i]] == ClassId::malignant) ++tp;
      else ++fp;
      ++i;
    }
    area += static_cast<double>(fp - fp0) * 0.5 * static_cast<double>(tp + tp0);
    roc.points.push_back({thr, static_cast<double>(fp) / static_cast<double>(neg),
                          static_cast<double>(tp) / static_cast<double>(pos)});
  }
  roc.auc = area / (static_cast<double>(pos) * static_cast<double>(neg));
  return roc;
}

std::string roc_csv(const RocCurve& roc) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "threshold,fpr,tpr\n";
  for (const auto& p : roc.points) {
    if (std::isinf(p.threshold)) os << "inf";
    else os << p.threshold;
    os << ',' << p.fpr << ',' << p.tpr << '\n';
  }
  return os.str();
}

std::string roc_svg(const RocCurve& roc, const std::string& title) {
  constexpr int size = 400, margin = 50;
  const int plot = size - 2 * margin;
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << size << "\" height=\"" << size << "\" fill=\"white\"/>\n";
  os << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << plot << "\" height=\"" << plot
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << margin << "\" y1=\"" << margin + plot << "\" x2=\"" << margin + plot << "\" y2=\"" << margin
     << "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
  os << "<polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < roc.points.size(); ++i) {
    if (i) os << ' ';
    os << margin + roc.points[i].fpr * plot << ',' << margin + (1.0 - roc.points[i].tpr) * plot;
  }
  os << "\"/>\n";
  auto escape = [](const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '<') out += "&lt;";
      else if (c == '>') out += "&gt;";
      else if (c == '&') out += "&amp;";
      else out += c;
    }
    return out;
  };
  os << "<text x=\"" << size / 2 << "\" y=\"" << margin / 2 << "\" text-anchor=\"middle\" font-size=\"14\">"
     << escape(title) << " (AUC " << roc.auc * 100.0 << "%)</text>\n";
  os << "<text x=\"" << size / 2 << "\" y=\"" << size - 15 << "\" text-anchor=\"middle\" font-size=\"12\">FPR</text>\n";
  os << "<text x=\"15\" y=\"" << size / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 15 "
     << size / 2 << ")\">TPR</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace lcslesa
