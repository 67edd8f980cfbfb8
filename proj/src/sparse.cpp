#include <lcslesa/sparse.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace lcslesa {

std::string_view to_string(ClassId c) { return c == ClassId::benign ? "benign" : "malignant"; }

ClassId class_from_string(std::string_view s) {
  if (s == "benign" || s == "B") return ClassId::benign;
  if (s == "malignant" || s == "M") return ClassId::malignant;
  throw InputError("unknown class id '" + std::string(s) + "'");
}

namespace {

constexpr double kRidgeJitter = 1e-10;

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw InputError(std::string(what) + " contains non-finite values");
}

void require_length(const Dictionary& dict, const Vector& y) {
  if (y.size() != dict.dim())
    throw DimensionError("signal length " + std::to_string(y.size()) +
                         " does not match dictionary dimension " + std::to_string(dict.dim()));
}

// Solves (A + jitter I) x = b for a small symmetric positive (semi)definite A.
Vector spd_solve(const Matrix& a, const Vector& b) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() == Eigen::Success) {
    Vector x = llt.solve(b);
    if (x.allFinite()) return x;
  }
  Matrix jittered = a;
  jittered.diagonal().array() += kRidgeJitter * std::max(1.0, a.diagonal().maxCoeff());
  return jittered.ldlt().solve(b);
}

}  // namespace

NormalizedColumns normalize_columns(const Matrix& m) {
  require_finite(m, "matrix");
  NormalizedColumns out;
  out.columns = m;
  out.scales.resize(m.cols());
  out.degenerate.assign(static_cast<std::size_t>(m.cols()), false);
  for (Eigen::Index k = 0; k < m.cols(); ++k) {
    const double norm = m.col(k).norm();
    out.scales(k) = norm;
    if (norm < kDegenerateNorm) {
      out.columns.col(k).setZero();
      out.degenerate[static_cast<std::size_t>(k)] = true;
    } else {
      out.columns.col(k) /= norm;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dictionary

Dictionary Dictionary::from_raw(const Matrix& raw, std::vector<ClassId> labels) {
  if (raw.rows() < 1 || raw.cols() < 1) throw DimensionError("dictionary must have at least one row and column");
  if (!labels.empty() && labels.size() != static_cast<std::size_t>(raw.cols()))
    throw DimensionError("atom label count " + std::to_string(labels.size()) + " != atom count " +
                         std::to_string(raw.cols()));
  auto norm = normalize_columns(raw);
  Dictionary d;
  d.atoms_ = std::move(norm.columns);
  d.scales_ = std::move(norm.scales);
  d.degenerate_ = std::move(norm.degenerate);
  d.labels_ = std::move(labels);
  return d;
}

Dictionary Dictionary::from_normalized(Matrix atoms, Vector scales, std::vector<ClassId> labels) {
  if (atoms.rows() < 1 || atoms.cols() < 1) throw DimensionError("dictionary must have at least one row and column");
  require_finite(atoms, "dictionary");
  if (scales.size() != atoms.cols()) throw DimensionError("scale count does not match atom count");
  if (!labels.empty() && labels.size() != static_cast<std::size_t>(atoms.cols()))
    throw DimensionError("atom label count does not match atom count");
  Dictionary d;
  d.degenerate_.assign(static_cast<std::size_t>(atoms.cols()), false);
  for (Eigen::Index k = 0; k < atoms.cols(); ++k) {
    const double norm = atoms.col(k).norm();
    if (norm == 0.0) {
      d.degenerate_[static_cast<std::size_t>(k)] = true;
    } else if (std::abs(norm - 1.0) > 1e-9) {
      throw InputError("atom " + std::to_string(k) + " is not unit norm (" + std::to_string(norm) + ")");
    }
  }
  d.atoms_ = std::move(atoms);
  d.scales_ = std::move(scales);
  d.labels_ = std::move(labels);
  return d;
}

Eigen::Index Dictionary::usable_atoms() const {
  return static_cast<Eigen::Index>(std::count(degenerate_.begin(), degenerate_.end(), false));
}

std::size_t Dictionary::atoms_in_class(ClassId c) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), c));
}

void SparseCode::refresh_support() {
  support.clear();
  for (Eigen::Index k = 0; k < coefficients.size(); ++k)
    if (coefficients(k) != 0.0) support.push_back(k);
}

// ---------------------------------------------------------------------------
// OMP

SparseCode omp(const Dictionary& dict, const Vector& y, int max_atoms, double eps) {
  return omp(dict, y, max_atoms, eps, nullptr);
}

SparseCode omp(const Dictionary& dict, const Vector& y, int max_atoms, double eps,
               std::vector<double>* residual_trace) {
  require_length(dict, y);
  if (max_atoms < 1) throw InputError("sparsity bound must be at least 1");
  if (!(eps >= 0.0)) throw InputError("tolerance must be nonnegative");
  require_finite(y, "signal");
  const Eigen::Index usable = dict.usable_atoms();
  if (usable == 0) throw InputError("dictionary has no usable (non-degenerate) atoms");

  const Matrix& d = dict.atoms();
  SparseCode code;
  code.coefficients = Vector::Zero(d.cols());

  Vector residual = y;
  double rnorm = residual.norm();
  if (residual_trace) residual_trace->assign(1, rnorm);

  const Eigen::Index limit = std::min<Eigen::Index>(max_atoms, usable);
  std::vector<Eigen::Index> selected;
  std::vector<bool> taken(static_cast<std::size_t>(d.cols()), false);
  Vector x_sel;

  while (rnorm > eps && static_cast<Eigen::Index>(selected.size()) < limit) {
    const Vector corr = d.transpose() * residual;
    Eigen::Index best = -1;
    double best_abs = 0.0;
    for (Eigen::Index k = 0; k < d.cols(); ++k) {
      if (taken[static_cast<std::size_t>(k)] || dict.is_degenerate(k)) continue;
      const double a = std::abs(corr(k));
      if (best < 0 || a > best_abs) {
        best = k;
        best_abs = a;
      }
    }
    // Residual orthogonal to every remaining atom: no further progress.
    if (best < 0 || best_abs <= 1e-14 * rnorm) break;

    selected.push_back(best);
    taken[static_cast<std::size_t>(best)] = true;

    const auto n = static_cast<Eigen::Index>(selected.size());
    Matrix sub(d.rows(), n);
    for (Eigen::Index i = 0; i < n; ++i) sub.col(i) = d.col(selected[static_cast<std::size_t>(i)]);
    const Matrix gram = sub.transpose() * sub;
    x_sel = spd_solve(gram, sub.transpose() * y);
    Vector next = y - sub * x_sel;
    const double next_norm = next.norm();
    ++code.iterations;
    residual = std::move(next);
    rnorm = next_norm;
    if (residual_trace) residual_trace->push_back(rnorm);
  }

  for (std::size_t i = 0; i < selected.size(); ++i) code.coefficients(selected[i]) = x_sel(static_cast<Eigen::Index>(i));
  code.refresh_support();
  code.residual_norm = rnorm;
  return code;
}

// ---------------------------------------------------------------------------
// BPDN

BpdnSolver::BpdnSolver(const Dictionary& dict, BpdnOptions options) : dict_(dict), options_(options) {
  if (dict_.size() == 0) throw DimensionError("empty dictionary");
  gram_ = dict_.atoms().transpose() * dict_.atoms();
  Matrix jittered = gram_;
  jittered.diagonal().array() += kRidgeJitter;
  for (Eigen::Index k = 0; k < jittered.rows(); ++k)
    if (dict_.is_degenerate(k)) jittered(k, k) = 1.0;
  ls_factor_.compute(jittered);
  // Step size 1/L with L the largest Gram eigenvalue, plus a 1% margin.
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram_, Eigen::EigenvaluesOnly);
  const double lambda = es.eigenvalues().maxCoeff();
  lipschitz_ = lambda > 0.0 ? 1.01 * lambda : 1.0;
}

Vector BpdnSolver::shrinkage(const Vector& dty, double lambda, Vector x, int* iterations) const {
  const double step = 1.0 / lipschitz_;
  const double thresh = lambda * step;
  Vector z = x;
  double t = 1.0;
  for (int it = 0; it < options_.max_inner_iterations; ++it) {
    const Vector grad = gram_ * z - dty;
    Vector next = z - step * grad;
    for (Eigen::Index k = 0; k < next.size(); ++k) {
      const double v = next(k);
      next(k) = dict_.is_degenerate(k) ? 0.0 : (v > thresh ? v - thresh : (v < -thresh ? v + thresh : 0.0));
    }
    const Vector delta = next - x;
    // Gradient-based adaptive restart of the momentum sequence.
    if ((z - next).dot(delta) > 0.0) {
      t = 1.0;
      z = next;
    } else {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      z = next + ((t - 1.0) / t_next) * delta;
      t = t_next;
    }
    const double change = delta.norm();
    x = std::move(next);
    ++*iterations;
    if (change <= options_.inner_tolerance * x.norm()) break;
  }
  return x;
}

double BpdnSolver::least_squares_residual(const Vector& y) const {
  require_length(dict_, y);
  const Vector x = ls_factor_.solve(dict_.atoms().transpose() * y);
  return (dict_.atoms() * x - y).norm();
}

SparseCode BpdnSolver::solve(const Vector& y, double eps) const {
  require_length(dict_, y);
  if (!(eps > 0.0)) throw InputError("noise bound must be positive");
  require_finite(y, "signal");

  const Eigen::Index n = dict_.size();
  SparseCode best;
  best.coefficients = Vector::Zero(n);
  best.residual_norm = y.norm();
  if (best.residual_norm <= eps) return best;

  const Vector dty = dict_.atoms().transpose() * y;
  const double lambda_max = dty.cwiseAbs().maxCoeff();
  if (lambda_max == 0.0) throw SolverError("signal is orthogonal to every atom; noise bound unreachable", best);

  int iterations = 0;
  SparseCode closest = best;  // smallest residual seen, for diagnostics
  auto evaluate = [&](double lambda, const Vector& warm) {
    SparseCode c;
    c.coefficients = shrinkage(dty, lambda, warm, &iterations);
    c.residual_norm = (dict_.atoms() * c.coefficients - y).norm();
    if (c.residual_norm < closest.residual_norm) closest = c;
    return c;
  };

  // Bracket: lambda_max is infeasible (zero solution); walk down until the
  // penalized solution satisfies the bound.
  double hi = lambda_max;
  double lo = lambda_max;
  bool found = false;
  Vector warm = Vector::Zero(n);
  for (int step = 0; step < 6 && !found; ++step) {
    lo = hi * 1e-2;
    SparseCode c = evaluate(lo, warm);
    if (c.residual_norm <= eps) {
      best = std::move(c);
      found = true;
    } else {
      warm = c.coefficients;
      hi = lo;
    }
  }
  if (!found) {
    closest.iterations = iterations;
    closest.refresh_support();
    throw SolverError("noise bound " + std::to_string(eps) + " not reached; best residual " +
                          std::to_string(closest.residual_norm),
                      closest);
  }

  for (int step = 0; step < options_.max_bisections && hi / lo > 1.0 + options_.bracket_tolerance; ++step) {
    const double mid = std::sqrt(lo * hi);
    SparseCode c = evaluate(mid, best.coefficients);
    if (c.residual_norm <= eps) {
      lo = mid;
      best = std::move(c);
    } else {
      hi = mid;
    }
  }
  best.iterations = iterations;
  best.refresh_support();
  return best;
}

SparseCode bpdn(const Dictionary& dict, const Vector& y, double eps, BpdnOptions options) {
  return BpdnSolver(dict, options).solve(y, eps);
}

// ---------------------------------------------------------------------------

Vector restrict_to_class(const Dictionary& dict, const Vector& x, ClassId c) {
  if (!dict.labeled()) throw InputError("dictionary atoms carry no class labels");
  if (x.size() != dict.size()) throw DimensionError("code length does not match atom count");
  Vector out = x;
  for (Eigen::Index k = 0; k < x.size(); ++k)
    if (dict.atom_labels()[static_cast<std::size_t>(k)] != c) out(k) = 0.0;
  return out;
}

ClassScores class_residuals(const Dictionary& dict, const Vector& x, const Vector& y) {
  require_length(dict, y);
  if (x.size() != dict.size()) throw DimensionError("code length does not match atom count");
  if (!dict.labeled()) throw InputError("dictionary atoms carry no class labels");
  for (ClassId c : kClasses)
    if (dict.atoms_in_class(c) == 0) throw InputError("class '" + std::string(to_string(c)) + "' has no atoms");
  ClassScores s;
  for (ClassId c : kClasses) {
    const Vector restricted = restrict_to_class(dict, x, c);
    s.residual[index_of(c)] = (y - dict.atoms() * restricted).norm();
    s.l1[index_of(c)] = restricted.lpNorm<1>();
  }
  return s;
}

double mutual_coherence(const Dictionary& dict) {
  const Matrix g = dict.atoms().transpose() * dict.atoms();
  double mu = 0.0;
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = i + 1; j < g.cols(); ++j)
      if (!dict.is_degenerate(i) && !dict.is_degenerate(j)) mu = std::max(mu, std::abs(g(i, j)));
  return mu;
}

}  // namespace lcslesa
