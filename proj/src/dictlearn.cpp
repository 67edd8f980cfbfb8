#include <lcslesa/dictlearn.hpp>
#include <lcslesa/rng.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace lcslesa {

std::string_view to_string(DlMode m) {
  switch (m) {
    case DlMode::none: return "none";
    case DlMode::lcksvd1: return "lcksvd1";
    case DlMode::lcksvd2: return "lcksvd2";
  }
  return "none";
}

DlMode dl_mode_from_string(std::string_view s) {
  if (s == "none") return DlMode::none;
  if (s == "lcksvd1") return DlMode::lcksvd1;
  if (s == "lcksvd2") return DlMode::lcksvd2;
  throw ConfigError("unknown dictionary-learning mode '" + std::string(s) + "' (expected none, lcksvd1, lcksvd2)");
}

void TrainParams::validate() const {
  if (atoms != 0 && atoms < 2) throw ConfigError("atom count K must be at least 2");
  if (sparsity < 1) throw ConfigError("sparsity T must be at least 1");
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw ConfigError("alpha and beta must be nonnegative");
  if (iterations < 1) throw ConfigError("iterations must be at least 1");
  if (!(ridge > 0.0)) throw ConfigError("ridge must be positive");
}

int TrainParams::effective_atoms(Eigen::Index samples) const {
  return atoms > 0 ? atoms : static_cast<int>(samples);
}

int TrainParams::effective_sparsity(int k) const { return std::max(1, std::min(sparsity, k - 1)); }

LabelMatrices build_label_matrices(std::span<const ClassId> sample_labels, std::span<const ClassId> atom_labels) {
  auto check = [](ClassId c) {
    if (index_of(c) > 1) throw InputError("unknown class id " + std::to_string(index_of(c)));
  };
  LabelMatrices m;
  const auto s = static_cast<Eigen::Index>(sample_labels.size());
  const auto n = static_cast<Eigen::Index>(atom_labels.size());
  m.q = Matrix::Zero(n, s);
  m.h = Matrix::Zero(2, s);
  for (Eigen::Index j = 0; j < s; ++j) {
    const ClassId cj = sample_labels[static_cast<std::size_t>(j)];
    check(cj);
    m.h(static_cast<Eigen::Index>(index_of(cj)), j) = 1.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      const ClassId ck = atom_labels[static_cast<std::size_t>(k)];
      check(ck);
      if (ck == cj) m.q(k, j) = 1.0;
    }
  }
  return m;
}

std::vector<double> KsvdResult::objective_trace() const {
  std::vector<double> t;
  t.reserve(iterations.size());
  for (const auto& it : iterations) t.push_back(it.after_update);
  return t;
}

namespace {

Matrix code_columns(const Dictionary& d, const Matrix& y, int t) {
  Matrix x = Matrix::Zero(d.size(), y.cols());
  for (Eigen::Index j = 0; j < y.cols(); ++j) x.col(j) = omp(d, y.col(j), t, 0.0).coefficients;
  return x;
}

double residual_energy(const Matrix& y, const Matrix& d, const Matrix& x) { return (y - d * x).squaredNorm(); }

// Best rank-1 approximation u * s * v^T of e (u unit norm), through the
// eigen-decomposition of the smaller Gram matrix. Returns false when e is zero.
bool rank_one(const Matrix& e, Vector& u, Vector& sv) {
  if (e.rows() <= e.cols()) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(e * e.transpose());
    u = es.eigenvectors().col(e.rows() - 1);
    sv = e.transpose() * u;
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> es(e.transpose() * e);
    const Vector v = es.eigenvectors().col(e.cols() - 1);
    Vector ev = e * v;
    const double s = ev.norm();
    if (s == 0.0) return false;
    u = ev / s;
    sv = e.transpose() * u;
  }
  if (!(sv.squaredNorm() > 0.0) || !u.allFinite()) return false;
  // Fix the sign so the result does not depend on the eigensolver's choice.
  Eigen::Index arg;
  u.cwiseAbs().maxCoeff(&arg);
  if (u(arg) < 0.0) {
    u = -u;
    sv = -sv;
  }
  return true;
}

void require_training_input(const Matrix& y, int k) {
  if (y.rows() < 1 || y.cols() < 1) throw InputError("training matrix is empty");
  if (!y.allFinite()) throw InputError("training matrix contains non-finite values");
  if (k < 2) throw ConfigError("atom count K must be at least 2");
}

}  // namespace

KsvdResult ksvd(const Matrix& y, const TrainParams& params, const Dictionary& initial,
                std::span<const ClassId> sample_labels) {
  params.validate();
  require_training_input(y, static_cast<int>(initial.size()));
  if (initial.dim() != y.rows()) throw DimensionError("initial dictionary dimension does not match training data");
  if (!sample_labels.empty() && sample_labels.size() != static_cast<std::size_t>(y.cols()))
    throw DimensionError("sample label count does not match training columns");
  const bool class_aware = !sample_labels.empty() && initial.labeled();

  const int t = params.effective_sparsity(static_cast<int>(initial.size()));
  Matrix d = initial.atoms();
  Vector scales = initial.scales();
  const Eigen::Index k_atoms = d.cols();

  KsvdResult result;
  Matrix x;
  double previous = -1.0;
  for (int iter = 0; iter < params.iterations; ++iter) {
    const Dictionary current = Dictionary::from_normalized(d, scales, initial.atom_labels());
    x = code_columns(current, y, t);

    KsvdIteration stats;
    Matrix e = y - d * x;
    stats.after_coding = e.squaredNorm();

    std::vector<bool> used_for_replacement(static_cast<std::size_t>(y.cols()), false);
    for (Eigen::Index k = 0; k < k_atoms; ++k) {
      std::vector<Eigen::Index> omega;
      for (Eigen::Index j = 0; j < y.cols(); ++j)
        if (x(k, j) != 0.0) omega.push_back(j);

      if (omega.empty()) {
        // Unused atom: swap in the worst-represented sample. Its code row is
        // zero, so the objective is unchanged until the next coding stage.
        Eigen::Index worst = -1;
        double worst_err = 0.0;
        for (Eigen::Index j = 0; j < y.cols(); ++j) {
          if (used_for_replacement[static_cast<std::size_t>(j)]) continue;
          if (class_aware && sample_labels[static_cast<std::size_t>(j)] != initial.atom_labels()[static_cast<std::size_t>(k)])
            continue;
          const double err = e.col(j).squaredNorm();
          if (err > worst_err) {
            worst_err = err;
            worst = j;
          }
        }
        const double norm = worst >= 0 ? y.col(worst).norm() : 0.0;
        if (worst >= 0 && norm >= kDegenerateNorm) {
          d.col(k) = y.col(worst) / norm;
          scales(k) = norm;
          used_for_replacement[static_cast<std::size_t>(worst)] = true;
          ++stats.replaced_atoms;
        }
        continue;
      }

      const auto m = static_cast<Eigen::Index>(omega.size());
      Matrix ek(y.rows(), m);
      double old_err = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::Index j = omega[static_cast<std::size_t>(i)];
        old_err += e.col(j).squaredNorm();
        ek.col(i) = e.col(j) + d.col(k) * x(k, j);
      }
      Vector u, sv;
      if (!rank_one(ek, u, sv)) continue;
      const Matrix next = ek - u * sv.transpose();
      // Keep the old atom if rounding would make the update a net loss.
      if (next.squaredNorm() > old_err) continue;
      d.col(k) = u;
      for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::Index j = omega[static_cast<std::size_t>(i)];
        x(k, j) = sv(i);
        e.col(j) = next.col(i);
      }
    }
    stats.after_update = residual_energy(y, d, x);
    result.iterations.push_back(stats);

    if (params.min_improvement > 0.0 && previous >= 0.0) {
      const double gain = previous - stats.after_update;
      if (previous == 0.0 || gain < params.min_improvement * previous) break;
    }
    previous = stats.after_update;
  }

  result.dictionary = Dictionary::from_normalized(std::move(d), std::move(scales), initial.atom_labels());
  result.codes = std::move(x);
  return result;
}

KsvdResult ksvd(const Matrix& y, const TrainParams& params) {
  params.validate();
  const int k = params.effective_atoms(y.cols());
  require_training_input(y, k);
  Rng rng(params.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(y.cols()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
  rng.shuffle(order);
  Matrix init(y.rows(), k);
  for (int i = 0; i < k; ++i) {
    const auto pick = static_cast<std::size_t>(i) < order.size() ? order[static_cast<std::size_t>(i)]
                                                                  : static_cast<Eigen::Index>(rng.below(order.size()));
    init.col(i) = y.col(pick);
  }
  return ksvd(y, params, Dictionary::from_raw(init));
}

namespace {

// Ridge regression target ~ coef * x:  coef = target x^T (x x^T + ridge I)^-1.
Matrix ridge_fit(const Matrix& target, const Matrix& x, double ridge) {
  Matrix gram = x * x.transpose();
  gram.diagonal().array() += ridge;
  const Matrix rhs = x * target.transpose();
  return gram.ldlt().solve(rhs).transpose();
}

}  // namespace

LcksvdInit init_lcksvd(const Matrix& y, std::span<const ClassId> sample_labels, const TrainParams& params) {
  params.validate();
  const int k = params.effective_atoms(y.cols());
  require_training_input(y, k);
  if (sample_labels.size() != static_cast<std::size_t>(y.cols()))
    throw DimensionError("sample label count does not match training columns");

  std::array<std::vector<Eigen::Index>, 2> members;
  for (std::size_t j = 0; j < sample_labels.size(); ++j) members[index_of(sample_labels[j])].push_back(static_cast<Eigen::Index>(j));
  for (ClassId c : kClasses)
    if (members[index_of(c)].empty()) throw InputError("class '" + std::string(to_string(c)) + "' has no training samples");

  // Atoms per class proportional to class sizes, at least one each.
  const double s = static_cast<double>(y.cols());
  int k_benign = static_cast<int>(std::lround(k * static_cast<double>(members[0].size()) / s));
  k_benign = std::clamp(k_benign, 1, k - 1);
  const std::array<int, 2> quota{k_benign, k - k_benign};

  Rng rng(params.seed);
  Matrix init(y.rows(), k);
  std::vector<ClassId> labels;
  labels.reserve(static_cast<std::size_t>(k));
  Eigen::Index col = 0;
  for (ClassId c : kClasses) {
    auto pool = members[index_of(c)];
    rng.shuffle(pool);
    for (int i = 0; i < quota[index_of(c)]; ++i) {
      const auto pick = static_cast<std::size_t>(i) < pool.size() ? pool[static_cast<std::size_t>(i)]
                                                                   : pool[rng.below(pool.size())];
      init.col(col++) = y.col(pick);
      labels.push_back(c);
    }
  }

  LcksvdInit out;
  out.dictionary = Dictionary::from_raw(init, labels);
  out.codes = code_columns(out.dictionary, y, params.effective_sparsity(k));
  const auto lm = build_label_matrices(sample_labels, labels);
  out.a = ridge_fit(lm.q, out.codes, params.ridge);
  out.w = ridge_fit(lm.h, out.codes, params.ridge);
  return out;
}

Matrix stack_weighted(const Matrix& top, const Matrix& mid, double alpha, const Matrix& bottom, double beta) {
  const bool use_mid = alpha > 0.0 && mid.size() > 0;
  const bool use_bottom = beta > 0.0 && bottom.size() > 0;
  Eigen::Index rows = top.rows();
  if (use_mid) rows += mid.rows();
  if (use_bottom) rows += bottom.rows();
  Matrix out(rows, top.cols());
  Eigen::Index r = 0;
  out.middleRows(r, top.rows()) = top;
  r += top.rows();
  if (use_mid) {
    out.middleRows(r, mid.rows()) = std::sqrt(alpha) * mid;
    r += mid.rows();
  }
  if (use_bottom) out.middleRows(r, bottom.rows()) = std::sqrt(beta) * bottom;
  return out;
}

double lcksvd_objective(const Matrix& y, const Matrix& d, const Matrix& q, const Matrix& a, const Matrix& h,
                        const Matrix& w, const Matrix& x, double alpha, double beta) {
  double total = (y - d * x).squaredNorm();
  if (alpha > 0.0 && a.size() > 0) total += alpha * (q - a * x).squaredNorm();
  if (beta > 0.0 && w.size() > 0) total += beta * (h - w * x).squaredNorm();
  return total;
}

DiscriminativeDictionary lcksvd_train(const Matrix& y, std::span<const ClassId> sample_labels,
                                      const TrainParams& params, DlMode mode) {
  if (mode == DlMode::none) throw ConfigError("lcksvd_train requires mode lcksvd1 or lcksvd2");
  const LcksvdInit init = init_lcksvd(y, sample_labels, params);
  const auto& labels = init.dictionary.atom_labels();
  const auto lm = build_label_matrices(sample_labels, labels);

  const double alpha = params.alpha;
  const double beta = mode == DlMode::lcksvd2 ? params.beta : 0.0;
  const Matrix d0 = init.dictionary.atoms();
  const Matrix stacked_y = stack_weighted(y, lm.q, alpha, lm.h, beta);
  const Matrix stacked_d0 = stack_weighted(d0, init.a, alpha, init.w, beta);

  const Dictionary start = stacked_d0.rows() == y.rows() ? init.dictionary : Dictionary::from_raw(stacked_d0, labels);
  KsvdResult trained = ksvd(stacked_y, params, start, sample_labels);

  const Eigen::Index dim = y.rows();
  const Eigen::Index k = static_cast<Eigen::Index>(labels.size());
  const Matrix& full = trained.dictionary.atoms();
  Matrix d = full.topRows(dim);
  Matrix a = Matrix::Zero(lm.q.rows(), k);
  Matrix w = Matrix::Zero(2, k);
  Eigen::Index r = dim;
  if (alpha > 0.0) {
    a = full.middleRows(r, lm.q.rows()) / std::sqrt(alpha);
    r += lm.q.rows();
  }
  if (beta > 0.0) w = full.middleRows(r, 2) / std::sqrt(beta);

  Vector scales(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double norm = d.col(j).norm();
    scales(j) = norm;
    if (norm < kDegenerateNorm) {
      d.col(j).setZero();
      a.col(j).setZero();
      w.col(j).setZero();
    } else {
      d.col(j) /= norm;
      a.col(j) /= norm;
      w.col(j) /= norm;
    }
  }

  // Terms switched off by a zero weight were not learned; fit them to the
  // final codes expressed in the renormalized basis.
  const Matrix rescaled_codes = scales.asDiagonal() * trained.codes;
  if (!(alpha > 0.0)) a = ridge_fit(lm.q, rescaled_codes, params.ridge);
  if (mode == DlMode::lcksvd2 && !(beta > 0.0)) w = ridge_fit(lm.h, rescaled_codes, params.ridge);

  DiscriminativeDictionary out;
  out.dictionary = Dictionary::from_normalized(std::move(d), std::move(scales), labels);
  out.a = std::move(a);
  if (mode == DlMode::lcksvd2) out.w = std::move(w);
  out.mode = mode;
  out.params = params;
  out.objective_trace = trained.objective_trace();
  out.iterations = std::move(trained.iterations);
  out.codes = std::move(trained.codes);
  return out;
}

}  // namespace lcslesa
