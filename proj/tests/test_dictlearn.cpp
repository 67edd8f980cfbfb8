#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"

#include <lcslesa/dictlearn.hpp>

using namespace lcslesa;
using namespace lcslesa::testing;

namespace {

// Two classes of sparse mixtures over disjoint random atom sets.
struct Toy {
  Matrix y;
  std::vector<ClassId> labels;
};

Toy toy_problem(std::uint64_t seed, Eigen::Index dim = 12, int per_class = 15) {
  std::mt19937_64 rng(seed);
  const Matrix atoms = unit_columns(random_matrix(rng, dim, 6));
  Toy t;
  t.y.resize(dim, 2 * per_class);
  std::uniform_int_distribution<int> pick(0, 2);
  std::uniform_real_distribution<double> w(0.5, 1.5);
  for (int j = 0; j < 2 * per_class; ++j) {
    const int c = j < per_class ? 0 : 1;
    t.y.col(j) = w(rng) * atoms.col(3 * c + pick(rng)) + w(rng) * atoms.col(3 * c + pick(rng)) +
                 0.01 * random_vector(rng, dim);
    t.labels.push_back(c == 0 ? ClassId::benign : ClassId::malignant);
  }
  return t;
}

}  // namespace

TEST_CASE("TrainParams validation and effective sizes") {
  TrainParams p;
  CHECK_NOTHROW(p.validate());
  CHECK(p.effective_atoms(40) == 40);
  p.atoms = 10;
  CHECK(p.effective_atoms(40) == 10);
  CHECK(p.effective_sparsity(10) == 9);
  p.sparsity = 3;
  CHECK(p.effective_sparsity(10) == 3);
  CHECK(p.effective_sparsity(1) == 1);

  TrainParams bad;
  bad.atoms = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.alpha = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.iterations = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  CHECK(dl_mode_from_string("lcksvd2") == DlMode::lcksvd2);
  CHECK_THROWS_AS(dl_mode_from_string("svd"), ConfigError);
}

TEST_CASE("label matrices") {
  const std::vector<ClassId> samples{ClassId::benign, ClassId::malignant, ClassId::malignant};
  const std::vector<ClassId> atoms{ClassId::malignant, ClassId::benign};
  const auto m = build_label_matrices(samples, atoms);
  Matrix q(2, 3), h(2, 3);
  q << 0, 1, 1,
       1, 0, 0;
  h << 1, 0, 0,
       0, 1, 1;
  CHECK(m.q == q);
  CHECK(m.h == h);
}

TEST_CASE("stacked objective identity") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix y = random_matrix(rng, 7, 9), d = random_matrix(rng, 7, 5), x = random_matrix(rng, 5, 9);
    const Matrix q = random_matrix(rng, 5, 9), a = random_matrix(rng, 5, 5);
    const Matrix h = random_matrix(rng, 2, 9), w = random_matrix(rng, 2, 5);
    const double alpha = 0.1 + trial * 0.3, beta = 2.0 / (trial + 1);
    const Matrix ys = stack_weighted(y, q, alpha, h, beta);
    const Matrix ds = stack_weighted(d, a, alpha, w, beta);
    CHECK(ys.rows() == 7 + 5 + 2);
    const double stacked = frobenius_sq(ys, ds, x);
    const double expanded = frobenius_sq(y, d, x) + alpha * frobenius_sq(q, a, x) + beta * frobenius_sq(h, w, x);
    CHECK(std::abs(stacked - expanded) <= 1e-9 * std::max(1.0, expanded));
    CHECK(std::abs(lcksvd_objective(y, d, q, a, h, w, x, alpha, beta) - expanded) <= 1e-9 * std::max(1.0, expanded));
  }
  SUBCASE("zero weights drop rows") {
    const Matrix y = Matrix::Ones(3, 2), q = Matrix::Ones(4, 2), h = Matrix::Ones(2, 2);
    CHECK(stack_weighted(y, q, 0.0, h, 0.0).rows() == 3);
    CHECK(stack_weighted(y, q, 1.0, h, 0.0).rows() == 7);
    CHECK(stack_weighted(y, q, 0.0, h, 1.0).rows() == 5);
  }
}

TEST_CASE("K-SVD recovers a planted dictionary and never increases the update-stage objective") {
  const Toy t = toy_problem(5);
  TrainParams p;
  p.atoms = 8;
  p.sparsity = 2;
  p.iterations = 25;
  p.min_improvement = 0.0;
  const auto r = ksvd(t.y, p);
  REQUIRE(r.iterations.size() == 25u);
  for (const auto& it : r.iterations) CHECK(it.after_update <= it.after_coding * (1 + 1e-12) + 1e-12);
  CHECK(r.iterations.back().after_update < 0.05 * r.iterations.front().after_coding);
  CHECK(r.codes.rows() == 8);
  for (Eigen::Index j = 0; j < r.codes.cols(); ++j) CHECK((r.codes.col(j).array() != 0.0).count() <= 2);
  for (Eigen::Index k = 0; k < 8; ++k) CHECK(r.dictionary.atoms().col(k).norm() == doctest::Approx(1.0));
  CHECK(std::abs(frobenius_sq(t.y, r.dictionary.atoms(), r.codes) - r.iterations.back().after_update) <= 1e-9);
}

TEST_CASE("K-SVD is deterministic and early stopping truncates the trace") {
  const Toy t = toy_problem(9);
  TrainParams p;
  p.atoms = 6;
  p.sparsity = 2;
  p.iterations = 40;
  p.min_improvement = 1e-2;
  const auto a = ksvd(t.y, p);
  const auto b = ksvd(t.y, p);
  CHECK(a.objective_trace() == b.objective_trace());
  CHECK(a.dictionary.atoms() == b.dictionary.atoms());
  CHECK(a.iterations.size() < 40u);
  p.min_improvement = 0.0;
  CHECK(ksvd(t.y, p).iterations.size() == 40u);
}

TEST_CASE("K-SVD replaces unused atoms with same-class samples") {
  // Two identical initial atoms: with T = 1 only one is ever chosen by OMP
  // on the first pass, so the other is unused and must be replaced.
  Matrix y(3, 4);
  y << 1, 1, 0, 0,
       0, 0.1, 1, 1,
       0, 0, 0.1, 0.2;
  const std::vector<ClassId> samples{ClassId::benign, ClassId::benign, ClassId::malignant, ClassId::malignant};
  Matrix init(3, 3);
  init << 1, 1, 0,
          0, 0, 1,
          0, 0, 0;
  const auto d0 = Dictionary::from_raw(init, {ClassId::benign, ClassId::benign, ClassId::malignant});
  TrainParams p;
  p.sparsity = 1;
  p.iterations = 1;
  const auto r = ksvd(y, p, d0, samples);
  REQUIRE(r.iterations.size() == 1u);
  CHECK(r.iterations[0].replaced_atoms == 1);
  // The replacement is a benign sample (no z component), not a malignant one.
  const Vector replaced = r.dictionary.atoms().col(1);
  CHECK(std::abs(replaced(2)) < 1e-12);
  CHECK(replaced.norm() == doctest::Approx(1.0));
}

TEST_CASE("K-SVD input errors") {
  TrainParams p;
  CHECK_THROWS_AS(ksvd(Matrix(0, 0), p), InputError);
  Matrix y = Matrix::Ones(3, 4);
  y(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(ksvd(y, p), InputError);
  const auto d = Dictionary::from_raw(Matrix::Identity(4, 4));
  CHECK_THROWS_AS(ksvd(Matrix::Ones(3, 4), p, d), DimensionError);
}

TEST_CASE("LC-KSVD initialization") {
  const Toy t = toy_problem(13, 12, 10);
  TrainParams p;
  p.atoms = 7;
  p.sparsity = 2;
  const auto init = init_lcksvd(t.y, t.labels, p);
  CHECK(init.dictionary.size() == 7);
  CHECK(init.dictionary.atoms_in_class(ClassId::benign) + init.dictionary.atoms_in_class(ClassId::malignant) == 7u);
  CHECK(init.dictionary.atoms_in_class(ClassId::benign) >= 3);
  CHECK(init.dictionary.atoms_in_class(ClassId::malignant) >= 3);
  CHECK(init.a.rows() == 7);
  CHECK(init.a.cols() == 7);
  CHECK(init.w.rows() == 2);

  // Ridge normal equations: (X X^T + r I) coef^T = X target^T.
  const auto lm = build_label_matrices(t.labels, init.dictionary.atom_labels());
  Matrix g = init.codes * init.codes.transpose();
  g.diagonal().array() += p.ridge;
  CHECK((g * init.w.transpose() - init.codes * lm.h.transpose()).cwiseAbs().maxCoeff() < 1e-9);

  std::vector<ClassId> one_class(t.labels.size(), ClassId::benign);
  CHECK_THROWS_WITH_AS(init_lcksvd(t.y, one_class, p), doctest::Contains("malignant"), InputError);
}

TEST_CASE("LC-KSVD with alpha = beta = 0 is K-SVD") {
  const Toy t = toy_problem(17);
  TrainParams p;
  p.atoms = 8;
  p.sparsity = 2;
  p.iterations = 12;
  p.alpha = 0.0;
  p.beta = 0.0;
  p.min_improvement = 0.0;
  const auto lc = lcksvd_train(t.y, t.labels, p, DlMode::lcksvd2);
  const auto init = init_lcksvd(t.y, t.labels, p);
  const auto plain = ksvd(t.y, p, init.dictionary, t.labels);
  CHECK(lc.objective_trace == plain.objective_trace());
  CHECK((lc.dictionary.atoms() - plain.dictionary.atoms()).cwiseAbs().maxCoeff() <= 1e-12);
  // A and W are still fitted so the model is complete.
  CHECK(lc.a.rows() == 8);
  CHECK(lc.w.rows() == 2);
}

TEST_CASE("LC-KSVD training") {
  const Toy t = toy_problem(21);
  TrainParams p;
  p.atoms = 10;
  p.sparsity = 3;
  p.iterations = 15;
  p.min_improvement = 0.0;

  const auto two = lcksvd_train(t.y, t.labels, p, DlMode::lcksvd2);
  CHECK(two.mode == DlMode::lcksvd2);
  CHECK(two.dictionary.size() == 10);
  CHECK(two.dictionary.labeled());
  CHECK(two.w.rows() == 2);
  CHECK(two.w.cols() == 10);
  CHECK(two.a.rows() == 10);
  for (Eigen::Index k = 0; k < 10; ++k)
    if (!two.dictionary.is_degenerate(k)) CHECK(two.dictionary.atoms().col(k).norm() == doctest::Approx(1.0));
  for (const auto& it : two.iterations) CHECK(it.after_update <= it.after_coding * (1 + 1e-12) + 1e-12);

  // The linear classifier separates the training data.
  int correct = 0;
  const Dictionary& d = two.dictionary;
  for (Eigen::Index j = 0; j < t.y.cols(); ++j) {
    const Vector x = omp(d, t.y.col(j), 3, 0.0).coefficients;
    const Vector s = two.w * x;
    const ClassId guess = s(1) > s(0) ? ClassId::malignant : ClassId::benign;
    correct += guess == t.labels[static_cast<std::size_t>(j)];
  }
  CHECK(correct >= 28);

  const auto one = lcksvd_train(t.y, t.labels, p, DlMode::lcksvd1);
  CHECK(one.w.size() == 0);
  CHECK(one.a.rows() == 10);
  CHECK_THROWS_AS(lcksvd_train(t.y, t.labels, p, DlMode::none), ConfigError);
}
