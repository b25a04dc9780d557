#include "doctest.h"
#include "test_support.hpp"
#include "wfsim/diffusion.hpp"

#include <cmath>

using namespace wfsim;
using wfsim::testing::biallelic_state;
using wfsim::testing::random_interior_state;
using wfsim::testing::two_locus_spec;

namespace {

FrequencyState three_allele(double a, double b) {
  return FrequencyState(make_layout({3}), {a, b, 1.0 - a - b});
}

// Standard error of the mean by non-overlapping batch means.
double batch_se(const std::vector<double>& v, std::size_t batches = 50) {
  const std::size_t size = v.size() / batches;
  std::vector<double> means(batches, 0.0);
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t n = 0; n < size; ++n) means[b] += v[b * size + n] / static_cast<double>(size);
  }
  double mean = 0.0;
  for (double m : means) mean += m / static_cast<double>(batches);
  double var = 0.0;
  for (double m : means) var += (m - mean) * (m - mean) / static_cast<double>(batches - 1);
  return std::sqrt(var / static_cast<double>(batches));
}

}  // namespace

TEST_CASE("diffusion matrix") {
  const FrequencyState half(make_layout({2}), {0.5, 0.5});
  CHECK(diffusion_matrix(half, 0)(0, 0) == 0.25);
  const Matrix d = diffusion_matrix(three_allele(0.2, 0.3), 0);
  CHECK(d(0, 0) == doctest::Approx(0.16).epsilon(1e-15));
  CHECK(d(0, 1) == doctest::Approx(-0.06).epsilon(1e-15));
  CHECK(d(1, 0) == doctest::Approx(-0.06).epsilon(1e-15));
  CHECK(d(1, 1) == doctest::Approx(0.21).epsilon(1e-15));
  const Matrix z = diffusion_matrix(three_allele(0.0, 0.3), 0);
  CHECK(z.row(0).isZero(0.0));
  CHECK(z.col(0).isZero(0.0));
}

TEST_CASE("diffusion matrix inverse") {
  const Matrix inv = diffusion_matrix_inverse(three_allele(0.2, 0.3), 0);
  CHECK(inv(0, 0) == doctest::Approx(7.0).epsilon(1e-14));
  CHECK(inv(0, 1) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(inv(1, 1) == doctest::Approx(16.0 / 3).epsilon(1e-14));
  const Matrix prod = diffusion_matrix(three_allele(0.2, 0.3), 0) * inv;
  CHECK((prod - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
  const FrequencyState p(make_layout({2}), {0.3, 0.7});
  CHECK(diffusion_matrix_inverse(p, 0)(0, 0) == doctest::Approx(1.0 / 0.21).epsilon(1e-14));
  try {
    diffusion_matrix_inverse(FrequencyState(make_layout({3}), {0.5, 0.5, 0.0}), 0);
    FAIL("expected SingularAtBoundary");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularAtBoundary);
  }
}

TEST_CASE("diffusion matrix is symmetric PSD and the factor reconstructs it") {
  const FrequencyState p(make_layout({2}), {0.3, 0.7});
  CHECK(diffusion_matrix_factor(p, 0)(0, 0) == doctest::Approx(std::sqrt(0.21)).epsilon(1e-15));
  const Matrix b = diffusion_matrix_factor(three_allele(0.2, 0.3), 0);
  const Matrix d = diffusion_matrix(three_allele(0.2, 0.3), 0);
  CHECK((b * b.transpose() - d).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(diffusion_matrix_factor(three_allele(0.0, 0.3), 0).col(0).isZero(0.0));

  Rng rng = make_rng(6);
  for (int n = 0; n < 200; ++n) {
    const int m = 2 + n % 5;
    const auto x = random_interior_state(make_layout({m}), rng, 0.0);
    const Matrix dm = diffusion_matrix(x, 0);
    CHECK(dm == dm.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(dm);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-12);
    const Matrix bm = diffusion_matrix_factor(x, 0);
    const double tol = x.min_coordinate() > 1e-3 ? 1e-12 : 1e-9;
    CHECK((bm * bm.transpose() - dm).cwiseAbs().maxCoeff() <= tol);
    if (x.min_coordinate() >= 1e-3) {
      CHECK((dm * diffusion_matrix_inverse(x, 0) - Matrix::Identity(m - 1, m - 1)).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
  // Near the boundary.
  const auto edge = three_allele(1e-9, 0.5);
  const Matrix be = diffusion_matrix_factor(edge, 0);
  CHECK((be * be.transpose() - diffusion_matrix(edge, 0)).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("euler step with injected noise") {
  ModelSpec neutral;
  neutral.loci.push_back({3, {1e-300, 1e-300, 1e-300}, {0, 0, 0}});
  const auto quiet = validate_model(neutral);
  const FrequencyState x(quiet.layout_ptr(), {0.2, 0.3, 0.5});
  const std::vector<double> zero(2, 0.0);
  const auto same = em_step(quiet, x, 1e-3, zero);
  for (std::size_t c = 0; c < 3; ++c) CHECK(same.augmented()[c] == doctest::Approx(x.augmented()[c]).epsilon(1e-15));

  const auto model = validate_model(two_locus_spec(1.5, 0.7));
  const auto y = biallelic_state(model.layout_ptr(), {0.3, 0.6});
  const double dt = 1e-2;
  const auto next = em_step(model, y, dt, zero);
  const auto drift = full_drift(model, y);
  CHECK(next(0, 0) == doctest::Approx(0.3 + drift(0, 0) * dt).epsilon(1e-15));
  CHECK(next(1, 0) == doctest::Approx(0.6 + drift(1, 0) * dt).epsilon(1e-15));

  // A huge kick is projected back onto the simplex and counted.
  std::size_t clamped = 0;
  const auto kicked = em_step(model, y, dt, std::vector<double>{-100.0, 0.0}, &clamped);
  CHECK(clamped == 1);
  CHECK(kicked(0, 0) == 0.0);
  CHECK(kicked(0, 1) == 1.0);

  CHECK_THROWS_AS(em_step(model, y, dt, std::vector<double>{NAN, 0.0}), Error);
  CHECK_THROWS_AS(em_step(model, y, 0.0, zero), Error);
}

TEST_CASE("em steps stay on the simplex") {
  Rng rng = make_rng(14);
  for (int n = 0; n < 20; ++n) {
    const auto model = validate_model(wfsim::testing::random_model_spec(rng, {.max_loci = 3, .max_alleles = 4}));
    auto x = random_interior_state(model.layout_ptr(), rng, 0.0);
    for (int s = 0; s < 200; ++s) x = em_step(model, x, 1e-2, rng);
    CHECK(x.min_coordinate() >= 0.0);
  }
}

TEST_CASE("simulate_sde") {
  const auto model = validate_model(two_locus_spec(1.0, 1.0));
  const auto init = biallelic_state(model.layout_ptr(), {0.5, 0.5});
  Rng rng = make_rng(3);
  CHECK(simulate_sde(model, init, 0.0, 1e-3, 1, rng).size() == 1);
  Rng a = make_rng(21);
  Rng b = make_rng(21);
  const auto ta = simulate_sde(model, init, 1.0, 1e-3, 100, a);
  const auto tb = simulate_sde(model, init, 1.0, 1e-3, 100, b);
  CHECK(ta.size() == 11);
  CHECK(ta.times.back() == doctest::Approx(1.0));
  CHECK(ta.states == tb.states);
}

TEST_CASE("neutral SDE: Beta(2,2) mean and independent loci") {
  const auto model = validate_model(two_locus_spec(0.0, 1.0));
  const auto init = biallelic_state(model.layout_ptr(), {0.5, 0.5});
  Rng rng = make_rng(2024);
  const auto traj = simulate_sde(model, init, 1000.0, 1e-3, 100, rng);
  std::vector<double> x1;
  std::vector<double> x2;
  std::vector<double> prod;
  for (std::size_t n = 100; n < traj.size(); ++n) {
    x1.push_back(traj.states[n][0]);
    x2.push_back(traj.states[n][2]);
  }
  double m1 = 0.0;
  double m2 = 0.0;
  for (std::size_t n = 0; n < x1.size(); ++n) {
    m1 += x1[n] / static_cast<double>(x1.size());
    m2 += x2[n] / static_cast<double>(x2.size());
  }
  CHECK(std::abs(m1 - 0.5) < 3.0 * batch_se(x1));
  CHECK(std::abs(m2 - 0.5) < 3.0 * batch_se(x2));
  // Standardized product has mean equal to the correlation.
  double s1 = 0.0;
  double s2 = 0.0;
  for (std::size_t n = 0; n < x1.size(); ++n) {
    s1 += (x1[n] - m1) * (x1[n] - m1) / static_cast<double>(x1.size());
    s2 += (x2[n] - m2) * (x2[n] - m2) / static_cast<double>(x2.size());
  }
  double corr = 0.0;
  for (std::size_t n = 0; n < x1.size(); ++n) {
    prod.push_back((x1[n] - m1) * (x2[n] - m2) / std::sqrt(s1 * s2));
    corr += prod.back() / static_cast<double>(x1.size());
  }
  CHECK(std::abs(corr) < 3.0 * batch_se(prod));
}
