#include "doctest.h"
#include "test_support.hpp"
#include "wfsim/fitness.hpp"

#include <cmath>

using namespace wfsim;
using wfsim::testing::biallelic_state;
using wfsim::testing::random_interior_state;
using wfsim::testing::random_model_spec;
using wfsim::testing::two_locus_spec;

TEST_CASE("haplotype fitness") {
  CHECK(haplotype_fitness(validate_model(two_locus_spec(0.0, 0.5)), {1, 0}) == 1.0);
  auto spec = two_locus_spec(0.0, 0.5);
  spec.loci[0].fields[0] = 0.2;
  CHECK(haplotype_fitness(validate_model(spec), {0, 1}) == doctest::Approx(1.2).epsilon(1e-15));
  const auto model = validate_model(two_locus_spec(1.0, 0.5));
  CHECK(haplotype_fitness(model, {0, 0}) == 2.0);
  CHECK(haplotype_fitness(model, {1, 0}) == 1.0);
  CHECK_THROWS_AS(haplotype_fitness(model, {2, 0}), Error);
  CHECK_THROWS_AS(haplotype_fitness(model, {0}), Error);
}

TEST_CASE("haplotype frequencies") {
  auto layout = make_layout({2, 2});
  const FrequencyState x(layout, {0.7, 0.3, 0.4, 0.6});
  CHECK(haplotype_frequency(x, {0, 1}) == doctest::Approx(0.42).epsilon(1e-15));
  double total = 0.0;
  for_each_haplotype(*layout, [&](const Haplotype& s) { total += haplotype_frequency(x, s); });
  CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
  const FrequencyState edge(layout, {0.0, 1.0, 0.4, 0.6});
  CHECK(haplotype_frequency(edge, {0, 1}) == 0.0);

  CHECK(conditional_haplotype_frequency(x, {1, 1}, 0, 0) == 0.0);
  CHECK(conditional_haplotype_frequency(x, {0, 1}, 0, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(conditional_haplotype_frequency(edge, {0, 1}, 0, 0) == 0.0);

  Rng rng = make_rng(5);
  auto big = make_layout({3, 2, 4});
  const auto y = random_interior_state(big, rng);
  for (int k = 0; k < 4; ++k) {
    double s = 0.0;
    for_each_haplotype(*big, [&](const Haplotype& h) { s += conditional_haplotype_frequency(y, h, 2, k); });
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("mean fitnesses, closed form and enumeration") {
  const auto zero = validate_model(two_locus_spec(0.0, 0.5));
  auto layout = zero.layout_ptr();
  const auto half = biallelic_state(layout, {0.5, 0.5});
  CHECK(mean_fitness(zero, half) == 1.0);
  CHECK(mean_fitness_bruteforce(zero, half) == 1.0);
  for (int k = 0; k < 2; ++k) CHECK(allele_mean_fitness(zero, half, 1, k) == 1.0);

  const auto model = validate_model(two_locus_spec(1.0, 0.5));
  CHECK(mean_fitness(model, half) == doctest::Approx(1.25).epsilon(1e-15));
  CHECK(mean_fitness_bruteforce(model, half) == doctest::Approx(1.25).epsilon(1e-15));
  CHECK(allele_mean_fitness(model, half, 0, 0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(allele_mean_fitness_bruteforce(model, half, 0, 0) == doctest::Approx(1.5).epsilon(1e-15));

  ModelSpec single;
  single.loci.push_back({2, {1, 1}, {0.3, -0.2}});
  const auto one = validate_model(single);
  const FrequencyState p(one.layout_ptr(), {0.35, 0.65});
  CHECK(mean_fitness_bruteforce(one, p) == doctest::Approx(1 + 0.3 * 0.35 - 0.2 * 0.65).epsilon(1e-15));

  Rng rng = make_rng(17);
  for (int n = 0; n < 100; ++n) {
    const auto m = validate_model(random_model_spec(rng, {.max_loci = 4, .max_alleles = 3}));
    const auto x = random_interior_state(m.layout_ptr(), rng);
    CHECK(std::abs(mean_fitness(m, x) - mean_fitness_bruteforce(m, x)) < 1e-12);
    for (std::size_t i = 0; i < m.num_loci(); ++i) {
      for (int k = 0; k < m.alleles(i); ++k) {
        CHECK(std::abs(allele_mean_fitness(m, x, i, k) - allele_mean_fitness_bruteforce(m, x, i, k)) < 1e-12);
      }
    }
  }
}

TEST_CASE("enumeration guard") {
  ModelSpec spec;
  for (int i = 0; i < 21; ++i) spec.loci.push_back({2, {1, 1}, {0, 0}});
  const auto model = validate_model(spec);
  std::vector<double> full;
  for (int i = 0; i < 21; ++i) full.insert(full.end(), {0.5, 0.5});
  const FrequencyState x(model.layout_ptr(), full);
  try {
    mean_fitness_bruteforce(model, x);
    FAIL("expected ModelTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ModelTooLarge);
  }
}

TEST_CASE("potential") {
  const auto model = validate_model(two_locus_spec(2.0, 0.5));
  CHECK(potential(model, biallelic_state(model.layout_ptr(), {0.5, 0.5})) == doctest::Approx(0.5).epsilon(1e-15));
  const auto zero = validate_model(two_locus_spec(0.0, 0.5));
  CHECK(potential(zero, biallelic_state(zero.layout_ptr(), {0.3, 0.9})) == 0.0);

  // Complete four-locus graph, J_ir(1,1) = h_ir: V is the sum of h_ir x^(i) x^(r).
  const double h[4][4] = {{0, 0.3, -1.1, 0.7}, {0, 0, 0.9, 2.0}, {0, 0, 0, -0.4}, {0, 0, 0, 0}};
  ModelSpec spec;
  for (int i = 0; i < 4; ++i) spec.loci.push_back({2, {0.5, 0.5}, {0, 0}});
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t r = i + 1; r < 4; ++r) {
      Matrix j = Matrix::Zero(2, 2);
      j(0, 0) = h[i][r];
      spec.couplings.push_back({i, r, j});
    }
  }
  const auto four = validate_model(spec);
  Rng rng = make_rng(2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int n = 0; n < 20; ++n) {
    std::vector<double> p(4);
    for (double& v : p) v = unit(rng);
    double expected = 0.0;
    for (int i = 0; i < 4; ++i) {
      for (int r = i + 1; r < 4; ++r) expected += h[i][r] * p[i] * p[r];
    }
    CHECK(potential(four, biallelic_state(four.layout_ptr(), p)) == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("potential gradient") {
  const double h = 1.7;
  const auto model = validate_model(two_locus_spec(h, 0.5));
  const auto x = biallelic_state(model.layout_ptr(), {0.3, 0.8});
  const auto g = potential_gradient(model, x);
  CHECK(g(0, 0) == doctest::Approx(h * 0.8).epsilon(1e-15));
  CHECK(g(1, 0) == doctest::Approx(h * 0.3).epsilon(1e-15));
  const auto zero = validate_model(two_locus_spec(0.0, 0.5));
  const auto g0 = potential_gradient(zero, x);
  for (double v : g0.values()) CHECK(v == 0.0);

  // Central differences along reduced coordinates (last coordinate absorbs the change).
  Rng rng = make_rng(23);
  for (int n = 0; n < 50; ++n) {
    const auto m = validate_model(random_model_spec(rng));
    const auto y = random_interior_state(m.layout_ptr(), rng, 0.01);
    const auto grad = potential_gradient(m, y);
    const auto base = y.reduced();
    for (std::size_t c = 0; c < base.size(); ++c) {
      const double step = 1e-6;
      auto up = base;
      auto down = base;
      up[c] += step;
      down[c] -= step;
      const double fd = (potential(m, FrequencyState::from_reduced(m.layout_ptr(), up)) -
                         potential(m, FrequencyState::from_reduced(m.layout_ptr(), down))) /
                        (2 * step);
      CHECK(std::abs(fd - grad.values()[c]) <= 1e-6 * std::max(1.0, std::abs(grad.values()[c])));
    }
  }
}

TEST_CASE("selection drift") {
  const auto model = validate_model(two_locus_spec(2.0, 0.5));
  const auto half = biallelic_state(model.layout_ptr(), {0.5, 0.5});
  const auto g = selection_drift(model, half);
  CHECK(g(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(g(1, 0) == doctest::Approx(0.25).epsilon(1e-15));

  const auto unit = validate_model(two_locus_spec(1.0, 0.5));
  CHECK(selection_drift(unit, half)(0, 0) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(selection_drift_fitness(unit, half)(0, 0) == doctest::Approx(0.125).epsilon(1e-15));

  const auto boundary = biallelic_state(model.layout_ptr(), {1.0, 0.3});
  CHECK(selection_drift(model, boundary)(0, 0) == 0.0);
  CHECK(selection_drift_fitness(model, boundary)(0, 0) == 0.0);

  ModelSpec three;
  three.loci.push_back({3, {1, 1, 1}, {0.5, -0.3, 0.2}});
  three.loci.push_back({2, {1, 1}, {0, 0}});
  Matrix j(3, 2);
  j << 0.4, -0.1, 0.0, 0.8, 1.2, 0.3;
  three.couplings.push_back({0, 1, j});
  const auto m3 = validate_model(three);
  const FrequencyState edge(m3.layout_ptr(), {0.0, 0.6, 0.4, 0.5, 0.5});
  CHECK(selection_drift(m3, edge)(0, 0) == 0.0);
}

TEST_CASE("selection drift routes agree and conserve mass") {
  Rng rng = make_rng(31);
  for (int n = 0; n < 50; ++n) {
    const auto m = validate_model(random_model_spec(rng));
    const auto x = random_interior_state(m.layout_ptr(), rng);
    const auto d1 = selection_drift(m, x);
    const auto d2 = selection_drift_fitness(m, x);
    for (std::size_t c = 0; c < d1.size(); ++c) CHECK(std::abs(d1.values()[c] - d2.values()[c]) < 1e-12);
    const double mbar = mean_fitness(m, x);
    for (std::size_t i = 0; i < m.num_loci(); ++i) {
      double s = 0.0;
      for (int k = 0; k < m.alleles(i); ++k) s += x(i, k) * (allele_mean_fitness(m, x, i, k) - mbar);
      CHECK(std::abs(s) < 1e-12);
    }
    // sum_l d_kl V'_l = x_k (V'_k - sum_l x_l V'_l)
    const auto grad = potential_gradient(m, x);
    for (std::size_t i = 0; i < m.num_loci(); ++i) {
      const auto gi = grad.locus(i);
      double avg = 0.0;
      for (std::size_t l = 0; l < gi.size(); ++l) avg += x(i, l) * gi[l];
      for (std::size_t k = 0; k < gi.size(); ++k) CHECK(std::abs(d1(i, k) - x(i, k) * (gi[k] - avg)) < 1e-12);
    }
  }
}

TEST_CASE("mutation drift") {
  ModelSpec spec;
  spec.loci.push_back({2, {0.5, 0.5}, {0, 0}});
  auto model = validate_model(spec);
  CHECK(mutation_drift(model, FrequencyState(model.layout_ptr(), {0.5, 0.5}))(0, 0) == 0.0);
  spec.loci[0].mutation = {1.0, 2.0};
  model = validate_model(spec);
  CHECK(mutation_drift(model, FrequencyState(model.layout_ptr(), {0.25, 0.75}))(0, 0) == 0.25);

  Rng rng = make_rng(41);
  for (int n = 0; n < 50; ++n) {
    const auto m = validate_model(random_model_spec(rng));
    const auto x = random_interior_state(m.layout_ptr(), rng);
    const auto a = mutation_drift(m, x);
    const auto b = mutation_drift_general(m, x);
    for (std::size_t c = 0; c < a.size(); ++c) CHECK(std::abs(a.values()[c] - b.values()[c]) < 1e-15);
  }
}

TEST_CASE("full drift") {
  const auto model = validate_model(two_locus_spec(1.0, 0.5));
  const auto d = full_drift(model, biallelic_state(model.layout_ptr(), {0.5, 0.5}));
  CHECK(d(0, 0) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(d(1, 0) == doctest::Approx(0.125).epsilon(1e-15));

  // dX = u1 - (u1 + u2) X + h X (1 - X) Y
  const double h = -0.8;
  const auto m = validate_model(two_locus_spec(h, 0.3, 1.1, 0.7, 0.4));
  Rng rng = make_rng(9);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int n = 0; n < 20; ++n) {
    const double x = unit(rng);
    const double y = unit(rng);
    const auto drift = full_drift(m, biallelic_state(m.layout_ptr(), {x, y}));
    CHECK(drift(0, 0) == doctest::Approx(0.3 - 1.4 * x + h * x * (1 - x) * y).epsilon(1e-13));
    CHECK(drift(1, 0) == doctest::Approx(0.7 - 1.1 * y + h * y * (1 - y) * x).epsilon(1e-13));
  }
  ModelSpec none;
  none.loci.push_back({2, {1e-300, 1e-300}, {0, 0}});
  const auto quiet = validate_model(none);
  CHECK(std::abs(full_drift(quiet, FrequencyState(quiet.layout_ptr(), {0.3, 0.7}))(0, 0)) < 1e-299);
}
