// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "oracles.hpp"
#include "test_support.hpp"
#include "wfsim/chain.hpp"
#include "wfsim/diffusion.hpp"
#include "wfsim/fitness.hpp"
#include "wfsim/harness.hpp"
#include "wfsim/stationary.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

using namespace wfsim;
using wfsim::testing::biallelic_state;
using wfsim::testing::kummer_oracle;
using wfsim::testing::random_interior_state;
using wfsim::testing::random_model_spec;
using wfsim::testing::RandomModelOptions;
using wfsim::testing::two_locus_spec;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buffer[512];
  std::snprintf(buffer, sizeof buffer, pattern, args...);
  return buffer;
}

// 1. Selection drift: D grad V against x_k (mbar_k - mbar).
Outcome drift_consistency() {
  Rng rng = make_rng(101);
  double worst = 0.0;
  for (int m = 0; m < 200; ++m) {
    const auto model = validate_model(random_model_spec(rng));
    for (int p = 0; p < 20; ++p) {
      const auto x = random_interior_state(model.layout_ptr(), rng);
      const auto a = selection_drift(model, x);
      const auto b = selection_drift_fitness(model, x);
      for (std::size_t c = 0; c < a.size(); ++c) worst = std::max(worst, std::abs(a.values()[c] - b.values()[c]));
    }
  }
  return {worst <= 1e-12, fmt("200 models x 20 points, max |method1 - method2| = %.3g (tol 1e-12)", worst)};
}

// 2. Closed-form mean fitnesses against haplotype enumeration.
Outcome bruteforce_equivalence() {
  Rng rng = make_rng(102);
  RandomModelOptions opt;
  opt.max_loci = 6;
  opt.max_alleles = 5;
  opt.max_haplotypes = 10'000;
  double worst = 0.0;
  std::size_t largest = 0;
  for (int m = 0; m < 200; ++m) {
    const auto model = validate_model(random_model_spec(rng, opt));
    largest = std::max(largest, model.layout().num_haplotypes());
    for (int p = 0; p < 3; ++p) {
      const auto x = random_interior_state(model.layout_ptr(), rng);
      worst = std::max(worst, std::abs(mean_fitness(model, x) - mean_fitness_bruteforce(model, x)));
      for (std::size_t i = 0; i < model.num_loci(); ++i) {
        for (int k = 0; k < model.alleles(i); ++k) {
          worst = std::max(worst, std::abs(allele_mean_fitness(model, x, i, k) -
                                           allele_mean_fitness_bruteforce(model, x, i, k)));
        }
      }
    }
  }
  return {worst <= 1e-12, fmt("200 models (up to %zu haplotypes), max |closed - enumerated| = %.3g (tol 1e-12)",
                              largest, worst)};
}

// 3. Reduced gradient of V against central differences along e_l - e_M.
Outcome gradient_check() {
  Rng rng = make_rng(103);
  constexpr double step = 1e-6;
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const auto model = validate_model(random_model_spec(rng));
    const auto x = random_interior_state(model.layout_ptr(), rng);
    const auto g = potential_gradient(model, x);
    const auto& layout = model.layout();
    double error = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < layout.num_loci(); ++i) {
      const std::size_t off = layout.full_offset(i);
      const std::size_t last = off + static_cast<std::size_t>(layout.alleles(i)) - 1;
      for (std::size_t l = 0; l + 1 < static_cast<std::size_t>(layout.alleles(i)); ++l) {
        auto plus = x.augmented();
        auto minus = x.augmented();
        plus[off + l] += step;
        plus[last] -= step;
        minus[off + l] -= step;
        minus[last] += step;
        const double fd = (potential(model, FrequencyState(model.layout_ptr(), plus)) -
                           potential(model, FrequencyState(model.layout_ptr(), minus))) /
                          (2.0 * step);
        error = std::max(error, std::abs(fd - g(i, l)));
        scale = std::max(scale, std::abs(g(i, l)));
      }
    }
    worst = std::max(worst, error / scale);
  }
  return {worst < 1e-6, fmt("1000 (model, point) pairs, max ||fd - grad||_inf / ||grad||_inf = %.3g (tol 1e-6)", worst)};
}

// 4. D D^-1 = I at interior points, SingularAtBoundary on facets.
Outcome diffusion_inverse() {
  Rng rng = make_rng(104);
  ModelSpec spec;
  for (int m : {2, 3, 5}) spec.loci.push_back({m, std::vector<double>(m, 1.0), std::vector<double>(m, 0.0)});
  const auto model = validate_model(spec);
  double worst = 0.0;
  double smallest = 1.0;
  for (int n = 0; n < 2000; ++n) {
    const auto x = random_interior_state(model.layout_ptr(), rng, 1e-3);
    smallest = std::min(smallest, x.min_coordinate());
    for (std::size_t i = 0; i < model.num_loci(); ++i) {
      const Matrix d = diffusion_matrix(x, i);
      const Matrix product = d * diffusion_matrix_inverse(x, i);
      worst = std::max(worst, (product - Matrix::Identity(d.rows(), d.cols())).cwiseAbs().maxCoeff());
    }
  }
  int facets = 0;
  int raised = 0;
  for (std::size_t i = 0; i < model.num_loci(); ++i) {
    const auto m = static_cast<std::size_t>(model.alleles(i));
    for (std::size_t k = 0; k < m; ++k) {
      auto full = random_interior_state(model.layout_ptr(), rng).augmented();
      const std::size_t off = model.layout().full_offset(i);
      const std::size_t other = off + (k + 1) % m;
      full[other] += full[off + k];
      full[off + k] = 0.0;
      const FrequencyState x(model.layout_ptr(), full);
      ++facets;
      try {
        diffusion_matrix_inverse(x, i);
      } catch (const Error& e) {
        raised += e.code() == ErrorCode::SingularAtBoundary;
      }
    }
  }
  return {worst <= 1e-10 && raised == facets,
          fmt("M in {2,3,5}, 2000 points (min coord %.2g), max |D D^-1 - I| = %.3g (tol 1e-10); "
              "SingularAtBoundary on %d/%d facets",
              smallest, worst, raised, facets)};
}

// 5. Kummer series against e^z and against the integral representation.
Outcome kummer_check() {
  double exp_worst = 0.0;
  for (int n = -500; n <= 500; ++n) {
    const double z = n / 100.0;
    exp_worst = std::max(exp_worst, std::abs(kummer_M(1, 1, z) / std::exp(z) - 1.0));
  }
  double grid_worst = 0.0;
  int points = 0;
  for (double a : {0.5, 1.0, 2.0}) {
    for (double b : {0.5, 1.0, 2.0}) {
      for (int n = -16; n <= 16; ++n) {
        const double z = n / 4.0;
        const double oracle = kummer_oracle(a, b, z);
        grid_worst = std::max(grid_worst, std::abs(kummer_M(a, b, z) - oracle) / std::max(1.0, std::abs(oracle)));
        ++points;
      }
    }
  }
  return {exp_worst <= 1e-12 && grid_worst <= 1e-8,
          fmt("max rel |M(1,1,z)/e^z - 1| on [-5,5] = %.3g (tol 1e-12); %d grid points vs quadrature, max err %.3g "
              "(tol 1e-8)",
              exp_worst, points, grid_worst)};
}

// 6. Closed form, quadrature and Monte Carlo normalizers.
Outcome normalizer_triangle() {
  double quad_worst = 0.0;
  double z_worst = 0.0;
  double exact_worst = 0.0;
  int zero_variance = 0;
  for (double h : {-1.0, 0.0, 1.0, 3.0}) {
    for (double u : {0.75, 1.0, 2.0}) {
      const auto model = validate_model(two_locus_spec(h, u));
      const double closed = normalizer_closed_2x2(model);
      const double quad = normalizer_quadrature(model).value;
      quad_worst = std::max(quad_worst, std::abs(quad - closed) / closed);
      const auto mc = normalizer_mc(model, 1'000'000, 600 + static_cast<std::uint64_t>(h * 10 + u * 4));
      if (mc.standard_error > 0.0) {
        z_worst = std::max(z_worst, std::abs(mc.value - closed) / mc.standard_error);
      } else {
        // V = 0: every importance weight is 1 and the estimate must be exact.
        ++zero_variance;
        exact_worst = std::max(exact_worst, std::abs(mc.value - closed) / closed);
      }
    }
  }
  return {quad_worst < 1e-6 && z_worst <= 3.0 && exact_worst <= 1e-12,
          fmt("12 (h,u) cases: max rel |quad - closed| = %.3g (tol 1e-6); max |MC - closed| = %.2f SE (tol 3); "
              "%d zero-variance cases, max rel err %.3g",
              quad_worst, z_worst, zero_variance, exact_worst)};
}

// 7. Zero probability flow of the stationary density.
Outcome zero_flow() {
  Rng rng = make_rng(107);
  double worst = 0.0;
  for (int m = 0; m < 200; ++m) {
    const auto model = validate_model(random_model_spec(rng));
    for (int p = 0; p < 20; ++p) {
      const auto x = random_interior_state(model.layout_ptr(), rng);
      const DriftVector residual = flow_residual(model, x);
      for (double r : residual.values()) worst = std::max(worst, std::abs(r));
    }
  }
  return {worst < 1e-10, fmt("200 models x 20 points, max |J|/P = %.3g (tol 1e-10)", worst)};
}

// 8. Decay of the moment errors with N at points of the 1/100 lattice.
Outcome moment_decay() {
  Rng rng = make_rng(108);
  const std::vector<std::int64_t> sizes{100, 1000, 10000, 100000};
  const std::vector<std::int64_t> shifted{1000, 10000, 100000, 1000000};
  double worst = 0.0;
  double worst_shifted = 0.0;
  std::size_t slopes = 0;
  std::size_t outside = 0;
  std::size_t zero = 0;
  bool unexplained_gap = false;
  for (int m = 0; m < 20; ++m) {
    const auto model = validate_model(random_model_spec(rng));
    std::vector<double> full;
    for (std::size_t i = 0; i < model.num_loci(); ++i) {
      const int alleles = model.alleles(i);
      std::vector<int> counts(static_cast<std::size_t>(alleles), 5);
      std::uniform_int_distribution<int> pick(0, alleles - 1);
      for (int r = 5 * alleles; r < 100; ++r) ++counts[static_cast<std::size_t>(pick(rng))];
      for (int c : counts) full.push_back(c / 100.0);
    }
    const FrequencyState x(model.layout_ptr(), full);
    const auto report = moment_report(model, x, sizes);
    for (const auto& [quantity, slope] : report.slopes) {
      if (slope) {
        ++slopes;
        worst = std::max(worst, std::abs(*slope + 1.0));
        outside += std::abs(*slope + 1.0) > 0.05;
        continue;
      }
      // No slope only when the error vanishes identically.
      for (const auto& row : report.rows) {
        if (row.quantity == quantity && row.abs_error > 1e-15) unexplained_gap = true;
      }
      ++zero;
    }
    for (const auto& [quantity, slope] : moment_report(model, x, shifted).slopes) {
      if (slope) worst_shifted = std::max(worst_shifted, std::abs(*slope + 1.0));
    }
  }
  return {worst <= 0.05 && !unexplained_gap,
          fmt("20 models, %zu log-log slopes over N = 1e2..1e5, max |slope + 1| = %.3g (tol 0.05), %zu outside; "
              "%zu identically zero; over N = 1e3..1e6 max |slope + 1| = %.3g",
              slopes, worst, outside, zero, worst_shifted)};
}

Trajectory stationary_run(const ValidatedModel& model, std::uint64_t seed) {
  constexpr double dt = 1e-3;
  constexpr double t_end = 2e4;
  constexpr std::int64_t thin = 200;  // 10^5 samples
  Rng rng = make_rng(seed);
  Trajectory t = simulate_sde(model, biallelic_state(model.layout_ptr(), {0.5, 0.5}), t_end, dt, thin, rng);
  // Drop the initial condition.
  t.times.erase(t.times.begin());
  t.states.erase(t.states.begin());
  return t;
}

// 9. Histogram of a long SDE run against the analytic stationary law.
Outcome stationary_law() {
  const auto coupled = validate_model(two_locus_spec(1.0, 1.0));
  const auto run = stationary_run(coupled, 109);
  const auto density = StationaryDensity::create(coupled);
  const auto report = stationarity_test(density, run, 30);
  const double corr_gap = std::abs(*report.sample_correlation - *report.analytic_correlation);

  const auto neutral = validate_model(two_locus_spec(0.0, 1.0));
  const auto neutral_run = stationary_run(neutral, 110);
  std::vector<double> beta22(2001);
  for (std::size_t e = 0; e < beta22.size(); ++e) {
    const double p = static_cast<double>(e) / 2000.0;
    beta22[e] = p * p * (3.0 - 2.0 * p);
  }
  double ks = 0.0;
  std::vector<std::vector<double>> first(2);
  for (const auto& s : neutral_run.states) {
    first[0].push_back(s[0]);
    first[1].push_back(s[2]);
  }
  for (const auto& f : first) ks = std::max(ks, ks_statistic(f, beta22));
  const double n = static_cast<double>(first[0].size());
  double m0 = 0.0;
  double m1 = 0.0;
  for (std::size_t s = 0; s < first[0].size(); ++s) {
    m0 += first[0][s] / n;
    m1 += first[1][s] / n;
  }
  double c00 = 0.0;
  double c11 = 0.0;
  double c01 = 0.0;
  for (std::size_t s = 0; s < first[0].size(); ++s) {
    c00 += (first[0][s] - m0) * (first[0][s] - m0);
    c11 += (first[1][s] - m1) * (first[1][s] - m1);
    c01 += (first[0][s] - m0) * (first[1][s] - m1);
  }
  const double neutral_corr = c01 / std::sqrt(c00 * c11);

  const bool pass = report.total_variation < 0.05 && corr_gap <= 0.02 && ks < 0.02 && std::abs(neutral_corr) < 0.02;
  return {pass, fmt("h=1: %zu samples (ESS %.0f), TV = %.4f (tol 0.05), corr %.4f vs analytic %.4f (tol 0.02); "
                    "h=0: max KS vs Beta(2,2) = %.4f (tol 0.02), corr = %.4f (tol 0.02)",
                    report.samples, report.effective_sample_size, report.total_variation,
                    *report.sample_correlation, *report.analytic_correlation, ks, neutral_corr)};
}

// 10. Chain at N = 500 against the SDE at diffusion time 1.
Outcome chain_vs_sde() {
  const auto model = validate_model(two_locus_spec(1.0, 1.0));
  const auto x0 = biallelic_state(model.layout_ptr(), {0.5, 0.5});
  const auto cmp = compare_chain_and_sde(model, x0, 500, 1.0, 1e-3, 2000, 110);
  double worst_mean = 0.0;
  double worst_var = 0.0;
  for (double z : cmp.mean_z) worst_mean = std::max(worst_mean, z);
  for (double z : cmp.variance_z) worst_var = std::max(worst_var, z);
  return {worst_mean <= 3.0 && worst_var <= 3.0,
          fmt("2000 replicates, max |mean diff| = %.2f SE, max |variance diff| = %.2f SE (tol 3)", worst_mean,
              worst_var)};
}

constexpr double kNoBudget = std::numeric_limits<double>::infinity();

struct Criterion {
  int number;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "selection drift, two routes", 10, drift_consistency},
      {2, "mean fitness vs enumeration", 30, bruteforce_equivalence},
      {3, "potential gradient vs finite differences", kNoBudget, gradient_check},
      {4, "diffusion matrix inverse", kNoBudget, diffusion_inverse},
      {5, "Kummer function", kNoBudget, kummer_check},
      {6, "normalizer triangle", 120, normalizer_triangle},
      {7, "zero probability flow", 60, zero_flow},
      {8, "moment error decay", 60, moment_decay},
      {9, "stationary law from the SDE", 300, stationary_law},
      {10, "chain vs diffusion at t = 1", 300, chain_vs_sde},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = seconds < c.budget_seconds;
    const bool pass = outcome.pass && in_budget;
    failures += !pass;
    const std::string budget = c.budget_seconds == kNoBudget ? "" : fmt(", budget %.0f s", c.budget_seconds);
    std::printf("%s %2d %s: %s [%.1f s%s%s]\n", pass ? "PASS" : "FAIL", c.number, c.name, outcome.detail.c_str(),
                seconds, budget.c_str(), in_budget ? "" : " EXCEEDED");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
