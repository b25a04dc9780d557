// Verification harness: exact conditional moments of one chain generation
// against their diffusion limits, and Monte Carlo stationarity checks of
// simulated samples against the analytic stationary density.
#pragma once

#include "wfsim/chain.hpp"
#include "wfsim/stationary.hpp"
#include "wfsim/trajectory.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace wfsim {

struct LatticePoint {
  OccupancyState occupancy;
  FrequencyState x;           // occupancy / N
  double snap_distance = 0.0;  // max |x_snapped - x_requested|
};

LatticePoint snap_to_lattice(const FrequencyState& x, std::int64_t population_size);

// mu^(N) = N (p_k - x_k) in reduced coordinates, x snapped to the j/N lattice.
DriftVector exact_increment_mean(const ChainParams& params, const FrequencyState& x);
DriftVector exact_increment_mean(const ValidatedModel& model, const FrequencyState& x, std::int64_t population_size);

// N E[(dX)(dX)^T] over all reduced coordinates: within a locus
// d_kk = p_k(1 - p_k) + N (p_k - x_k)^2 and d_kl = -p_k p_l + (p_k - x_k) N (p_l - x_l);
// across loci mu_k mu_l / N.
Matrix exact_increment_cov(const ChainParams& params, const FrequencyState& x);
Matrix exact_increment_cov(const ValidatedModel& model, const FrequencyState& x, std::int64_t population_size);

// N E[(dX_k)^4] from the binomial central moments of Y_k ~ Binomial(N, p_k).
double exact_fourth_moment(const ChainParams& params, const FrequencyState& x, std::size_t locus, int allele);
double exact_fourth_moment(const ValidatedModel& model, const FrequencyState& x, std::int64_t population_size,
                           std::size_t locus, int allele);

struct MomentRow {
  std::int64_t population_size = 0;
  std::string quantity;  // "mu[i,k]", "d[i,k;j,l]" or "e[i,k]" (1-based)
  double exact = 0.0;
  double limit = 0.0;
  double abs_error = 0.0;
  double snap_distance = 0.0;
};

struct MomentReport {
  std::vector<MomentRow> rows;
  // Least-squares slope of log abs_error against log N per quantity; absent
  // when some error is zero.
  std::map<std::string, std::optional<double>> slopes;
};

// The state is snapped independently for each N.
MomentReport moment_report(const ValidatedModel& model, const FrequencyState& x,
                           const std::vector<std::int64_t>& population_sizes);

void write_moment_csv(std::ostream& out, const MomentReport& report);

// Slope of log y against log x by least squares.
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

// Integrated autocorrelation time with Sokal's adaptive window (c = 5).
double integrated_autocorrelation_time(const std::vector<double>& series);

// Probability of each cell of the bins^L grid over the first coordinates of
// biallelic loci, by per-cell Gauss-Legendre quadrature of the normalized
// density. Cell (b_1, ..., b_L) is at index sum b_i bins^(L - 1 - i).
std::vector<double> cell_probabilities(const StationaryDensity& density, int bins, int nodes_per_cell = 8);

// Marginal CDF of locus i's first coordinate on a uniform grid of `cells`
// cells; returns the cells + 1 values at the cell edges.
std::vector<double> marginal_cdf(const StationaryDensity& density, std::size_t locus, int cells = 2000);

// corr(p_a, p_b) under the stationary density.
double analytic_correlation(const StationaryDensity& density, std::size_t a, std::size_t b);

double ks_statistic(std::vector<double> samples, const std::vector<double>& cdf_at_edges);

struct StationarityReport {
  std::size_t samples = 0;
  int bins = 0;
  double total_variation = 0.0;
  double analytic_mass = 0.0;  // sum of cell probabilities (should be ~1)
  std::vector<double> ks;      // per locus
  std::optional<double> sample_correlation;    // loci 1 and 2
  std::optional<double> analytic_correlation;  // loci 1 and 2
  double autocorrelation_time = 1.0;           // first coordinate
  double effective_sample_size = 0.0;
  NormalizerMethod normalizer = NormalizerMethod::ClosedForm;
};

// Bins the first coordinate of every (biallelic) locus. UnsupportedModelShape
// for loci with more than two alleles or L > 3; EmptyInput without samples.
StationarityReport stationarity_test(const StationaryDensity& density, const Trajectory& samples, int bins);

std::string to_json(const StationarityReport& report);

struct CoordinateMoments {
  std::vector<double> mean;
  std::vector<double> variance;
  std::vector<double> mean_se;
  std::vector<double> variance_se;
};

// Sample mean/variance (and their standard errors) of each full coordinate.
CoordinateMoments coordinate_moments(const std::vector<std::vector<double>>& states);

struct ChainSdeComparison {
  CoordinateMoments chain;
  CoordinateMoments sde;
  // |difference| / combined standard error, per full coordinate.
  std::vector<double> mean_z;
  std::vector<double> variance_z;
};

// Runs `replicates` chain copies (population N, t * N generations) and SDE
// copies (step dt) from x0, with streams derived from seed.
ChainSdeComparison compare_chain_and_sde(const ValidatedModel& model, const FrequencyState& x0,
                                         std::int64_t population_size, double t, double dt, std::size_t replicates,
                                         std::uint64_t seed);

}  // namespace wfsim
