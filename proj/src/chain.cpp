#include "wfsim/chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace wfsim {

namespace {

// Lower bound of m_sigma from per-term minima.
double fitness_lower_bound(const ValidatedModel& model) {
  double m = 1.0;
  for (std::size_t r = 0; r < model.num_loci(); ++r) {
    const auto h = model.fields(r);
    m += *std::min_element(h.begin(), h.end());
  }
  for (const auto& c : model.couplings()) m += c.values.minCoeff();
  return m;
}

double min_fitness(const ValidatedModel& model) {
  if (model.layout().num_haplotypes() > kMaxEnumeratedHaplotypes) return fitness_lower_bound(model);
  double m = std::numeric_limits<double>::infinity();
  for_each_haplotype(model.layout(), [&](const Haplotype& sigma) { m = std::min(m, haplotype_fitness(model, sigma)); });
  return m;
}

}  // namespace

ChainParams chain_params_from_diffusion(const ValidatedModel& model, std::int64_t population_size) {
  if (population_size < 1) throw Error(ErrorCode::PopulationTooSmall, "population size must be at least 1");
  ChainParams params(model, population_size);
  const auto n = static_cast<double>(population_size);
  for (std::size_t i = 0; i < model.num_loci(); ++i) {
    Matrix ups = model.mutation_matrix(i) / n;
    for (Eigen::Index l = 0; l < ups.rows(); ++l) {
      ups(l, l) = 0.0;
      const double mass = ups.row(l).sum();
      if (mass > 1.0) {
        throw Error(ErrorCode::PopulationTooSmall, "mutation probability mass " + std::to_string(mass) + " at locus " +
                                                       std::to_string(i + 1) + " exceeds 1; increase N");
      }
      ups(l, l) = 1.0 - mass;
    }
    params.upsilon_.push_back(std::move(ups));
  }
  params.min_viability_ = params.viability(min_fitness(model));
  if (!(params.min_viability_ > 0.0)) {
    throw Error(ErrorCode::PopulationTooSmall,
                "selection too strong for N = " + std::to_string(population_size) + ": a haplotype viability is <= 0");
  }
  return params;
}

StackedVector selection_probabilities(const ChainParams& params, const FrequencyState& x) {
  const ValidatedModel& model = params.model();
  const double vbar = params.viability(mean_fitness(model, x));
  StackedVector q(model.layout_ptr(), Coordinates::Full);
  for (std::size_t i = 0; i < model.num_loci(); ++i) {
    auto qi = q.locus(i);
    double sum = 0.0;
    for (std::size_t k = 0; k < qi.size(); ++k) {
      const double xk = x(i, k);
      qi[k] = xk == 0.0 ? 0.0 : xk * params.viability(allele_mean_fitness(model, x, i, static_cast<int>(k))) / vbar;
      sum += qi[k];
    }
    for (double& v : qi) v /= sum;
  }
  return q;
}

StackedVector sampling_probabilities(const ChainParams& params, const FrequencyState& x) {
  const StackedVector q = selection_probabilities(params, x);
  StackedVector p(params.model().layout_ptr(), Coordinates::Full);
  for (std::size_t i = 0; i < params.layout().num_loci(); ++i) {
    const Matrix& ups = params.mutation_probabilities(i);
    const auto qi = q.locus(i);
    auto pi = p.locus(i);
    for (std::size_t k = 0; k < pi.size(); ++k) {
      double s = 0.0;
      for (std::size_t l = 0; l < qi.size(); ++l) s += ups(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) * qi[l];
      pi[k] = std::clamp(s, 0.0, 1.0);
    }
  }
  return p;
}

void sample_multinomial(std::int64_t n, std::span<const double> p, Rng& rng, std::span<std::int64_t> counts) {
  std::int64_t remaining = n;
  double mass = 1.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (k + 1 == p.size()) {
      counts[k] = remaining;
      break;
    }
    if (remaining == 0 || p[k] <= 0.0) {
      counts[k] = 0;
    } else if (p[k] >= mass) {
      counts[k] = remaining;
    } else {
      std::binomial_distribution<std::int64_t> draw(remaining, p[k] / mass);
      counts[k] = draw(rng);
    }
    remaining -= counts[k];
    mass = std::max(0.0, mass - p[k]);
  }
}

OccupancyState step_chain(const ChainParams& params, const OccupancyState& state, Rng& rng) {
  const std::int64_t n = params.population_size();
  if (state.population_size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "occupancy population size differs from the chain's N");
  }
  const StackedVector p = sampling_probabilities(params, occupancy_to_frequency(state));
  std::vector<std::int64_t> counts(state.counts().size());
  const auto& layout = params.layout();
  for (std::size_t i = 0; i < layout.num_loci(); ++i) {
    std::span<std::int64_t> ci(counts.data() + layout.full_offset(i), static_cast<std::size_t>(layout.alleles(i)));
    sample_multinomial(n, p.locus(i), rng, ci);
  }
  return OccupancyState(state.layout_ptr(), n, std::move(counts));
}

Trajectory simulate_chain(const ChainParams& params, const OccupancyState& init, std::int64_t generations,
                          std::int64_t thin, Rng& rng) {
  if (generations < 0) throw Error(ErrorCode::InvalidArgument, "generations must be >= 0");
  if (thin < 1) throw Error(ErrorCode::InvalidArgument, "thin must be >= 1");
  Trajectory trajectory;
  trajectory.layout = init.layout_ptr();
  const auto n = static_cast<double>(params.population_size());
  OccupancyState state = init;
  trajectory.record(0.0, occupancy_to_frequency(state));
  for (std::int64_t g = 1; g <= generations; ++g) {
    state = step_chain(params, state, rng);
    if (g % thin == 0) trajectory.record(static_cast<double>(g) / n, occupancy_to_frequency(state));
  }
  return trajectory;
}

OccupancyState nearest_occupancy(const FrequencyState& x, std::int64_t population_size) {
  if (population_size < 1) throw Error(ErrorCode::InvalidArgument, "population size must be at least 1");
  const auto& layout = x.layout();
  const auto n = static_cast<double>(population_size);
  std::vector<std::int64_t> counts(layout.full_size());
  for (std::size_t i = 0; i < layout.num_loci(); ++i) {
    const auto xi = x.locus(i);
    const std::size_t off = layout.full_offset(i);
    std::vector<double> remainder(xi.size());
    std::int64_t assigned = 0;
    for (std::size_t k = 0; k < xi.size(); ++k) {
      const double scaled = xi[k] * n;
      counts[off + k] = static_cast<std::int64_t>(std::floor(scaled));
      remainder[k] = scaled - std::floor(scaled);
      assigned += counts[off + k];
    }
    std::vector<std::size_t> order(xi.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t r = 0; assigned < population_size; ++r, ++assigned) ++counts[off + order[r % order.size()]];
  }
  return OccupancyState(x.layout_ptr(), population_size, std::move(counts));
}

}  // namespace wfsim
