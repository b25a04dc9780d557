// The finite-N Wright-Fisher chain: selection by haplotype viability, then
// mutation, then independent multinomial resampling at each locus.
#pragma once

#include "wfsim/fitness.hpp"
#include "wfsim/random.hpp"
#include "wfsim/trajectory.hpp"

#include <cstdint>
#include <span>

namespace wfsim {

class ChainParams {
 public:
  const ValidatedModel& model() const noexcept { return model_; }
  const LocusLayout& layout() const noexcept { return model_.layout(); }
  std::int64_t population_size() const noexcept { return population_size_; }

  // Per-generation transition probabilities upsilon_lk (source l, target k)
  // with the diagonal set to 1 - sum_{k != l} upsilon_lk.
  const Matrix& mutation_probabilities(std::size_t locus) const { return upsilon_.at(locus); }

  // v = 1 + (m - 1)/N, applied to haplotype or mean fitness alike.
  double viability(double fitness) const noexcept {
    return 1.0 + (fitness - 1.0) / static_cast<double>(population_size_);
  }

  // Smallest haplotype viability: exact when the haplotypes can be
  // enumerated, a lower bound otherwise.
  double min_viability() const noexcept { return min_viability_; }

 private:
  ChainParams(ValidatedModel model, std::int64_t population_size) : model_(std::move(model)), population_size_(population_size) {}
  friend ChainParams chain_params_from_diffusion(const ValidatedModel& model, std::int64_t population_size);

  ValidatedModel model_;
  std::int64_t population_size_;
  std::vector<Matrix> upsilon_;
  double min_viability_ = 1.0;
};

// upsilon = u / N and v_sigma = 1 + (m_sigma - 1)/N. Throws PopulationTooSmall
// when a source allele's mutation mass exceeds 1 or a viability is <= 0.
ChainParams chain_params_from_diffusion(const ValidatedModel& model, std::int64_t population_size);

// q_k = x_k vbar_k / vbar per locus (full coordinates).
StackedVector selection_probabilities(const ChainParams& params, const FrequencyState& x);

// p_k = sum_l upsilon_lk q_l per locus (full coordinates).
StackedVector sampling_probabilities(const ChainParams& params, const FrequencyState& x);

// Draws counts ~ Multinomial(n, p) by sequential binomials.
void sample_multinomial(std::int64_t n, std::span<const double> p, Rng& rng, std::span<std::int64_t> counts);

OccupancyState step_chain(const ChainParams& params, const OccupancyState& state, Rng& rng);

// Records every `thin` generations at times n/N.
Trajectory simulate_chain(const ChainParams& params, const OccupancyState& init, std::int64_t generations,
                          std::int64_t thin, Rng& rng);

// Nearest occupancy to x on the j/N lattice (largest remainder per locus).
OccupancyState nearest_occupancy(const FrequencyState& x, std::int64_t population_size);

}  // namespace wfsim
