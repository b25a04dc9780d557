// Haplotype fitness under pairwise epistasis, mean fitnesses, the selection
// potential V and the drift of the diffusion limit.
//
// All drift vectors are in reduced coordinates (M_i - 1 per locus).
#pragma once

#include "wfsim/model.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace wfsim {

// One 0-based allele index per locus.
using Haplotype = std::vector<int>;

// Enumeration guard for the brute-force oracles.
inline constexpr std::size_t kMaxEnumeratedHaplotypes = 1'000'000;

// Calls visit(sigma) for every haplotype in lexicographic order. Throws
// ModelTooLarge above kMaxEnumeratedHaplotypes.
void for_each_haplotype(const LocusLayout& layout, const std::function<void(const Haplotype&)>& visit);

// m_sigma = 1 + sum_r h_r(sigma_r) + sum_{r<s} J_rs(sigma_r, sigma_s).
double haplotype_fitness(const ValidatedModel& model, const Haplotype& sigma);

// prod_i x^(i)_{sigma_i}.
double haplotype_frequency(const FrequencyState& x, const Haplotype& sigma);

// delta_{sigma_i,k} prod_{j != i} x^(j)_{sigma_j}.
double conditional_haplotype_frequency(const FrequencyState& x, const Haplotype& sigma, std::size_t locus,
                                       int allele);

double mean_fitness(const ValidatedModel& model, const FrequencyState& x);
double mean_fitness_bruteforce(const ValidatedModel& model, const FrequencyState& x);

// Mean fitness of the carriers of allele k at locus i.
double allele_mean_fitness(const ValidatedModel& model, const FrequencyState& x, std::size_t locus, int allele);
double allele_mean_fitness_bruteforce(const ValidatedModel& model, const FrequencyState& x, std::size_t locus,
                                      int allele);

// V = xbar^T h + 1/2 xbar^T A xbar on the augmented vector.
double potential(const ValidatedModel& model, const FrequencyState& x);

// grad W = h + A xbar on the augmented vector.
Vector potential_gradient_full(const ValidatedModel& model, const FrequencyState& x);

// Per locus: component l minus component M_i of grad W, l < M_i - 1.
DriftVector potential_gradient(const ValidatedModel& model, const FrequencyState& x);

// Applies the per-locus block D^(i) (d_kk = x_k(1 - x_k), d_kl = -x_k x_l) to
// a reduced vector.
DriftVector apply_diffusion(const FrequencyState& x, const DriftVector& v);

// D grad V. The primary form.
DriftVector selection_drift(const ValidatedModel& model, const FrequencyState& x);

// x_k (mbar_k - mbar), from the closed-form mean fitnesses.
DriftVector selection_drift_fitness(const ValidatedModel& model, const FrequencyState& x);

// Parent independent: u_k - ubar x_k. Parent dependent:
// sum_{l != k} (u_lk x_l - u_kl x_k).
DriftVector mutation_drift(const ValidatedModel& model, const FrequencyState& x);

// Same, always from the rate matrices (both modes).
DriftVector mutation_drift_general(const ValidatedModel& model, const FrequencyState& x);

DriftVector full_drift(const ValidatedModel& model, const FrequencyState& x);

}  // namespace wfsim
