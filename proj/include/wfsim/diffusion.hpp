// The genetic-drift matrix D, its inverse and a square-root factor, and
// Euler-Maruyama integration of dX = (mu + D grad V) dt + D^{1/2} dW.
#pragma once

#include "wfsim/fitness.hpp"
#include "wfsim/random.hpp"
#include "wfsim/trajectory.hpp"

#include <cstddef>
#include <span>

namespace wfsim {

inline constexpr double kDefaultDt = 1e-3;

// (M_i - 1) x (M_i - 1) block: d_kk = x_k (1 - x_k), d_kl = -x_k x_l.
Matrix diffusion_matrix(const FrequencyState& x, std::size_t locus);
Matrix diffusion_matrix_block(std::span<const double> locus_frequencies);

// (1/x_l) delta_lk + 1/x_{M_i}. Throws SingularAtBoundary if any coordinate of
// the locus, including the last one, is <= 0.
Matrix diffusion_matrix_inverse(const FrequencyState& x, std::size_t locus);

// Lower-triangular B with B B^T = D; negative pivots from rounding become 0.
Matrix diffusion_matrix_factor(const FrequencyState& x, std::size_t locus);

// Clamps negative coordinates to 0 and renormalizes each locus. Returns the
// number of clamped coordinates. Throws NonFiniteState on NaN/inf or an
// all-zero locus.
std::size_t project_to_simplex(const LocusLayout& layout, std::span<double> full);

// One step with noise xi (one standard normal per reduced coordinate).
// Adds the number of projection clamps to *clamped when given.
FrequencyState em_step(const ValidatedModel& model, const FrequencyState& x, double dt, std::span<const double> xi,
                       std::size_t* clamped = nullptr);

FrequencyState em_step(const ValidatedModel& model, const FrequencyState& x, double dt, Rng& rng,
                       std::size_t* clamped = nullptr);

// Records every `thin` steps at times k dt; runs round(t_end / dt) steps.
Trajectory simulate_sde(const ValidatedModel& model, const FrequencyState& init, double t_end, double dt,
                        std::int64_t thin, Rng& rng);

}  // namespace wfsim
