// The stationary density P(x) = pi(x) exp(2 V(x)) / Z, with pi the product
// of Dirichlet kernels prod x_l^(2 u_l - 1), its normalizer Z and the
// probability-flow check.
#pragma once

#include "wfsim/fitness.hpp"
#include "wfsim/random.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace wfsim {

// log Gamma(z) for z > 0; DomainError otherwise.
double log_gamma(double z);

// Confluent hypergeometric M(a, b, z) by its power series, with the Kummer
// transform for z < 0. Throws NoConvergence past 10^4 terms.
double kummer_M(double a, double b, double z);

// sum_i sum_l (2 u_l - 1) log x_l. -inf at a zero coordinate with a positive
// exponent; NonIntegrableEvaluation at a zero coordinate with a negative one.
double log_pi(const ValidatedModel& model, const FrequencyState& x);

// log pi(x) + 2 V(x).
double log_density_unnormalized(const ValidatedModel& model, const FrequencyState& x);

// log of prod_k Gamma(alpha_k) / Gamma(sum alpha).
double log_dirichlet_normalizer(std::span<const double> alpha);

// True for two biallelic loci, parent-independent mutation, zero fields and a
// coupling block whose only nonzero entry may be J_12(1,1).
bool is_two_locus_single_coupling(const ValidatedModel& model);

// Series over Kummer-type terms; UnsupportedModelShape unless
// is_two_locus_single_coupling(model).
double log_normalizer_closed_2x2(const ValidatedModel& model);
double normalizer_closed_2x2(const ValidatedModel& model);

struct MonteCarloEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  double log_value = 0.0;
  std::size_t samples = 0;
};

// Z = prod_i B(2 u^(i)) E[exp(2 V(x))] with x ~ prod_i Dirichlet(2 u^(i)).
// Samples are drawn in blocks with streams derived from (seed, block).
MonteCarloEstimate normalizer_mc(const ValidatedModel& model, std::size_t samples, std::uint64_t seed);

struct QuadratureEstimate {
  double value = 0.0;
  double error_estimate = 0.0;  // |Z_n - Z_2n|
  int nodes = 0;
};

inline constexpr int kQuadratureNodes = 200;

// Tensor Gauss-Legendre over [0,1]^L after x = sin^2(pi t / 2), for L <= 3
// biallelic loci with every u >= 0.5.
QuadratureEstimate normalizer_quadrature(const ValidatedModel& model, int nodes = kQuadratureNodes);

// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussLegendre& gauss_legendre(int n);

// V restricted to biallelic loci as a multilinear polynomial in the first
// coordinates p_i: c0 + sum b_i p_i + sum_{i<r} c_ir p_i p_r.
class BiallelicPotential {
 public:
  explicit BiallelicPotential(const ValidatedModel& model);
  std::size_t num_loci() const noexcept { return linear_.size(); }
  double operator()(std::span<const double> p) const;

 private:
  double constant_ = 0.0;
  std::vector<double> linear_;
  Matrix pairs_;
};

enum class NormalizerMethod { ClosedForm, Quadrature, MonteCarlo };

std::string_view to_string(NormalizerMethod method);

class StationaryDensity {
 public:
  // Picks the closed form when the shape allows, else quadrature, else Monte
  // Carlo with the given sample count and seed.
  static StationaryDensity create(const ValidatedModel& model, std::optional<NormalizerMethod> method = std::nullopt,
                                  std::size_t mc_samples = 1'000'000, std::uint64_t seed = 0);

  const ValidatedModel& model() const noexcept { return model_; }
  double log_normalizer() const noexcept { return log_z_; }
  NormalizerMethod method() const noexcept { return method_; }
  std::optional<double> standard_error() const noexcept { return standard_error_; }

  double log_density(const FrequencyState& x) const { return log_density_unnormalized(model_, x) - log_z_; }

 private:
  StationaryDensity(ValidatedModel model, double log_z, NormalizerMethod method, std::optional<double> se)
      : model_(std::move(model)), log_z_(log_z), method_(method), standard_error_(se) {}

  ValidatedModel model_;
  double log_z_;
  NormalizerMethod method_;
  std::optional<double> standard_error_;
};

enum class FlowDensity {
  Stationary,    // pi exp(2V)
  MutationOnly,  // pi alone
};

// Relative probability flow J_k^(i) / P(x) in reduced coordinates, from the
// analytic derivatives of d_kl, log pi and V. SingularAtBoundary unless x is
// strictly interior.
DriftVector flow_residual(const ValidatedModel& model, const FrequencyState& x,
                          FlowDensity density = FlowDensity::Stationary);

}  // namespace wfsim
