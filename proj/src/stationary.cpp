#include "wfsim/stationary.hpp"

#include "wfsim/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>

namespace wfsim {

double log_gamma(double z) {
  if (!(z > 0.0) || !std::isfinite(z)) throw Error(ErrorCode::DomainError, "log_gamma needs a finite z > 0");
  return std::lgamma(z);
}

namespace {

constexpr int kSeriesCap = 10000;
constexpr double kSeriesTolerance = 1e-16;

double kummer_series(double a, double b, double z) {
  double term = 1.0;
  double sum = 1.0;
  for (int n = 0; n < kSeriesCap; ++n) {
    term *= (a + n) * z / ((b + n) * (n + 1));
    sum += term;
    if (!std::isfinite(sum)) throw Error(ErrorCode::NoConvergence, "Kummer series overflowed");
    if (std::abs(term) <= kSeriesTolerance * std::abs(sum)) return sum;
  }
  throw Error(ErrorCode::NoConvergence, "Kummer series did not converge within 10^4 terms");
}

}  // namespace

double kummer_M(double a, double b, double z) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error(ErrorCode::DomainError, "kummer_M needs a > 0 and b > 0");
  if (!std::isfinite(z)) throw Error(ErrorCode::DomainError, "kummer_M needs a finite z");
  if (z < 0.0) return std::exp(z) * kummer_series(b - a, b, -z);
  return kummer_series(a, b, z);
}

double log_pi(const ValidatedModel& model, const FrequencyState& x) {
  if (!(x.layout() == model.layout())) throw Error(ErrorCode::DimensionMismatch, "state does not match the model");
  double total = 0.0;
  for (std::size_t i = 0; i < model.num_loci(); ++i) {
    const auto u = model.mutation(i);
    const auto xi = x.locus(i);
    for (std::size_t l = 0; l < xi.size(); ++l) {
      const double exponent = 2.0 * u[l] - 1.0;
      if (exponent == 0.0) continue;
      if (xi[l] == 0.0) {
        if (exponent > 0.0) return -std::numeric_limits<double>::infinity();
        throw Error(ErrorCode::NonIntegrableEvaluation,
                    "density is unbounded at a zero coordinate with u < 1/2 (locus " + std::to_string(i + 1) + ")");
      }
      total += exponent * std::log(xi[l]);
    }
  }
  return total;
}

double log_density_unnormalized(const ValidatedModel& model, const FrequencyState& x) {
  const double lp = log_pi(model, x);
  if (std::isinf(lp)) return lp;
  return lp + 2.0 * potential(model, x);
}

double log_dirichlet_normalizer(std::span<const double> alpha) {
  double total = 0.0;
  double sum = 0.0;
  for (double a : alpha) {
    total += log_gamma(a);
    sum += a;
  }
  return total - log_gamma(sum);
}

bool is_two_locus_single_coupling(const ValidatedModel& model) {
  if (model.num_loci() != 2 || model.alleles(0) != 2 || model.alleles(1) != 2) return false;
  if (!model.parent_independent()) return false;
  for (std::size_t i = 0; i < 2; ++i) {
    for (double h : model.fields(i)) {
      if (h != 0.0) return false;
    }
  }
  const Matrix j = model.coupling(0, 1);
  return j(0, 1) == 0.0 && j(1, 0) == 0.0 && j(1, 1) == 0.0;
}

double log_normalizer_closed_2x2(const ValidatedModel& model) {
  if (!is_two_locus_single_coupling(model)) {
    throw Error(ErrorCode::UnsupportedModelShape,
                "closed-form normalizer needs two biallelic loci with only J_12(1,1) nonzero and no fields");
  }
  const double h = model.coupling(0, 1)(0, 0);
  const double a1 = 2.0 * model.mutation(0)[0];
  const double a2 = 2.0 * model.mutation(0)[1];
  const double c1 = 2.0 * model.mutation(1)[0];
  const double c2 = 2.0 * model.mutation(1)[1];
  const double a = a1 + a2;
  const double c = c1 + c2;

  // Term n (without its sign) in log space:
  //   log (c1)_n + n log|2h| - log (c)_n - log n! + log Gamma(a1 + n) + log Gamma(a2) - log Gamma(a + n)
  const double log_prefactor = log_gamma(c1) + log_gamma(c2) - log_gamma(c);
  if (h == 0.0) return log_prefactor + log_gamma(a1) + log_gamma(a2) - log_gamma(a);

  const double log_2h = std::log(2.0 * std::abs(h));
  const double sign_step = h < 0.0 ? -1.0 : 1.0;
  double log_term = log_gamma(a1) + log_gamma(a2) - log_gamma(a);
  double shift = log_term;  // partial sums are kept as sum / exp(shift)
  double scaled = 1.0;
  double sign = 1.0;
  for (int n = 0; n < kSeriesCap; ++n) {
    const double dn = n;
    log_term += std::log(c1 + dn) + log_2h - std::log(c + dn) - std::log(dn + 1.0) + std::log(a1 + dn) -
                std::log(a + dn);
    sign *= sign_step;
    if (log_term - shift > 600.0) {
      scaled *= std::exp(shift - log_term);
      shift = log_term;
    }
    const double term = sign * std::exp(log_term - shift);
    scaled += term;
    if (dn > 2.0 * std::abs(h) && std::abs(term) <= kSeriesTolerance * std::abs(scaled)) {
      if (!(scaled > 0.0)) throw Error(ErrorCode::NoConvergence, "closed-form series lost all precision");
      return log_prefactor + shift + std::log(scaled);
    }
  }
  throw Error(ErrorCode::NoConvergence, "closed-form normalizer series did not converge within 10^4 terms");
}

double normalizer_closed_2x2(const ValidatedModel& model) { return std::exp(log_normalizer_closed_2x2(model)); }

// --- Monte Carlo -------------------------------------------------------------

namespace {

// Mean and M2 of exp(w) held as exp(shift) * (mean, M2 / exp(shift)).
struct ExpMoments {
  double shift = -std::numeric_limits<double>::infinity();
  double mean = 0.0;  // of exp(w - shift)
  double m2 = 0.0;    // of exp(w - shift), sum of squared deviations
  std::size_t count = 0;

  void rescale(double new_shift) {
    if (count == 0) {
      shift = new_shift;
      return;
    }
    const double f = std::exp(shift - new_shift);
    mean *= f;
    m2 *= f * f;
    shift = new_shift;
  }

  void merge(ExpMoments other) {
    if (other.count == 0) return;
    const double s = std::max(shift, other.shift);
    rescale(s);
    other.rescale(s);
    const auto n = static_cast<double>(count);
    const auto m = static_cast<double>(other.count);
    const double delta = other.mean - mean;
    const double total = n + m;
    mean += delta * m / total;
    m2 += other.m2 + delta * delta * n * m / total;
    count += other.count;
  }
};

ExpMoments block_moments(const std::vector<double>& w) {
  ExpMoments out;
  out.shift = *std::max_element(w.begin(), w.end());
  for (double v : w) {
    const double e = std::exp(v - out.shift);
    ++out.count;
    const double delta = e - out.mean;
    out.mean += delta / static_cast<double>(out.count);
    out.m2 += delta * (e - out.mean);
  }
  return out;
}

constexpr std::size_t kMcBlock = 1 << 16;

}  // namespace

MonteCarloEstimate normalizer_mc(const ValidatedModel& model, std::size_t samples, std::uint64_t seed) {
  if (samples < 2) throw Error(ErrorCode::InvalidArgument, "Monte Carlo normalizer needs at least 2 samples");
  if (!model.parent_independent()) {
    throw Error(ErrorCode::UnsupportedModelShape, "stationary density needs parent-independent mutation");
  }
  double log_base = 0.0;
  std::vector<std::vector<double>> alphas;
  for (std::size_t i = 0; i < model.num_loci(); ++i) {
    std::vector<double> alpha;
    for (double u : model.mutation(i)) alpha.push_back(2.0 * u);
    log_base += log_dirichlet_normalizer(alpha);
    alphas.push_back(std::move(alpha));
  }
  const std::size_t blocks = (samples + kMcBlock - 1) / kMcBlock;
  const auto parts = parallel_map(blocks, [&](std::size_t b) {
    Rng rng = make_rng(seed, b);
    const std::size_t count = std::min(kMcBlock, samples - b * kMcBlock);
    std::vector<std::gamma_distribution<double>> gammas;
    for (const auto& alpha : alphas) {
      for (double a : alpha) gammas.emplace_back(a, 1.0);
    }
    std::vector<double> full(model.layout().full_size());
    std::vector<double> w(count);
    for (std::size_t s = 0; s < count; ++s) {
      std::size_t g = 0;
      for (std::size_t i = 0; i < model.num_loci(); ++i) {
        const std::size_t off = model.layout().full_offset(i);
        const auto m = static_cast<std::size_t>(model.alleles(i));
        double sum = 0.0;
        for (std::size_t k = 0; k < m; ++k) sum += (full[off + k] = gammas[g++](rng));
        for (std::size_t k = 0; k < m; ++k) full[off + k] /= sum;
      }
      const Eigen::Map<const Vector> xbar(full.data(), static_cast<Eigen::Index>(full.size()));
      w[s] = 2.0 * (xbar.dot(model.field_vector()) + 0.5 * xbar.dot(model.coupling_matrix().values() * xbar));
    }
    return block_moments(w);
  });
  ExpMoments total;
  for (const auto& p : parts) total.merge(p);
  const auto n = static_cast<double>(total.count);
  const double log_mean = total.shift + std::log(total.mean);
  const double se_scaled = std::sqrt(total.m2 / (n - 1.0) / n);
  MonteCarloEstimate out;
  out.samples = total.count;
  out.log_value = log_base + log_mean;
  out.value = std::exp(out.log_value);
  out.standard_error = std::exp(log_base + total.shift) * se_scaled;
  return out;
}

// --- Quadrature --------------------------------------------------------------

const GaussLegendre& gauss_legendre(int n) {
  static std::mutex lock;
  static std::map<int, GaussLegendre> cache;
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "Gauss-Legendre rule needs at least one node");
  std::lock_guard guard(lock);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  GaussLegendre rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < (n + 1) / 2; ++k) {
    double x = std::cos(std::numbers::pi * (k + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute the derivative at the converged node.
    double p0 = 1.0;
    double p1 = x;
    for (int j = 2; j <= n; ++j) {
      const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[static_cast<std::size_t>(k)] = -x;
    rule.nodes[static_cast<std::size_t>(n - 1 - k)] = x;
    rule.weights[static_cast<std::size_t>(k)] = w;
    rule.weights[static_cast<std::size_t>(n - 1 - k)] = w;
  }
  return cache.emplace(n, std::move(rule)).first->second;
}

BiallelicPotential::BiallelicPotential(const ValidatedModel& model) {
  const std::size_t l = model.num_loci();
  for (std::size_t i = 0; i < l; ++i) {
    if (model.alleles(i) != 2) throw Error(ErrorCode::UnsupportedModelShape, "loci must be biallelic");
  }
  auto at = [&](const std::vector<double>& p) {
    std::vector<double> full;
    for (double v : p) full.insert(full.end(), {v, 1.0 - v});
    return potential(model, FrequencyState(model.layout_ptr(), std::move(full)));
  };
  std::vector<double> p(l, 0.0);
  constant_ = at(p);
  linear_.resize(l);
  for (std::size_t i = 0; i < l; ++i) {
    p[i] = 1.0;
    linear_[i] = at(p) - constant_;
    p[i] = 0.0;
  }
  pairs_ = Matrix::Zero(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(l));
  for (std::size_t i = 0; i < l; ++i) {
    for (std::size_t r = i + 1; r < l; ++r) {
      p[i] = p[r] = 1.0;
      pairs_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r)) = at(p) - linear_[i] - linear_[r] - constant_;
      p[i] = p[r] = 0.0;
    }
  }
}

double BiallelicPotential::operator()(std::span<const double> p) const {
  double v = constant_;
  for (std::size_t i = 0; i < linear_.size(); ++i) {
    double inner = linear_[i];
    for (std::size_t r = i + 1; r < linear_.size(); ++r) {
      inner += pairs_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r)) * p[r];
    }
    v += inner * p[i];
  }
  return v;
}

namespace {

struct AxisRule {
  std::vector<double> p;       // x = sin^2(pi t / 2) at the nodes
  std::vector<double> weight;  // quadrature weight times pi and the Dirichlet kernel in t
};

AxisRule axis_rule(int n, double u1, double u2) {
  const auto& gl = gauss_legendre(n);
  AxisRule rule;
  for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
    const double t = 0.5 * (gl.nodes[k] + 1.0);
    const double s = std::sin(0.5 * std::numbers::pi * t);
    const double c = std::cos(0.5 * std::numbers::pi * t);
    rule.p.push_back(s * s);
    const double log_kernel = (4.0 * u1 - 1.0) * std::log(s) + (4.0 * u2 - 1.0) * std::log(c);
    rule.weight.push_back(0.5 * gl.weights[k] * std::numbers::pi * std::exp(log_kernel));
  }
  return rule;
}

double tensor_quadrature(const ValidatedModel& model, const BiallelicPotential& v, int n) {
  const std::size_t l = model.num_loci();
  std::vector<AxisRule> axes;
  for (std::size_t i = 0; i < l; ++i) axes.push_back(axis_rule(n, model.mutation(i)[0], model.mutation(i)[1]));
  const auto m = static_cast<std::size_t>(n);
  std::vector<double> p(l);
  double total = 0.0;
  if (l == 1) {
    for (std::size_t a = 0; a < m; ++a) {
      p[0] = axes[0].p[a];
      total += axes[0].weight[a] * std::exp(2.0 * v(p));
    }
  } else if (l == 2) {
    for (std::size_t a = 0; a < m; ++a) {
      p[0] = axes[0].p[a];
      double inner = 0.0;
      for (std::size_t b = 0; b < m; ++b) {
        p[1] = axes[1].p[b];
        inner += axes[1].weight[b] * std::exp(2.0 * v(p));
      }
      total += axes[0].weight[a] * inner;
    }
  } else {
    const auto parts = parallel_map(m, [&](std::size_t a) {
      std::vector<double> q(3);
      q[0] = axes[0].p[a];
      double outer = 0.0;
      for (std::size_t b = 0; b < m; ++b) {
        q[1] = axes[1].p[b];
        double inner = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
          q[2] = axes[2].p[c];
          inner += axes[2].weight[c] * std::exp(2.0 * v(q));
        }
        outer += axes[1].weight[b] * inner;
      }
      return axes[0].weight[a] * outer;
    });
    for (double part : parts) total += part;
  }
  return total;
}

}  // namespace

QuadratureEstimate normalizer_quadrature(const ValidatedModel& model, int nodes) {
  if (model.num_loci() > 3) throw Error(ErrorCode::UnsupportedModelShape, "quadrature normalizer supports L <= 3");
  if (!model.parent_independent()) {
    throw Error(ErrorCode::UnsupportedModelShape, "stationary density needs parent-independent mutation");
  }
  for (std::size_t i = 0; i < model.num_loci(); ++i) {
    if (model.alleles(i) != 2) throw Error(ErrorCode::UnsupportedModelShape, "quadrature normalizer needs biallelic loci");
    for (double u : model.mutation(i)) {
      if (u < 0.5) {
        throw Error(ErrorCode::NonIntegrableEvaluation,
                    "quadrature normalizer needs every u >= 0.5; use the Monte Carlo normalizer");
      }
    }
  }
  const BiallelicPotential v(model);
  QuadratureEstimate out;
  out.nodes = nodes;
  out.value = tensor_quadrature(model, v, nodes);
  out.error_estimate = std::abs(tensor_quadrature(model, v, 2 * nodes) - out.value);
  return out;
}

// --- Density handle ----------------------------------------------------------

std::string_view to_string(NormalizerMethod method) {
  switch (method) {
    case NormalizerMethod::ClosedForm: return "closed-form";
    case NormalizerMethod::Quadrature: return "quadrature";
    case NormalizerMethod::MonteCarlo: return "monte-carlo";
  }
  return "unknown";
}

namespace {

bool quadrature_eligible(const ValidatedModel& model) {
  if (model.num_loci() > 3 || !model.parent_independent()) return false;
  for (std::size_t i = 0; i < model.num_loci(); ++i) {
    if (model.alleles(i) != 2) return false;
    for (double u : model.mutation(i)) {
      if (u < 0.5) return false;
    }
  }
  return true;
}

}  // namespace

StationaryDensity StationaryDensity::create(const ValidatedModel& model, std::optional<NormalizerMethod> method,
                                            std::size_t mc_samples, std::uint64_t seed) {
  if (!model.parent_independent()) {
    throw Error(ErrorCode::UnsupportedModelShape, "stationary density needs parent-independent mutation");
  }
  if (!method) {
    method = is_two_locus_single_coupling(model) ? NormalizerMethod::ClosedForm
             : quadrature_eligible(model)        ? NormalizerMethod::Quadrature
                                                 : NormalizerMethod::MonteCarlo;
  }
  switch (*method) {
    case NormalizerMethod::ClosedForm:
      return StationaryDensity(model, log_normalizer_closed_2x2(model), *method, std::nullopt);
    case NormalizerMethod::Quadrature:
      return StationaryDensity(model, std::log(normalizer_quadrature(model).value), *method, std::nullopt);
    case NormalizerMethod::MonteCarlo: {
      const auto mc = normalizer_mc(model, mc_samples, seed);
      return StationaryDensity(model, mc.log_value, *method, mc.standard_error);
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown normalizer method");
}

// --- Probability flow --------------------------------------------------------

DriftVector flow_residual(const ValidatedModel& model, const FrequencyState& x, FlowDensity density) {
  if (!x.is_interior()) throw Error(ErrorCode::SingularAtBoundary, "flow residual needs a strictly interior point");
  const DriftVector drift = full_drift(model, x);
  const DriftVector grad = potential_gradient(model, x);
  DriftVector out(model.layout_ptr(), Coordinates::Reduced);
  for (std::size_t i = 0; i < model.num_loci(); ++i) {
    const auto xi = x.locus(i);
    const auto u = model.mutation(i);
    const std::size_t m = xi.size();
    const double last = (2.0 * u[m - 1] - 1.0) / xi[m - 1];
    // d/dx_l log P for the free coordinates l < M_i.
    std::vector<double> dlog(m - 1);
    for (std::size_t l = 0; l + 1 < m; ++l) {
      dlog[l] = (2.0 * u[l] - 1.0) / xi[l] - last;
      if (density == FlowDensity::Stationary) dlog[l] += 2.0 * grad(i, l);
    }
    const Matrix d = diffusion_matrix_block(xi);
    auto oi = out.locus(i);
    for (std::size_t k = 0; k + 1 < m; ++k) {
      double divergence = 0.0;  // sum_l d/dx_l d_kl
      double transport = 0.0;   // sum_l d_kl d/dx_l log P
      for (std::size_t l = 0; l + 1 < m; ++l) {
        divergence += l == k ? 1.0 - 2.0 * xi[k] : -xi[k];
        transport += d(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) * dlog[l];
      }
      oi[k] = drift(i, k) - 0.5 * (divergence + transport);
    }
  }
  return out;
}

}  // namespace wfsim
