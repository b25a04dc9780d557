#include "wfsim/harness.hpp"

#include "wfsim/diffusion.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

namespace wfsim {

LatticePoint snap_to_lattice(const FrequencyState& x, std::int64_t population_size) {
  OccupancyState occupancy = nearest_occupancy(x, population_size);
  FrequencyState snapped = occupancy_to_frequency(occupancy);
  double distance = 0.0;
  for (std::size_t c = 0; c < x.augmented().size(); ++c) {
    distance = std::max(distance, std::abs(snapped.augmented()[c] - x.augmented()[c]));
  }
  return {std::move(occupancy), std::move(snapped), distance};
}

namespace {

struct LatticeProbabilities {
  FrequencyState x;
  StackedVector p;
};

LatticeProbabilities lattice_probabilities(const ChainParams& params, const FrequencyState& x) {
  FrequencyState snapped = snap_to_lattice(x, params.population_size()).x;
  StackedVector p = sampling_probabilities(params, snapped);
  return {std::move(snapped), std::move(p)};
}

}  // namespace

DriftVector exact_increment_mean(const ChainParams& params, const FrequencyState& x) {
  const auto [xs, p] = lattice_probabilities(params, x);
  const auto n = static_cast<double>(params.population_size());
  DriftVector mu(params.model().layout_ptr(), Coordinates::Reduced);
  for (std::size_t i = 0; i < params.layout().num_loci(); ++i) {
    auto mi = mu.locus(i);
    for (std::size_t k = 0; k < mi.size(); ++k) mi[k] = n * (p(i, k) - xs(i, k));
  }
  return mu;
}

DriftVector exact_increment_mean(const ValidatedModel& model, const FrequencyState& x, std::int64_t population_size) {
  return exact_increment_mean(chain_params_from_diffusion(model, population_size), x);
}

Matrix exact_increment_cov(const ChainParams& params, const FrequencyState& x) {
  const auto [xs, p] = lattice_probabilities(params, x);
  const auto& layout = params.layout();
  const auto n = static_cast<double>(params.population_size());
  const auto dim = static_cast<Eigen::Index>(layout.reduced_size());
  Matrix d(dim, dim);
  for (std::size_t i = 0; i < layout.num_loci(); ++i) {
    for (std::size_t j = 0; j < layout.num_loci(); ++j) {
      for (int k = 0; k + 1 < layout.alleles(i); ++k) {
        for (int l = 0; l + 1 < layout.alleles(j); ++l) {
          const auto kk = static_cast<std::size_t>(k);
          const auto ll = static_cast<std::size_t>(l);
          const double bk = p(i, kk) - xs(i, kk);
          const double bl = p(j, ll) - xs(j, ll);
          double value;
          if (i != j) {
            value = (n * bk) * (n * bl) / n;
          } else if (k == l) {
            value = p(i, kk) * (1.0 - p(i, kk)) + n * bk * bk;
          } else {
            value = -p(i, kk) * p(i, ll) + bk * n * bl;
          }
          d(static_cast<Eigen::Index>(layout.reduced_offset(i)) + k,
            static_cast<Eigen::Index>(layout.reduced_offset(j)) + l) = value;
        }
      }
    }
  }
  return d;
}

Matrix exact_increment_cov(const ValidatedModel& model, const FrequencyState& x, std::int64_t population_size) {
  return exact_increment_cov(chain_params_from_diffusion(model, population_size), x);
}

double exact_fourth_moment(const ChainParams& params, const FrequencyState& x, std::size_t locus, int allele) {
  if (locus >= params.layout().num_loci() || allele < 0 || allele >= params.layout().alleles(locus)) {
    throw Error(ErrorCode::IndexOutOfRange, "locus or allele index out of range");
  }
  const auto [xs, p] = lattice_probabilities(params, x);
  const auto n = static_cast<double>(params.population_size());
  const auto k = static_cast<std::size_t>(allele);
  const double pk = p(locus, k);
  const double qk = 1.0 - pk;
  const double b = n * (pk - xs(locus, k));
  const double m2 = n * pk * qk;
  const double m3 = m2 * (1.0 - 2.0 * pk);
  const double m4 = m2 * (1.0 + 3.0 * (n - 2.0) * pk * qk);
  return (m4 + 4.0 * b * m3 + 6.0 * b * b * m2 + b * b * b * b) / (n * n * n);
}

double exact_fourth_moment(const ValidatedModel& model, const FrequencyState& x, std::int64_t population_size,
                           std::size_t locus, int allele) {
  return exact_fourth_moment(chain_params_from_diffusion(model, population_size), x, locus, allele);
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::InvalidArgument, "slope needs two or more points");
  double mx = 0.0;
  double my = 0.0;
  const auto n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

MomentReport moment_report(const ValidatedModel& model, const FrequencyState& x,
                           const std::vector<std::int64_t>& population_sizes) {
  MomentReport report;
  const auto& layout = model.layout();
  auto label = [](std::size_t i, int k) { return std::to_string(i + 1) + "," + std::to_string(k + 1); };
  for (std::int64_t n : population_sizes) {
    const ChainParams params = chain_params_from_diffusion(model, n);
    const LatticePoint lattice = snap_to_lattice(x, n);
    const FrequencyState& xs = lattice.x;
    const DriftVector mu = exact_increment_mean(params, xs);
    const DriftVector drift = full_drift(model, xs);
    const Matrix d = exact_increment_cov(params, xs);
    auto add = [&](std::string quantity, double exact, double limit) {
      report.rows.push_back({n, std::move(quantity), exact, limit, std::abs(exact - limit), lattice.snap_distance});
    };
    for (std::size_t i = 0; i < layout.num_loci(); ++i) {
      for (int k = 0; k + 1 < layout.alleles(i); ++k) {
        const auto kk = static_cast<std::size_t>(k);
        add("mu[" + label(i, k) + "]", mu(i, kk), drift(i, kk));
      }
    }
    for (std::size_t i = 0; i < layout.num_loci(); ++i) {
      for (int k = 0; k + 1 < layout.alleles(i); ++k) {
        for (std::size_t j = i; j < layout.num_loci(); ++j) {
          for (int l = (j == i ? k : 0); l + 1 < layout.alleles(j); ++l) {
            const double exact = d(static_cast<Eigen::Index>(layout.reduced_offset(i)) + k,
                                   static_cast<Eigen::Index>(layout.reduced_offset(j)) + l);
            double limit = 0.0;
            if (i == j) {
              const double xk = xs(i, static_cast<std::size_t>(k));
              limit = k == l ? xk * (1.0 - xk) : -xk * xs(i, static_cast<std::size_t>(l));
            }
            add("d[" + label(i, k) + ";" + label(j, l) + "]", exact, limit);
          }
        }
      }
    }
    for (std::size_t i = 0; i < layout.num_loci(); ++i) {
      for (int k = 0; k + 1 < layout.alleles(i); ++k) add("e[" + label(i, k) + "]", exact_fourth_moment(params, xs, i, k), 0.0);
    }
  }
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> series;
  for (const auto& row : report.rows) {
    auto& [ns, errors] = series[row.quantity];
    ns.push_back(static_cast<double>(row.population_size));
    errors.push_back(row.abs_error);
  }
  for (const auto& [quantity, data] : series) {
    const auto& [ns, errors] = data;
    const bool usable = ns.size() >= 2 && std::all_of(errors.begin(), errors.end(), [](double e) { return e > 0.0; });
    report.slopes[quantity] = usable ? std::optional<double>(log_log_slope(ns, errors)) : std::nullopt;
  }
  return report;
}

void write_moment_csv(std::ostream& out, const MomentReport& report) {
  std::ostringstream buf;
  buf.precision(17);
  buf << "N,quantity,exact,limit,abs_error\n";
  for (const auto& row : report.rows) {
    buf << row.population_size << ",\"" << row.quantity << "\"," << row.exact << ',' << row.limit << ','
        << row.abs_error << '\n';
  }
  out << buf.str();
}

double integrated_autocorrelation_time(const std::vector<double>& series) {
  const std::size_t n = series.size();
  if (n < 4) return 1.0;
  double mean = 0.0;
  for (double v : series) mean += v / static_cast<double>(n);
  std::vector<double> centered(n);
  double c0 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    centered[i] = series[i] - mean;
    c0 += centered[i] * centered[i];
  }
  if (c0 == 0.0) return 1.0;
  double tau = 1.0;
  for (std::size_t lag = 1; lag < n / 2; ++lag) {
    double c = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) c += centered[i] * centered[i + lag];
    tau += 2.0 * c / c0;
    if (static_cast<double>(lag) >= 5.0 * tau) break;
  }
  return std::max(tau, 1.0);
}

// --- Quadrature over the first coordinates of biallelic loci -----------------

namespace {

struct Node {
  double p;
  double w;
};

double to_t(double x) { return 2.0 / std::numbers::pi * std::asin(std::sqrt(x)); }

// Nodes for x in [x_lo, x_hi] after x = sin^2(pi t / 2); weights carry the
// Dirichlet kernel x^(2 u1 - 1) (1 - x)^(2 u2 - 1) and the Jacobian.
std::vector<Node> axis_nodes(double u1, double u2, double x_lo, double x_hi, int n) {
  const auto& gl = gauss_legendre(n);
  const double t_lo = to_t(x_lo);
  const double t_hi = to_t(x_hi);
  const double half = 0.5 * (t_hi - t_lo);
  std::vector<Node> nodes;
  nodes.reserve(gl.nodes.size());
  for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
    const double t = t_lo + half * (gl.nodes[k] + 1.0);
    const double s = std::sin(0.5 * std::numbers::pi * t);
    const double c = std::cos(0.5 * std::numbers::pi * t);
    const double log_kernel = (4.0 * u1 - 1.0) * std::log(s) + (4.0 * u2 - 1.0) * std::log(c);
    nodes.push_back({s * s, half * gl.weights[k] * std::numbers::pi * std::exp(log_kernel)});
  }
  return nodes;
}

// Calls fn(p, weight) over the tensor grid, weight including exp(2V).
template <class Fn>
void tensor_visit(const std::vector<const std::vector<Node>*>& axes, const BiallelicPotential& v, Fn&& fn) {
  const std::size_t l = axes.size();
  std::vector<std::size_t> index(l, 0);
  std::vector<double> p(l);
  while (true) {
    double w = 1.0;
    for (std::size_t i = 0; i < l; ++i) {
      const Node& node = (*axes[i])[index[i]];
      p[i] = node.p;
      w *= node.w;
    }
    fn(p, w * std::exp(2.0 * v(p)));
    std::size_t i = l;
    while (i > 0) {
      --i;
      if (++index[i] < axes[i]->size()) break;
      index[i] = 0;
      if (i == 0) return;
    }
  }
}

void check_biallelic(const ValidatedModel& model) {
  if (model.num_loci() > 3) throw Error(ErrorCode::UnsupportedModelShape, "binning supports at most 3 loci");
  for (std::size_t i = 0; i < model.num_loci(); ++i) {
    if (model.alleles(i) != 2) {
      throw Error(ErrorCode::UnsupportedModelShape, "binning needs biallelic loci; locus " + std::to_string(i + 1) +
                                                        " has " + std::to_string(model.alleles(i)) + " alleles");
    }
  }
}

constexpr int kGlobalNodes = 64;

}  // namespace

std::vector<double> cell_probabilities(const StationaryDensity& density, int bins, int nodes_per_cell) {
  const ValidatedModel& model = density.model();
  check_biallelic(model);
  if (bins < 1) throw Error(ErrorCode::InvalidArgument, "bins must be >= 1");
  const std::size_t l = model.num_loci();
  const BiallelicPotential v(model);
  // per-axis, per-bin nodes
  std::vector<std::vector<std::vector<Node>>> axis_bins(l);
  for (std::size_t i = 0; i < l; ++i) {
    for (int b = 0; b < bins; ++b) {
      axis_bins[i].push_back(axis_nodes(model.mutation(i)[0], model.mutation(i)[1], static_cast<double>(b) / bins,
                                        static_cast<double>(b + 1) / bins, nodes_per_cell));
    }
  }
  std::size_t cells = 1;
  for (std::size_t i = 0; i < l; ++i) cells *= static_cast<std::size_t>(bins);
  const double scale = std::exp(-density.log_normalizer());
  return parallel_map(cells, [&](std::size_t cell) {
    std::vector<const std::vector<Node>*> axes(l);
    std::size_t rest = cell;
    for (std::size_t i = l; i-- > 0;) {
      axes[i] = &axis_bins[i][rest % static_cast<std::size_t>(bins)];
      rest /= static_cast<std::size_t>(bins);
    }
    double total = 0.0;
    tensor_visit(axes, v, [&](const std::vector<double>&, double w) { total += w; });
    return total * scale;
  });
}

std::vector<double> marginal_cdf(const StationaryDensity& density, std::size_t locus, int cells) {
  const ValidatedModel& model = density.model();
  check_biallelic(model);
  if (locus >= model.num_loci()) throw Error(ErrorCode::IndexOutOfRange, "locus index out of range");
  const std::size_t l = model.num_loci();
  const BiallelicPotential v(model);
  std::vector<std::vector<Node>> global(l);
  for (std::size_t i = 0; i < l; ++i) global[i] = axis_nodes(model.mutation(i)[0], model.mutation(i)[1], 0.0, 1.0, kGlobalNodes);
  const auto mass = parallel_map(static_cast<std::size_t>(cells), [&](std::size_t c) {
    const auto local = axis_nodes(model.mutation(locus)[0], model.mutation(locus)[1], static_cast<double>(c) / cells,
                                  static_cast<double>(c + 1) / cells, 8);
    std::vector<const std::vector<Node>*> axes(l);
    for (std::size_t i = 0; i < l; ++i) axes[i] = i == locus ? &local : &global[i];
    double total = 0.0;
    tensor_visit(axes, v, [&](const std::vector<double>&, double w) { total += w; });
    return total;
  });
  std::vector<double> cdf(static_cast<std::size_t>(cells) + 1, 0.0);
  for (std::size_t c = 0; c < mass.size(); ++c) cdf[c + 1] = cdf[c] + mass[c];
  const double total = cdf.back();
  for (double& value : cdf) value /= total;
  return cdf;
}

double analytic_correlation(const StationaryDensity& density, std::size_t a, std::size_t b) {
  const ValidatedModel& model = density.model();
  check_biallelic(model);
  if (a >= model.num_loci() || b >= model.num_loci() || a == b) {
    throw Error(ErrorCode::IndexOutOfRange, "correlation needs two distinct loci");
  }
  const BiallelicPotential v(model);
  std::vector<std::vector<Node>> global(model.num_loci());
  std::vector<const std::vector<Node>*> axes;
  for (std::size_t i = 0; i < model.num_loci(); ++i) {
    global[i] = axis_nodes(model.mutation(i)[0], model.mutation(i)[1], 0.0, 1.0, kQuadratureNodes);
  }
  for (const auto& g : global) axes.push_back(&g);
  double s0 = 0, sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  tensor_visit(axes, v, [&](const std::vector<double>& p, double w) {
    s0 += w;
    sa += w * p[a];
    sb += w * p[b];
    saa += w * p[a] * p[a];
    sbb += w * p[b] * p[b];
    sab += w * p[a] * p[b];
  });
  const double ma = sa / s0;
  const double mb = sb / s0;
  const double cov = sab / s0 - ma * mb;
  return cov / std::sqrt((saa / s0 - ma * ma) * (sbb / s0 - mb * mb));
}

double ks_statistic(std::vector<double> samples, const std::vector<double>& cdf_at_edges) {
  if (samples.empty()) throw Error(ErrorCode::EmptyInput, "no samples");
  const std::size_t cells = cdf_at_edges.size() - 1;
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double pos = std::clamp(samples[i], 0.0, 1.0) * static_cast<double>(cells);
    const auto c = std::min(static_cast<std::size_t>(pos), cells - 1);
    const double frac = pos - static_cast<double>(c);
    const double f = cdf_at_edges[c] + frac * (cdf_at_edges[c + 1] - cdf_at_edges[c]);
    worst = std::max({worst, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return worst;
}

StationarityReport stationarity_test(const StationaryDensity& density, const Trajectory& samples, int bins) {
  const ValidatedModel& model = density.model();
  if (samples.size() == 0) throw Error(ErrorCode::EmptyInput, "trajectory has no samples");
  check_biallelic(model);
  if (!(samples.layout && *samples.layout == model.layout())) {
    throw Error(ErrorCode::DimensionMismatch, "trajectory layout does not match the model");
  }
  const std::size_t l = model.num_loci();
  StationarityReport report;
  report.samples = samples.size();
  report.bins = bins;
  report.normalizer = density.method();

  const auto probabilities = cell_probabilities(density, bins);
  std::vector<double> counts(probabilities.size(), 0.0);
  std::vector<std::vector<double>> first(l);
  for (const auto& state : samples.states) {
    std::size_t cell = 0;
    for (std::size_t i = 0; i < l; ++i) {
      const double p = state[model.layout().full_offset(i)];
      first[i].push_back(p);
      const int b = std::clamp(static_cast<int>(p * bins), 0, bins - 1);
      cell = cell * static_cast<std::size_t>(bins) + static_cast<std::size_t>(b);
    }
    counts[cell] += 1.0;
  }
  const auto n = static_cast<double>(samples.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    report.total_variation += 0.5 * std::abs(counts[c] / n - probabilities[c]);
    report.analytic_mass += probabilities[c];
  }
  for (std::size_t i = 0; i < l; ++i) report.ks.push_back(ks_statistic(first[i], marginal_cdf(density, i)));
  if (l >= 2) {
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
    report.sample_correlation = c01 / std::sqrt(c00 * c11);
    report.analytic_correlation = analytic_correlation(density, 0, 1);
  }
  report.autocorrelation_time = integrated_autocorrelation_time(first[0]);
  report.effective_sample_size = n / report.autocorrelation_time;
  return report;
}

std::string to_json(const StationarityReport& report) {
  nlohmann::ordered_json doc;
  doc["samples"] = report.samples;
  doc["bins"] = report.bins;
  doc["normalizer"] = std::string(to_string(report.normalizer));
  doc["total_variation"] = report.total_variation;
  doc["analytic_mass"] = report.analytic_mass;
  doc["ks"] = report.ks;
  doc["sample_correlation"] = report.sample_correlation ? nlohmann::ordered_json(*report.sample_correlation) : nullptr;
  doc["analytic_correlation"] =
      report.analytic_correlation ? nlohmann::ordered_json(*report.analytic_correlation) : nullptr;
  doc["autocorrelation_time"] = report.autocorrelation_time;
  doc["effective_sample_size"] = report.effective_sample_size;
  return doc.dump(2);
}

// --- Chain versus SDE --------------------------------------------------------

CoordinateMoments coordinate_moments(const std::vector<std::vector<double>>& states) {
  if (states.size() < 2) throw Error(ErrorCode::EmptyInput, "need at least two states");
  const std::size_t dim = states.front().size();
  const auto n = static_cast<double>(states.size());
  CoordinateMoments out;
  for (std::size_t c = 0; c < dim; ++c) {
    double mean = 0.0;
    for (const auto& s : states) mean += s[c] / n;
    double m2 = 0.0;
    double m4 = 0.0;
    for (const auto& s : states) {
      const double d = s[c] - mean;
      m2 += d * d / n;
      m4 += d * d * d * d / n;
    }
    const double var = m2 * n / (n - 1.0);
    out.mean.push_back(mean);
    out.variance.push_back(var);
    out.mean_se.push_back(std::sqrt(var / n));
    out.variance_se.push_back(std::sqrt(std::max(0.0, m4 - m2 * m2) / n));
  }
  return out;
}

ChainSdeComparison compare_chain_and_sde(const ValidatedModel& model, const FrequencyState& x0,
                                         std::int64_t population_size, double t, double dt, std::size_t replicates,
                                         std::uint64_t seed) {
  const ChainParams params = chain_params_from_diffusion(model, population_size);
  const OccupancyState start = nearest_occupancy(x0, population_size);
  const FrequencyState sde_start = occupancy_to_frequency(start);
  const auto generations = static_cast<std::int64_t>(std::llround(t * static_cast<double>(population_size)));
  const auto chain_final = parallel_map(replicates, [&](std::size_t r) {
    Rng rng = make_rng(seed, 2 * r);
    OccupancyState state = start;
    for (std::int64_t g = 0; g < generations; ++g) state = step_chain(params, state, rng);
    return occupancy_to_frequency(state).augmented();
  });
  const auto steps = static_cast<std::int64_t>(std::llround(t / dt));
  const auto sde_final = parallel_map(replicates, [&](std::size_t r) {
    Rng rng = make_rng(seed, 2 * r + 1);
    FrequencyState x = sde_start;
    for (std::int64_t s = 0; s < steps; ++s) x = em_step(model, x, dt, rng);
    return x.augmented();
  });
  ChainSdeComparison out;
  out.chain = coordinate_moments(chain_final);
  out.sde = coordinate_moments(sde_final);
  for (std::size_t c = 0; c < out.chain.mean.size(); ++c) {
    const double se_mean = std::hypot(out.chain.mean_se[c], out.sde.mean_se[c]);
    const double se_var = std::hypot(out.chain.variance_se[c], out.sde.variance_se[c]);
    out.mean_z.push_back(std::abs(out.chain.mean[c] - out.sde.mean[c]) / se_mean);
    out.variance_z.push_back(std::abs(out.chain.variance[c] - out.sde.variance[c]) / se_var);
  }
  return out;
}

}  // namespace wfsim
