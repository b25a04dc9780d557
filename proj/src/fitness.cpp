#include "wfsim/fitness.hpp"

#include <string>

namespace wfsim {

namespace {

void check_haplotype(const LocusLayout& layout, const Haplotype& sigma) {
  if (sigma.size() != layout.num_loci()) {
    throw Error(ErrorCode::DimensionMismatch, "haplotype has " + std::to_string(sigma.size()) + " loci, model has " +
                                                  std::to_string(layout.num_loci()));
  }
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    if (sigma[i] < 0 || sigma[i] >= layout.alleles(i)) {
      throw Error(ErrorCode::IndexOutOfRange, "allele index out of range at locus " + std::to_string(i + 1));
    }
  }
}

void check_locus_allele(const LocusLayout& layout, std::size_t locus, int allele) {
  if (locus >= layout.num_loci()) throw Error(ErrorCode::IndexOutOfRange, "locus index out of range");
  if (allele < 0 || allele >= layout.alleles(locus)) throw Error(ErrorCode::IndexOutOfRange, "allele index out of range");
}

void check_state(const ValidatedModel& model, const FrequencyState& x) {
  if (!(x.layout() == model.layout())) {
    throw Error(ErrorCode::DimensionMismatch, "frequency state does not match the model layout");
  }
}

Eigen::Map<const Vector> as_vector(const FrequencyState& x) {
  return {x.augmented().data(), static_cast<Eigen::Index>(x.augmented().size())};
}

// sum_t h_r(t) x_t^(r)
double field_term(const ValidatedModel& model, const FrequencyState& x, std::size_t r) {
  const auto h = model.fields(r);
  const auto xr = x.locus(r);
  double s = 0.0;
  for (std::size_t t = 0; t < xr.size(); ++t) s += h[t] * xr[t];
  return s;
}

// sum_t J_ir(k, t) x_t^(r)
double coupling_row_term(const Matrix& a, const LocusLayout& layout, const FrequencyState& x, std::size_t i, int k,
                         std::size_t r) {
  const auto row = static_cast<Eigen::Index>(layout.full_offset(i)) + k;
  const auto col = static_cast<Eigen::Index>(layout.full_offset(r));
  const auto xr = x.locus(r);
  double s = 0.0;
  for (std::size_t t = 0; t < xr.size(); ++t) s += a(row, col + static_cast<Eigen::Index>(t)) * xr[t];
  return s;
}

// sum_{t,n} J_rs(t, n) x_t^(r) x_n^(s)
double coupling_pair_term(const Matrix& a, const LocusLayout& layout, const FrequencyState& x, std::size_t r,
                          std::size_t s) {
  const auto xr = x.locus(r);
  double total = 0.0;
  for (std::size_t t = 0; t < xr.size(); ++t) {
    total += xr[t] * coupling_row_term(a, layout, x, r, static_cast<int>(t), s);
  }
  return total;
}

}  // namespace

void for_each_haplotype(const LocusLayout& layout, const std::function<void(const Haplotype&)>& visit) {
  if (layout.num_haplotypes() > kMaxEnumeratedHaplotypes) {
    throw Error(ErrorCode::ModelTooLarge, "model has more than " + std::to_string(kMaxEnumeratedHaplotypes) +
                                              " haplotypes; enumeration refused");
  }
  const std::size_t n = layout.num_loci();
  Haplotype sigma(n, 0);
  while (true) {
    visit(sigma);
    std::size_t i = n;
    while (i > 0) {
      --i;
      if (++sigma[i] < layout.alleles(i)) break;
      sigma[i] = 0;
      if (i == 0) return;
    }
    if (n == 0) return;
  }
}

double haplotype_fitness(const ValidatedModel& model, const Haplotype& sigma) {
  const auto& layout = model.layout();
  check_haplotype(layout, sigma);
  const Matrix& a = model.coupling_matrix().values();
  double m = 1.0;
  for (std::size_t r = 0; r < sigma.size(); ++r) {
    m += model.fields(r)[static_cast<std::size_t>(sigma[r])];
    for (std::size_t s = r + 1; s < sigma.size(); ++s) {
      m += a(static_cast<Eigen::Index>(layout.full_offset(r)) + sigma[r],
             static_cast<Eigen::Index>(layout.full_offset(s)) + sigma[s]);
    }
  }
  return m;
}

double haplotype_frequency(const FrequencyState& x, const Haplotype& sigma) {
  check_haplotype(x.layout(), sigma);
  double f = 1.0;
  for (std::size_t i = 0; i < sigma.size(); ++i) f *= x(i, static_cast<std::size_t>(sigma[i]));
  return f;
}

double conditional_haplotype_frequency(const FrequencyState& x, const Haplotype& sigma, std::size_t locus,
                                       int allele) {
  check_haplotype(x.layout(), sigma);
  check_locus_allele(x.layout(), locus, allele);
  if (sigma[locus] != allele) return 0.0;
  // Conditioning on an absent allele: take the frequency to be 0.
  if (x(locus, static_cast<std::size_t>(allele)) == 0.0) return 0.0;
  double f = 1.0;
  for (std::size_t j = 0; j < sigma.size(); ++j) {
    if (j != locus) f *= x(j, static_cast<std::size_t>(sigma[j]));
  }
  return f;
}

double mean_fitness(const ValidatedModel& model, const FrequencyState& x) {
  check_state(model, x);
  const auto& layout = model.layout();
  const Matrix& a = model.coupling_matrix().values();
  const std::size_t n = layout.num_loci();
  double m = 1.0;
  for (std::size_t r = 0; r < n; ++r) {
    m += field_term(model, x, r);
    for (std::size_t s = r + 1; s < n; ++s) m += coupling_pair_term(a, layout, x, r, s);
  }
  return m;
}

double mean_fitness_bruteforce(const ValidatedModel& model, const FrequencyState& x) {
  check_state(model, x);
  double m = 0.0;
  for_each_haplotype(model.layout(), [&](const Haplotype& sigma) {
    m += haplotype_frequency(x, sigma) * haplotype_fitness(model, sigma);
  });
  return m;
}

double allele_mean_fitness(const ValidatedModel& model, const FrequencyState& x, std::size_t locus, int allele) {
  check_state(model, x);
  const auto& layout = model.layout();
  check_locus_allele(layout, locus, allele);
  const Matrix& a = model.coupling_matrix().values();
  const std::size_t n = layout.num_loci();
  double m = 1.0 + model.fields(locus)[static_cast<std::size_t>(allele)];
  for (std::size_t r = 0; r < n; ++r) {
    if (r == locus) continue;
    m += field_term(model, x, r);
    m += coupling_row_term(a, layout, x, locus, allele, r);
    for (std::size_t s = r + 1; s < n; ++s) {
      if (s != locus) m += coupling_pair_term(a, layout, x, r, s);
    }
  }
  return m;
}

double allele_mean_fitness_bruteforce(const ValidatedModel& model, const FrequencyState& x, std::size_t locus,
                                      int allele) {
  check_state(model, x);
  check_locus_allele(model.layout(), locus, allele);
  double m = 0.0;
  double mass = 0.0;
  for_each_haplotype(model.layout(), [&](const Haplotype& sigma) {
    if (sigma[locus] != allele) return;
    double f = 1.0;
    for (std::size_t j = 0; j < sigma.size(); ++j) {
      if (j != locus) f *= x(j, static_cast<std::size_t>(sigma[j]));
    }
    m += f * haplotype_fitness(model, sigma);
    mass += f;
  });
  return m / mass;
}

double potential(const ValidatedModel& model, const FrequencyState& x) {
  check_state(model, x);
  const auto xbar = as_vector(x);
  return xbar.dot(model.field_vector()) + 0.5 * xbar.dot(model.coupling_matrix().values() * xbar);
}

Vector potential_gradient_full(const ValidatedModel& model, const FrequencyState& x) {
  check_state(model, x);
  return model.field_vector() + model.coupling_matrix().values() * as_vector(x);
}

DriftVector potential_gradient(const ValidatedModel& model, const FrequencyState& x) {
  const Vector w = potential_gradient_full(model, x);
  const auto& layout = model.layout();
  DriftVector g(model.layout_ptr(), Coordinates::Reduced);
  for (std::size_t i = 0; i < layout.num_loci(); ++i) {
    const auto off = static_cast<Eigen::Index>(layout.full_offset(i));
    const auto last = off + layout.alleles(i) - 1;
    auto gi = g.locus(i);
    for (std::size_t l = 0; l < gi.size(); ++l) gi[l] = w(off + static_cast<Eigen::Index>(l)) - w(last);
  }
  return g;
}

DriftVector apply_diffusion(const FrequencyState& x, const DriftVector& v) {
  if (v.coordinates() != Coordinates::Reduced || !(v.layout() == x.layout())) {
    throw Error(ErrorCode::DimensionMismatch, "vector must be in reduced coordinates of the state layout");
  }
  DriftVector out(x.layout_ptr(), Coordinates::Reduced);
  for (std::size_t i = 0; i < x.num_loci(); ++i) {
    const auto xi = x.locus(i);
    const auto vi = v.locus(i);
    auto oi = out.locus(i);
    for (std::size_t k = 0; k < oi.size(); ++k) {
      double s = 0.0;
      for (std::size_t l = 0; l < vi.size(); ++l) {
        const double d = k == l ? xi[k] * (1.0 - xi[k]) : -xi[k] * xi[l];
        s += d * vi[l];
      }
      oi[k] = s;
    }
  }
  return out;
}

DriftVector selection_drift(const ValidatedModel& model, const FrequencyState& x) {
  return apply_diffusion(x, potential_gradient(model, x));
}

DriftVector selection_drift_fitness(const ValidatedModel& model, const FrequencyState& x) {
  const double mbar = mean_fitness(model, x);
  DriftVector g(model.layout_ptr(), Coordinates::Reduced);
  for (std::size_t i = 0; i < model.num_loci(); ++i) {
    auto gi = g.locus(i);
    for (std::size_t k = 0; k < gi.size(); ++k) {
      const double xk = x(i, k);
      gi[k] = xk == 0.0 ? 0.0 : xk * (allele_mean_fitness(model, x, i, static_cast<int>(k)) - mbar);
    }
  }
  return g;
}

DriftVector mutation_drift(const ValidatedModel& model, const FrequencyState& x) {
  if (!model.parent_independent()) return mutation_drift_general(model, x);
  check_state(model, x);
  DriftVector mu(model.layout_ptr(), Coordinates::Reduced);
  for (std::size_t i = 0; i < model.num_loci(); ++i) {
    const auto u = model.mutation(i);
    const double ubar = model.total_mutation(i);
    auto mi = mu.locus(i);
    for (std::size_t k = 0; k < mi.size(); ++k) mi[k] = u[k] - ubar * x(i, k);
  }
  return mu;
}

DriftVector mutation_drift_general(const ValidatedModel& model, const FrequencyState& x) {
  check_state(model, x);
  DriftVector mu(model.layout_ptr(), Coordinates::Reduced);
  for (std::size_t i = 0; i < model.num_loci(); ++i) {
    const Matrix& rates = model.mutation_matrix(i);
    const auto xi = x.locus(i);
    auto mi = mu.locus(i);
    for (std::size_t k = 0; k < mi.size(); ++k) {
      double s = 0.0;
      for (std::size_t l = 0; l < xi.size(); ++l) {
        if (l == k) continue;
        const auto kk = static_cast<Eigen::Index>(k);
        const auto ll = static_cast<Eigen::Index>(l);
        s += rates(ll, kk) * xi[l] - rates(kk, ll) * xi[k];
      }
      mi[k] = s;
    }
  }
  return mu;
}

DriftVector full_drift(const ValidatedModel& model, const FrequencyState& x) {
  DriftVector total = mutation_drift(model, x);
  const DriftVector g = selection_drift(model, x);
  for (std::size_t n = 0; n < total.size(); ++n) total.values()[n] += g.values()[n];
  return total;
}

}  // namespace wfsim
