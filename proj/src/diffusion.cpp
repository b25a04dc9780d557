#include "wfsim/diffusion.hpp"

#include <cmath>
#include <string>

namespace wfsim {

namespace {

void check_locus(const FrequencyState& x, std::size_t locus) {
  if (locus >= x.num_loci()) throw Error(ErrorCode::IndexOutOfRange, "locus index out of range");
}

}  // namespace

Matrix diffusion_matrix_block(std::span<const double> xi) {
  const auto m = static_cast<Eigen::Index>(xi.size()) - 1;
  Matrix d(m, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    for (Eigen::Index l = 0; l < m; ++l) {
      const double xk = xi[static_cast<std::size_t>(k)];
      d(k, l) = k == l ? xk * (1.0 - xk) : -xk * xi[static_cast<std::size_t>(l)];
    }
  }
  return d;
}

Matrix diffusion_matrix(const FrequencyState& x, std::size_t locus) {
  check_locus(x, locus);
  return diffusion_matrix_block(x.locus(locus));
}

Matrix diffusion_matrix_inverse(const FrequencyState& x, std::size_t locus) {
  check_locus(x, locus);
  const auto xi = x.locus(locus);
  for (double v : xi) {
    if (!(v > 0.0)) {
      throw Error(ErrorCode::SingularAtBoundary,
                  "diffusion matrix is singular on the boundary (locus " + std::to_string(locus + 1) + ")");
    }
  }
  const auto m = static_cast<Eigen::Index>(xi.size()) - 1;
  Matrix inv = Matrix::Constant(m, m, 1.0 / xi.back());
  for (Eigen::Index l = 0; l < m; ++l) inv(l, l) += 1.0 / xi[static_cast<std::size_t>(l)];
  return inv;
}

Matrix diffusion_matrix_factor(const FrequencyState& x, std::size_t locus) {
  const Matrix d = diffusion_matrix(x, locus);
  const Eigen::Index m = d.rows();
  Matrix b = Matrix::Zero(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    double pivot = d(j, j);
    for (Eigen::Index k = 0; k < j; ++k) pivot -= b(j, k) * b(j, k);
    if (pivot <= 0.0) continue;  // column stays zero
    b(j, j) = std::sqrt(pivot);
    for (Eigen::Index i = j + 1; i < m; ++i) {
      double s = d(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= b(i, k) * b(j, k);
      b(i, j) = s / b(j, j);
    }
  }
  return b;
}

std::size_t project_to_simplex(const LocusLayout& layout, std::span<double> full) {
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < layout.num_loci(); ++i) {
    std::span<double> xi = full.subspan(layout.full_offset(i), static_cast<std::size_t>(layout.alleles(i)));
    double sum = 0.0;
    for (double& v : xi) {
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteState, "non-finite frequency; reduce dt");
      if (v < 0.0) {
        v = 0.0;
        ++clamped;
      }
      sum += v;
    }
    if (!(sum > 0.0)) throw Error(ErrorCode::NonFiniteState, "locus collapsed to zero mass; reduce dt");
    for (double& v : xi) v = std::min(1.0, v / sum);
  }
  return clamped;
}

FrequencyState em_step(const ValidatedModel& model, const FrequencyState& x, double dt, std::span<const double> xi,
                       std::size_t* clamped) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  const auto& layout = model.layout();
  if (xi.size() != layout.reduced_size()) throw Error(ErrorCode::DimensionMismatch, "noise vector has the wrong length");
  const DriftVector drift = full_drift(model, x);
  const double sqrt_dt = std::sqrt(dt);
  std::vector<double> next = x.augmented();
  for (std::size_t i = 0; i < layout.num_loci(); ++i) {
    const Matrix b = diffusion_matrix_factor(x, i);
    const auto di = drift.locus(i);
    const std::size_t ro = layout.reduced_offset(i);
    const std::size_t fo = layout.full_offset(i);
    const std::size_t m = di.size();
    double sum = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      double noise = 0.0;
      for (std::size_t l = 0; l <= k; ++l) noise += b(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) * xi[ro + l];
      next[fo + k] += di[k] * dt + sqrt_dt * noise;
      sum += next[fo + k];
    }
    next[fo + m] = 1.0 - sum;
  }
  const std::size_t n = project_to_simplex(layout, next);
  if (clamped != nullptr) *clamped += n;
  return FrequencyState(x.layout_ptr(), std::move(next));
}

FrequencyState em_step(const ValidatedModel& model, const FrequencyState& x, double dt, Rng& rng,
                       std::size_t* clamped) {
  std::normal_distribution<double> normal;
  std::vector<double> xi(model.layout().reduced_size());
  for (double& v : xi) v = normal(rng);
  return em_step(model, x, dt, xi, clamped);
}

Trajectory simulate_sde(const ValidatedModel& model, const FrequencyState& init, double t_end, double dt,
                        std::int64_t thin, Rng& rng) {
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw Error(ErrorCode::InvalidArgument, "t_end must be >= 0");
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  if (thin < 1) throw Error(ErrorCode::InvalidArgument, "thin must be >= 1");
  const auto steps = static_cast<std::int64_t>(std::llround(t_end / dt));
  Trajectory trajectory;
  trajectory.layout = init.layout_ptr();
  trajectory.record(0.0, init);
  std::normal_distribution<double> normal;
  std::vector<double> xi(model.layout().reduced_size());
  FrequencyState x = init;
  for (std::int64_t s = 1; s <= steps; ++s) {
    for (double& v : xi) v = normal(rng);
    x = em_step(model, x, dt, xi, &trajectory.clamp_events);
    if (s % thin == 0) trajectory.record(static_cast<double>(s) * dt, x);
  }
  return trajectory;
}

}  // namespace wfsim
