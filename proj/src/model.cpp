#include "wfsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace wfsim {

LocusLayout::LocusLayout(std::vector<int> alleles) : alleles_(std::move(alleles)) {
  full_offsets_.reserve(alleles_.size() + 1);
  reduced_offsets_.reserve(alleles_.size() + 1);
  full_offsets_.push_back(0);
  reduced_offsets_.push_back(0);
  for (int m : alleles_) {
    if (m < 1) throw Error(ErrorCode::DimensionMismatch, "locus with fewer than one allele");
    full_offsets_.push_back(full_offsets_.back() + static_cast<std::size_t>(m));
    reduced_offsets_.push_back(reduced_offsets_.back() + static_cast<std::size_t>(m - 1));
  }
}

std::size_t LocusLayout::num_haplotypes() const noexcept {
  std::size_t total = 1;
  for (int m : alleles_) {
    const auto mm = static_cast<std::size_t>(m);
    if (total > std::numeric_limits<std::size_t>::max() / mm) return std::numeric_limits<std::size_t>::max();
    total *= mm;
  }
  return total;
}

LayoutPtr make_layout(std::vector<int> alleles) {
  return std::make_shared<const LocusLayout>(std::move(alleles));
}

// --- StackedVector ---------------------------------------------------------

namespace {

std::size_t stacked_size(const LocusLayout& layout, Coordinates c) {
  return c == Coordinates::Full ? layout.full_size() : layout.reduced_size();
}

}  // namespace

StackedVector::StackedVector(LayoutPtr layout, Coordinates coordinates)
    : layout_(std::move(layout)), coordinates_(coordinates),
      values_(stacked_size(*layout_, coordinates_), 0.0) {}

StackedVector::StackedVector(LayoutPtr layout, Coordinates coordinates, std::vector<double> values)
    : layout_(std::move(layout)), coordinates_(coordinates), values_(std::move(values)) {
  if (values_.size() != stacked_size(*layout_, coordinates_)) {
    throw Error(ErrorCode::DimensionMismatch, "stacked vector size does not match the locus layout");
  }
}

std::span<const double> StackedVector::locus(std::size_t i) const {
  if (coordinates_ == Coordinates::Full) {
    return {values_.data() + layout_->full_offset(i), static_cast<std::size_t>(layout_->alleles(i))};
  }
  return {values_.data() + layout_->reduced_offset(i), static_cast<std::size_t>(layout_->alleles(i) - 1)};
}

std::span<double> StackedVector::locus(std::size_t i) {
  if (coordinates_ == Coordinates::Full) {
    return {values_.data() + layout_->full_offset(i), static_cast<std::size_t>(layout_->alleles(i))};
  }
  return {values_.data() + layout_->reduced_offset(i), static_cast<std::size_t>(layout_->alleles(i) - 1)};
}

// --- FrequencyState --------------------------------------------------------

FrequencyState::FrequencyState(LayoutPtr layout, std::vector<double> full_coordinates)
    : layout_(std::move(layout)), values_(std::move(full_coordinates)) {
  if (values_.size() != layout_->full_size()) {
    throw Error(ErrorCode::DimensionMismatch, "frequency vector has " + std::to_string(values_.size()) +
                                                  " entries, layout needs " + std::to_string(layout_->full_size()));
  }
  for (std::size_t i = 0; i < layout_->num_loci(); ++i) {
    double sum = 0.0;
    for (double v : locus(i)) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw Error(ErrorCode::InvalidState, "frequency outside [0, 1] at locus " + std::to_string(i + 1));
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "frequencies at locus " << i + 1 << " sum to " << sum;
      throw Error(ErrorCode::InvalidState, msg.str());
    }
  }
}

FrequencyState FrequencyState::from_reduced(LayoutPtr layout, std::span<const double> reduced) {
  if (reduced.size() != layout->reduced_size()) {
    throw Error(ErrorCode::DimensionMismatch, "reduced frequency vector has the wrong length");
  }
  std::vector<double> full(layout->full_size());
  for (std::size_t i = 0; i < layout->num_loci(); ++i) {
    const auto m = static_cast<std::size_t>(layout->alleles(i));
    const std::size_t ro = layout->reduced_offset(i);
    const std::size_t fo = layout->full_offset(i);
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < m; ++k) {
      full[fo + k] = reduced[ro + k];
      sum += reduced[ro + k];
    }
    double last = 1.0 - sum;
    // Rounding in 1 - sum must not push an on-simplex point off it.
    if (last < 0.0 && last > -kSumTolerance) last = 0.0;
    full[fo + m - 1] = last;
  }
  return FrequencyState(std::move(layout), std::move(full));
}

std::span<const double> FrequencyState::locus(std::size_t i) const {
  return {values_.data() + layout_->full_offset(i), static_cast<std::size_t>(layout_->alleles(i))};
}

std::vector<double> FrequencyState::reduced() const {
  std::vector<double> out;
  out.reserve(layout_->reduced_size());
  for (std::size_t i = 0; i < layout_->num_loci(); ++i) {
    auto x = locus(i);
    out.insert(out.end(), x.begin(), x.end() - 1);
  }
  return out;
}

double FrequencyState::min_coordinate() const noexcept {
  return values_.empty() ? 0.0 : *std::min_element(values_.begin(), values_.end());
}

// --- OccupancyState --------------------------------------------------------

OccupancyState::OccupancyState(LayoutPtr layout, std::int64_t population_size, std::vector<std::int64_t> counts)
    : layout_(std::move(layout)), population_size_(population_size), counts_(std::move(counts)) {
  if (population_size_ < 1) throw Error(ErrorCode::InvalidArgument, "population size must be at least 1");
  if (counts_.size() != layout_->full_size()) {
    throw Error(ErrorCode::DimensionMismatch, "occupancy vector has the wrong length");
  }
  for (std::size_t i = 0; i < layout_->num_loci(); ++i) {
    std::int64_t sum = 0;
    for (std::int64_t c : locus(i)) {
      if (c < 0) throw Error(ErrorCode::InvalidState, "negative allele count at locus " + std::to_string(i + 1));
      sum += c;
    }
    if (sum != population_size_) {
      throw Error(ErrorCode::CountSumMismatch, "counts at locus " + std::to_string(i + 1) + " sum to " +
                                                   std::to_string(sum) + ", expected N = " +
                                                   std::to_string(population_size_));
    }
  }
}

std::span<const std::int64_t> OccupancyState::locus(std::size_t i) const {
  return {counts_.data() + layout_->full_offset(i), static_cast<std::size_t>(layout_->alleles(i))};
}

FrequencyState occupancy_to_frequency(const OccupancyState& occupancy) {
  const double n = static_cast<double>(occupancy.population_size());
  std::vector<double> x(occupancy.counts().size());
  std::transform(occupancy.counts().begin(), occupancy.counts().end(), x.begin(),
                 [n](std::int64_t c) { return static_cast<double>(c) / n; });
  return FrequencyState(occupancy.layout_ptr(), std::move(x));
}

// --- CouplingMatrix --------------------------------------------------------

CouplingMatrix::CouplingMatrix(LayoutPtr layout, Matrix values)
    : layout_(std::move(layout)), values_(std::move(values)) {
  const auto n = static_cast<Eigen::Index>(layout_->full_size());
  if (values_.rows() != n || values_.cols() != n) {
    throw Error(ErrorCode::DimensionMismatch, "coupling matrix dimension does not match the layout");
  }
}

Matrix CouplingMatrix::block(std::size_t i, std::size_t r) const {
  return values_.block(static_cast<Eigen::Index>(layout_->full_offset(i)),
                       static_cast<Eigen::Index>(layout_->full_offset(r)), layout_->alleles(i),
                       layout_->alleles(r));
}

// --- Validation ------------------------------------------------------------

namespace {

bool all_finite(const Matrix& m) { return m.allFinite(); }

std::string pair_name(std::size_t i, std::size_t r) {
  return "(" + std::to_string(i + 1) + "," + std::to_string(r + 1) + ")";
}

}  // namespace

ValidatedModel validate_model(const ModelSpec& spec) {
  std::vector<Violation> violations;
  const std::size_t num_loci = spec.loci.size();
  if (num_loci == 0) violations.push_back({ErrorCode::DimensionMismatch, "model has no loci"});

  for (std::size_t i = 0; i < num_loci; ++i) {
    const LocusSpec& locus = spec.loci[i];
    const std::string where = "locus " + std::to_string(i + 1);
    if (locus.num_alleles < 2) {
      violations.push_back({ErrorCode::DimensionMismatch, where + " needs at least 2 alleles"});
      continue;
    }
    const auto m = static_cast<std::size_t>(locus.num_alleles);
    if (locus.mutation.size() != m) {
      violations.push_back({ErrorCode::DimensionMismatch, where + " mutation vector length != alleles"});
    }
    if (locus.fields.size() != m) {
      violations.push_back({ErrorCode::DimensionMismatch, where + " field vector length != alleles"});
    }
    for (std::size_t k = 0; k < locus.mutation.size(); ++k) {
      if (!(locus.mutation[k] > 0.0) || !std::isfinite(locus.mutation[k])) {
        violations.push_back({ErrorCode::NonPositiveMutation,
                              where + " allele " + std::to_string(k + 1) + " has u <= 0"});
      }
    }
    for (double h : locus.fields) {
      if (!std::isfinite(h)) violations.push_back({ErrorCode::InvalidArgument, where + " has a non-finite field"});
    }
  }

  // Canonical couplings keyed by (min, max) locus pair.
  std::map<std::pair<std::size_t, std::size_t>, Matrix> canonical;
  std::map<std::pair<std::size_t, std::size_t>, int> seen_orientation;  // exact (first, second) pairs
  for (const CouplingBlock& block : spec.couplings) {
    const std::size_t i = block.first;
    const std::size_t r = block.second;
    if (i >= num_loci || r >= num_loci) {
      violations.push_back({ErrorCode::IndexOutOfRange, "coupling " + pair_name(i, r) + " names a missing locus"});
      continue;
    }
    if (i == r) {
      violations.push_back({ErrorCode::SelfCoupling, "coupling block on locus " + std::to_string(i + 1)});
      continue;
    }
    if (spec.loci[i].num_alleles < 2 || spec.loci[r].num_alleles < 2) continue;
    if (block.values.rows() != spec.loci[i].num_alleles || block.values.cols() != spec.loci[r].num_alleles) {
      violations.push_back({ErrorCode::DimensionMismatch, "coupling " + pair_name(i, r) + " block is " +
                                                              std::to_string(block.values.rows()) + "x" +
                                                              std::to_string(block.values.cols())});
      continue;
    }
    if (!all_finite(block.values)) {
      violations.push_back({ErrorCode::InvalidArgument, "coupling " + pair_name(i, r) + " is not finite"});
      continue;
    }
    if (seen_orientation[{i, r}]++ > 0) {
      violations.push_back({ErrorCode::DuplicateEdge, "coupling " + pair_name(i, r) + " given twice"});
      continue;
    }
    const auto key = std::minmax(i, r);
    const Matrix oriented = i < r ? block.values : Matrix(block.values.transpose());
    auto [it, inserted] = canonical.emplace(key, oriented);
    if (!inserted && it->second != oriented) {
      violations.push_back({ErrorCode::AsymmetricCoupling, "J" + pair_name(i, r) + " is not the transpose of J" +
                                                               pair_name(r, i)});
    }
  }

  if (spec.mutation_matrix) {
    if (spec.mutation_matrix->size() != num_loci) {
      violations.push_back({ErrorCode::DimensionMismatch, "mutation_matrix needs one matrix per locus"});
    } else {
      for (std::size_t i = 0; i < num_loci; ++i) {
        const Matrix& u = (*spec.mutation_matrix)[i];
        const int m = spec.loci[i].num_alleles;
        if (u.rows() != m || u.cols() != m) {
          violations.push_back({ErrorCode::DimensionMismatch,
                                "mutation_matrix for locus " + std::to_string(i + 1) + " is not M_i x M_i"});
          continue;
        }
        for (int l = 0; l < m; ++l) {
          for (int k = 0; k < m; ++k) {
            if (l != k && (!(u(l, k) >= 0.0) || !std::isfinite(u(l, k)))) {
              violations.push_back({ErrorCode::NonPositiveMutation,
                                    "mutation_matrix for locus " + std::to_string(i + 1) + " has a negative rate"});
            }
          }
        }
      }
    }
  }

  if (!violations.empty()) throw ValidationError(std::move(violations));

  ValidatedModel model;
  model.spec_.loci = spec.loci;
  model.spec_.mutation_matrix = spec.mutation_matrix;
  for (auto& [key, values] : canonical) {
    model.spec_.couplings.push_back({key.first, key.second, values});
  }

  std::vector<int> alleles;
  for (const auto& locus : spec.loci) alleles.push_back(locus.num_alleles);
  model.layout_ = make_layout(std::move(alleles));

  model.field_vector_ = Vector::Zero(static_cast<Eigen::Index>(model.layout_->full_size()));
  for (std::size_t i = 0; i < num_loci; ++i) {
    for (std::size_t k = 0; k < spec.loci[i].fields.size(); ++k) {
      model.field_vector_[static_cast<Eigen::Index>(model.layout_->full_offset(i) + k)] = spec.loci[i].fields[k];
    }
  }

  for (std::size_t i = 0; i < num_loci; ++i) {
    const int m = spec.loci[i].num_alleles;
    Matrix u(m, m);
    if (spec.mutation_matrix) {
      u = (*spec.mutation_matrix)[i];
    } else {
      for (int l = 0; l < m; ++l) u.row(l) = Eigen::Map<const Vector>(spec.loci[i].mutation.data(), m).transpose();
    }
    u.diagonal().setZero();
    model.mutation_matrices_.push_back(std::move(u));
  }

  model.coupling_matrix_ = std::make_shared<const CouplingMatrix>(build_coupling_matrix(model));
  return model;
}

std::span<const double> ValidatedModel::mutation(std::size_t locus) const { return spec_.loci.at(locus).mutation; }

double ValidatedModel::total_mutation(std::size_t locus) const {
  const auto u = mutation(locus);
  return std::accumulate(u.begin(), u.end(), 0.0);
}

std::span<const double> ValidatedModel::fields(std::size_t locus) const { return spec_.loci.at(locus).fields; }

Matrix ValidatedModel::coupling(std::size_t i, std::size_t r) const {
  for (const auto& block : spec_.couplings) {
    if (block.first == i && block.second == r) return block.values;
    if (block.first == r && block.second == i) return block.values.transpose();
  }
  return Matrix::Zero(alleles(i), alleles(r));
}

CouplingMatrix build_coupling_matrix(const ValidatedModel& model) {
  const auto& layout = model.layout();
  const auto n = static_cast<Eigen::Index>(layout.full_size());
  Matrix a = Matrix::Zero(n, n);
  for (const auto& block : model.couplings()) {
    const auto oi = static_cast<Eigen::Index>(layout.full_offset(block.first));
    const auto orr = static_cast<Eigen::Index>(layout.full_offset(block.second));
    a.block(oi, orr, block.values.rows(), block.values.cols()) = block.values;
    a.block(orr, oi, block.values.cols(), block.values.rows()) = block.values.transpose();
  }
  return CouplingMatrix(model.layout_ptr(), std::move(a));
}

// --- Interaction graph -----------------------------------------------------

bool InteractionGraph::has_edge(std::size_t i, std::size_t r) const {
  const auto key = std::minmax(i, r);
  return std::find(edges.begin(), edges.end(), std::pair{key.first, key.second}) != edges.end();
}

std::string InteractionGraph::to_dot() const {
  std::ostringstream out;
  out << "graph G {\n";
  for (std::size_t v = 0; v < num_nodes; ++v) {
    const bool isolated = std::none_of(edges.begin(), edges.end(),
                                       [v](const auto& e) { return e.first == v || e.second == v; });
    if (isolated) out << "  \"" << v + 1 << "\";\n";
  }
  for (const auto& [i, r] : edges) out << "  \"" << i + 1 << "\" -- \"" << r + 1 << "\";\n";
  out << "}\n";
  return out.str();
}

InteractionGraph interaction_graph(const CouplingMatrix& coupling) {
  InteractionGraph graph;
  const auto& layout = coupling.layout();
  graph.num_nodes = layout.num_loci();
  for (std::size_t i = 0; i < graph.num_nodes; ++i) {
    for (std::size_t r = i + 1; r < graph.num_nodes; ++r) {
      // Exact zero test: couplings are user inputs.
      if ((coupling.block(i, r).array() != 0.0).any()) graph.edges.emplace_back(i, r);
    }
  }
  return graph;
}

std::vector<CouplingBlock> graph_to_couplings(std::span<const int> allele_counts,
                                              const std::vector<GraphEdge>& edges) {
  std::vector<CouplingBlock> out;
  std::map<std::pair<std::size_t, std::size_t>, bool> used;
  for (const auto& edge : edges) {
    if (edge.first >= allele_counts.size() || edge.second >= allele_counts.size()) {
      throw Error(ErrorCode::IndexOutOfRange, "edge " + pair_name(edge.first, edge.second) + " names a missing locus");
    }
    if (edge.first == edge.second) {
      throw Error(ErrorCode::SelfCoupling, "edge on locus " + std::to_string(edge.first + 1));
    }
    if (edge.block.rows() != allele_counts[edge.first] || edge.block.cols() != allele_counts[edge.second]) {
      throw Error(ErrorCode::DimensionMismatch, "edge " + pair_name(edge.first, edge.second) +
                                                    " block shape does not match the allele counts");
    }
    const auto key = std::minmax(edge.first, edge.second);
    if (used[{key.first, key.second}]) {
      throw Error(ErrorCode::DuplicateEdge, "pair " + pair_name(key.first, key.second) + " given twice");
    }
    used[{key.first, key.second}] = true;
    if (edge.first < edge.second) {
      out.push_back({edge.first, edge.second, edge.block});
    } else {
      out.push_back({edge.second, edge.first, edge.block.transpose()});
    }
  }
  return out;
}

}  // namespace wfsim
