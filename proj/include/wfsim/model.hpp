// Model parameterization for the coupled multilocus Wright-Fisher model:
// loci with allele counts, mutation rates and single-locus fields, pairwise
// coupling blocks, the frequency/occupancy state types, the block coupling
// matrix A and the locus interaction graph.
//
// Indexing: loci and alleles are 0-based in this API. Model files, CSV
// headers and DOT output are 1-based (see model_io.hpp).
#pragma once

#include "wfsim/error.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace wfsim {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Allele counts per locus and the offsets of each locus inside the stacked
// full (M_i per locus) and reduced (M_i - 1 per locus) coordinate vectors.
class LocusLayout {
 public:
  explicit LocusLayout(std::vector<int> alleles);

  std::size_t num_loci() const noexcept { return alleles_.size(); }
  int alleles(std::size_t locus) const { return alleles_.at(locus); }
  const std::vector<int>& allele_counts() const noexcept { return alleles_; }

  std::size_t full_size() const noexcept { return full_offsets_.back(); }
  std::size_t reduced_size() const noexcept { return reduced_offsets_.back(); }
  std::size_t full_offset(std::size_t locus) const { return full_offsets_.at(locus); }
  std::size_t reduced_offset(std::size_t locus) const { return reduced_offsets_.at(locus); }

  // Number of haplotypes, prod M_i, saturating at SIZE_MAX.
  std::size_t num_haplotypes() const noexcept;

  bool operator==(const LocusLayout& other) const noexcept { return alleles_ == other.alleles_; }

 private:
  std::vector<int> alleles_;
  std::vector<std::size_t> full_offsets_;
  std::vector<std::size_t> reduced_offsets_;
};

using LayoutPtr = std::shared_ptr<const LocusLayout>;

LayoutPtr make_layout(std::vector<int> alleles);

enum class Coordinates { Full, Reduced };

// Per-locus vectors stacked into one flat buffer. Used for drift vectors
// (reduced coordinates) and per-locus probability vectors (full coordinates).
class StackedVector {
 public:
  StackedVector(LayoutPtr layout, Coordinates coordinates);
  StackedVector(LayoutPtr layout, Coordinates coordinates, std::vector<double> values);

  const LocusLayout& layout() const noexcept { return *layout_; }
  const LayoutPtr& layout_ptr() const noexcept { return layout_; }
  Coordinates coordinates() const noexcept { return coordinates_; }

  std::span<const double> locus(std::size_t i) const;
  std::span<double> locus(std::size_t i);
  double operator()(std::size_t locus, std::size_t allele) const { return this->locus(locus)[allele]; }

  const std::vector<double>& values() const noexcept { return values_; }
  std::vector<double>& values() noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }

 private:
  LayoutPtr layout_;
  Coordinates coordinates_;
  std::vector<double> values_;
};

using DriftVector = StackedVector;

// Allele frequencies on the product of simplices. Stores all M_i coordinates
// per locus (the augmented vector); the reduced view drops each last one.
class FrequencyState {
 public:
  static constexpr double kSumTolerance = 1e-12;

  // Throws InvalidState unless every coordinate is in [0, 1] and each locus
  // sums to 1 within kSumTolerance.
  FrequencyState(LayoutPtr layout, std::vector<double> full_coordinates);

  // Builds the state from the M_i - 1 free coordinates per locus.
  static FrequencyState from_reduced(LayoutPtr layout, std::span<const double> reduced);

  const LocusLayout& layout() const noexcept { return *layout_; }
  const LayoutPtr& layout_ptr() const noexcept { return layout_; }
  std::size_t num_loci() const noexcept { return layout_->num_loci(); }

  std::span<const double> locus(std::size_t i) const;
  double operator()(std::size_t locus, std::size_t allele) const { return this->locus(locus)[allele]; }

  // The augmented stacked vector (all coordinates, locus by locus).
  const std::vector<double>& augmented() const noexcept { return values_; }
  std::vector<double> reduced() const;

  double min_coordinate() const noexcept;
  bool is_interior() const noexcept { return min_coordinate() > 0.0; }

 private:
  LayoutPtr layout_;
  std::vector<double> values_;
};

// Integer allele counts per locus, each locus summing to N.
class OccupancyState {
 public:
  // Throws CountSumMismatch when a locus does not sum to N, InvalidState for
  // negative counts and DimensionMismatch for a wrongly sized buffer.
  OccupancyState(LayoutPtr layout, std::int64_t population_size, std::vector<std::int64_t> counts);

  const LocusLayout& layout() const noexcept { return *layout_; }
  const LayoutPtr& layout_ptr() const noexcept { return layout_; }
  std::int64_t population_size() const noexcept { return population_size_; }
  std::span<const std::int64_t> locus(std::size_t i) const;
  const std::vector<std::int64_t>& counts() const noexcept { return counts_; }

 private:
  LayoutPtr layout_;
  std::int64_t population_size_;
  std::vector<std::int64_t> counts_;
};

FrequencyState occupancy_to_frequency(const OccupancyState& occupancy);

struct LocusSpec {
  int num_alleles = 2;
  std::vector<double> mutation;  // u_k, diffusion scaled
  std::vector<double> fields;    // h_i(k)
};

// Coupling J_{first,second}(k, m) as an M_first x M_second matrix.
struct CouplingBlock {
  std::size_t first = 0;
  std::size_t second = 0;
  Matrix values;
};

struct ModelSpec {
  std::vector<LocusSpec> loci;
  std::vector<CouplingBlock> couplings;
  // Per-locus M_i x M_i rates u_{lk} (source l, target k) for parent-dependent
  // mutation. Diagonals are ignored. Used by the chain and mutation drift.
  std::optional<std::vector<Matrix>> mutation_matrix;
};

class CouplingMatrix {
 public:
  CouplingMatrix(LayoutPtr layout, Matrix values);

  const LocusLayout& layout() const noexcept { return *layout_; }
  const Matrix& values() const noexcept { return values_; }
  Matrix block(std::size_t i, std::size_t r) const;
  std::size_t dimension() const noexcept { return static_cast<std::size_t>(values_.rows()); }

 private:
  LayoutPtr layout_;
  Matrix values_;
};

class ValidatedModel;

ValidatedModel validate_model(const ModelSpec& spec);
CouplingMatrix build_coupling_matrix(const ValidatedModel& model);

// A model that satisfied every assumption check. Coupling blocks are held
// once per unordered pair with first < second; the reversed block is the
// transpose.
class ValidatedModel {
 public:
  const LocusLayout& layout() const noexcept { return *layout_; }
  const LayoutPtr& layout_ptr() const noexcept { return layout_; }
  std::size_t num_loci() const noexcept { return layout_->num_loci(); }
  int alleles(std::size_t locus) const { return layout_->alleles(locus); }

  std::span<const double> mutation(std::size_t locus) const;
  double total_mutation(std::size_t locus) const;
  std::span<const double> fields(std::size_t locus) const;
  // The stacked single-locus field vector h on the augmented coordinates.
  const Vector& field_vector() const noexcept { return field_vector_; }

  bool parent_independent() const noexcept { return !spec_.mutation_matrix.has_value(); }
  // u_{lk} for source l and target k, zero diagonal. Derived from the rates
  // u_k when mutation is parent independent.
  const Matrix& mutation_matrix(std::size_t locus) const { return mutation_matrices_.at(locus); }

  const std::vector<CouplingBlock>& couplings() const noexcept { return spec_.couplings; }
  // J_{ir} as an M_i x M_r matrix; zero when the pair is uncoupled.
  Matrix coupling(std::size_t i, std::size_t r) const;
  const CouplingMatrix& coupling_matrix() const noexcept { return *coupling_matrix_; }

  const ModelSpec& spec() const noexcept { return spec_; }

 private:
  ValidatedModel() = default;
  friend ValidatedModel validate_model(const ModelSpec& spec);

  ModelSpec spec_;
  LayoutPtr layout_;
  Vector field_vector_;
  std::vector<Matrix> mutation_matrices_;
  std::shared_ptr<const CouplingMatrix> coupling_matrix_;
};

// Undirected locus graph: edge (i, r) iff the block J_{ir} has any nonzero
// entry. Edges are stored with i < r in lexicographic order.
struct InteractionGraph {
  std::size_t num_nodes = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;

  bool has_edge(std::size_t i, std::size_t r) const;
  // `graph G { "1" -- "2"; ... }` with 1-based locus labels.
  std::string to_dot() const;
};

InteractionGraph interaction_graph(const CouplingMatrix& coupling);

struct GraphEdge {
  std::size_t first = 0;
  std::size_t second = 0;
  Matrix block;  // M_first x M_second
};

// Turns an edge list into a coupling set, one block per unordered pair.
// Errors: DuplicateEdge, DimensionMismatch, SelfCoupling, IndexOutOfRange.
std::vector<CouplingBlock> graph_to_couplings(std::span<const int> allele_counts,
                                              const std::vector<GraphEdge>& edges);

}  // namespace wfsim
