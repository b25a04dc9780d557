// Recorded trajectories of the chain or the SDE, and their CSV form:
// header `t,x1_1,...,x1_M1,x2_1,...`, full coordinates, 17 significant digits.
#pragma once

#include "wfsim/model.hpp"

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace wfsim {

struct Trajectory {
  LayoutPtr layout;
  std::vector<double> times;
  std::vector<std::vector<double>> states;  // full coordinates per record
  std::size_t clamp_events = 0;             // SDE projection count

  std::size_t size() const noexcept { return times.size(); }
  void record(double t, const FrequencyState& x);
  FrequencyState state(std::size_t n) const;
};

std::string csv_header(const LocusLayout& layout);
void write_csv(std::ostream& out, const Trajectory& trajectory);

// Reads a CSV produced by write_csv. Throws ParseError on malformed input.
Trajectory read_csv(std::istream& in, LayoutPtr layout);

}  // namespace wfsim
