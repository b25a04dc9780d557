#include "wfsim/trajectory.hpp"

#include <istream>
#include <ostream>
#include <sstream>

namespace wfsim {

void Trajectory::record(double t, const FrequencyState& x) {
  times.push_back(t);
  states.push_back(x.augmented());
}

FrequencyState Trajectory::state(std::size_t n) const { return FrequencyState(layout, states.at(n)); }

std::string csv_header(const LocusLayout& layout) {
  std::string header = "t";
  for (std::size_t i = 0; i < layout.num_loci(); ++i) {
    for (int k = 0; k < layout.alleles(i); ++k) header += ",x" + std::to_string(i + 1) + "_" + std::to_string(k + 1);
  }
  return header;
}

void write_csv(std::ostream& out, const Trajectory& trajectory) {
  std::ostringstream buf;
  buf.precision(17);
  buf << csv_header(*trajectory.layout) << '\n';
  for (std::size_t n = 0; n < trajectory.size(); ++n) {
    buf << trajectory.times[n];
    for (double v : trajectory.states[n]) buf << ',' << v;
    buf << '\n';
  }
  out << buf.str();
}

Trajectory read_csv(std::istream& in, LayoutPtr layout) {
  Trajectory trajectory;
  trajectory.layout = layout;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty trajectory file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != csv_header(*layout)) throw Error(ErrorCode::ParseError, "trajectory header does not match the model");
  const std::size_t width = layout->full_size();
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::istringstream fields(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(fields, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(ErrorCode::ParseError, "bad number on row " + std::to_string(row));
      }
    }
    if (values.size() != width + 1) throw Error(ErrorCode::ParseError, "wrong column count on row " + std::to_string(row));
    trajectory.times.push_back(values.front());
    std::vector<double> state(values.begin() + 1, values.end());
    FrequencyState check(layout, state);
    trajectory.states.push_back(std::move(state));
  }
  return trajectory;
}

}  // namespace wfsim
