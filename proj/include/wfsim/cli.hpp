// Command-line front end. Exit codes: 0 success, 1 model or assumption
// error (or a failed check), 2 usage error.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace wfsim::cli {

struct RunConfig {
  std::string command;
  std::string model_path;
  std::uint64_t seed = 0;
  std::int64_t population_size = 0;
  std::int64_t generations = 0;
  double t_end = 1.0;
  double dt = 1e-3;
  std::int64_t thin = 1;
  std::size_t samples = 1'000'000;
  int bins = 30;
  std::string output;
  std::vector<double> init;
  std::string method = "auto";
  int grid = 0;
  std::vector<std::string> points;
  std::vector<std::int64_t> population_grid{100, 1000, 10000, 100000};
  std::string trajectory_path;
  std::size_t burn_in = 0;
  int flow_points = 20;
  bool unnormalized = false;
};

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wfsim::cli
