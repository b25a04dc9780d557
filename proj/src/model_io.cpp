#include "wfsim/model_io.hpp"

#include <fstream>
#include <sstream>

namespace wfsim {

using nlohmann::json;

namespace {

Matrix matrix_from_json(const json& rows, const std::string& what) {
  if (!rows.is_array() || rows.empty()) throw Error(ErrorCode::ParseError, what + " must be a non-empty array of rows");
  const auto n_rows = static_cast<Eigen::Index>(rows.size());
  const auto n_cols = static_cast<Eigen::Index>(rows.front().size());
  Matrix m(n_rows, n_cols);
  for (Eigen::Index r = 0; r < n_rows; ++r) {
    const json& row = rows[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n_cols) {
      throw Error(ErrorCode::ParseError, what + " rows must all have the same length");
    }
    for (Eigen::Index c = 0; c < n_cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::size_t locus_index(const json& value, const std::string& key) {
  const auto index = value.at(key).get<long long>();
  if (index < 1) throw Error(ErrorCode::IndexOutOfRange, "coupling \"" + key + "\" must be a 1-based locus index");
  return static_cast<std::size_t>(index - 1);
}

}  // namespace

ModelSpec model_from_json(const json& document) {
  ModelSpec spec;
  try {
    const json& loci = document.at("loci");
    if (!loci.is_array()) throw Error(ErrorCode::ParseError, "\"loci\" must be an array");
    bool any_matrix = false;
    for (const json& locus : loci) {
      LocusSpec ls;
      ls.num_alleles = locus.at("alleles").get<int>();
      ls.mutation = locus.at("mutation").get<std::vector<double>>();
      ls.fields = locus.contains("h") ? locus.at("h").get<std::vector<double>>()
                                      : std::vector<double>(static_cast<std::size_t>(std::max(ls.num_alleles, 0)), 0.0);
      spec.loci.push_back(std::move(ls));
      any_matrix = any_matrix || locus.contains("mutation_matrix");
    }
    if (any_matrix) {
      std::vector<Matrix> matrices;
      for (std::size_t i = 0; i < loci.size(); ++i) {
        if (loci[i].contains("mutation_matrix")) {
          matrices.push_back(matrix_from_json(loci[i].at("mutation_matrix"), "mutation_matrix"));
        } else {
          const auto& u = spec.loci[i].mutation;
          const auto m = static_cast<Eigen::Index>(u.size());
          Matrix full(m, m);
          for (Eigen::Index l = 0; l < m; ++l) {
            for (Eigen::Index k = 0; k < m; ++k) full(l, k) = l == k ? 0.0 : u[static_cast<std::size_t>(k)];
          }
          matrices.push_back(std::move(full));
        }
      }
      spec.mutation_matrix = std::move(matrices);
    }
    if (document.contains("couplings")) {
      for (const json& c : document.at("couplings")) {
        spec.couplings.push_back({locus_index(c, "i"), locus_index(c, "j"), matrix_from_json(c.at("J"), "J")});
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return spec;
}

json model_to_json(const ModelSpec& spec) {
  json doc;
  doc["loci"] = json::array();
  for (std::size_t i = 0; i < spec.loci.size(); ++i) {
    const auto& locus = spec.loci[i];
    json l = {{"alleles", locus.num_alleles}, {"mutation", locus.mutation}, {"h", locus.fields}};
    if (spec.mutation_matrix && i < spec.mutation_matrix->size()) {
      l["mutation_matrix"] = matrix_to_json((*spec.mutation_matrix)[i]);
    }
    doc["loci"].push_back(std::move(l));
  }
  doc["couplings"] = json::array();
  for (const auto& c : spec.couplings) {
    doc["couplings"].push_back({{"i", c.first + 1}, {"j", c.second + 1}, {"J", matrix_to_json(c.values)}});
  }
  return doc;
}

ModelSpec parse_model(const std::string& text) {
  json document;
  try {
    document = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return model_from_json(document);
}

ModelSpec load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open model file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_model(buffer.str());
}

}  // namespace wfsim
