#include "csample/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "csample/errors.hpp"

namespace csample {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void write_samples_csv(const std::filesystem::path& path, const Ensemble& e) {
  e.validate();
  std::string text;
  const std::size_t d = e.dim();
  for (std::size_t j = 0; j < d; ++j) text += "x" + std::to_string(j) + ",";
  text += "weight\n";
  const double uniform = e.size() ? 1.0 / static_cast<double>(e.size()) : 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    for (double v : e.members[i]) {
      text += format_double(v);
      text += ',';
    }
    text += format_double(e.weighted() ? e.weights[i] : uniform);
    text += '\n';
  }
  write_text(path, text);
}

Ensemble read_samples_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open samples file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty samples file");
  const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (columns < 2) throw IoError(path.string() + ": need at least one state column and a weight");
  Ensemble e;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    Vector values;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw IoError(path.string() + ": bad number on line " + std::to_string(row));
      }
    }
    if (values.size() != columns) throw IoError(path.string() + ": ragged row " + std::to_string(row));
    e.weights.push_back(values.back());
    values.pop_back();
    e.members.push_back(std::move(values));
  }
  if (e.members.empty()) throw IoError(path.string() + ": no samples");
  return e;
}

json gmm_to_json(const GaussianMixture& g) {
  json covs = json::array();
  for (const SpdMatrix& c : g.covariances()) {
    json m = json::array();
    for (std::size_t i = 0; i < c.order(); ++i) {
      json row = json::array();
      for (std::size_t j = 0; j < c.order(); ++j) row.push_back(c(i, j));
      m.push_back(row);
    }
    covs.push_back(m);
  }
  return json{{"structure", to_string(g.structure())},
              {"weights", g.weights()},
              {"means", g.means()},
              {"covariances", covs}};
}

GaussianMixture gmm_from_json(const json& j) {
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      if (k != "structure" && k != "weights" && k != "means" && k != "covariances") {
        throw ConfigError("GMM JSON: unknown key '" + k + "'");
      }
    }
    const CovStructure s = cov_structure_from_string(j.at("structure").get<std::string>());
    const auto weights = j.at("weights").get<Vector>();
    const auto means = j.at("means").get<std::vector<Vector>>();
    std::vector<SpdMatrix> covs;
    for (const json& m : j.at("covariances")) {
      const auto rows = m.get<std::vector<Vector>>();
      DenseMatrix a(rows.size(), rows.empty() ? 0 : rows.front().size());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != a.cols()) throw ConfigError("GMM JSON: ragged covariance");
        for (std::size_t c = 0; c < a.cols(); ++c) a(r, c) = rows[r][c];
      }
      covs.push_back(SpdMatrix::full(a, s));
    }
    return GaussianMixture(s, weights, means, covs);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("GMM JSON: ") + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

} // namespace csample
