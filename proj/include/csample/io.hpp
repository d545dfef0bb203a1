#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "csample/gmm.hpp"

namespace csample {

// Shortest text that reads back to the same double ("%.17g").
std::string format_double(double v);

// One row per member: x0..x{d-1},weight. Unweighted ensembles get 1/N.
void write_samples_csv(const std::filesystem::path& path, const Ensemble& ensemble);
// Inverse of write_samples_csv; the last column is the weight.
Ensemble read_samples_csv(const std::filesystem::path& path);

// {structure, weights, means, covariances}; covariances are dense d x d lists.
nlohmann::json gmm_to_json(const GaussianMixture& g);
GaussianMixture gmm_from_json(const nlohmann::json& j);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

} // namespace csample
