#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hopac/estimation.hpp"
#include "hopac/generator.hpp"
#include "hopac/hac_tree.hpp"
#include "hopac/matrix.hpp"

namespace hopac {

/// Shortest text that reads back as the same double.
std::string format_double(double x);

/// Headerless CSV, one row per observation.
void write_matrix_csv(const Matrix& m, const std::filesystem::path& path);
/// Reads numeric CSV; a first line that does not parse as numbers is taken
/// as a header and skipped.
Matrix read_matrix_csv(const std::filesystem::path& path);

nlohmann::json to_json(const Generator& g);
Generator generator_from_json(const nlohmann::json& j);

/// {"d": 4, "forks": [{"id": 7, "children": [5, 6], "generator": {...}}, ...]}
nlohmann::json to_json(const HacTree& tree);
HacTree tree_from_json(const nlohmann::json& j);

nlohmann::json to_json(const FitReport& report);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace hopac
