#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lcirt/data.hpp"
#include "lcirt/design.hpp"
#include "lcirt/estimation.hpp"
#include "lcirt/selection.hpp"
#include "lcirt/simulate.hpp"

// JSON forms of every artifact the CLI and C API exchange. Item indices are
// 1-based in JSON and 0-based in memory.
namespace lcirt {

using Json = nlohmann::ordered_json;

Json to_json(const ResponseMatrix& data);
ResponseMatrix response_matrix_from_json(const Json& j);

Json to_json(const ModelSpec& spec);
// Missing "cats" are taken from `cats_default`; missing "multi" means one dimension.
ModelSpec spec_from_json(const Json& j, const std::optional<std::vector<int>>& cats_default = std::nullopt);

std::vector<std::vector<int>> groups_from_json(const Json& j, int items);
Json groups_to_json(const std::vector<std::vector<int>>& groups);

Json to_json(const ModelSpec& spec, const ParameterSet& params);
ParameterSet params_from_json(const ModelSpec& spec, const Json& j);

Json to_json(const FitResult& fit);
Json to_json(const LrTestResult& test);
Json to_json(const ClusterTrace& trace);
Json to_json(std::span<const InfoRow> rows);

std::string fit_summary(const FitResult& fit);
std::string lr_summary(const LrTestResult& test);
std::string info_table_text(std::span<const InfoRow> rows);

// Parses text, reporting the failure as a ValidationError.
Json parse_json(const std::string& text, const std::string& what);

}  // namespace lcirt
