#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "trainplan/arch.hpp"
#include "trainplan/cluster.hpp"
#include "trainplan/memory.hpp"
#include "trainplan/metrics.hpp"
#include "trainplan/perf.hpp"
#include "trainplan/search.hpp"

namespace trainplan {

using nlohmann::json;

// Architecture presets with the published layer/width/head figures;
// vocab defaults to the padded 51200, sequence length to 2048.
// Names: "1.4B", "22B", "175B", "1T".
std::optional<ModelSpec> model_preset(const std::string& name);
std::optional<ClusterSpec> cluster_preset(const std::string& name);  // "frontier"

void to_json(json& j, const ModelSpec& spec);
void from_json(const json& j, ModelSpec& spec);
void to_json(json& j, const ClusterSpec& spec);
void from_json(const json& j, ClusterSpec& spec);
void to_json(json& j, const ParallelConfig& cfg);
void from_json(const json& j, ParallelConfig& cfg);
void to_json(json& j, const EfficiencyKnobs& knobs);
void from_json(const json& j, EfficiencyKnobs& knobs);
void to_json(json& j, const MemoryOptions& opts);
void from_json(const json& j, MemoryOptions& opts);
void to_json(json& j, const MemoryReport& report);
void from_json(const json& j, MemoryReport& report);
void to_json(json& j, const ThroughputEstimate& est);
void from_json(const json& j, ThroughputEstimate& est);
void to_json(json& j, const Violation& violation);
void from_json(const json& j, Violation& violation);
void to_json(json& j, const SearchSpace& space);
void from_json(const json& j, SearchSpace& space);
void to_json(json& j, const TrialRecord& record);  // objective is "F" on failure
void from_json(const json& j, TrialRecord& record);
void to_json(json& j, const RooflineReport& report);
void from_json(const json& j, RooflineReport& report);
void to_json(json& j, const MbsDiagnosis& diag);
void from_json(const json& j, MbsDiagnosis& diag);

std::string precision_name(Precision precision);
Precision precision_from(const std::string& name);
std::string failure_kind_name(FailureKind kind);
FailureKind failure_kind_from(const std::string& name);

// "model" and "cluster" values may be preset names or inline objects.
ModelSpec model_from_json(const json& value);
ClusterSpec cluster_from_json(const json& value);

}  // namespace trainplan
