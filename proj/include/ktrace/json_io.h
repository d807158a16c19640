#pragma once

#include <filesystem>
#include <vector>

#include "json.hpp"
#include "ktrace/eval.h"
#include "ktrace/explain.h"
#include "ktrace/prep.h"
#include "ktrace/synth.h"

namespace ktrace {

using Json = nlohmann::json;

Json read_json_file(const std::filesystem::path& path);
// Two-space indented, trailing newline.
void write_json_file(const std::filesystem::path& path, const Json& value);

Json to_json(const PreprocessReport& report);
Json to_json(const DatasetStats& stats);

Json to_json(const SplitManifest& split);
SplitManifest split_from_json(const Json& j);

Json to_json(const FeatureConfig& config);
FeatureConfig feature_config_from_json(const Json& j);
Json to_json(const FeatureLayout& layout);  // vocabularies plus block table
FeatureLayout layout_from_json(const Json& j);

Json to_json(const LogisticOptions& options);
LogisticOptions logistic_options_from_json(const Json& j);
Json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const Json& j);

Json to_json(const TrainedModel& model);
TrainedModel model_from_json(const Json& j);

Json to_json(const EvalReport& report);
EvalReport report_from_json(const Json& j);

Json to_json(const LimeConfig& config);
Json to_json(const ExplanationReport& report);
Json to_json(const std::vector<SkillDifficulty>& table);

Json to_json(const SynthConfig& config);
// Missing keys keep their defaults; unknown keys raise UsageError.
SynthConfig synth_config_from_json(const Json& j, SynthConfig base = {});
Json to_json(const GroundTruth& truth);
GroundTruth ground_truth_from_json(const Json& j);

}  // namespace ktrace
