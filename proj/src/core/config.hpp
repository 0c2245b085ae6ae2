#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "assignment.hpp"
#include "dataset.hpp"
#include "evaluation.hpp"
#include "sim.hpp"
#include "tco.hpp"
#include "tracking.hpp"

namespace offtrack {

enum class AssignMethod { TwoRound, ObjectCentric };

struct AssignmentConfig {
  AssignMethod method = AssignMethod::TwoRound;
  double tiou_threshold = 0.3;
  assignment::ObjectCentricThresholds object_centric;
};

struct DatasetConfig {
  dataset::BuildConfig build;
  bool tta_rotations = false;
};

struct AugmentSection {
  bool enabled = false;
  dataset::AugmentConfig params;
};

struct PostprocessConfig {
  bool remove_empty = true;
};

// Every tunable of the pipeline. Missing keys in a config file keep these
// defaults; unknown keys are rejected.
struct PipelineConfig {
  tracking::TrackerConfig tracking;
  AssignmentConfig assignment;
  DatasetConfig dataset;
  AugmentSection augment;
  tco::TcoConfig tco;
  PostprocessConfig postprocess;
  evaluation::EvalConfig evaluation;
  sim::SimConfig sim;
  int threads = 1;
  std::uint64_t seed = 7;
};

// Throws SchemaError with the offending key path.
PipelineConfig parse_config(const std::string& json_text, const std::string& source = "config");
PipelineConfig load_config(const std::filesystem::path& path);
std::string dump_config(const PipelineConfig& cfg);

}  // namespace offtrack
