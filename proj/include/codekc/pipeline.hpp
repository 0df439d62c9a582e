#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "codekc/config.hpp"

namespace codekc::pipeline {

// Stage names in execution order.
const std::vector<std::string>& stage_names();

// File an artifact lives at inside the workdir.
std::filesystem::path artifact_path(const PipelineConfig& config, const std::string& name);

// Runs one stage. Inputs must exist (StageError otherwise); when every output
// already exists the stage is a no-op unless force.
void run_stage(const std::string& stage, const PipelineConfig& config, bool force);

// Full pipeline in order. The synth stage runs only when no external corpus
// path is configured.
void run_all(const PipelineConfig& config, bool force);

}  // namespace codekc::pipeline
