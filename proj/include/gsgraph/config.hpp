#pragma once

#include <filesystem>
#include <string>

#include "gsgraph/associate.hpp"
#include "gsgraph/cluster.hpp"
#include "gsgraph/field.hpp"
#include "gsgraph/graph.hpp"
#include "gsgraph/ground.hpp"
#include "gsgraph/ingest.hpp"

namespace gsgraph {

/// Every stage's parameters in one document. Defaults match the member
/// initializers of the per-module structs.
struct PipelineConfig {
    ExtractionConfig extraction;
    TrainConfig training;
    ClusterParams clustering;
    AssociationParams association;
    CorrectionParams correction;
    LlmConfig llm;
    std::string grounding_mode = "deterministic";  // or "llm"
    unsigned threads = 0;
};

/// Strict loader: unknown keys are rejected, threshold invariants are
/// enforced at load time (ConfigError).
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Validates invariants on an in-memory config (also called by the loader).
void validate_config(const PipelineConfig& config);

/// Environment overlay (between config file and CLI flags):
/// GSGRAPH_THREADS, GSGRAPH_LLM_URL, GSGRAPH_LLM_MODEL, GSGRAPH_LLM_TIMEOUT_MS.
void apply_env_overrides(PipelineConfig& config);

}  // namespace gsgraph
