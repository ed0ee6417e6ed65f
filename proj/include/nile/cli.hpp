#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "nile/common.hpp"
#include "nile/corpus.hpp"
#include "nile/generator.hpp"
#include "nile/processor.hpp"

namespace nile::cli {

// One global seed; every module stream is derived from it by labeled
// hashing.
struct ExperimentConfig {
  std::uint64_t seed = 7;
  corpus::WorldConfig world{20, 5, 1, 150, 0.0, 7};

  struct GeneratorSettings {
    int dim = 16;
    int window = 8;
    int max_new_tokens = 32;
    int epochs = 40;
    double learning_rate = 0.1;
    double clip_norm = 1.0;
  } generator;

  struct ProcessorSettings {
    std::string architecture = "independent";
    std::string variant = "nile";
    int negatives_per_instance = 2;
    int dim = 40;
    int epochs = 400;
    double learning_rate = 0.1;
    double clip_norm = 1.0;
    double embed_init_scale = 1.0;
    double aux_weight = 1.0;
  } processor;

  struct BaselineSettings {
    int dim = 32;
    int epochs = 60;
    double learning_rate = 0.1;
    double clip_norm = 1.0;
  } baseline;

  struct Paths {
    std::string out_root = "out";
    std::string corpus_dir = "corpus";
    std::string checkpoint_dir = "checkpoints";
    std::string report_dir = "reports";
  } paths;

  std::string triples_source = "generator";  // generator | oracle | file
  bool filter_all_splits = false;
};

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::ordered_json& j);
ExperimentConfig load_config(const std::string& path);
std::string config_hash(const ExperimentConfig& cfg);

// Resolved output directories (NILE_OUTPUT_ROOT overrides out_root).
struct OutputLayout {
  std::string corpus_dir;
  std::string checkpoint_dir;
  std::string report_dir;
};
OutputLayout resolve_layout(const ExperimentConfig& cfg);

// Exit codes: 0 ok, 1 usage/config, 2 data, 3 numeric.
int dispatch(int argc, const char* const* argv);
int dispatch(const std::vector<std::string>& args);

}  // namespace nile::cli
