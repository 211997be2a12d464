#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cutlearn/crossfit.hpp"
#include "cutlearn/simgen.hpp"

namespace cutlearn {

// Bad or incompatible configuration. `field` is a JSON path such as
// "learners[2]" or "nuisance.hazard_learner".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class OverlapWeight { TruePropensity, Uniform };

struct ExperimentConfig {
  std::string name = "experiment";
  int setting = 1;
  int n = 500;
  int replications = 1;
  CovariateLaw law = CovariateLaw::Uniform;
  std::vector<EstimandSpec> estimands;
  std::vector<CutKind> cut_kinds{CutKind::AIPCW};
  std::vector<LearnerKind> learners = all_learners();
  bool oracle_learner = true;     // bench: psi-hat := psi0 rows
  bool oracle_nuisances = false;  // true curves instead of fitted ones
  int oracle_cells = 200;
  bool evaluation = true;  // three-split pipeline
  OverlapWeight overlap = OverlapWeight::TruePropensity;
  PipelineSpec pipeline;   // estimands / learners / cut are filled per run
  std::string data;        // fit: dataset CSV (empty: simulate)
  std::uint64_t seed = 1;
  std::string output = "out";
  int workers = 0;         // 0: logical cores

  int resolved_workers() const;
  // Pipeline spec for one cut kind with seed `seed`.
  PipelineSpec pipeline_for(CutKind cut, std::uint64_t seed) const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
// Cross-module compatibility (setting vs estimands, cut admissibility, fold
// counts against n). Throws ConfigError.
void validate_config(const ExperimentConfig& cfg);
std::string config_json(const ExperimentConfig& cfg);

}  // namespace cutlearn
