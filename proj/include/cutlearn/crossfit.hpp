#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cutlearn/learners.hpp"
#include "cutlearn/nuisance.hpp"
#include "cutlearn/transforms.hpp"

namespace cutlearn {

// How mu(a, X) in the transformed targets is obtained at stage 2.
enum class MuMode { Implied, Regression };
std::string to_string(MuMode m);
MuMode parse_mu_mode(const std::string& s);

struct SplitPlan {
  int k1 = 5;
  int k2 = 5;
  int k3 = 5;
  bool stratify = true;  // by arm x (event vs censored)
  int max_attempts = 100;
};

struct PipelineSpec {
  std::vector<EstimandSpec> estimands;
  CutKind cut = CutKind::AIPCW;
  CutOptions cut_options;
  std::vector<LearnerKind> learners = all_learners();
  NuisanceConfig nuisance;
  LearnerConfig learner;
  SplitPlan split;
  MuMode mu_mode = MuMode::Implied;
  TargetOptions target;
  std::uint64_t seed = 1;
  int workers = 1;
  int causes = 1;
  // Replaces the stage-1 nuisance fits (no splitting for nuisances).
  std::shared_ptr<const NuisanceProvider> oracle;
  bool export_all_cuts = true;
  double floor_warn_fraction = 0.05;

  void validate(std::size_t n, bool three_split) const;
};

// Folds 0..k-1 keyed on hashed stable ids; rows in any order give the same
// assignment for the same ids.
std::vector<int> assign_folds(const std::vector<Observation>& data, int k, std::uint64_t seed, int stage, int attempt,
                              bool stratify);

struct FoldRecord {
  int stage = 0;
  int fold = 0;
  std::vector<long> train_ids;  // sorted
  std::vector<long> valid_ids;  // sorted
};

struct EstimandColumns {
  EstimandSpec spec;
  std::vector<CutKind> kinds;             // exported CUT kinds
  std::vector<std::vector<double>> cuts;  // [kind][row]
  std::vector<double> y;                  // CUT used by the learners
  std::vector<double> phi;                // IF transform
  std::vector<double> mu_eta[2];          // implied by the stage-1 nuisances
  std::vector<int> floored;               // floored denominators per row (stage 1)
  std::vector<double> pi_hat;             // stage-2 propensity
  std::vector<double> mu_hat[2];          // mu used in the stage-2 targets
  std::vector<LearnerKind> target_kinds;
  std::vector<std::vector<TransformedSample>> targets;  // [target kind][row]

  const std::vector<TransformedSample>& target(LearnerKind k) const;
};

// Rows sorted by id. fold[s][i] is the stage-(s+1) validation fold of row i.
struct AugmentedData {
  std::vector<Observation> obs;
  std::vector<double> pi1_stage1;
  std::vector<EstimandColumns> columns;
  std::vector<std::vector<int>> fold;
  std::vector<FoldRecord> records;
  bool oracle = false;
};

struct LearnerResult {
  LearnerKind kind = LearnerKind::S;
  EstimandSpec spec;
  std::optional<HteEstimate> model;  // two-split pipeline: fitted on all rows
  std::vector<double> oof;           // evaluation pipeline: out-of-fold psi-hat per row
  int oof_stage = 0;
  HteDiagnostics diagnostics;
};

struct AuditReport {
  long checked = 0;
  long violations = 0;
  std::vector<std::string> messages;  // first few violations
  bool ok() const { return violations == 0; }
};

struct PipelineResult {
  AugmentedData data;
  std::vector<LearnerResult> learners;
  std::vector<std::string> warnings;
  int degenerate_hazards = 0;
  double seconds = 0.0;

  const LearnerResult& find(LearnerKind k, const EstimandSpec& spec) const;
};

// Two-split pipeline: stage-1 nuisances and CUTs, S/T/IF on the pooled augmented data,
// stage-2 targets, transformed learners on all rows.
PipelineResult run_pipeline(const std::vector<Observation>& data, const PipelineSpec& spec);
// Three-split variant: every reported psi-hat(X_i) comes from a model not
// trained on row i (S/T at stage 2, the rest at stage 3).
PipelineResult run_evaluation_pipeline(const std::vector<Observation>& data, const PipelineSpec& spec);

// Checks that no per-row value was produced by a model trained on that row.
AuditReport audit_provenance(const PipelineResult& result);

// Original columns, fold ids, CUTs, transforms and (w*, Y*) per learner.
void write_augmented_csv(const AugmentedData& data, const std::string& path);

// Runs fn(0..tasks-1) on up to `workers` threads. The first exception (by
// task index) is rethrown after all tasks finish.
void parallel_for(int tasks, int workers, const std::function<void(int)>& fn);

}  // namespace cutlearn
