#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "cutlearn/config.hpp"
#include "cutlearn/crossfit.hpp"
#include "cutlearn/metrics.hpp"

namespace cutlearn {

// Malformed dataset file; the message carries path:line.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string format_number(double v);  // %.17g, "inf"/"-inf"/"nan"
std::uint64_t fnv1a64(const std::string& s);
std::uint64_t replication_seed(std::uint64_t seed, int replication);

// Header id,x1,...,xp,a,time,status.
void write_dataset(const std::vector<Observation>& obs, const std::string& path);
std::vector<Observation> read_dataset(const std::string& path, int max_cause);

struct SimulateOutput {
  std::string data, truth, manifest;
};
SimulateOutput cmd_simulate(const ExperimentConfig& cfg);

struct FitRun {
  CutKind cut = CutKind::AIPCW;
  PipelineResult result;
  AuditReport audit;
};
// psi-hat per row of run.result.data.obs: out-of-fold for the evaluation
// pipeline, the final model otherwise.
std::vector<double> estimates(const FitRun& run, const LearnerResult& lr);

std::vector<FitRun> run_fit(const ExperimentConfig& cfg, const std::vector<Observation>& data);
// Writes predictions.csv, diagnostics.json and augmented_<cut>.csv.
std::vector<FitRun> cmd_fit(const ExperimentConfig& cfg, std::ostream& log);

struct MetricRow {
  int setting = 1;
  int replication = 0;
  std::string learner;
  std::string estimand;
  std::string cut;
  std::string metric;
  double value = 0.0;
};

struct DistributionRow {
  int setting = 1;
  int replication = 0;
  std::string learner;  // "truth" for psi0
  std::string estimand;
  std::string cut;
  Quantiles q;
};

struct BenchReport {
  std::vector<MetricRow> rows;
  std::vector<DistributionRow> distributions;
  std::vector<AuditReport> audits;  // one per (replication, cut)
  std::vector<std::string> warnings;
  double seconds = 0.0;

  long violations() const;
  std::vector<double> values(const std::string& learner, const std::string& estimand, const std::string& cut,
                             const std::string& metric) const;
  double median(const std::string& learner, const std::string& estimand, const std::string& cut,
                const std::string& metric) const;
};

BenchReport run_bench(const ExperimentConfig& cfg, std::ostream* log = nullptr);
// metrics.csv, summary.csv, psi_distribution.csv and bench.json in dir.
void write_bench(const BenchReport& rep, const ExperimentConfig& cfg, const std::string& dir);
BenchReport cmd_bench(const ExperimentConfig& cfg, std::ostream& log);

}  // namespace cutlearn
