#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cutlearn/nuisance.hpp"
#include "cutlearn/survival.hpp"
#include "cutlearn/transforms.hpp"

namespace cutlearn {

enum class CovariateLaw { Uniform, Normal };

struct SimConfig {
  int setting = 1;  // 1..4
  int n = 1000;
  std::uint64_t seed = 1;
  CovariateLaw law = CovariateLaw::Uniform;
  // Self-test variant: competing-cause hazard made arm-invariant.
  bool equal_competing = false;
};

std::uint64_t splitmix64(std::uint64_t x);
// Seed for the stream of subject `id`.
std::uint64_t subject_seed(std::uint64_t seed, long id);

// Analytic data-generating model for one setting.
class TrueModel {
 public:
  explicit TrueModel(int setting, bool equal_competing = false);

  int setting() const { return setting_; }
  int causes() const { return setting_ >= 3 ? 2 : 1; }
  double default_horizon() const { return setting_ >= 3 ? 4.0 : 2.0; }

  double pi1(const std::vector<double>& x) const;
  // Settings 3/4: constant cause-specific hazard lambda_j under arm a.
  double rate(int cause, int arm, const std::vector<double>& x) const;

  double surv(double t, int arm, const std::vector<double>& x) const;
  double cens_surv(double t, int arm, const std::vector<double>& x) const;
  // CIF of cause j with the cause-j hazard from arm aj and the competing
  // hazard from arm ajbar (aj == ajbar gives the usual CIF).
  double cif(int cause, double t, int aj, int ajbar, const std::vector<double>& x) const;
  double rmst(double tau, int arm, const std::vector<double>& x) const;
  double rmtl(int cause, double tau, int aj, int ajbar, const std::vector<double>& x) const;

  // Target of the learner CUT for an observation in arm a.
  double arm_target(const EstimandSpec& spec, int arm, const std::vector<double>& x) const;
  double true_hte(const EstimandSpec& spec, const std::vector<double>& x) const;

  // Both arms' true curves on a midpoint grid with `cells` cells per horizon,
  // extended to reach * horizon (inverse weights at event times past the
  // horizon need G there).
  NuisanceSet curves(const std::vector<double>& x, double horizon, int cells, int reach = 10) const;
  // One observation from the conditional law given (x, arm).
  Observation sample(const std::vector<double>& x, int arm, std::mt19937_64& rng, long id = 0) const;
  std::string coefficient_table() const;

 private:
  int setting_;
  bool equal_competing_;
};

double true_hte(int setting, const EstimandSpec& spec, const std::vector<double>& x);

struct SubjectTruth {
  long id = 0;
  double pi1 = 0.5;
  std::array<double, 2> time{};   // T^a
  std::array<int, 2> cause{};     // J^a
  std::array<double, 2> cens{};   // C under arm a
  std::array<double, 4> pair_time{};  // T^{aj, ajbar}, index 2*aj + ajbar
  std::array<int, 4> pair_cause{};
};

struct SimData {
  SimConfig config;
  std::vector<Observation> obs;
  std::vector<SubjectTruth> truth;

  std::vector<double> psi(const EstimandSpec& spec) const;
  double arm_ratio() const;  // n1 / n0
};

SimData generate(const SimConfig& cfg);

// Supported estimands for a setting (separable families need 2 causes).
bool supports(int setting, const EstimandSpec& spec);

// Oracle nuisances: true propensity and true curves.
class OracleNuisances final : public NuisanceProvider {
 public:
  OracleNuisances(TrueModel model, double horizon, int cells = 200, int reach = 10);
  NuisanceSet predict(const Observation& subject) const override;
  int causes() const override { return model_.causes(); }

 private:
  TrueModel model_;
  double horizon_;
  int cells_;
  int reach_;
};

// Covariate-free Nelson-Aalen curves per arm on the midpoint grid, from a
// large marginal sample of counterfactual (T^a, C^a) pairs.
std::array<ArmCurves, 2> marginal_curves(const TrueModel& model, double horizon, int cells, int n, std::uint64_t seed,
                                         CovariateLaw law = CovariateLaw::Uniform);

// Midpoint grid with `cells` points over [0, horizon].
Grid midpoint_grid(double horizon, int cells);

}  // namespace cutlearn
