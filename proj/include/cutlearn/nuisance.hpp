#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cutlearn/ensemble.hpp"
#include "cutlearn/regression.hpp"
#include "cutlearn/survival.hpp"
#include "cutlearn/transforms.hpp"

namespace cutlearn {

enum class ArmHandling { Single, PerArm };
enum class HazardLearner { Logistic, NelsonAalen, PersonPeriod };

std::string to_string(ArmHandling a);
std::string to_string(HazardLearner h);
ArmHandling parse_arm_handling(const std::string& s);
HazardLearner parse_hazard_learner(const std::string& s);

struct NuisanceConfig {
  std::vector<std::string> base_learners{"constant", "ridge", "knn", "boosting"};
  BaseLearnerConfig base;
  double clip_lo = 0.01;
  double clip_hi = 0.99;
  int grid_cap = 512;
  ArmHandling arm_handling = ArmHandling::PerArm;
  HazardLearner hazard_learner = HazardLearner::Logistic;
  std::string person_period_learner = "boosting";
  double hazard_ridge = 1e-3;      // lambda = hazard_ridge * n
  double propensity_ridge = 1e-3;  // lambda = propensity_ridge * n
  std::uint64_t seed = 1;
};

Matrix covariate_matrix(const std::vector<Observation>& data);

class PropensityModel {
 public:
  PropensityModel() = default;
  PropensityModel(LogisticFit fit, double lo, double hi);
  double pi1(const std::vector<double>& x) const;
  double pi(int arm, const std::vector<double>& x) const;
  double lo() const { return lo_; }
  double hi() const { return hi_; }

 private:
  LogisticFit fit_;
  double lo_ = 0.01, hi_ = 0.99;
};

PropensityModel fit_propensity(const std::vector<Observation>& data, const NuisanceConfig& cfg);

// Discrete-time hazard for one target: cause j >= 1, or 0 for censoring.
class HazardModel {
 public:
  virtual ~HazardModel() = default;
  // Per-knot hazard increments in [0, 1] for covariates x under arm a.
  virtual std::vector<double> increments(const std::vector<double>& x, int arm) const = 0;
  const Grid& grid() const { return grid_; }
  int target() const { return target_; }
  // True when the training data had no events of the target type.
  bool degenerate() const { return degenerate_; }

 protected:
  HazardModel(Grid grid, int target) : grid_(std::move(grid)), target_(target) {}
  Grid grid_;
  int target_;
  bool degenerate_ = false;
};
using HazardPtr = std::shared_ptr<const HazardModel>;

// Knots: unique training times (capped at `cap` quantile knots, the largest
// always kept) plus the analysis horizons.
Grid fold_grid(const std::vector<Observation>& train, const std::vector<double>& horizons, int cap);

HazardPtr fit_hazard(const std::vector<Observation>& data, int target, const Grid& grid, const NuisanceConfig& cfg);

// Anything that can hand out a NuisanceSet for a subject.
class NuisanceProvider {
 public:
  virtual ~NuisanceProvider() = default;
  virtual NuisanceSet predict(const Observation& subject) const = 0;
  virtual int causes() const = 0;
};

class FittedNuisances final : public NuisanceProvider {
 public:
  FittedNuisances(Grid grid, PropensityModel pi, std::vector<HazardPtr> cause, HazardPtr censoring);
  NuisanceSet predict(const Observation& subject) const override;
  int causes() const override { return static_cast<int>(cause_.size()); }
  const Grid& grid() const { return grid_; }
  const PropensityModel& propensity() const { return pi_; }
  // Number of hazard models fitted without any event of their type.
  int degenerate_models() const;

 private:
  Grid grid_;
  PropensityModel pi_;
  std::vector<HazardPtr> cause_;
  HazardPtr cens_;
};

std::shared_ptr<FittedNuisances> fit_nuisances(const std::vector<Observation>& train, const std::vector<double>& horizons,
                                               int causes, const NuisanceConfig& cfg);

// Curves for both arms on `grid`. When `grid` differs from the model grid the
// hazard increments are accumulated onto it.
NuisanceSet predict_nuisances(const FittedNuisances& models, const Observation& subject, const Grid& grid);

}  // namespace cutlearn
