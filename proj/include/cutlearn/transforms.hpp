#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "cutlearn/survival.hpp"

namespace cutlearn {

enum class Family {
  Survival,
  Rmst,
  Cif,
  Rmtl,
  SepDirectCif,
  SepDirectRmtl,
  SepIndirectCif,
  SepIndirectRmtl,
};

std::string to_string(Family f);
Family parse_family(const std::string& s);

// arm_param is a_jbar for the direct families and a_j for the indirect ones.
struct EstimandSpec {
  Family family = Family::Survival;
  double horizon = 1.0;
  int cause = 1;
  int arm_param = 1;

  bool separable() const;
  bool needs_cause() const;
  // RMST / RMTL style: integrated over [0, tau].
  bool restricted() const;
  // Predictions are clipped to [-bound, bound].
  double clip_bound() const;
  std::string name() const;
  void validate(int max_cause) const;
};

enum class CutKind { BJ, IPCW1, IPCW2, IPCW, AIPCW };
enum class AipcwForm { Censoring, Event };

std::string to_string(CutKind k);
CutKind parse_cut_kind(const std::string& s);
bool admissible(Family f, CutKind k);
std::vector<CutKind> admissible_kinds(Family f);

struct CutOptions {
  double floor = 0.01;
  AipcwForm form = AipcwForm::Event;
  // Separable CUTs: use the bracketed grouping (first printed form).
  bool bracketed = false;
};

struct CutValue {
  double value = 0.0;
  int floored = 0;
};

// Per-subject nuisance bundle: both arms on one grid plus the propensity.
struct NuisanceSet {
  long id = 0;
  int fold = -1;
  double pi1 = 0.5;
  std::array<ArmCurves, 2> arm;

  double pi(int a) const { return a == 1 ? pi1 : 1.0 - pi1; }
};

namespace detail {
struct Integral;
struct Tracks;
}  // namespace detail

// Evaluates the non-separable CUTs for one arm's curves and one estimand.
// Prefix sums are built once, so each observation costs O(log K).
// The curves must outlive the evaluator.
class CutEvaluator {
 public:
  CutEvaluator(const ArmCurves& curves, const EstimandSpec& spec, const CutOptions& opts = {});
  ~CutEvaluator();
  CutEvaluator(const CutEvaluator&) = delete;
  CutEvaluator& operator=(const CutEvaluator&) = delete;

  CutValue operator()(const Observation& obs, CutKind kind) const;
  CutValue aipcw(const Observation& obs, AipcwForm form) const;
  // Conditional mean implied by the curves (S(t), RMST, F_j(t), RMTL_j).
  double plug_in() const { return plug_in_; }

 private:
  CutValue bj(const Observation& obs) const;
  CutValue ipcw(const Observation& obs, CutKind kind) const;

  EstimandSpec spec_;
  CutOptions opts_;
  std::unique_ptr<detail::Tracks> tr_;
  std::vector<detail::Integral> ints_;
  double plug_in_ = 0.0;
};

// Separable direct / indirect CUTs for an observation in arm a with the
// other component fixed at a_star. Needs both arms' curves.
class SeparableEvaluator {
 public:
  SeparableEvaluator(const std::array<ArmCurves, 2>& curves, const EstimandSpec& spec, int a, int a_star,
                     const CutOptions& opts = {});
  ~SeparableEvaluator();
  SeparableEvaluator(const SeparableEvaluator&) = delete;
  SeparableEvaluator& operator=(const SeparableEvaluator&) = delete;

  CutValue operator()(const Observation& obs) const;
  CutValue value(const Observation& obs, bool bracketed) const;
  // Competing-cause martingale term built from the (1 - a_star, a_star)
  // hybrid curve, integrated against this evaluator's arm.
  CutValue competing_term(const Observation& obs) const;
  double plug_in() const { return plug_in_; }

 private:
  EstimandSpec spec_;
  CutOptions opts_;
  bool direct_ = true;
  double sigma_ = 1.0;
  std::unique_ptr<detail::Tracks> tr_;
  std::vector<detail::Integral> ints_;
  double plug_in_ = 0.0;
};

// Hybrid curves mixing the cause-j hazard of arm aj with the competing
// hazard of arm ajbar.
struct HybridCurves {
  std::vector<double> surv;
  std::vector<double> cif;
  std::vector<double> rmtl;  // integral of cif over [0, u_k]
};
HybridCurves hybrid_curves(const std::array<ArmCurves, 2>& curves, int cause, int aj, int ajbar);

CutValue cut_value(const Observation& obs, const NuisanceSet& eta, const EstimandSpec& spec, CutKind kind, int arm,
                   const CutOptions& opts = {});
CutValue cut_separable(const Observation& obs, const NuisanceSet& eta, const EstimandSpec& spec, int a, int a_star,
                       const CutOptions& opts = {});
// The CUT used by the learners: own arm, and for separable families the
// arm pairing that targets the estimand's counterfactual.
CutValue learner_cut(const Observation& obs, const NuisanceSet& eta, const EstimandSpec& spec, CutKind kind,
                     const CutOptions& opts = {});
// mu(a, X) implied by the curves for the learner target of this estimand.
double implied_mean(const NuisanceSet& eta, const EstimandSpec& spec, int arm);
CutValue if_transform(const Observation& obs, const NuisanceSet& eta, const EstimandSpec& spec,
                      const CutOptions& opts = {});

enum class LearnerKind { S, T, X, IF, IPTW, RA, AIPTW, MC, MCEA, R, U };

std::string to_string(LearnerKind k);
LearnerKind parse_learner(const std::string& s);
bool is_transformed(LearnerKind k);
const std::vector<LearnerKind>& all_learners();

struct TransformedSample {
  double weight = 1.0;
  double outcome = 0.0;
  LearnerKind kind = LearnerKind::AIPTW;
  long id = 0;
  int fold = -1;
  bool floored = false;
};

struct TargetOptions {
  bool ra_cross_arm = true;
  double residual_floor = 1e-3;
};

// (w*, Y*) for a transformed-minimization learner. For the IF learner,
// y_cut carries the IF value.
TransformedSample minimization_target(LearnerKind kind, double y_cut, const Observation& obs, double mu0, double mu1,
                                      double pi1, const TargetOptions& opts = {});

}  // namespace cutlearn
