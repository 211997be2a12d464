#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cutlearn/ensemble.hpp"
#include "cutlearn/regression.hpp"
#include "cutlearn/transforms.hpp"

namespace cutlearn {

enum class XWeight { Propensity, Zero, One };
std::string to_string(XWeight w);
XWeight parse_x_weight(const std::string& s);

struct LearnerConfig {
  std::vector<std::string> base_learners{"constant", "ridge", "knn", "boosting"};
  BaseLearnerConfig base;
  int cv_folds = 5;
  std::uint64_t seed = 1;
  int min_arm_size = 10;
  XWeight x_weight = XWeight::Propensity;
};

struct HteDiagnostics {
  int n = 0;
  int floored = 0;        // floored denominators among the training targets
  int zero_weight = 0;    // rows dropped because w* == 0
  std::vector<int> fold_sizes;
  double floored_fraction() const { return n > 0 ? static_cast<double>(floored) / n : 0.0; }
};

// A fitted HTE learner. Immutable once built.
class HteEstimate {
 public:
  using RawFn = std::function<Vector(const Matrix&)>;

  HteEstimate() = default;
  HteEstimate(LearnerKind kind, EstimandSpec spec, int dim, RawFn raw, std::vector<EnsembleWeights> ensembles,
              std::vector<std::string> parts);

  LearnerKind kind() const { return kind_; }
  const EstimandSpec& spec() const { return spec_; }
  int dim() const { return dim_; }
  // One entry per fitted regression (S: 1, T: 2 per arm, X: 2 per arm, ...).
  const std::vector<EnsembleWeights>& ensembles() const { return ensembles_; }
  const std::vector<std::string>& parts() const { return parts_; }
  HteDiagnostics& diagnostics() { return diag_; }
  const HteDiagnostics& diagnostics() const { return diag_; }

  // Unclipped learner output.
  Vector raw(const Matrix& x) const;
  Vector predict(const Matrix& x) const;
  double predict(const std::vector<double>& x) const;

 private:
  LearnerKind kind_ = LearnerKind::S;
  EstimandSpec spec_;
  int dim_ = 0;
  RawFn raw_;
  std::vector<EnsembleWeights> ensembles_;
  std::vector<std::string> parts_;
  HteDiagnostics diag_;
};

double clip_hte(const EstimandSpec& spec, double v);
double predict_hte(const HteEstimate& model, const std::vector<double>& x);

// Weighted ensemble regression of y on x.
std::shared_ptr<const EnsemblePredictor> fit_ensemble(const Matrix& x, const Vector& y, const Vector& w,
                                                      const LearnerConfig& cfg, std::uint64_t salt);

// S: one regression on (A, X, A*X); T: one per arm. psi = mu(1, X) - mu(0, X).
HteEstimate fit_mean_difference(LearnerKind kind, const EstimandSpec& spec, const Matrix& x,
                                const std::vector<int>& arm, const Vector& y, const LearnerConfig& cfg);

// Weighted regression of Y* on X with weights w*.
HteEstimate fit_transformed(LearnerKind kind, const EstimandSpec& spec, const Matrix& x,
                            const std::vector<TransformedSample>& samples, const LearnerConfig& cfg);

using PropensityFn = std::function<double(const Eigen::Ref<const Eigen::RowVectorXd>&)>;

// Per-arm regressions of the imputed effects, combined as
// w(X) psi(0, X) + (1 - w(X)) psi(1, X).
HteEstimate fit_x_learner(const EstimandSpec& spec, const Matrix& x, const std::vector<int>& arm,
                          const Vector& imputed, PropensityFn pi1, const LearnerConfig& cfg);

// Features (A, X, A*X) for the S-learner.
Matrix s_features(const Matrix& x, const std::vector<int>& arm);
Matrix s_features(const Matrix& x, int arm);

// Structured summary: learner, estimand, ensemble weights, diagnostics.
std::string summary_json(const HteEstimate& model);

}  // namespace cutlearn
