#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cutlearn/transforms.hpp"

namespace cutlearn {

struct MetricsReport {
  double pehe = 0.0, pehe_h = 0.0;
  double gain = 0.0, gain_h = 0.0;
  double regret = 0.0, regret_h = 0.0;
  double grd = 0.0, grd_h = 0.0;
  double grr = 0.0, grr_h = 0.0;
  bool grr_infinite = false, grr_h_infinite = false;  // regret == 0
  double accuracy = 0.0;
  double prevalence = 0.0;
  double eps_ate = 0.0, eps_ate_h = 0.0;
  // The constant predictor P_n psi0 (or its h-weighted mean).
  double baseline_gain = 0.0, baseline_regret = 0.0, baseline_grd = 0.0;
  double baseline_gain_h = 0.0, baseline_regret_h = 0.0, baseline_grd_h = 0.0;

  // (name, value) in a fixed order, GRR as +inf when flagged.
  std::vector<std::pair<std::string, double>> items() const;
};

// h: overlap weights (defaults to 1). h_hat: estimated weights for the
// psi-hat side of eps_ate_h (defaults to h).
MetricsReport evaluate(const std::vector<double>& psi_hat, const std::vector<double>& psi0,
                       const std::optional<std::vector<double>>& h = std::nullopt,
                       const std::optional<std::vector<double>>& h_hat = std::nullopt);

// h(X) = pi(1|X) pi(0|X).
std::vector<double> overlap_weights(const std::vector<double>& pi1);

struct Quantiles {
  double min = 0, q25 = 0, median = 0, q75 = 0, max = 0, mean = 0;
  double whisker_lo = 0, whisker_hi = 0;  // most extreme points within 1.5 IQR
  std::size_t n = 0;
  double iqr() const { return q75 - q25; }
};
// Linear-interpolation quantiles (type 7). Empty input gives n = 0.
Quantiles summarize(std::vector<double> v);

// Shape constraints across estimands sharing one horizon.
enum class ShapeTarget { Contrast, Level };

struct ShapeInput {
  EstimandSpec spec;
  std::vector<double> values;
};

struct ShapeCheck {
  std::string name;
  double horizon = 0.0;
  bool complete = false;
  std::vector<std::string> missing;
  std::vector<double> residuals;  // per subject, empty when incomplete
  Quantiles summary;
};

struct ShapeReport {
  std::vector<ShapeCheck> checks;
};

// survival + sum_j cif_j = 1 (levels) or 0 (contrasts); rmst + sum_j rmtl_j
// = tau or 0; separable direct + indirect = total (contrasts only).
ShapeReport shape_diagnostics(const std::vector<ShapeInput>& inputs, int causes, ShapeTarget target = ShapeTarget::Contrast);

}  // namespace cutlearn
