#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cutlearn/regression.hpp"

namespace cutlearn {

struct EnsembleWeights {
  std::vector<double> rho;
  std::vector<std::string> names;
  double cv_loss = 0.0;
  std::vector<double> vertex_loss;  // CV loss of each single candidate
  int iterations = 0;
};

// Simplex-constrained weighted least squares:
//   min_rho sum_i w_i (y_i - P_i rho)^2 / sum_i w_i,  rho >= 0, sum rho = 1.
// Projected gradient from the best vertex with step 1/L.
EnsembleWeights ensemble_select(const Matrix& cv_predictions, const Vector& targets, const Vector& weights);

// Euclidean projection onto the probability simplex.
Vector project_simplex(const Vector& v);

// Cross-validated convex combination of a base-learner library.
class EnsembleRegressor final : public Regressor {
 public:
  EnsembleRegressor(std::vector<RegressorPtr> library, int folds = 5, std::uint64_t seed = 1);
  PredictorPtr fit(const Matrix& x, const Vector& y, const Vector& w) const override;
  std::string name() const override { return "ensemble"; }

 private:
  std::vector<RegressorPtr> lib_;
  int folds_;
  std::uint64_t seed_;
};

class EnsemblePredictor final : public Predictor {
 public:
  EnsemblePredictor(std::vector<PredictorPtr> parts, EnsembleWeights weights);
  Vector predict(const Matrix& x) const override;
  const EnsembleWeights& weights() const { return weights_; }

 private:
  std::vector<PredictorPtr> parts_;
  EnsembleWeights weights_;
};

}  // namespace cutlearn
