#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace cutlearn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual Vector predict(const Matrix& x) const = 0;
  double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
};
using PredictorPtr = std::shared_ptr<const Predictor>;

// fit(X, y, w) with nonnegative weights. Rows with zero weight are dropped
// before fitting, so they never influence the result.
class Regressor {
 public:
  virtual ~Regressor() = default;
  virtual PredictorPtr fit(const Matrix& x, const Vector& y, const Vector& w) const = 0;
  virtual std::string name() const = 0;
};
using RegressorPtr = std::shared_ptr<const Regressor>;

struct BaseLearnerConfig {
  double ridge_scale = 1e-3;  // lambda = ridge_scale * n
  int knn_k = 0;              // 0: ceil(sqrt(n))
  int trees = 200;
  int depth = 4;
  double shrinkage = 0.05;
  double subsample = 0.8;
  int bins = 32;
  int min_leaf = 5;
  std::uint64_t seed = 1;
};

class ConstantRegressor final : public Regressor {
 public:
  PredictorPtr fit(const Matrix& x, const Vector& y, const Vector& w) const override;
  std::string name() const override { return "constant"; }
};

class RidgeRegressor final : public Regressor {
 public:
  explicit RidgeRegressor(double scale = 1e-3) : scale_(scale) {}
  PredictorPtr fit(const Matrix& x, const Vector& y, const Vector& w) const override;
  std::string name() const override { return "ridge"; }

 private:
  double scale_;
};

class KnnRegressor final : public Regressor {
 public:
  explicit KnnRegressor(int k = 0) : k_(k) {}
  PredictorPtr fit(const Matrix& x, const Vector& y, const Vector& w) const override;
  std::string name() const override { return "knn"; }

 private:
  int k_;
};

// Histogram gradient boosting on squared loss with weighted leaves.
class BoostingRegressor final : public Regressor {
 public:
  explicit BoostingRegressor(const BaseLearnerConfig& cfg = {}) : cfg_(cfg) {}
  PredictorPtr fit(const Matrix& x, const Vector& y, const Vector& w) const override;
  std::string name() const override { return "boosting"; }

 private:
  BaseLearnerConfig cfg_;
};

// "constant", "ridge", "knn", "boosting".
RegressorPtr make_regressor(const std::string& name, const BaseLearnerConfig& cfg = {});
std::vector<RegressorPtr> make_library(const std::vector<std::string>& names, const BaseLearnerConfig& cfg = {});

// Column standardization fitted on one matrix and reused on others.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardizer fit(const Matrix& x);
  Matrix apply(const Matrix& x) const;
};

// Ridge-penalized logistic regression (intercept unpenalized), IRLS.
struct LogisticFit {
  Standardizer std;
  double intercept = 0.0;
  Vector beta;

  double linear(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  double prob(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
};
LogisticFit fit_logistic(const Matrix& x, const Vector& y, const Vector& w, double lambda, int max_iter = 100);

double expit(double v);
double logit(double p);

// Drop rows with w == 0; returns the kept row indices.
std::vector<Eigen::Index> positive_rows(const Vector& w);

}  // namespace cutlearn
