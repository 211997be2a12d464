#include "cutlearn/regression.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace cutlearn {

double Predictor::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  Matrix m = row;
  return predict(m)(0);
}

double expit(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  double e = std::exp(v);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

std::vector<Eigen::Index> positive_rows(const Vector& w) {
  std::vector<Eigen::Index> keep;
  keep.reserve(static_cast<std::size_t>(w.size()));
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!(w(i) >= 0.0) || !std::isfinite(w(i))) throw std::invalid_argument("regression weights must be finite and nonnegative");
    if (w(i) > 0.0) keep.push_back(i);
  }
  if (keep.empty()) throw std::invalid_argument("regression needs at least one positive weight");
  return keep;
}

namespace {

struct Compact {
  Matrix x;
  Vector y, w;
};

Compact compact(const Matrix& x, const Vector& y, const Vector& w) {
  if (x.rows() != y.size() || y.size() != w.size()) throw std::invalid_argument("regression: row count mismatch");
  auto keep = positive_rows(w);
  Compact c;
  const auto n = static_cast<Eigen::Index>(keep.size());
  c.x.resize(n, x.cols());
  c.y.resize(n);
  c.w.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    c.x.row(r) = x.row(keep[r]);
    c.y(r) = y(keep[r]);
    c.w(r) = w(keep[r]);
  }
  for (Eigen::Index r = 0; r < n; ++r)
    if (!std::isfinite(c.y(r))) throw std::invalid_argument("regression targets must be finite");
  return c;
}

class ConstantPredictor final : public Predictor {
 public:
  explicit ConstantPredictor(double v) : v_(v) {}
  Vector predict(const Matrix& x) const override { return Vector::Constant(x.rows(), v_); }

 private:
  double v_;
};

double weighted_mean(const Vector& y, const Vector& w) { return w.dot(y) / w.sum(); }

}  // namespace

Standardizer Standardizer::fit(const Matrix& x) {
  Standardizer s;
  s.mean = x.colwise().mean();
  s.scale.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    double sd = std::sqrt((x.col(j).array() - s.mean(j)).square().mean());
    s.scale(j) = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& x) const {
  if (x.cols() != mean.size()) throw std::invalid_argument("feature dimension mismatch");
  return (x.rowwise() - mean).array().rowwise() / scale.array();
}

// ---------------------------------------------------------------- constant

PredictorPtr ConstantRegressor::fit(const Matrix& x, const Vector& y, const Vector& w) const {
  Compact c = compact(x, y, w);
  return std::make_shared<ConstantPredictor>(weighted_mean(c.y, c.w));
}

// ---------------------------------------------------------------- ridge

namespace {

class LinearPredictor final : public Predictor {
 public:
  LinearPredictor(Standardizer s, double b0, Vector beta) : s_(std::move(s)), b0_(b0), beta_(std::move(beta)) {}
  Vector predict(const Matrix& x) const override {
    return (s_.apply(x) * beta_).array() + b0_;
  }

 private:
  Standardizer s_;
  double b0_;
  Vector beta_;
};

}  // namespace

PredictorPtr RidgeRegressor::fit(const Matrix& x, const Vector& y, const Vector& w) const {
  Compact c = compact(x, y, w);
  Standardizer s = Standardizer::fit(c.x);
  Matrix z = s.apply(c.x);
  const double sw = c.w.sum();
  Eigen::RowVectorXd zbar = (c.w.transpose() * z) / sw;
  const double ybar = weighted_mean(c.y, c.w);
  Matrix zc = z.rowwise() - zbar;
  Vector yc = c.y.array() - ybar;
  const double lambda = scale_ * static_cast<double>(c.x.rows());
  Matrix a = zc.transpose() * c.w.asDiagonal() * zc;
  a.diagonal().array() += lambda;
  Vector beta = a.ldlt().solve(zc.transpose() * (c.w.array() * yc.array()).matrix());
  const double b0 = ybar - zbar.dot(beta);
  return std::make_shared<LinearPredictor>(std::move(s), b0, std::move(beta));
}

// ---------------------------------------------------------------- kNN

namespace {

class KnnPredictor final : public Predictor {
 public:
  KnnPredictor(Standardizer s, Matrix z, Vector y, Vector w, int k)
      : s_(std::move(s)), z_(std::move(z)), y_(std::move(y)), w_(std::move(w)), k_(k) {}

  Vector predict(const Matrix& x) const override {
    Matrix q = s_.apply(x);
    Vector out(q.rows());
    const Eigen::Index n = z_.rows();
    std::vector<std::pair<double, Eigen::Index>> d(static_cast<std::size_t>(n));
    const auto k = static_cast<std::size_t>(std::min<Eigen::Index>(k_, n));
    for (Eigen::Index r = 0; r < q.rows(); ++r) {
      for (Eigen::Index i = 0; i < n; ++i) d[i] = {(z_.row(i) - q.row(r)).squaredNorm(), i};
      std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
      double sw = 0.0, sy = 0.0;
      for (std::size_t m = 0; m < k; ++m) {
        sw += w_(d[m].second);
        sy += w_(d[m].second) * y_(d[m].second);
      }
      out(r) = sy / sw;
    }
    return out;
  }

 private:
  Standardizer s_;
  Matrix z_;
  Vector y_, w_;
  int k_;
};

}  // namespace

PredictorPtr KnnRegressor::fit(const Matrix& x, const Vector& y, const Vector& w) const {
  Compact c = compact(x, y, w);
  Standardizer s = Standardizer::fit(c.x);
  Matrix z = s.apply(c.x);
  int k = k_ > 0 ? k_ : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(c.x.rows()))));
  return std::make_shared<KnnPredictor>(std::move(s), std::move(z), std::move(c.y), std::move(c.w), std::max(1, k));
}

// ---------------------------------------------------------------- boosting

namespace {

struct Node {
  int feature = -1;
  double threshold = 0.0;
  int left = -1, right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<Node> nodes;

  double eval(const double* row, Eigen::Index stride) const {
    int i = 0;
    while (nodes[i].feature >= 0) i = row[nodes[i].feature * stride] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
    return nodes[i].value;
  }
};

class BoostingPredictor final : public Predictor {
 public:
  BoostingPredictor(double init, double shrink, std::vector<Tree> trees, Eigen::Index p)
      : init_(init), shrink_(shrink), trees_(std::move(trees)), p_(p) {}

  Vector predict(const Matrix& x) const override {
    if (x.cols() != p_) throw std::invalid_argument("feature dimension mismatch");
    Vector out = Vector::Constant(x.rows(), init_);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const double* row = x.data() + r;
      double acc = 0.0;
      for (const Tree& t : trees_) acc += t.eval(row, x.rows());
      out(r) += shrink_ * acc;
    }
    return out;
  }

 private:
  double init_, shrink_;
  std::vector<Tree> trees_;
  Eigen::Index p_;
};

struct Binned {
  std::vector<std::vector<double>> cuts;  // per feature, ascending
  std::vector<std::vector<std::uint8_t>> bin;  // [feature][row]
};

Binned make_bins(const Matrix& x, int bins) {
  Binned b;
  const Eigen::Index n = x.rows(), p = x.cols();
  b.cuts.resize(static_cast<std::size_t>(p));
  b.bin.assign(static_cast<std::size_t>(p), std::vector<std::uint8_t>(static_cast<std::size_t>(n)));
  for (Eigen::Index j = 0; j < p; ++j) {
    std::vector<double> v(x.col(j).data(), x.col(j).data() + n);
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    auto& cuts = b.cuts[j];
    if (static_cast<int>(v.size()) <= bins) {
      for (std::size_t m = 0; m + 1 < v.size(); ++m) cuts.push_back(0.5 * (v[m] + v[m + 1]));
    } else {
      for (int q = 1; q < bins; ++q) {
        std::size_t pos = static_cast<std::size_t>(static_cast<double>(q) * static_cast<double>(v.size()) / bins);
        double c = 0.5 * (v[pos - 1] + v[pos]);
        if (cuts.empty() || c > cuts.back()) cuts.push_back(c);
      }
    }
    for (Eigen::Index i = 0; i < n; ++i)
      b.bin[j][i] = static_cast<std::uint8_t>(std::lower_bound(cuts.begin(), cuts.end(), x(i, j)) - cuts.begin());
  }
  return b;
}

struct TreeBuilder {
  const Binned& b;
  const Vector& r;
  const Vector& w;
  int depth;
  int min_leaf;
  Tree tree;

  int grow(std::vector<int>& rows, int level) {
    double sw = 0.0, sr = 0.0;
    for (int i : rows) {
      sw += w(i);
      sr += w(i) * r(i);
    }
    int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(Node{});
    tree.nodes[id].value = sw > 0 ? sr / sw : 0.0;
    if (level >= depth || static_cast<int>(rows.size()) < 2 * min_leaf || sw <= 0) return id;

    const double base = sr * sr / sw;
    double best_gain = 1e-12;
    int best_f = -1, best_bin = -1;
    const std::size_t p = b.cuts.size();
    std::vector<double> hw, hr;
    std::vector<int> hc;
    for (std::size_t f = 0; f < p; ++f) {
      const std::size_t nb = b.cuts[f].size() + 1;
      if (nb < 2) continue;
      hw.assign(nb, 0.0);
      hr.assign(nb, 0.0);
      hc.assign(nb, 0);
      const auto& col = b.bin[f];
      for (int i : rows) {
        hw[col[i]] += w(i);
        hr[col[i]] += w(i) * r(i);
        ++hc[col[i]];
      }
      double lw = 0.0, lr = 0.0;
      int lc = 0;
      for (std::size_t s = 0; s + 1 < nb; ++s) {
        lw += hw[s];
        lr += hr[s];
        lc += hc[s];
        const int rc = static_cast<int>(rows.size()) - lc;
        if (lc < min_leaf || rc < min_leaf) continue;
        const double rw = sw - lw;
        if (lw <= 0 || rw <= 0) continue;
        const double gain = lr * lr / lw + (sr - lr) * (sr - lr) / rw - base;
        if (gain > best_gain) {
          best_gain = gain;
          best_f = static_cast<int>(f);
          best_bin = static_cast<int>(s);
        }
      }
    }
    if (best_f < 0) return id;
    std::vector<int> left, right;
    const auto& col = b.bin[best_f];
    for (int i : rows) (col[i] <= best_bin ? left : right).push_back(i);
    rows.clear();
    rows.shrink_to_fit();
    tree.nodes[id].feature = best_f;
    tree.nodes[id].threshold = b.cuts[best_f][best_bin];
    int l = grow(left, level + 1);
    int rr = grow(right, level + 1);
    tree.nodes[id].left = l;
    tree.nodes[id].right = rr;
    return id;
  }
};

}  // namespace

PredictorPtr BoostingRegressor::fit(const Matrix& x, const Vector& y, const Vector& w) const {
  Compact c = compact(x, y, w);
  const Eigen::Index n = c.x.rows();
  const double init = weighted_mean(c.y, c.w);
  Binned b = make_bins(c.x, std::clamp(cfg_.bins, 2, 256));
  Vector f = Vector::Constant(n, init);
  std::mt19937_64 rng(cfg_.seed);
  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  const auto take = static_cast<std::size_t>(
      std::max<double>(1.0, std::floor(cfg_.subsample * static_cast<double>(n))));
  std::vector<Tree> trees;
  trees.reserve(static_cast<std::size_t>(cfg_.trees));
  for (int t = 0; t < cfg_.trees; ++t) {
    Vector r = c.y - f;
    std::vector<int> rows = all;
    if (take < rows.size()) {
      for (std::size_t i = 0; i < take; ++i) {
        std::uniform_int_distribution<std::size_t> u(i, rows.size() - 1);
        std::swap(rows[i], rows[u(rng)]);
      }
      rows.resize(take);
      std::sort(rows.begin(), rows.end());
    }
    TreeBuilder tb{b, r, c.w, cfg_.depth, std::max(1, cfg_.min_leaf), {}};
    tb.grow(rows, 0);
    for (Eigen::Index i = 0; i < n; ++i) f(i) += cfg_.shrinkage * tb.tree.eval(c.x.data() + i, n);
    trees.push_back(std::move(tb.tree));
  }
  return std::make_shared<BoostingPredictor>(init, cfg_.shrinkage, std::move(trees), c.x.cols());
}

// ---------------------------------------------------------------- factory

RegressorPtr make_regressor(const std::string& name, const BaseLearnerConfig& cfg) {
  if (name == "constant") return std::make_shared<ConstantRegressor>();
  if (name == "ridge") return std::make_shared<RidgeRegressor>(cfg.ridge_scale);
  if (name == "knn") return std::make_shared<KnnRegressor>(cfg.knn_k);
  if (name == "boosting") return std::make_shared<BoostingRegressor>(cfg);
  throw std::invalid_argument("unknown base learner '" + name + "'");
}

std::vector<RegressorPtr> make_library(const std::vector<std::string>& names, const BaseLearnerConfig& cfg) {
  if (names.empty()) throw std::invalid_argument("base learner library is empty");
  std::vector<RegressorPtr> out;
  for (const auto& n : names) out.push_back(make_regressor(n, cfg));
  return out;
}

// ---------------------------------------------------------------- logistic

double LogisticFit::linear(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  double v = intercept;
  for (Eigen::Index j = 0; j < beta.size(); ++j) v += beta(j) * (row(j) - std.mean(j)) / std.scale(j);
  return v;
}

double LogisticFit::prob(const Eigen::Ref<const Eigen::RowVectorXd>& row) const { return expit(linear(row)); }

LogisticFit fit_logistic(const Matrix& x, const Vector& y, const Vector& w, double lambda, int max_iter) {
  Compact c = compact(x, y, w);
  LogisticFit fit;
  fit.std = Standardizer::fit(c.x);
  Matrix z = fit.std.apply(c.x);
  const Eigen::Index n = z.rows(), p = z.cols();
  Matrix d(n, p + 1);
  d.col(0).setOnes();
  d.rightCols(p) = z;
  Vector theta = Vector::Zero(p + 1);
  const double ybar = std::clamp(weighted_mean(c.y, c.w), 1e-6, 1 - 1e-6);
  theta(0) = logit(ybar);
  Vector pen = Vector::Constant(p + 1, lambda);
  pen(0) = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector eta = d * theta;
    Vector mu = eta.unaryExpr([](double v) { return expit(v); });
    Vector wt = (c.w.array() * mu.array() * (1.0 - mu.array())).max(1e-12);
    Vector grad = d.transpose() * (c.w.array() * (c.y - mu).array()).matrix() - pen.cwiseProduct(theta);
    Matrix h = d.transpose() * wt.asDiagonal() * d;
    h.diagonal() += pen;
    Vector step = h.ldlt().solve(grad);
    theta += step;
    if (step.cwiseAbs().maxCoeff() < 1e-10) break;
  }
  fit.intercept = theta(0);
  fit.beta = theta.tail(p);
  return fit;
}

}  // namespace cutlearn
