#include "cutlearn/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace cutlearn {

Vector project_simplex(const Vector& v) {
  const Eigen::Index n = v.size();
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    cum += u[k];
    double t = (cum - 1.0) / static_cast<double>(k + 1);
    if (u[k] - t > 0) theta = t;
  }
  return (v.array() - theta).max(0.0);
}

EnsembleWeights ensemble_select(const Matrix& p, const Vector& y, const Vector& w) {
  const Eigen::Index n = p.rows(), v = p.cols();
  if (v < 1) throw std::invalid_argument("ensemble_select: no candidates");
  if (y.size() != n || w.size() != n) throw std::invalid_argument("ensemble_select: length mismatch");
  if (!p.allFinite() || !y.allFinite() || !w.allFinite()) throw std::invalid_argument("ensemble_select: non-finite input");
  if ((w.array() < 0).any()) throw std::invalid_argument("ensemble_select: negative weight");
  const double sw = w.sum();
  if (!(sw > 0)) throw std::invalid_argument("ensemble_select: all weights are zero");

  Matrix q = p.transpose() * w.asDiagonal() * p / sw;
  Vector b = p.transpose() * (w.array() * y.array()).matrix() / sw;
  const double c = (w.array() * y.array().square()).sum() / sw;
  auto loss = [&](const Vector& r) { return std::max(0.0, r.dot(q * r) - 2.0 * b.dot(r) + c); };
  auto direct_loss = [&](const Vector& r) {
    return (w.array() * (y - p * r).array().square()).sum() / sw;
  };

  EnsembleWeights out;
  out.vertex_loss.resize(static_cast<std::size_t>(v));
  Eigen::Index best = 0;
  for (Eigen::Index j = 0; j < v; ++j) {
    out.vertex_loss[j] = (w.array() * (y - p.col(j)).array().square()).sum() / sw;
    if (out.vertex_loss[j] < out.vertex_loss[best]) best = j;
  }
  Vector rho = Vector::Zero(v);
  rho(best) = 1.0;
  if (v > 1) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(q, Eigen::EigenvaluesOnly);
    const double lmax = std::max(es.eigenvalues().maxCoeff(), 1e-300);
    const double step = 1.0 / (2.0 * lmax);
    double prev = loss(rho);
    for (int it = 0; it < 10000; ++it) {
      Vector next = project_simplex(rho - step * 2.0 * (q * rho - b));
      const double cur = loss(next);
      out.iterations = it + 1;
      if (cur > prev) break;
      const double moved = (next - rho).norm();
      const double delta = prev - cur;
      rho = next;
      prev = cur;
      if (delta < 1e-12 && moved < 1e-9) break;
    }
  }
  // The quadratic form can lose a few ulps; keep the vertex if it is better.
  double fin = direct_loss(rho);
  if (fin > out.vertex_loss[best]) {
    rho.setZero();
    rho(best) = 1.0;
    fin = out.vertex_loss[best];
  }
  out.rho.assign(rho.data(), rho.data() + v);
  out.cv_loss = fin;
  return out;
}

EnsembleRegressor::EnsembleRegressor(std::vector<RegressorPtr> library, int folds, std::uint64_t seed)
    : lib_(std::move(library)), folds_(folds), seed_(seed) {
  if (lib_.empty()) throw std::invalid_argument("ensemble library is empty");
  if (folds_ < 2) throw std::invalid_argument("ensemble needs at least 2 CV folds");
}

EnsemblePredictor::EnsemblePredictor(std::vector<PredictorPtr> parts, EnsembleWeights weights)
    : parts_(std::move(parts)), weights_(std::move(weights)) {}

Vector EnsemblePredictor::predict(const Matrix& x) const {
  Vector out = Vector::Zero(x.rows());
  for (std::size_t j = 0; j < parts_.size(); ++j)
    if (parts_[j] && weights_.rho[j] > 0) out += weights_.rho[j] * parts_[j]->predict(x);
  return out;
}

PredictorPtr EnsembleRegressor::fit(const Matrix& x0, const Vector& y0, const Vector& w0) const {
  if (x0.rows() != y0.size() || y0.size() != w0.size()) throw std::invalid_argument("ensemble: row count mismatch");
  auto keep = positive_rows(w0);
  const auto n = static_cast<Eigen::Index>(keep.size());
  Matrix x(n, x0.cols());
  Vector y(n), w(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    x.row(r) = x0.row(keep[r]);
    y(r) = y0(keep[r]);
    w(r) = w0(keep[r]);
  }
  const auto v = static_cast<Eigen::Index>(lib_.size());
  EnsembleWeights ew;
  for (const auto& l : lib_) ew.names.push_back(l->name());
  const int k = static_cast<int>(std::min<Eigen::Index>(folds_, n / 2));
  if (v == 1 || k < 2) {
    ew.rho.assign(static_cast<std::size_t>(v), 0.0);
    ew.rho[0] = 1.0;
    ew.vertex_loss.assign(static_cast<std::size_t>(v), 0.0);
  } else {
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed_);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> fold(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) fold[perm[i]] = static_cast<int>(i % k);
    Matrix cv(n, v);
    for (int f = 0; f < k; ++f) {
      std::vector<Eigen::Index> tr, te;
      for (Eigen::Index i = 0; i < n; ++i) (fold[i] == f ? te : tr).push_back(i);
      Matrix xt(static_cast<Eigen::Index>(tr.size()), x.cols()), xv(static_cast<Eigen::Index>(te.size()), x.cols());
      Vector yt(static_cast<Eigen::Index>(tr.size())), wt(static_cast<Eigen::Index>(tr.size()));
      for (std::size_t i = 0; i < tr.size(); ++i) {
        xt.row(i) = x.row(tr[i]);
        yt(i) = y(tr[i]);
        wt(i) = w(tr[i]);
      }
      for (std::size_t i = 0; i < te.size(); ++i) xv.row(i) = x.row(te[i]);
      for (Eigen::Index j = 0; j < v; ++j) {
        Vector pr = lib_[j]->fit(xt, yt, wt)->predict(xv);
        for (std::size_t i = 0; i < te.size(); ++i) cv(te[i], j) = pr(i);
      }
    }
    auto names = ew.names;
    ew = ensemble_select(cv, y, w);
    ew.names = std::move(names);
  }
  std::vector<PredictorPtr> parts(static_cast<std::size_t>(v));
  for (Eigen::Index j = 0; j < v; ++j)
    if (ew.rho[j] > 0) parts[j] = lib_[j]->fit(x, y, w);
  return std::make_shared<EnsemblePredictor>(std::move(parts), std::move(ew));
}

}  // namespace cutlearn
