#include "cutlearn/learners.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace cutlearn {

std::string to_string(XWeight w) {
  switch (w) {
    case XWeight::Propensity: return "propensity";
    case XWeight::Zero: return "zero";
    case XWeight::One: return "one";
  }
  return "?";
}

XWeight parse_x_weight(const std::string& s) {
  for (XWeight w : {XWeight::Propensity, XWeight::Zero, XWeight::One})
    if (to_string(w) == s) return w;
  throw std::invalid_argument("unknown X-learner weight '" + s + "'");
}

HteEstimate::HteEstimate(LearnerKind kind, EstimandSpec spec, int dim, RawFn raw, std::vector<EnsembleWeights> ensembles,
                         std::vector<std::string> parts)
    : kind_(kind),
      spec_(spec),
      dim_(dim),
      raw_(std::move(raw)),
      ensembles_(std::move(ensembles)),
      parts_(std::move(parts)) {}

Vector HteEstimate::raw(const Matrix& x) const {
  if (!raw_) throw std::logic_error("HTE estimate is empty");
  if (x.cols() != dim_)
    throw std::invalid_argument("covariate dimension " + std::to_string(x.cols()) + " != trained dimension " +
                                std::to_string(dim_));
  return raw_(x);
}

Vector HteEstimate::predict(const Matrix& x) const {
  Vector v = raw(x);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = clip_hte(spec_, v[i]);
  return v;
}

double HteEstimate::predict(const std::vector<double>& x) const {
  Matrix m(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j) m(0, static_cast<Eigen::Index>(j)) = x[j];
  return predict(m)[0];
}

double clip_hte(const EstimandSpec& spec, double v) {
  const double b = spec.clip_bound();
  if (std::isnan(v)) return 0.0;
  return std::clamp(v, -b, b);
}

double predict_hte(const HteEstimate& model, const std::vector<double>& x) { return model.predict(x); }

std::shared_ptr<const EnsemblePredictor> fit_ensemble(const Matrix& x, const Vector& y, const Vector& w,
                                                      const LearnerConfig& cfg, std::uint64_t salt) {
  BaseLearnerConfig base = cfg.base;
  base.seed = cfg.base.seed ^ (salt * 0x9e3779b97f4a7c15ULL);
  EnsembleRegressor ens(make_library(cfg.base_learners, base), cfg.cv_folds, cfg.seed + salt);
  auto p = std::dynamic_pointer_cast<const EnsemblePredictor>(ens.fit(x, y, w));
  if (!p) throw std::logic_error("ensemble fit returned an unexpected predictor");
  return p;
}

Matrix s_features(const Matrix& x, const std::vector<int>& arm) {
  const Eigen::Index n = x.rows(), p = x.cols();
  Matrix f(n, 1 + 2 * p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = arm[static_cast<std::size_t>(i)];
    f(i, 0) = a;
    f.block(i, 1, 1, p) = x.row(i);
    f.block(i, 1 + p, 1, p) = a * x.row(i);
  }
  return f;
}

Matrix s_features(const Matrix& x, int arm) {
  return s_features(x, std::vector<int>(static_cast<std::size_t>(x.rows()), arm));
}

namespace {

std::vector<Eigen::Index> rows_of_arm(const std::vector<int>& arm, int a) {
  std::vector<Eigen::Index> r;
  for (std::size_t i = 0; i < arm.size(); ++i)
    if (arm[i] == a) r.push_back(static_cast<Eigen::Index>(i));
  return r;
}

void check_finite(const Vector& y, const char* what) {
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (!std::isfinite(y[i])) throw std::invalid_argument(std::string(what) + " has a non-finite value at row " + std::to_string(i));
}

}  // namespace

HteEstimate fit_mean_difference(LearnerKind kind, const EstimandSpec& spec, const Matrix& x,
                                const std::vector<int>& arm, const Vector& y, const LearnerConfig& cfg) {
  if (static_cast<std::size_t>(x.rows()) != arm.size() || x.rows() != y.size())
    throw std::invalid_argument("fit_mean_difference: size mismatch");
  check_finite(y, "CUT outcome");
  const int dim = static_cast<int>(x.cols());
  HteEstimate out;
  if (kind == LearnerKind::S) {
    auto m = fit_ensemble(s_features(x, arm), y, Vector::Ones(y.size()), cfg, 11);
    out = HteEstimate(
        kind, spec, dim, [m](const Matrix& z) -> Vector { return m->predict(s_features(z, 1)) - m->predict(s_features(z, 0)); },
        {m->weights()}, {"mu(A,X)"});
  } else if (kind == LearnerKind::T) {
    std::array<std::shared_ptr<const EnsemblePredictor>, 2> m;
    for (int a = 0; a < 2; ++a) {
      auto r = rows_of_arm(arm, a);
      if (static_cast<int>(r.size()) < cfg.min_arm_size)
        throw std::invalid_argument("T-learner: arm " + std::to_string(a) + " has " + std::to_string(r.size()) +
                                    " rows, fewer than min_arm_size " + std::to_string(cfg.min_arm_size));
      m[a] = fit_ensemble(x(r, Eigen::all), y(r), Vector::Ones(static_cast<Eigen::Index>(r.size())), cfg, 21 + a);
    }
    out = HteEstimate(
        kind, spec, dim, [m](const Matrix& z) -> Vector { return m[1]->predict(z) - m[0]->predict(z); },
        {m[0]->weights(), m[1]->weights()}, {"mu(0,X)", "mu(1,X)"});
  } else {
    throw std::invalid_argument("fit_mean_difference expects S or T, got " + to_string(kind));
  }
  out.diagnostics().n = static_cast<int>(y.size());
  return out;
}

HteEstimate fit_transformed(LearnerKind kind, const EstimandSpec& spec, const Matrix& x,
                            const std::vector<TransformedSample>& samples, const LearnerConfig& cfg) {
  if (static_cast<std::size_t>(x.rows()) != samples.size()) throw std::invalid_argument("fit_transformed: size mismatch");
  const auto n = static_cast<Eigen::Index>(samples.size());
  Vector y(n), w(n);
  int floored = 0, zero = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    if (!(s.weight >= 0.0) || !std::isfinite(s.weight))
      throw std::invalid_argument("transformed weight must be finite and >= 0 (row " + std::to_string(i) + ")");
    if (!std::isfinite(s.outcome)) throw std::invalid_argument("transformed outcome is not finite (row " + std::to_string(i) + ")");
    y[i] = s.outcome;
    w[i] = s.weight;
    floored += s.floored ? 1 : 0;
    zero += s.weight == 0.0 ? 1 : 0;
  }
  if (!(w.sum() > 0.0)) throw std::invalid_argument("all transformed weights are zero");
  auto m = fit_ensemble(x, y, w, cfg, 31 + static_cast<std::uint64_t>(kind));
  HteEstimate out(
      kind, spec, static_cast<int>(x.cols()), [m](const Matrix& z) -> Vector { return m->predict(z); }, {m->weights()},
      {"psi*(X)"});
  out.diagnostics().n = static_cast<int>(n);
  out.diagnostics().floored = floored;
  out.diagnostics().zero_weight = zero;
  return out;
}

HteEstimate fit_x_learner(const EstimandSpec& spec, const Matrix& x, const std::vector<int>& arm, const Vector& imputed,
                          PropensityFn pi1, const LearnerConfig& cfg) {
  if (static_cast<std::size_t>(x.rows()) != arm.size() || x.rows() != imputed.size())
    throw std::invalid_argument("fit_x_learner: size mismatch");
  check_finite(imputed, "imputed effect");
  std::array<std::shared_ptr<const EnsemblePredictor>, 2> m;
  for (int a = 0; a < 2; ++a) {
    auto r = rows_of_arm(arm, a);
    if (static_cast<int>(r.size()) < cfg.min_arm_size)
      throw std::invalid_argument("X-learner: arm " + std::to_string(a) + " has " + std::to_string(r.size()) +
                                  " rows, fewer than min_arm_size " + std::to_string(cfg.min_arm_size));
    m[a] = fit_ensemble(x(r, Eigen::all), imputed(r), Vector::Ones(static_cast<Eigen::Index>(r.size())), cfg, 41 + a);
  }
  const XWeight mode = cfg.x_weight;
  if (mode == XWeight::Propensity && !pi1) throw std::invalid_argument("X-learner needs a propensity for weight 'propensity'");
  auto raw = [m, mode, pi1](const Matrix& z) -> Vector {
    Vector p0 = m[0]->predict(z), p1 = m[1]->predict(z), out(z.rows());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const double w = mode == XWeight::Propensity ? pi1(z.row(i)) : mode == XWeight::Zero ? 0.0 : 1.0;
      out[i] = w * p0[i] + (1.0 - w) * p1[i];
    }
    return out;
  };
  HteEstimate out(LearnerKind::X, spec, static_cast<int>(x.cols()), raw, {m[0]->weights(), m[1]->weights()},
                  {"psi(0,X)", "psi(1,X)"});
  out.diagnostics().n = static_cast<int>(imputed.size());
  return out;
}

std::string summary_json(const HteEstimate& model) {
  nlohmann::json j;
  j["learner"] = to_string(model.kind());
  j["estimand"] = model.spec().name();
  j["clip_bound"] = model.spec().clip_bound();
  nlohmann::json parts = nlohmann::json::array();
  for (std::size_t k = 0; k < model.ensembles().size(); ++k) {
    const auto& e = model.ensembles()[k];
    nlohmann::json p;
    p["part"] = k < model.parts().size() ? model.parts()[k] : std::to_string(k);
    p["cv_loss"] = e.cv_loss;
    nlohmann::json wts = nlohmann::json::object();
    for (std::size_t v = 0; v < e.rho.size(); ++v) wts[e.names.at(v)] = e.rho[v];
    p["weights"] = wts;
    p["vertex_cv_loss"] = e.vertex_loss;
    parts.push_back(p);
  }
  j["ensembles"] = parts;
  const auto& d = model.diagnostics();
  j["diagnostics"] = {{"n", d.n},
                      {"floored", d.floored},
                      {"floored_fraction", d.floored_fraction()},
                      {"zero_weight", d.zero_weight},
                      {"fold_sizes", d.fold_sizes}};
  return j.dump(2);
}

}  // namespace cutlearn
