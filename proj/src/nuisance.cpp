#include "cutlearn/nuisance.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace cutlearn {

std::string to_string(ArmHandling a) { return a == ArmHandling::Single ? "single" : "per_arm"; }

std::string to_string(HazardLearner h) {
  switch (h) {
    case HazardLearner::Logistic: return "logistic";
    case HazardLearner::NelsonAalen: return "nelson_aalen";
    case HazardLearner::PersonPeriod: return "person_period";
  }
  return "?";
}

ArmHandling parse_arm_handling(const std::string& s) {
  if (s == "single") return ArmHandling::Single;
  if (s == "per_arm") return ArmHandling::PerArm;
  throw std::invalid_argument("unknown arm_handling '" + s + "'");
}

HazardLearner parse_hazard_learner(const std::string& s) {
  for (HazardLearner h : {HazardLearner::Logistic, HazardLearner::NelsonAalen, HazardLearner::PersonPeriod})
    if (to_string(h) == s) return h;
  throw std::invalid_argument("unknown hazard_learner '" + s + "'");
}

Matrix covariate_matrix(const std::vector<Observation>& data) {
  if (data.empty()) return Matrix(0, 0);
  const auto p = static_cast<Eigen::Index>(data.front().x.size());
  Matrix m(static_cast<Eigen::Index>(data.size()), p);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (static_cast<Eigen::Index>(data[i].x.size()) != p) throw std::invalid_argument("covariate dimension mismatch");
    for (Eigen::Index j = 0; j < p; ++j) m(static_cast<Eigen::Index>(i), j) = data[i].x[j];
  }
  return m;
}

// ---------------------------------------------------------------- propensity

PropensityModel::PropensityModel(LogisticFit fit, double lo, double hi) : fit_(std::move(fit)), lo_(lo), hi_(hi) {}

double PropensityModel::pi1(const std::vector<double>& x) const {
  Eigen::Map<const Eigen::RowVectorXd> row(x.data(), static_cast<Eigen::Index>(x.size()));
  if (row.size() != fit_.beta.size()) throw std::invalid_argument("propensity: covariate dimension mismatch");
  return std::clamp(fit_.prob(row), lo_, hi_);
}

double PropensityModel::pi(int arm, const std::vector<double>& x) const {
  double p = pi1(x);
  return arm == 1 ? p : 1.0 - p;
}

PropensityModel fit_propensity(const std::vector<Observation>& data, const NuisanceConfig& cfg) {
  if (!(cfg.clip_lo > 0 && cfg.clip_lo < cfg.clip_hi && cfg.clip_hi < 1))
    throw std::invalid_argument("propensity clip bounds must satisfy 0 < lo < hi < 1");
  int n1 = 0;
  for (const auto& o : data) n1 += o.arm;
  if (n1 == 0 || n1 == static_cast<int>(data.size()))
    throw std::invalid_argument("fit_propensity: training data contains a single arm");
  Matrix x = covariate_matrix(data);
  Vector y(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) y(i) = data[i].arm;
  Vector w = Vector::Ones(x.rows());
  return PropensityModel(fit_logistic(x, y, w, cfg.propensity_ridge * static_cast<double>(data.size())), cfg.clip_lo,
                         cfg.clip_hi);
}

// ---------------------------------------------------------------- grid

Grid fold_grid(const std::vector<Observation>& train, const std::vector<double>& horizons, int cap) {
  std::vector<double> t;
  t.reserve(train.size());
  for (const auto& o : train) t.push_back(o.time);
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  if (cap > 0 && static_cast<int>(t.size()) > cap) {
    std::vector<double> knots;
    const double m = static_cast<double>(t.size());
    for (int q = 1; q <= cap; ++q) {
      auto idx = static_cast<std::size_t>(std::ceil(q * m / cap)) - 1;
      knots.push_back(t[std::min(idx, t.size() - 1)]);
    }
    t = std::move(knots);
  }
  for (double h : horizons) t.push_back(h);
  return make_grid(std::move(t));
}

// ---------------------------------------------------------------- risk sets

namespace {

struct RiskData {
  std::vector<int> last;    // last at-risk knot, -1 if never at risk
  std::vector<char> event;  // event of the target type at knot `last`
};

RiskData risk_data(const std::vector<Observation>& data, const std::vector<double>& g, int target) {
  RiskData r;
  const int K = static_cast<int>(g.size());
  r.last.resize(data.size());
  r.event.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& o = data[i];
    int idx = static_cast<int>(count_lt(g, o.time));  // first knot >= time
    if (idx >= K) {
      r.last[i] = K - 1;
      r.event[i] = 0;
      continue;
    }
    const bool is_target = target == 0 ? o.cause == 0 : o.cause == target;
    // Censoring is not at risk at the knot of an observed event.
    r.last[i] = (target == 0 && o.cause > 0) ? idx - 1 : idx;
    r.event[i] = is_target ? 1 : 0;
  }
  return r;
}

void counts(const RiskData& r, int K, std::vector<double>& n, std::vector<double>& d) {
  n.assign(K + 1, 0.0);
  d.assign(K, 0.0);
  for (std::size_t i = 0; i < r.last.size(); ++i) {
    if (r.last[i] < 0) continue;
    n[0] += 1.0;
    n[r.last[i] + 1] -= 1.0;
    if (r.event[i]) d[r.last[i]] += 1.0;
  }
  for (int k = 1; k <= K; ++k) n[k] += n[k - 1];
  n.resize(K);
}

double log1pexp(double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

Matrix hazard_features(const std::vector<Observation>& data, ArmHandling ah) {
  Matrix x = covariate_matrix(data);
  if (ah == ArmHandling::PerArm) return x;
  const Eigen::Index n = x.rows(), p = x.cols();
  Matrix z(n, 1 + 2 * p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = data[i].arm;
    z(i, 0) = a;
    z.row(i).segment(1, p) = x.row(i);
    z.row(i).segment(1 + p, p) = a * x.row(i);
  }
  return z;
}

Eigen::RowVectorXd hazard_row(const std::vector<double>& x, int arm, ArmHandling ah) {
  const auto p = static_cast<Eigen::Index>(x.size());
  Eigen::Map<const Eigen::RowVectorXd> xr(x.data(), p);
  if (ah == ArmHandling::PerArm) return xr;
  Eigen::RowVectorXd z(1 + 2 * p);
  z(0) = arm;
  z.segment(1, p) = xr;
  z.segment(1 + p, p) = arm * xr;
  return z;
}

std::vector<Observation> subset_arm(const std::vector<Observation>& data, int arm) {
  std::vector<Observation> out;
  for (const auto& o : data)
    if (o.arm == arm) out.push_back(o);
  return out;
}

// ---------------------------------------------------------------- logistic hazard

// logit h(u_k | z) = alpha_k + z' beta; alpha_k = -inf where no events.
struct LogitPart {
  Standardizer std;
  std::vector<double> alpha;
  std::vector<char> active;
  Vector beta;
  bool degenerate = true;

  void fit(const Matrix& zraw, const RiskData& r, int K, double lambda) {
    std::vector<double> n, d;
    counts(r, K, n, d);
    active.assign(K, 0);
    alpha.assign(K, 0.0);
    degenerate = true;
    for (int k = 0; k < K; ++k)
      if (d[k] > 0) {
        active[k] = 1;
        degenerate = false;
        alpha[k] = logit(std::clamp(d[k] / n[k], 1e-8, 1 - 1e-8));
      }
    const Eigen::Index p = zraw.cols();
    beta = Vector::Zero(p);
    if (zraw.rows() > 0) {
      std = Standardizer::fit(zraw);
    } else {
      std.mean = Eigen::RowVectorXd::Zero(p);
      std.scale = Eigen::RowVectorXd::Ones(p);
    }
    if (degenerate) return;
    Matrix z = std.apply(zraw);
    const Eigen::Index nobs = z.rows();

    struct Pass {
      double ll = 0;
      Vector ga, ha, gb;
      Matrix c, hb;
    };
    auto pass = [&](const std::vector<double>& al, const Vector& be) {
      Pass s;
      s.ga = Vector::Zero(K);
      s.ha = Vector::Zero(K);
      s.gb = Vector::Zero(p);
      s.c = Matrix::Zero(K, p);
      s.hb = Matrix::Zero(p, p);
      Vector eta = z * be;
      for (Eigen::Index i = 0; i < nobs; ++i) {
        const int last = r.last[i];
        double sum_p = 0.0, sum_pq = 0.0;
        for (int k = 0; k <= last; ++k) {
          if (!active[k]) continue;
          const double v = al[k] + eta(i);
          const double pr = expit(v), pq = pr * (1.0 - pr);
          s.ll -= log1pexp(v);
          s.ga(k) -= pr;
          s.ha(k) += pq;
          s.c.row(k) += pq * z.row(i);
          sum_p += pr;
          sum_pq += pq;
        }
        if (last >= 0 && r.event[i]) {
          s.ll += al[last] + eta(i);
          s.ga(last) += 1.0;
          s.gb += z.row(i).transpose();
        }
        s.gb -= sum_p * z.row(i).transpose();
        s.hb.noalias() += sum_pq * z.row(i).transpose() * z.row(i);
      }
      s.ll -= 0.5 * lambda * be.squaredNorm();
      s.gb -= lambda * be;
      s.hb.diagonal().array() += lambda;
      return s;
    };

    Pass cur = pass(alpha, beta);
    for (int it = 0; it < 40; ++it) {
      Vector dinv(K);
      for (int k = 0; k < K; ++k) dinv(k) = active[k] ? 1.0 / std::max(cur.ha(k), 1e-12) : 0.0;
      Matrix s = cur.hb - cur.c.transpose() * dinv.asDiagonal() * cur.c;
      Vector rhs = cur.gb - cur.c.transpose() * dinv.cwiseProduct(cur.ga);
      Vector db = s.ldlt().solve(rhs);
      Vector da = dinv.cwiseProduct(cur.ga - cur.c * db);
      double t = 1.0, change = 0.0;
      bool accepted = false;
      for (int half = 0; half < 30; ++half, t *= 0.5) {
        std::vector<double> al = alpha;
        for (int k = 0; k < K; ++k)
          if (active[k]) al[k] = std::clamp(alpha[k] + t * da(k), -30.0, 30.0);
        Vector be = beta + t * db;
        Pass nxt = pass(al, be);
        if (nxt.ll >= cur.ll - 1e-10 * std::max(1.0, std::abs(cur.ll))) {
          change = std::max(t * da.cwiseAbs().maxCoeff(), db.size() ? t * db.cwiseAbs().maxCoeff() : 0.0);
          alpha = std::move(al);
          beta = std::move(be);
          cur = std::move(nxt);
          accepted = true;
          break;
        }
      }
      if (!accepted || change < 1e-7) break;
    }
  }

  void increments(const Eigen::RowVectorXd& zrow, std::vector<double>& out) const {
    const int K = static_cast<int>(alpha.size());
    out.assign(K, 0.0);
    if (degenerate) return;
    double eta = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) eta += beta(j) * (zrow(j) - std.mean(j)) / std.scale(j);
    for (int k = 0; k < K; ++k)
      if (active[k]) out[k] = expit(alpha[k] + eta);
  }
};

class LogisticHazard final : public HazardModel {
 public:
  LogisticHazard(const std::vector<Observation>& data, int target, Grid grid, const NuisanceConfig& cfg)
      : HazardModel(std::move(grid), target), ah_(cfg.arm_handling) {
    const int K = static_cast<int>(grid_->size());
    if (ah_ == ArmHandling::PerArm) {
      for (int a = 0; a < 2; ++a) {
        auto sub = subset_arm(data, a);
        parts_[a].fit(hazard_features(sub, ah_), risk_data(sub, *grid_, target), K,
                      cfg.hazard_ridge * static_cast<double>(sub.size()));
      }
      degenerate_ = parts_[0].degenerate && parts_[1].degenerate;
    } else {
      parts_[0].fit(hazard_features(data, ah_), risk_data(data, *grid_, target), K,
                    cfg.hazard_ridge * static_cast<double>(data.size()));
      degenerate_ = parts_[0].degenerate;
    }
  }

  std::vector<double> increments(const std::vector<double>& x, int arm) const override {
    std::vector<double> out;
    const LogitPart& part = ah_ == ArmHandling::PerArm ? parts_[arm] : parts_[0];
    part.increments(hazard_row(x, arm, ah_), out);
    return out;
  }

 private:
  ArmHandling ah_;
  std::array<LogitPart, 2> parts_;
};

// ---------------------------------------------------------------- Nelson-Aalen

class NelsonAalenHazard final : public HazardModel {
 public:
  NelsonAalenHazard(const std::vector<Observation>& data, int target, Grid grid)
      : HazardModel(std::move(grid), target) {
    const int K = static_cast<int>(grid_->size());
    degenerate_ = true;
    for (int a = 0; a < 2; ++a) {
      auto sub = subset_arm(data, a);
      std::vector<double> n, d;
      counts(risk_data(sub, *grid_, target), K, n, d);
      inc_[a].assign(K, 0.0);
      for (int k = 0; k < K; ++k)
        if (d[k] > 0) {
          inc_[a][k] = d[k] / n[k];
          degenerate_ = false;
        }
    }
  }

  std::vector<double> increments(const std::vector<double>&, int arm) const override { return inc_[arm]; }

 private:
  std::array<std::vector<double>, 2> inc_;
};

// ---------------------------------------------------------------- person-period

class PersonPeriodHazard final : public HazardModel {
 public:
  PersonPeriodHazard(const std::vector<Observation>& data, int target, Grid grid, const NuisanceConfig& cfg)
      : HazardModel(std::move(grid), target), ah_(cfg.arm_handling) {
    const int K = static_cast<int>(grid_->size());
    auto reg = make_regressor(cfg.person_period_learner, cfg.base);
    degenerate_ = true;
    const int parts = ah_ == ArmHandling::PerArm ? 2 : 1;
    for (int a = 0; a < parts; ++a) {
      auto sub = ah_ == ArmHandling::PerArm ? subset_arm(data, a) : data;
      RiskData r = risk_data(sub, *grid_, target);
      std::vector<double> n, d;
      counts(r, K, n, d);
      active_[a].assign(K, 0);
      for (int k = 0; k < K; ++k) active_[a][k] = d[k] > 0;
      if (std::none_of(d.begin(), d.end(), [](double v) { return v > 0; })) continue;
      degenerate_ = false;
      Matrix z = hazard_features(sub, ah_);
      Eigen::Index rows = 0;
      for (int l : r.last) rows += l + 1;
      Matrix f(rows, z.cols() + 1);
      Vector y(rows), w = Vector::Ones(rows);
      Eigen::Index m = 0;
      for (std::size_t i = 0; i < sub.size(); ++i)
        for (int k = 0; k <= r.last[i]; ++k, ++m) {
          f.row(m).head(z.cols()) = z.row(static_cast<Eigen::Index>(i));
          f(m, z.cols()) = std::log((*grid_)[k]);
          y(m) = (k == r.last[i] && r.event[i]) ? 1.0 : 0.0;
        }
      model_[a] = reg->fit(f, y, w);
    }
  }

  std::vector<double> increments(const std::vector<double>& x, int arm) const override {
    const int K = static_cast<int>(grid_->size());
    const int part = ah_ == ArmHandling::PerArm ? arm : 0;
    std::vector<double> out(K, 0.0);
    if (!model_[part]) return out;
    Eigen::RowVectorXd z = hazard_row(x, arm, ah_);
    Matrix f(K, z.size() + 1);
    for (int k = 0; k < K; ++k) {
      f.row(k).head(z.size()) = z;
      f(k, z.size()) = std::log((*grid_)[k]);
    }
    Vector p = model_[part]->predict(f);
    for (int k = 0; k < K; ++k)
      if (active_[part][k]) out[k] = std::clamp(p(k), 0.0, 1.0 - 1e-9);
    return out;
  }

 private:
  ArmHandling ah_;
  std::array<PredictorPtr, 2> model_;
  std::array<std::vector<char>, 2> active_;
};

}  // namespace

HazardPtr fit_hazard(const std::vector<Observation>& data, int target, const Grid& grid, const NuisanceConfig& cfg) {
  if (!grid || grid->empty()) throw std::invalid_argument("fit_hazard: empty grid");
  if (data.empty()) throw std::invalid_argument("fit_hazard: no training data");
  switch (cfg.hazard_learner) {
    case HazardLearner::Logistic: return std::make_shared<LogisticHazard>(data, target, grid, cfg);
    case HazardLearner::NelsonAalen: return std::make_shared<NelsonAalenHazard>(data, target, grid);
    case HazardLearner::PersonPeriod: return std::make_shared<PersonPeriodHazard>(data, target, grid, cfg);
  }
  throw std::invalid_argument("fit_hazard: unknown learner");
}

// ---------------------------------------------------------------- bundle

FittedNuisances::FittedNuisances(Grid grid, PropensityModel pi, std::vector<HazardPtr> cause, HazardPtr censoring)
    : grid_(std::move(grid)), pi_(std::move(pi)), cause_(std::move(cause)), cens_(std::move(censoring)) {}

int FittedNuisances::degenerate_models() const {
  int n = cens_->degenerate() ? 1 : 0;
  for (const auto& h : cause_) n += h->degenerate() ? 1 : 0;
  return n;
}

NuisanceSet FittedNuisances::predict(const Observation& s) const {
  NuisanceSet eta;
  eta.id = s.id;
  eta.pi1 = pi_.pi1(s.x);
  const std::size_t K = grid_->size();
  for (int a = 0; a < 2; ++a) {
    std::vector<std::vector<double>> dc;
    std::vector<double> sum(K, 0.0);
    for (const auto& h : cause_) {
      dc.push_back(h->increments(s.x, a));
      for (std::size_t k = 0; k < K; ++k) sum[k] += dc.back()[k];
    }
    for (std::size_t k = 0; k < K; ++k)
      if (sum[k] > 1.0)
        for (auto& d : dc) d[k] /= sum[k];
    eta.arm[a] = ArmCurves::from_increments(grid_, std::move(dc), cens_->increments(s.x, a));
  }
  return eta;
}

std::shared_ptr<FittedNuisances> fit_nuisances(const std::vector<Observation>& train, const std::vector<double>& horizons,
                                               int causes, const NuisanceConfig& cfg) {
  if (causes < 1) throw std::invalid_argument("fit_nuisances: need at least one cause");
  Grid grid = fold_grid(train, horizons, cfg.grid_cap);
  PropensityModel pi = fit_propensity(train, cfg);
  std::vector<HazardPtr> cause;
  for (int j = 1; j <= causes; ++j) cause.push_back(fit_hazard(train, j, grid, cfg));
  HazardPtr cens = fit_hazard(train, 0, grid, cfg);
  return std::make_shared<FittedNuisances>(grid, std::move(pi), std::move(cause), std::move(cens));
}

NuisanceSet predict_nuisances(const FittedNuisances& models, const Observation& subject, const Grid& grid) {
  if (!grid || grid->empty()) throw std::invalid_argument("predict_nuisances: empty grid");
  NuisanceSet eta = models.predict(subject);
  if (grid == models.grid() || *grid == *models.grid()) return eta;
  const auto& src = *models.grid();
  const std::size_t K = grid->size();
  auto map = [&](const std::vector<double>& d) {
    std::vector<double> out(K, 0.0);
    for (std::size_t k = 0; k < src.size(); ++k) {
      std::size_t m = count_lt(*grid, src[k]);
      if (m < K) out[m] += d[k];
    }
    return out;
  };
  for (int a = 0; a < 2; ++a) {
    const ArmCurves& c = eta.arm[a];
    std::vector<std::vector<double>> dc;
    std::vector<double> sum(K, 0.0);
    for (const auto& d : c.dcause) {
      dc.push_back(map(d));
      for (std::size_t k = 0; k < K; ++k) sum[k] += dc.back()[k];
    }
    for (std::size_t k = 0; k < K; ++k)
      if (sum[k] > 1.0)
        for (auto& d : dc) d[k] /= sum[k];
    std::vector<double> cens = map(c.dcens);
    for (double& v : cens) v = std::min(v, 1.0);
    eta.arm[a] = ArmCurves::from_increments(grid, std::move(dc), std::move(cens));
  }
  return eta;
}

}  // namespace cutlearn
