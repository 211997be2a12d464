#include "cutlearn/simgen.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "cutlearn/regression.hpp"

namespace cutlearn {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t subject_seed(std::uint64_t seed, long id) {
  return splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(id));
}

namespace {

const boost::math::normal_distribution<double> kStdNormal(0.0, 1.0);

double phi_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double phi_quantile(double u) { return boost::math::quantile(kStdNormal, u); }

double u01(std::mt19937_64& rng) { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; }

double lin(const double* c, const std::vector<double>& x) {
  double v = c[0];
  for (int j = 0; j < 6; ++j) v += c[j + 1] * x[j];
  return v;
}

// Linear predictors transcribed from the settings.
constexpr double kPs1[7] = {0.3, 0.2, 0.3, 0.3, -0.2, -0.3, -0.2};
constexpr double kPs2[7] = {-1.0, 1.0, 1.5, 1.5, -1.0, -1.5, -1.0};
constexpr double kT0[7] = {0.8, -0.8, 1.0, 0.8, 0.4, -0.4, 0.8};
constexpr double kT1[7] = {0.4, 0.6, -0.8, 1.2, 0.6, -0.3, 0.5};
constexpr double kC0[7] = {1.8, 0.6, -0.8, 0.5, 0.7, -0.4, -0.2};
constexpr double kC1[7] = {2.2, 0.6, -0.8, 0.5, 0.7, 0.8, 1.2};
constexpr double kL1a0[7] = {0.1, 0.1, -0.2, 0.2, 0.1, 0.8, -0.2};
constexpr double kL1a1[7] = {0.17, 0.2, -0.1, 0.4, 0.2, 0.3, 0.4};
constexpr double kL2a0[7] = {0.12, -0.1, 0.3, 0.1, 0.2, -0.4, 0.5};
constexpr double kL2a1[7] = {0.1, -0.2, -0.1, 0.2, 0.3, 0.3, -0.3};
constexpr double kScale[4] = {0.12, 0.15, 0.10, 0.08};  // (j=1,a=0) (j=1,a=1) (j=2,a=0) (j=2,a=1)
constexpr double kC30[7] = {2.5, 0.6, -0.4, 0.7, 1.5, 1.2, 1.6};
constexpr double kC31[7] = {2.0, 0.6, 0.8, 0.5, 1.2, 1.6, 1.2};

struct Draw {
  std::vector<double> x;
  double ua, ut0, ut1, uc, e1, e2;
};

Draw draw_subject(std::mt19937_64& rng, CovariateLaw law) {
  Draw d;
  d.x.resize(6);
  for (auto& v : d.x) {
    double u = u01(rng);
    v = law == CovariateLaw::Uniform ? 2.0 * u - 1.0 : phi_quantile(u);
  }
  d.ua = u01(rng);
  d.ut0 = u01(rng);
  d.ut1 = u01(rng);
  d.uc = u01(rng);
  d.e1 = -std::log(u01(rng));
  d.e2 = -std::log(u01(rng));
  return d;
}

}  // namespace

TrueModel::TrueModel(int setting, bool equal_competing) : setting_(setting), equal_competing_(equal_competing) {
  if (setting < 1 || setting > 4) throw std::invalid_argument("setting must be 1..4");
}

double TrueModel::pi1(const std::vector<double>& x) const {
  const double* c = (setting_ == 1 || setting_ == 3) ? kPs1 : kPs2;
  return expit(-lin(c, x));
}

double TrueModel::rate(int cause, int arm, const std::vector<double>& x) const {
  if (setting_ < 3) throw std::invalid_argument("cause-specific rates exist only in settings 3 and 4");
  if (cause == 1) return arm == 0 ? kScale[0] * std::exp(lin(kL1a0, x)) : kScale[1] * std::exp(lin(kL1a1, x));
  if (cause == 2) {
    if (arm == 0 || equal_competing_) return kScale[2] * std::exp(lin(kL2a0, x));
    return kScale[3] * std::exp(lin(kL2a1, x));
  }
  throw std::invalid_argument("cause must be 1 or 2");
}

double TrueModel::surv(double t, int arm, const std::vector<double>& x) const {
  if (t <= 0) return 1.0;
  if (setting_ >= 3) return std::exp(-(rate(1, arm, x) + rate(2, arm, x)) * t);
  if (arm == 0) return expit(-5.0 * (std::log(t) - lin(kT0, x)));
  return 1.0 - phi_cdf(std::log(t) - lin(kT1, x));
}

double TrueModel::cens_surv(double t, int arm, const std::vector<double>& x) const {
  if (t <= 0) return 1.0;
  const double* c0 = setting_ >= 3 ? kC30 : kC0;
  const double* c1 = setting_ >= 3 ? kC31 : kC1;
  if (arm == 0) return 1.0 - phi_cdf((std::log(t) - lin(c0, x)) / 0.8);
  return expit(-(std::log(t) - lin(c1, x)) / 0.8);
}

double TrueModel::cif(int cause, double t, int aj, int ajbar, const std::vector<double>& x) const {
  if (t <= 0) return 0.0;
  if (setting_ < 3) {
    if (cause != 1) throw std::invalid_argument("settings 1 and 2 have a single cause");
    return 1.0 - surv(t, aj, x);
  }
  const double lj = rate(cause, aj, x), lo = rate(cause == 1 ? 2 : 1, ajbar, x), l = lj + lo;
  return lj / l * (-std::expm1(-l * t));
}

double TrueModel::rmst(double tau, int arm, const std::vector<double>& x) const {
  if (setting_ >= 3) {
    const double l = rate(1, arm, x) + rate(2, arm, x);
    return -std::expm1(-l * tau) / l;
  }
  auto f = [&](double u) { return surv(u, arm, x); };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, tau, 20, 1e-12);
}

double TrueModel::rmtl(int cause, double tau, int aj, int ajbar, const std::vector<double>& x) const {
  if (setting_ < 3) {
    if (cause != 1) throw std::invalid_argument("settings 1 and 2 have a single cause");
    return tau - rmst(tau, aj, x);
  }
  const double lj = rate(cause, aj, x), lo = rate(cause == 1 ? 2 : 1, ajbar, x), l = lj + lo;
  return lj / l * (tau + std::expm1(-l * tau) / l);
}

double TrueModel::arm_target(const EstimandSpec& s, int a, const std::vector<double>& x) const {
  const double t = s.horizon;
  switch (s.family) {
    case Family::Survival: return surv(t, a, x);
    case Family::Rmst: return rmst(t, a, x);
    case Family::Cif: return cif(s.cause, t, a, a, x);
    case Family::Rmtl: return rmtl(s.cause, t, a, a, x);
    case Family::SepDirectCif: return cif(s.cause, t, a, s.arm_param, x);
    case Family::SepDirectRmtl: return rmtl(s.cause, t, a, s.arm_param, x);
    case Family::SepIndirectCif: return cif(s.cause, t, s.arm_param, a, x);
    case Family::SepIndirectRmtl: return rmtl(s.cause, t, s.arm_param, a, x);
  }
  return 0.0;
}

double TrueModel::true_hte(const EstimandSpec& s, const std::vector<double>& x) const {
  if (!supports(setting_, s))
    throw std::invalid_argument("estimand " + s.name() + " is not supported by setting " + std::to_string(setting_));
  return arm_target(s, 1, x) - arm_target(s, 0, x);
}

double true_hte(int setting, const EstimandSpec& spec, const std::vector<double>& x) {
  return TrueModel(setting).true_hte(spec, x);
}

bool supports(int setting, const EstimandSpec& spec) {
  const int causes = setting >= 3 ? 2 : 1;
  if (spec.separable() && causes < 2) return false;
  if (spec.needs_cause() && (spec.cause < 1 || spec.cause > causes)) return false;
  return spec.horizon > 0;
}

Grid midpoint_grid(double horizon, int cells) {
  if (!(horizon > 0) || cells < 1) throw std::invalid_argument("midpoint grid needs horizon > 0 and cells >= 1");
  std::vector<double> g(static_cast<std::size_t>(cells));
  const double d = horizon / cells;
  for (int k = 0; k < cells; ++k) g[k] = (k + 0.5) * d;
  return std::make_shared<const std::vector<double>>(std::move(g));
}

namespace {

// Exact discretization: product-limit S and the CIFs match the continuous
// curves at the cell boundaries.
ArmCurves true_arm(const TrueModel& m, const Grid& grid, double d, int arm, const std::vector<double>& x) {
  const auto K = grid->size();
  const int J = m.causes();
  std::vector<std::vector<double>> dc(J, std::vector<double>(K));
  std::vector<double> dcens(K);
  double s_prev = 1.0, g_prev = 1.0;
  std::vector<double> f_prev(J, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const double b = (static_cast<double>(k) + 1.0) * d;
    const double s = m.surv(b, arm, x), g = m.cens_surv(b, arm, x);
    double tot = 0.0;
    for (int j = 0; j < J; ++j) {
      const double f = m.cif(j + 1, b, arm, arm, x);
      double h = s_prev > 0 ? (f - f_prev[j]) / s_prev : 0.0;
      dc[j][k] = std::clamp(h, 0.0, 1.0);
      tot += dc[j][k];
      f_prev[j] = f;
    }
    if (tot > 1.0)
      for (int j = 0; j < J; ++j) dc[j][k] /= tot;
    dcens[k] = g_prev > 0 ? std::clamp(1.0 - g / g_prev, 0.0, 1.0) : 0.0;
    s_prev = s;
    g_prev = g;
  }
  return ArmCurves::from_increments(grid, std::move(dc), std::move(dcens));
}

struct Counterfactual {
  double time;
  int cause;
  double cens;
};

Counterfactual counterfactual(const TrueModel& m, const Draw& d, int arm) {
  Counterfactual c{};
  const int s = m.setting();
  if (s <= 2) {
    c.time = arm == 0 ? std::exp(0.2 * logit(d.ut0) + lin(kT0, d.x)) : std::exp(phi_quantile(d.ut1) + lin(kT1, d.x));
    c.cause = 1;
    c.cens = arm == 0 ? std::exp(0.8 * phi_quantile(d.uc) + lin(kC0, d.x)) : std::exp(0.8 * logit(d.uc) + lin(kC1, d.x));
  } else {
    const double t1 = d.e1 / m.rate(1, arm, d.x), t2 = d.e2 / m.rate(2, arm, d.x);
    c.time = std::min(t1, t2);
    c.cause = t1 <= t2 ? 1 : 2;
    c.cens = arm == 0 ? std::exp(0.8 * phi_quantile(d.uc) + lin(kC30, d.x)) : std::exp(0.8 * logit(d.uc) + lin(kC31, d.x));
  }
  return c;
}

Observation observe(const Draw& d, const Counterfactual& c, int arm, long id) {
  Observation o;
  o.id = id;
  o.x = d.x;
  o.arm = arm;
  o.time = std::min(c.time, c.cens);
  o.cause = c.time <= c.cens ? c.cause : 0;
  return o;
}

}  // namespace

NuisanceSet TrueModel::curves(const std::vector<double>& x, double horizon, int cells, int reach) const {
  reach = std::max(reach, 1);
  Grid g = midpoint_grid(horizon * reach, cells * reach);
  NuisanceSet eta;
  eta.pi1 = pi1(x);
  for (int a = 0; a < 2; ++a) eta.arm[a] = true_arm(*this, g, horizon / cells, a, x);
  return eta;
}

Observation TrueModel::sample(const std::vector<double>& x, int arm, std::mt19937_64& rng, long id) const {
  Draw d = draw_subject(rng, CovariateLaw::Uniform);
  d.x = x;
  return observe(d, counterfactual(*this, d, arm), arm, id);
}

std::string TrueModel::coefficient_table() const {
  std::ostringstream os;
  os.precision(17);
  auto put = [&](const char* name, const double* c, int n) {
    os << name;
    for (int i = 0; i < n; ++i) os << ' ' << c[i];
    os << '\n';
  };
  os << "setting " << setting_ << '\n';
  put("ps", (setting_ == 1 || setting_ == 3) ? kPs1 : kPs2, 7);
  if (setting_ <= 2) {
    put("t0", kT0, 7);
    put("t1", kT1, 7);
    put("c0", kC0, 7);
    put("c1", kC1, 7);
  } else {
    put("scale", kScale, 4);
    put("l1a0", kL1a0, 7);
    put("l1a1", kL1a1, 7);
    put("l2a0", kL2a0, 7);
    put("l2a1", equal_competing_ ? kL2a0 : kL2a1, 7);
    put("c0", kC30, 7);
    put("c1", kC31, 7);
  }
  return os.str();
}

std::vector<double> SimData::psi(const EstimandSpec& spec) const {
  TrueModel m(config.setting, config.equal_competing);
  std::vector<double> out;
  out.reserve(obs.size());
  for (const auto& o : obs) out.push_back(m.true_hte(spec, o.x));
  return out;
}

double SimData::arm_ratio() const {
  double n1 = 0;
  for (const auto& o : obs) n1 += o.arm;
  const double n0 = static_cast<double>(obs.size()) - n1;
  return n0 > 0 ? n1 / n0 : INFINITY;
}

SimData generate(const SimConfig& cfg) {
  if (cfg.n < 1) throw std::invalid_argument("n must be at least 1");
  TrueModel m(cfg.setting, cfg.equal_competing);
  SimData out;
  out.config = cfg;
  out.obs.reserve(static_cast<std::size_t>(cfg.n));
  out.truth.reserve(static_cast<std::size_t>(cfg.n));
  for (long id = 1; id <= cfg.n; ++id) {
    std::mt19937_64 rng(subject_seed(cfg.seed, id));
    Draw d = draw_subject(rng, cfg.law);
    SubjectTruth st;
    st.id = id;
    st.pi1 = m.pi1(d.x);
    const int a = d.ua < st.pi1 ? 1 : 0;
    std::array<Counterfactual, 2> cf{counterfactual(m, d, 0), counterfactual(m, d, 1)};
    for (int b = 0; b < 2; ++b) {
      st.time[b] = cf[b].time;
      st.cause[b] = cf[b].cause;
      st.cens[b] = cf[b].cens;
    }
    if (m.causes() == 2) {
      for (int aj = 0; aj < 2; ++aj)
        for (int ab = 0; ab < 2; ++ab) {
          const double t1 = d.e1 / m.rate(1, aj, d.x), t2 = d.e2 / m.rate(2, ab, d.x);
          st.pair_time[2 * aj + ab] = std::min(t1, t2);
          st.pair_cause[2 * aj + ab] = t1 <= t2 ? 1 : 2;
        }
    }
    out.obs.push_back(observe(d, cf[a], a, id));
    out.truth.push_back(st);
  }
  return out;
}

OracleNuisances::OracleNuisances(TrueModel model, double horizon, int cells, int reach)
    : model_(std::move(model)), horizon_(horizon), cells_(cells), reach_(reach) {}

NuisanceSet OracleNuisances::predict(const Observation& s) const {
  NuisanceSet eta = model_.curves(s.x, horizon_, cells_, reach_);
  eta.id = s.id;
  return eta;
}

std::array<ArmCurves, 2> marginal_curves(const TrueModel& m, double horizon, int cells, int n, std::uint64_t seed,
                                         CovariateLaw law) {
  Grid g = midpoint_grid(horizon, cells);
  const double d = horizon / cells;
  const int J = m.causes();
  std::array<ArmCurves, 2> out;
  std::array<std::vector<Counterfactual>, 2> cf;
  for (long id = 1; id <= n; ++id) {
    std::mt19937_64 rng(subject_seed(seed, id));
    Draw dr = draw_subject(rng, law);
    for (int a = 0; a < 2; ++a) cf[a].push_back(counterfactual(m, dr, a));
  }
  for (int a = 0; a < 2; ++a) {
    std::vector<double> at_risk(cells + 1, 0.0), at_risk_c(cells + 1, 0.0), cens_ev(cells, 0.0);
    std::vector<std::vector<double>> ev(J, std::vector<double>(cells, 0.0));
    for (const auto& c : cf[a]) {
      const double t = std::min(c.time, c.cens);
      const bool event = c.time <= c.cens;
      const long cell = std::min<long>(static_cast<long>(std::floor(t / d)), cells);
      // at risk for events on cells 0..cell, for censoring on 0..cell-1 (+cell if censored)
      at_risk[0] += 1;
      at_risk[std::min<long>(cell + 1, cells)] -= 1;
      at_risk_c[0] += 1;
      at_risk_c[std::min<long>(event ? cell : cell + 1, cells)] -= 1;
      if (cell < cells) {
        if (event) ev[c.cause - 1][cell] += 1;
        else cens_ev[cell] += 1;
      }
    }
    for (int k = 1; k <= cells; ++k) {
      at_risk[k] += at_risk[k - 1];
      at_risk_c[k] += at_risk_c[k - 1];
    }
    std::vector<std::vector<double>> dc(J, std::vector<double>(cells, 0.0));
    std::vector<double> dcens(cells, 0.0);
    for (int k = 0; k < cells; ++k) {
      for (int j = 0; j < J; ++j) dc[j][k] = at_risk[k] > 0 ? ev[j][k] / at_risk[k] : 0.0;
      dcens[k] = at_risk_c[k] > 0 ? cens_ev[k] / at_risk_c[k] : 0.0;
    }
    out[a] = ArmCurves::from_increments(g, std::move(dc), std::move(dcens));
  }
  return out;
}

}  // namespace cutlearn
