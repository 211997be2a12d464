#include "cutlearn/survival.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cutlearn {

Grid make_grid(std::vector<double> times) {
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  for (double t : times)
    if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("grid times must be positive and finite");
  return std::make_shared<const std::vector<double>>(std::move(times));
}

void validate(const Observation& o, int max_cause) {
  if (!(o.time > 0.0) || !std::isfinite(o.time))
    throw std::invalid_argument("observation " + std::to_string(o.id) + ": time must be positive");
  if (o.cause < 0 || o.cause > max_cause)
    throw std::invalid_argument("observation " + std::to_string(o.id) + ": cause out of range");
  if (o.arm != 0 && o.arm != 1)
    throw std::invalid_argument("observation " + std::to_string(o.id) + ": arm must be 0 or 1");
  for (double v : o.x)
    if (!std::isfinite(v)) throw std::invalid_argument("observation " + std::to_string(o.id) + ": non-finite covariate");
}

StepFunction::StepFunction() : grid_(std::make_shared<const std::vector<double>>()) {}

StepFunction::StepFunction(std::vector<double> times, std::vector<double> values, double initial)
    : grid_(std::make_shared<const std::vector<double>>(std::move(times))),
      values_(std::move(values)),
      initial_(initial) {
  const auto& t = *grid_;
  for (std::size_t k = 1; k < t.size(); ++k)
    if (!(t[k] > t[k - 1])) throw std::invalid_argument("step function times must be strictly increasing");
  build_area();
}

StepFunction::StepFunction(Grid grid, std::vector<double> values, double initial)
    : grid_(std::move(grid)), values_(std::move(values)), initial_(initial) {
  build_area();
}

void StepFunction::build_area() {
  const auto& t = *grid_;
  if (t.size() != values_.size()) throw std::invalid_argument("step function: times/values length mismatch");
  area_.resize(t.size());
  double acc = 0.0, prev_t = 0.0, prev_v = initial_;
  for (std::size_t k = 0; k < t.size(); ++k) {
    acc += prev_v * (t[k] - prev_t);
    area_[k] = acc;
    prev_t = t[k];
    prev_v = values_[k];
  }
}

double StepFunction::operator()(double t) const {
  std::size_t m = count_le(*grid_, t);
  return m == 0 ? initial_ : values_[m - 1];
}

double StepFunction::left_limit(double t) const {
  std::size_t m = count_lt(*grid_, t);
  return m == 0 ? initial_ : values_[m - 1];
}

double StepFunction::integral(double tau) const {
  if (tau <= 0.0) return 0.0;
  std::size_t m = count_le(*grid_, tau);
  if (m == 0) return initial_ * tau;
  return area_[m - 1] + values_[m - 1] * (tau - (*grid_)[m - 1]);
}

double step_eval(const StepFunction& f, double t) { return f(t); }
double step_left_limit(const StepFunction& f, double t) { return f.left_limit(t); }
double restricted_integral(const StepFunction& f, double tau) { return f.integral(tau); }

CumulativeHazard::CumulativeHazard(Grid grid, std::vector<double> increments)
    : grid_(std::move(grid)), inc_(std::move(increments)) {
  if (grid_->size() != inc_.size()) throw std::invalid_argument("hazard: grid/increment length mismatch");
  for (double d : inc_)
    if (!(d >= 0.0 && d <= 1.0)) throw std::invalid_argument("invalid hazard: increment outside [0, 1]");
}

CumulativeHazard CumulativeHazard::zero(Grid grid) {
  std::vector<double> z(grid->size(), 0.0);
  return CumulativeHazard(std::move(grid), std::move(z));
}

StepFunction CumulativeHazard::cumulative() const {
  std::vector<double> v(inc_.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < inc_.size(); ++k) v[k] = (acc += inc_[k]);
  return StepFunction(grid_, std::move(v), 0.0);
}

StepFunction product_limit(const CumulativeHazard& hazard) {
  const auto& d = hazard.increments();
  std::vector<double> s(d.size());
  double acc = 1.0;
  for (std::size_t k = 0; k < d.size(); ++k) s[k] = (acc *= (1.0 - d[k]));
  return StepFunction(hazard.grid(), std::move(s), 1.0);
}

StepFunction cif_from_hazards(const CumulativeHazard& cause, const CumulativeHazard& all) {
  if (cause.grid() != all.grid() && *cause.grid() != *all.grid())
    throw std::invalid_argument("cif_from_hazards: grid mismatch");
  const auto& dj = cause.increments();
  const auto& da = all.increments();
  std::vector<double> f(dj.size());
  double s_prev = 1.0, acc = 0.0;
  for (std::size_t k = 0; k < dj.size(); ++k) {
    if (dj[k] > da[k] + 1e-12) throw std::invalid_argument("invalid hazard: cause increment exceeds all-cause increment");
    acc += s_prev * dj[k];
    f[k] = acc;
    s_prev *= (1.0 - da[k]);
  }
  return StepFunction(cause.grid(), std::move(f), 0.0);
}

bool EventFilter::matches(int c) const {
  switch (kind) {
    case Counting::AllCause: return c > 0;
    case Counting::Cause: return c == cause;
    case Counting::OtherCauses: return c > 0 && c != cause;
    case Counting::Censoring: return c == 0;
  }
  return false;
}

double martingale_integral(const Observation& obs, const StepFunction& f, const CumulativeHazard& hazard,
                           EventFilter filter, double horizon) {
  if (!(horizon > 0.0)) throw std::invalid_argument("martingale_integral: horizon must be positive");
  const auto& g = *hazard.grid();
  const auto& d = hazard.increments();
  const double upper = std::min(horizon, obs.time);
  std::size_t m = count_le(g, upper);
  // The censoring process is not at risk at the instant of an observed event.
  if (filter.kind == Counting::Censoring && obs.event()) m = std::min(m, count_lt(g, obs.time));
  double comp = 0.0;
  for (std::size_t k = 0; k < m; ++k)
    if (d[k] != 0.0) comp += f(g[k]) * d[k];
  double jump = (filter.matches(obs.cause) && obs.time <= horizon) ? f(obs.time) : 0.0;
  return jump - comp;
}

ArmCurves ArmCurves::from_increments(Grid grid, std::vector<std::vector<double>> dcause, std::vector<double> dcens) {
  ArmCurves c;
  const std::size_t K = grid->size();
  if (dcens.size() != K) throw std::invalid_argument("curves: censoring increments length mismatch");
  c.dall.assign(K, 0.0);
  for (auto& dj : dcause) {
    if (dj.size() != K) throw std::invalid_argument("curves: cause increments length mismatch");
    for (std::size_t k = 0; k < K; ++k) {
      if (!(dj[k] >= 0.0 && dj[k] <= 1.0)) throw std::invalid_argument("invalid hazard: increment outside [0, 1]");
      c.dall[k] += dj[k];
    }
  }
  for (std::size_t k = 0; k < K; ++k) {
    if (c.dall[k] > 1.0 + 1e-12) throw std::invalid_argument("invalid hazard: all-cause increment exceeds 1");
    c.dall[k] = std::min(c.dall[k], 1.0);
    if (!(dcens[k] >= 0.0 && dcens[k] <= 1.0)) throw std::invalid_argument("invalid hazard: censoring increment outside [0, 1]");
  }
  c.surv.resize(K);
  c.cens_surv.resize(K);
  c.cif.assign(dcause.size(), std::vector<double>(K));
  double s = 1.0, gsurv = 1.0;
  std::vector<double> acc(dcause.size(), 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t j = 0; j < dcause.size(); ++j) c.cif[j][k] = (acc[j] += s * dcause[j][k]);
    s *= (1.0 - c.dall[k]);
    gsurv *= (1.0 - dcens[k]);
    c.surv[k] = s;
    c.cens_surv[k] = gsurv;
  }
  c.grid = std::move(grid);
  c.dcause = std::move(dcause);
  c.dcens = std::move(dcens);
  return c;
}

StepFunction ArmCurves::S() const { return StepFunction(grid, surv, 1.0); }
StepFunction ArmCurves::G() const { return StepFunction(grid, cens_surv, 1.0); }
StepFunction ArmCurves::F(int cause) const {
  if (cause < 1 || cause > causes()) throw std::invalid_argument("curves: missing cause " + std::to_string(cause));
  return StepFunction(grid, cif[cause - 1], 0.0);
}
CumulativeHazard ArmCurves::hazard_all() const { return CumulativeHazard(grid, dall); }
CumulativeHazard ArmCurves::hazard_cause(int cause) const {
  if (cause < 1 || cause > causes()) throw std::invalid_argument("curves: missing cause " + std::to_string(cause));
  return CumulativeHazard(grid, dcause[cause - 1]);
}
CumulativeHazard ArmCurves::hazard_censoring() const { return CumulativeHazard(grid, dcens); }

}  // namespace cutlearn
