#pragma once

#include <algorithm>
#include <memory>
#include <vector>

namespace cutlearn {

using Grid = std::shared_ptr<const std::vector<double>>;

Grid make_grid(std::vector<double> times);

// One subject. cause == 0 means censored; 1..J are event types.
struct Observation {
  long id = 0;
  std::vector<double> x;
  int arm = 0;
  double time = 1.0;
  int cause = 0;

  bool event() const { return cause > 0; }
};

void validate(const Observation& o, int max_cause);

// Right-continuous step function with left limits. The grid is shared so
// that many curves over the same time points cost one copy of the times.
class StepFunction {
 public:
  StepFunction();
  StepFunction(std::vector<double> times, std::vector<double> values, double initial);
  StepFunction(Grid grid, std::vector<double> values, double initial);

  double operator()(double t) const;
  double left_limit(double t) const;
  // Integral over [0, tau].
  double integral(double tau) const;

  const std::vector<double>& times() const { return *grid_; }
  const std::vector<double>& values() const { return values_; }
  double initial() const { return initial_; }
  std::size_t size() const { return values_.size(); }
  const Grid& grid() const { return grid_; }

 private:
  void build_area();

  Grid grid_;
  std::vector<double> values_;
  double initial_ = 0.0;
  std::vector<double> area_;  // area_[k] = integral over [0, t_k]
};

double step_eval(const StepFunction& f, double t);
double step_left_limit(const StepFunction& f, double t);
double restricted_integral(const StepFunction& f, double tau);

// Discrete cumulative hazard: increments dL(u_k) in [0, 1] on a grid.
class CumulativeHazard {
 public:
  CumulativeHazard() = default;
  CumulativeHazard(Grid grid, std::vector<double> increments);
  static CumulativeHazard zero(Grid grid);

  const Grid& grid() const { return grid_; }
  const std::vector<double>& increments() const { return inc_; }
  StepFunction cumulative() const;

 private:
  Grid grid_;
  std::vector<double> inc_;
};

// S(t) = prod_{u <= t} (1 - dL(u)).
StepFunction product_limit(const CumulativeHazard& hazard);
// F_j(t) = sum_{u <= t} S_all(u-) dL_j(u).
StepFunction cif_from_hazards(const CumulativeHazard& cause, const CumulativeHazard& all);

enum class Counting { AllCause, Cause, OtherCauses, Censoring };

struct EventFilter {
  Counting kind = Counting::AllCause;
  int cause = 1;
  bool matches(int observed_cause) const;
};

// int_0^{horizon ^ T} f dM for the selected counting process. The censoring
// process uses the at-risk set {T > u} plus {T = u, censored}.
double martingale_integral(const Observation& obs, const StepFunction& integrand,
                           const CumulativeHazard& hazard, EventFilter filter, double horizon);

// Per-arm curve bundle on one grid: censoring, per-cause and all-cause
// increments with the derived S, G and F_j.
struct ArmCurves {
  Grid grid;
  std::vector<double> dcens;
  std::vector<std::vector<double>> dcause;
  std::vector<double> dall;
  std::vector<double> surv;
  std::vector<double> cens_surv;
  std::vector<std::vector<double>> cif;

  static ArmCurves from_increments(Grid grid, std::vector<std::vector<double>> dcause,
                                   std::vector<double> dcens);
  int causes() const { return static_cast<int>(dcause.size()); }
  std::size_t size() const { return grid->size(); }

  StepFunction S() const;
  StepFunction G() const;
  StepFunction F(int cause) const;
  CumulativeHazard hazard_all() const;
  CumulativeHazard hazard_cause(int cause) const;
  CumulativeHazard hazard_censoring() const;
};

// Index helpers on a sorted grid.
inline std::size_t count_le(const std::vector<double>& g, double x) {
  return static_cast<std::size_t>(std::upper_bound(g.begin(), g.end(), x) - g.begin());
}
inline std::size_t count_lt(const std::vector<double>& g, double x) {
  return static_cast<std::size_t>(std::lower_bound(g.begin(), g.end(), x) - g.begin());
}

}  // namespace cutlearn
