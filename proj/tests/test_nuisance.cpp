#include <cmath>
#include <random>
#include <stdexcept>

#include "cutlearn/ensemble.hpp"
#include "cutlearn/nuisance.hpp"
#include "cutlearn/simgen.hpp"
#include "doctest.h"

using namespace cutlearn;

namespace {

// Covariate-free competing exponential times with exponential censoring.
std::vector<Observation> exp_data(int n, std::vector<double> rates, double cens_rate, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Observation> out;
  for (int i = 0; i < n; ++i) {
    Observation o;
    o.id = i + 1;
    o.x = {u(rng), u(rng)};
    o.arm = u(rng) < 0 ? 0 : 1;
    double t = INFINITY;
    for (std::size_t j = 0; j < rates.size(); ++j) {
      const double tj = std::exponential_distribution<double>(rates[j])(rng);
      if (tj < t) {
        t = tj;
        o.cause = static_cast<int>(j) + 1;
      }
    }
    const double c = cens_rate > 0 ? std::exponential_distribution<double>(cens_rate)(rng) : INFINITY;
    if (c < t) {
      t = c;
      o.cause = 0;
    }
    o.time = t;
    out.push_back(o);
  }
  return out;
}

class FlatHazard final : public HazardModel {
 public:
  FlatHazard(Grid g, int target, double d) : HazardModel(std::move(g), target), d_(d) {}
  std::vector<double> increments(const std::vector<double>&, int) const override {
    return std::vector<double>(grid_->size(), d_);
  }

 private:
  double d_;
};

double cumulative_at(const std::vector<double>& grid, const std::vector<double>& inc, double t) {
  double s = 0;
  for (std::size_t k = 0; k < grid.size() && grid[k] <= t; ++k) s += inc[k];
  return s;
}

}  // namespace

TEST_CASE("propensity with A independent of X is flat at 1/2") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Observation> d;
  for (int i = 0; i < 2000; ++i) {
    Observation o;
    o.id = i;
    o.x = {u(rng), u(rng), u(rng)};
    o.arm = i % 2;
    d.push_back(o);
  }
  const auto pm = fit_propensity(d, NuisanceConfig{});
  for (int i = 0; i < 50; ++i) {
    std::vector<double> x{u(rng), u(rng), u(rng)};
    CHECK(std::abs(pm.pi1(x) - 0.5) <= 0.05);
    CHECK(pm.pi(0, x) + pm.pi(1, x) == 1.0);
  }
}

TEST_CASE("setting-1 propensity at X = 0") {
  TrueModel m(1);
  const std::vector<double> zero(6, 0.0);
  CHECK(m.pi1(zero) == doctest::Approx(expit(-0.3)).epsilon(1e-12));
  SimConfig sc;
  sc.setting = 1;
  sc.n = 10000;
  sc.seed = 17;
  const auto pm = fit_propensity(generate(sc).obs, NuisanceConfig{});
  CHECK(std::abs(pm.pi1(zero) - expit(-0.3)) <= 0.05);
}

TEST_CASE("propensity errors and clipping") {
  auto d = exp_data(100, {0.5}, 0.2, 1);
  for (auto& o : d) o.arm = 1;
  CHECK_THROWS_AS(fit_propensity(d, NuisanceConfig{}), std::invalid_argument);
  // Perfect separation is clipped into [lo, hi].
  for (auto& o : d) o.arm = o.x[0] > 0 ? 1 : 0;
  const auto pm = fit_propensity(d, NuisanceConfig{});
  for (double v : {-0.99, -0.5, 0.5, 0.99}) {
    const double p = pm.pi1({v, 0.0});
    CHECK(p >= 0.01);
    CHECK(p <= 0.99);
  }
}

TEST_CASE("hazard on covariate-free exponential data matches lambda t") {
  const double rate = 0.5;
  const auto d = exp_data(5000, {rate}, 0.2, 7);
  NuisanceConfig cfg;
  const Grid g = fold_grid(d, {}, cfg.grid_cap);
  const auto h = fit_hazard(d, 1, g, cfg);
  std::vector<double> times;
  for (const auto& o : d)
    if (o.event()) times.push_back(o.time);
  std::sort(times.begin(), times.end());
  for (double q : {0.25, 0.5, 0.75}) {
    const double t = times[static_cast<std::size_t>(q * (times.size() - 1))];
    for (int arm = 0; arm < 2; ++arm) {
      const auto inc = h->increments({0.1, -0.2}, arm);
      for (double v : inc) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
      const double lam = cumulative_at(*g, inc, t);
      CHECK(std::abs(lam - rate * t) <= 0.10 * rate * t);
    }
  }
}

TEST_CASE("no censoring gives G = 1") {
  const auto d = exp_data(500, {0.5}, 0.0, 9);
  NuisanceConfig cfg;
  const auto fit = fit_nuisances(d, {2.0}, 1, cfg);
  CHECK(fit->degenerate_models() >= 1);
  const auto eta = fit->predict(d[0]);
  for (int a = 0; a < 2; ++a)
    for (double g : eta.arm[a].cens_surv) CHECK(g == 1.0);
}

TEST_CASE("two constant cause hazards give F1/F2 = 1.2") {
  const auto d = exp_data(5000, {0.12, 0.10}, 0.05, 11);
  NuisanceConfig cfg;
  const auto fit = fit_nuisances(d, {5.0}, 2, cfg);
  Observation s = d[3];
  const auto eta = fit->predict(s);
  const auto& grid = *eta.arm[0].grid;
  for (int a = 0; a < 2; ++a) {
    const std::size_t k = count_le(grid, 5.0) - 1;
    const double r = eta.arm[a].cif[0][k] / eta.arm[a].cif[1][k];
    CHECK(std::abs(r / 1.2 - 1.0) <= 0.15);
    for (std::size_t i = 0; i < grid.size(); ++i)
      CHECK(std::abs(eta.arm[a].surv[i] + eta.arm[a].cif[0][i] + eta.arm[a].cif[1][i] - 1.0) <= 1e-12);
  }
}

TEST_CASE("predict_nuisances with zero and arm-symmetric hazards") {
  const Grid g = make_grid({0.5, 1.0, 2.0, 4.0});
  auto d = exp_data(200, {0.5}, 0.2, 2);
  PropensityModel pm = fit_propensity(d, NuisanceConfig{});
  {
    FittedNuisances zero(g, pm, {std::make_shared<FlatHazard>(g, 1, 0.0), std::make_shared<FlatHazard>(g, 2, 0.0)},
                         std::make_shared<FlatHazard>(g, 0, 0.0));
    const auto eta = zero.predict(d[0]);
    for (int a = 0; a < 2; ++a)
      for (std::size_t k = 0; k < g->size(); ++k) {
        CHECK(eta.arm[a].surv[k] == 1.0);
        CHECK(eta.arm[a].cens_surv[k] == 1.0);
        CHECK(eta.arm[a].cif[0][k] == 0.0);
        CHECK(eta.arm[a].cif[1][k] == 0.0);
      }
  }
  FittedNuisances flat(g, pm, {std::make_shared<FlatHazard>(g, 1, 0.1)}, std::make_shared<FlatHazard>(g, 0, 0.05));
  const auto eta = flat.predict(d[1]);
  CHECK(eta.arm[0].surv == eta.arm[1].surv);
  CHECK(eta.arm[0].cens_surv == eta.arm[1].cens_surv);
  CHECK(eta.pi(0) + eta.pi(1) == 1.0);
  CHECK_THROWS_AS(predict_nuisances(flat, d[1], Grid{}), std::invalid_argument);
}

TEST_CASE("ensemble_select examples") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  const int n = 200;
  Vector y(n), w = Vector::Ones(n);
  for (int i = 0; i < n; ++i) y[i] = z(rng);

  Matrix one(n, 1);
  one.col(0) = y.array() + 0.3;
  CHECK(ensemble_select(one, y, w).rho[0] == doctest::Approx(1.0));

  Matrix p(n, 2);
  p.col(0) = y;
  for (int i = 0; i < n; ++i) p(i, 1) = z(rng);
  auto e = ensemble_select(p, y, w);
  CHECK(std::abs(e.rho[0] - 1.0) <= 1e-6);
  CHECK(std::abs(e.rho[1]) <= 1e-6);

  Matrix s(n, 2);
  for (int i = 0; i < n; ++i) {
    const double d = z(rng);
    s(i, 0) = y[i] + d;
    s(i, 1) = y[i] - d;
  }
  e = ensemble_select(s, y, w);
  CHECK(std::abs(e.rho[0] - 0.5) <= 1e-6);
  CHECK(std::abs(e.rho[1] - 0.5) <= 1e-6);
  CHECK(e.rho[0] + e.rho[1] == doctest::Approx(1.0).epsilon(1e-10));

  CHECK_THROWS_AS(ensemble_select(s, y, Vector::Zero(n)), std::invalid_argument);
}

TEST_CASE("base learners: constant targets and determinism") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  const int n = 150;
  Matrix x(n, 3);
  Vector y(n), w(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = u(rng);
    y[i] = std::sin(3 * x(i, 0)) + 0.2 * u(rng);
    w[i] = 0.5 + 0.5 * (u(rng) + 1);
  }
  const Vector c = Vector::Constant(n, 2.5);
  for (const auto& name : {"constant", "ridge", "knn", "boosting"}) {
    CAPTURE(name);
    auto r = make_regressor(name);
    const Vector pc = r->fit(x, c, w)->predict(x);
    CHECK((pc.array() - 2.5).abs().maxCoeff() <= 1e-9);
    const Vector a = r->fit(x, y, w)->predict(x), b = r->fit(x, y, w)->predict(x);
    CHECK(a == b);
  }
  CHECK_THROWS_AS(make_regressor("forest"), std::invalid_argument);
}
