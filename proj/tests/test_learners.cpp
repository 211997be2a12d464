#include <cmath>
#include <random>
#include <stdexcept>

#include "cutlearn/learners.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace cutlearn;

namespace {

struct Toy {
  Matrix x;
  std::vector<int> arm;
  Vector y;
};

Toy toy(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Toy t{Matrix(n, 3), std::vector<int>(static_cast<std::size_t>(n)), Vector(n)};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) t.x(i, j) = u(rng);
    t.arm[static_cast<std::size_t>(i)] = u(rng) < 0 ? 0 : 1;
    t.y[i] = 0.5 * t.x(i, 1) + 0.3 * u(rng);
  }
  return t;
}

LearnerConfig linear_cfg() {
  LearnerConfig c;
  c.base_learners = {"constant", "ridge", "knn"};
  return c;
}

const EstimandSpec kSurv{Family::Survival, 2.0, 1, 1};
const EstimandSpec kRmst{Family::Rmst, 2.0, 1, 1};

}  // namespace

TEST_CASE("S and T with a constant outcome give zero") {
  Toy t = toy(300, 1);
  t.y.setConstant(0.8);
  for (LearnerKind k : {LearnerKind::S, LearnerKind::T}) {
    const auto m = fit_mean_difference(k, kRmst, t.x, t.arm, t.y, LearnerConfig{});
    CHECK(m.predict(t.x).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("Y = A gives psi = 1 and arm swap flips the sign") {
  Toy t = toy(2000, 2);
  for (std::size_t i = 0; i < t.arm.size(); ++i) t.y[static_cast<Eigen::Index>(i)] = t.arm[i];
  std::vector<int> swapped(t.arm.size());
  for (std::size_t i = 0; i < t.arm.size(); ++i) swapped[i] = 1 - t.arm[i];
  for (LearnerKind k : {LearnerKind::S, LearnerKind::T}) {
    CAPTURE(to_string(k));
    const Vector p = fit_mean_difference(k, kRmst, t.x, t.arm, t.y, LearnerConfig{}).predict(t.x);
    CHECK((p.array() - 1.0).abs().maxCoeff() <= 0.05);
    const Vector q = fit_mean_difference(k, kRmst, t.x, swapped, t.y, LearnerConfig{}).predict(t.x);
    CHECK((q.array() + 1.0).abs().maxCoeff() <= 0.05);
  }
}

TEST_CASE("T-learner rejects a tiny arm") {
  Toy t = toy(100, 3);
  for (std::size_t i = 0; i < t.arm.size(); ++i) t.arm[i] = i < 5 ? 0 : 1;
  CHECK_THROWS_WITH_AS(fit_mean_difference(LearnerKind::T, kSurv, t.x, t.arm, t.y, LearnerConfig{}),
                       doctest::Contains("arm 0"), std::invalid_argument);
}

TEST_CASE("scale equivariance of S and T with linear-type base learners") {
  Toy t = toy(400, 4);
  for (std::size_t i = 0; i < t.arm.size(); ++i) t.y[static_cast<Eigen::Index>(i)] += 0.4 * t.arm[i] * t.x(static_cast<Eigen::Index>(i), 0);
  for (LearnerKind k : {LearnerKind::S, LearnerKind::T}) {
    const Vector a = fit_mean_difference(k, kRmst, t.x, t.arm, t.y, linear_cfg()).raw(t.x);
    const Vector b = fit_mean_difference(k, kRmst, t.x, t.arm, Vector(3.0 * t.y), linear_cfg()).raw(t.x);
    CHECK((b - 3.0 * a).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("transformed learner on a constant target") {
  Toy t = toy(200, 5);
  std::vector<TransformedSample> s(200);
  for (auto& v : s) v.outcome = 0.35;
  const auto m = fit_transformed(LearnerKind::AIPTW, kSurv, t.x, s, LearnerConfig{});
  CHECK((m.predict(t.x).array() - 0.35).abs().maxCoeff() <= 1e-9);
  for (auto& v : s) v.weight = 0.0;
  CHECK_THROWS_AS(fit_transformed(LearnerKind::AIPTW, kSurv, t.x, s, LearnerConfig{}), std::invalid_argument);
}

TEST_CASE("R-learner recovers a linear effect") {
  const int n = 5000;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> z(0.0, 0.5);
  Matrix x(n, 2);
  std::vector<TransformedSample> s(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    x(i, 0) = u(rng);
    x(i, 1) = u(rng);
    const double pi1 = 1.0 / (1.0 + std::exp(-0.5 * x(i, 1)));
    Observation o;
    o.arm = (u(rng) + 1) / 2 < pi1 ? 1 : 0;
    const double base = std::cos(2 * x(i, 1));
    const double y = base + o.arm * x(i, 0) + z(rng);
    const double mu0 = base, mu1 = base + x(i, 0);
    s[static_cast<std::size_t>(i)] = minimization_target(LearnerKind::R, y, o, mu0, mu1, pi1);
  }
  LearnerConfig cfg;
  cfg.base_learners = {"ridge"};
  const auto m = fit_transformed(LearnerKind::R, kRmst, x, s, cfg);
  Matrix probe(2, 2);
  probe << -0.5, 0.0, 0.5, 0.0;
  const Vector p = m.predict(probe);
  CHECK(std::abs((p[1] - p[0]) - 1.0) <= 0.1);
}

TEST_CASE("zero-weight rows have no influence") {
  Toy t = toy(300, 7);
  std::vector<TransformedSample> s(300);
  for (int i = 0; i < 300; ++i) {
    s[static_cast<std::size_t>(i)].outcome = t.y[i];
    s[static_cast<std::size_t>(i)].weight = 0.5 + 0.5 * (t.x(i, 2) + 1);
  }
  Matrix x2(600, 3);
  x2 << t.x, t.x;
  auto s2 = s;
  for (int i = 0; i < 300; ++i) {
    auto d = s[static_cast<std::size_t>(i)];
    d.weight = 0.0;
    d.outcome = 100.0;
    s2.push_back(d);
  }
  const auto a = fit_transformed(LearnerKind::MC, kRmst, t.x, s, LearnerConfig{});
  const auto b = fit_transformed(LearnerKind::MC, kRmst, x2, s2, LearnerConfig{});
  CHECK(a.raw(t.x) == b.raw(t.x));
  CHECK(b.diagnostics().zero_weight == 300);
}

TEST_CASE("X-learner combinations") {
  Toy t = toy(400, 8);
  Vector imputed(400);
  for (int i = 0; i < 400; ++i) imputed[i] = t.arm[static_cast<std::size_t>(i)] == 0 ? 2.0 : 4.0;
  LearnerConfig cfg;
  cfg.base_learners = {"constant"};
  const PropensityFn half = [](const Eigen::Ref<const Eigen::RowVectorXd>&) { return 0.5; };
  const EstimandSpec wide{Family::Rmst, 10.0, 1, 1};
  CHECK((fit_x_learner(wide, t.x, t.arm, imputed, half, cfg).predict(t.x).array() - 3.0).abs().maxCoeff() <= 1e-9);
  cfg.x_weight = XWeight::Zero;
  CHECK((fit_x_learner(wide, t.x, t.arm, imputed, nullptr, cfg).predict(t.x).array() - 4.0).abs().maxCoeff() <= 1e-9);
  cfg.x_weight = XWeight::One;
  CHECK((fit_x_learner(wide, t.x, t.arm, imputed, nullptr, cfg).predict(t.x).array() - 2.0).abs().maxCoeff() <= 1e-9);

  // Equal arm regressions give g(X) for any weight.
  cfg = LearnerConfig{};
  cfg.base_learners = {"ridge"};
  const Vector g = 0.3 * t.x.col(0);
  const PropensityFn skew = [](const Eigen::Ref<const Eigen::RowVectorXd>& r) { return 0.2 + 0.3 * (r(1) + 1); };
  const Vector p = fit_x_learner(wide, t.x, t.arm, g, skew, cfg).predict(t.x);
  CHECK((p - g).cwiseAbs().maxCoeff() <= 1e-2);
  CHECK_THROWS_AS(fit_x_learner(wide, t.x, t.arm, g, nullptr, cfg), std::invalid_argument);
}

TEST_CASE("predict_hte clips, is deterministic and checks dimensions") {
  Toy t = toy(200, 9);
  std::vector<TransformedSample> s(200);
  for (auto& v : s) v.outcome = 1.7;
  const auto surv = fit_transformed(LearnerKind::IPTW, kSurv, t.x, s, LearnerConfig{});
  CHECK(predict_hte(surv, {0.1, 0.2, 0.3}) == 1.0);
  const auto rmst = fit_transformed(LearnerKind::IPTW, kRmst, t.x, s, LearnerConfig{});
  const double v1 = predict_hte(rmst, {0.1, 0.2, 0.3}), v2 = predict_hte(rmst, {0.1, 0.2, 0.3});
  CHECK(v1 == doctest::Approx(1.7));
  CHECK(v1 == v2);
  CHECK_THROWS_AS(predict_hte(rmst, {0.1, 0.2}), std::invalid_argument);
  CHECK(clip_hte(kRmst, -5.0) == -2.0);
  CHECK(clip_hte(kSurv, std::nan("")) == 0.0);
}

TEST_CASE("ensemble dominance and model summary") {
  Toy t = toy(500, 10);
  const auto m = fit_mean_difference(LearnerKind::T, kRmst, t.x, t.arm, t.y, LearnerConfig{});
  for (const auto& e : m.ensembles()) {
    double best = e.vertex_loss[0];
    for (double v : e.vertex_loss) best = std::min(best, v);
    CHECK(e.cv_loss <= best + 1e-8);
    double s = 0;
    for (double r : e.rho) {
      CHECK(r >= 0.0);
      s += r;
    }
    CHECK(std::abs(s - 1.0) <= 1e-10);
  }
  const auto j = nlohmann::json::parse(summary_json(m));
  CHECK(j["learner"] == "T");
  CHECK(j["ensembles"].size() == 2);
  CHECK(j["ensembles"][0]["weights"].contains("boosting"));
}
