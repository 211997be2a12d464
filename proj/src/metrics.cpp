#include "cutlearn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

namespace cutlearn {

namespace {

struct Sums {
  double gain = 0, regret = 0;
};

Sums gain_regret(const std::vector<double>& psi_hat, const std::vector<double>& psi0, const std::vector<double>& h) {
  Sums s;
  for (std::size_t i = 0; i < psi0.size(); ++i) {
    const double prod = psi0[i] * psi_hat[i];
    if (prod > 0) s.gain += h[i] * std::abs(psi0[i]);
    if (prod < 0) s.regret += h[i] * std::abs(psi0[i]);
  }
  return s;
}

double ratio(double g, double r, bool& inf) {
  inf = !(r > 0.0);
  return inf ? std::numeric_limits<double>::infinity() : g / r;
}

}  // namespace

std::vector<std::pair<std::string, double>> MetricsReport::items() const {
  return {{"pehe", pehe},
          {"pehe_h", pehe_h},
          {"gain", gain},
          {"gain_h", gain_h},
          {"regret", regret},
          {"regret_h", regret_h},
          {"grd", grd},
          {"grd_h", grd_h},
          {"grr", grr},
          {"grr_h", grr_h},
          {"accuracy", accuracy},
          {"prevalence", prevalence},
          {"eps_ate", eps_ate},
          {"eps_ate_h", eps_ate_h},
          {"baseline_gain", baseline_gain},
          {"baseline_regret", baseline_regret},
          {"baseline_grd", baseline_grd},
          {"baseline_gain_h", baseline_gain_h},
          {"baseline_regret_h", baseline_regret_h},
          {"baseline_grd_h", baseline_grd_h}};
}

MetricsReport evaluate(const std::vector<double>& psi_hat, const std::vector<double>& psi0,
                       const std::optional<std::vector<double>>& h_opt,
                       const std::optional<std::vector<double>>& h_hat_opt) {
  const std::size_t n = psi0.size();
  if (n == 0) throw std::invalid_argument("evaluate: empty input");
  if (psi_hat.size() != n) throw std::invalid_argument("evaluate: psi_hat and psi0 differ in length");
  const std::vector<double> ones(n, 1.0);
  const std::vector<double>& h = h_opt ? *h_opt : ones;
  const std::vector<double>& hh = h_hat_opt ? *h_hat_opt : h;
  for (const auto* w : {&h, &hh}) {
    if (w->size() != n) throw std::invalid_argument("evaluate: weight length mismatch");
    double s = 0;
    for (double v : *w) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("evaluate: weights must be finite and >= 0");
      s += v;
    }
    if (!(s > 0.0)) throw std::invalid_argument("evaluate: weights sum to zero");
  }
  const double N = static_cast<double>(n);
  double hs = 0, hhs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    hs += h[i];
    hhs += hh[i];
  }

  MetricsReport m;
  double sq = 0, sq_h = 0, diff = 0, h_psi0 = 0, hh_psi = 0, mean0 = 0;
  std::size_t acc = 0, prev = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = psi0[i] - psi_hat[i];
    sq += e * e;
    sq_h += h[i] * e * e;
    diff += e;
    h_psi0 += h[i] * psi0[i];
    hh_psi += hh[i] * psi_hat[i];
    mean0 += psi0[i];
    acc += psi0[i] * psi_hat[i] > 0 ? 1 : 0;
    prev += psi0[i] > 0 ? 1 : 0;
  }
  m.pehe = sq / N;
  m.pehe_h = sq_h / hs;
  m.eps_ate = diff / N;
  m.eps_ate_h = h_psi0 / hs - hh_psi / hhs;
  m.accuracy = static_cast<double>(acc) / N;
  m.prevalence = static_cast<double>(prev) / N;

  const Sums s1 = gain_regret(psi_hat, psi0, ones), sh = gain_regret(psi_hat, psi0, h);
  m.gain = s1.gain / N;
  m.regret = s1.regret / N;
  m.gain_h = sh.gain / hs;
  m.regret_h = sh.regret / hs;
  m.grd = m.gain - m.regret;
  m.grd_h = m.gain_h - m.regret_h;
  m.grr = ratio(m.gain, m.regret, m.grr_infinite);
  m.grr_h = ratio(m.gain_h, m.regret_h, m.grr_h_infinite);

  const std::vector<double> base(n, mean0 / N), base_h(n, h_psi0 / hs);
  const Sums b1 = gain_regret(base, psi0, ones), bh = gain_regret(base_h, psi0, h);
  m.baseline_gain = b1.gain / N;
  m.baseline_regret = b1.regret / N;
  m.baseline_grd = m.baseline_gain - m.baseline_regret;
  m.baseline_gain_h = bh.gain / hs;
  m.baseline_regret_h = bh.regret / hs;
  m.baseline_grd_h = m.baseline_gain_h - m.baseline_regret_h;
  return m;
}

std::vector<double> overlap_weights(const std::vector<double>& pi1) {
  std::vector<double> h(pi1.size());
  for (std::size_t i = 0; i < pi1.size(); ++i) h[i] = pi1[i] * (1.0 - pi1[i]);
  return h;
}

Quantiles summarize(std::vector<double> v) {
  Quantiles q;
  q.n = v.size();
  if (v.empty()) return q;
  std::sort(v.begin(), v.end());
  auto at = [&](double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  q.min = v.front();
  q.max = v.back();
  q.q25 = at(0.25);
  q.median = at(0.5);
  q.q75 = at(0.75);
  double s = 0;
  for (double x : v) s += x;
  q.mean = s / static_cast<double>(v.size());
  const double lo = q.q25 - 1.5 * q.iqr(), hi = q.q75 + 1.5 * q.iqr();
  q.whisker_lo = *std::lower_bound(v.begin(), v.end(), lo);
  q.whisker_hi = *(std::upper_bound(v.begin(), v.end(), hi) - 1);
  return q;
}

ShapeReport shape_diagnostics(const std::vector<ShapeInput>& inputs, int causes, ShapeTarget target) {
  std::map<std::string, const ShapeInput*> by_name;
  std::set<double> horizons;
  std::size_t n = 0;
  for (const auto& in : inputs) {
    by_name[in.spec.name()] = &in;
    horizons.insert(in.spec.horizon);
    if (n == 0) n = in.values.size();
    if (in.values.size() != n) throw std::invalid_argument("shape_diagnostics: inputs differ in length");
  }
  auto find = [&](Family f, double t, int cause, int arm) -> const ShapeInput* {
    EstimandSpec s{f, t, cause, arm};
    auto it = by_name.find(s.name());
    return it == by_name.end() ? nullptr : it->second;
  };
  ShapeReport rep;
  auto run = [&](const std::string& name, double t, std::vector<std::pair<const ShapeInput*, std::string>> terms,
                 std::vector<double> sign, double rhs) {
    ShapeCheck c;
    c.name = name;
    c.horizon = t;
    for (const auto& [p, label] : terms)
      if (!p) c.missing.push_back(label);
    c.complete = c.missing.empty();
    if (c.complete) {
      c.residuals.assign(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        double s = -rhs;
        for (std::size_t k = 0; k < terms.size(); ++k) s += sign[k] * terms[k].first->values[i];
        c.residuals[i] = std::abs(s);
      }
      c.summary = summarize(c.residuals);
    }
    rep.checks.push_back(std::move(c));
  };
  const bool level = target == ShapeTarget::Level;
  for (double t : horizons) {
    auto label = [&](Family f, int cause, int arm) { return EstimandSpec{f, t, cause, arm}.name(); };
    if (find(Family::Survival, t, 1, 1) || find(Family::Cif, t, 1, 1)) {
      std::vector<std::pair<const ShapeInput*, std::string>> terms{{find(Family::Survival, t, 1, 1), label(Family::Survival, 1, 1)}};
      for (int j = 1; j <= causes; ++j) terms.push_back({find(Family::Cif, t, j, 1), label(Family::Cif, j, 1)});
      run("survival_plus_cif", t, terms, std::vector<double>(terms.size(), 1.0), level ? 1.0 : 0.0);
    }
    if (find(Family::Rmst, t, 1, 1) || find(Family::Rmtl, t, 1, 1)) {
      std::vector<std::pair<const ShapeInput*, std::string>> terms{{find(Family::Rmst, t, 1, 1), label(Family::Rmst, 1, 1)}};
      for (int j = 1; j <= causes; ++j) terms.push_back({find(Family::Rmtl, t, j, 1), label(Family::Rmtl, j, 1)});
      run("rmst_plus_rmtl", t, terms, std::vector<double>(terms.size(), 1.0), level ? t : 0.0);
    }
    if (level) continue;
    for (int j = 1; j <= causes; ++j)
      for (int as = 0; as < 2; ++as) {
        const struct {
          Family direct, indirect, total;
          const char* tag;
        } fams[2] = {{Family::SepDirectCif, Family::SepIndirectCif, Family::Cif, "cif"},
                     {Family::SepDirectRmtl, Family::SepIndirectRmtl, Family::Rmtl, "rmtl"}};
        for (const auto& f : fams) {
          const ShapeInput* d = find(f.direct, t, j, as);
          const ShapeInput* ind = find(f.indirect, t, j, 1 - as);
          if (!d && !ind) continue;
          run(std::string("separable_") + f.tag + "_j" + std::to_string(j) + "_astar" + std::to_string(as), t,
              {{d, label(f.direct, j, as)}, {ind, label(f.indirect, j, 1 - as)}, {find(f.total, t, j, 1), label(f.total, j, 1)}},
              {1.0, 1.0, -1.0}, 0.0);
        }
      }
  }
  return rep;
}

}  // namespace cutlearn
