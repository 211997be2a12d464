#include "cutlearn/crossfit.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <set>
#include <stdexcept>
#include <thread>

namespace cutlearn {

std::string to_string(MuMode m) { return m == MuMode::Implied ? "implied" : "regression"; }

MuMode parse_mu_mode(const std::string& s) {
  if (s == "implied") return MuMode::Implied;
  if (s == "regression") return MuMode::Regression;
  throw std::invalid_argument("unknown mu mode '" + s + "'");
}

namespace {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stage_seed(std::uint64_t seed, int stage, int fold) {
  return mix64(seed ^ mix64(static_cast<std::uint64_t>(stage) * 7919u + static_cast<std::uint64_t>(fold) + 1u));
}

bool uses_target(LearnerKind k) { return is_transformed(k); }

std::vector<LearnerKind> target_kinds_for(const std::vector<LearnerKind>& learners) {
  std::vector<LearnerKind> out;
  auto add = [&](LearnerKind k) {
    if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
  };
  for (LearnerKind k : learners) {
    if (uses_target(k)) add(k);
    if (k == LearnerKind::X) add(LearnerKind::RA);
  }
  return out;
}

Matrix rows_matrix(const std::vector<Observation>& obs, const std::vector<std::size_t>& rows) {
  const auto p = static_cast<Eigen::Index>(obs.empty() ? 0 : obs[0].x.size());
  Matrix m(static_cast<Eigen::Index>(rows.size()), p);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (Eigen::Index j = 0; j < p; ++j) m(static_cast<Eigen::Index>(r), j) = obs[rows[r]].x[static_cast<std::size_t>(j)];
  return m;
}

std::vector<Observation> pick(const std::vector<Observation>& obs, const std::vector<std::size_t>& rows) {
  std::vector<Observation> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(obs[r]);
  return out;
}

struct Split {
  std::vector<std::size_t> train, valid;
};

Split split_rows(const std::vector<int>& fold, int k) {
  Split s;
  for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == k ? s.valid : s.train).push_back(i);
  return s;
}

FoldRecord make_record(const std::vector<Observation>& obs, const Split& s, int stage, int fold) {
  FoldRecord r;
  r.stage = stage;
  r.fold = fold;
  for (auto i : s.train) r.train_ids.push_back(obs[i].id);
  for (auto i : s.valid) r.valid_ids.push_back(obs[i].id);
  std::sort(r.train_ids.begin(), r.train_ids.end());
  std::sort(r.valid_ids.begin(), r.valid_ids.end());
  return r;
}

LearnerConfig stage_learner_cfg(const PipelineSpec& ps, int stage, int fold) {
  LearnerConfig c = ps.learner;
  c.seed = stage_seed(ps.learner.seed ^ ps.seed, stage, fold);
  c.base.seed = stage_seed(ps.learner.base.seed ^ ps.seed, stage + 10, fold);
  return c;
}

std::vector<int> draw_folds(const std::vector<Observation>& obs, int k, const PipelineSpec& ps, int stage) {
  std::string last;
  for (int attempt = 0; attempt < ps.split.max_attempts; ++attempt) {
    std::vector<int> f = assign_folds(obs, k, ps.seed, stage, attempt, ps.split.stratify);
    std::vector<std::array<int, 2>> cnt(static_cast<std::size_t>(k), {0, 0});
    std::array<int, 2> tot{0, 0};
    for (std::size_t i = 0; i < obs.size(); ++i) {
      cnt[static_cast<std::size_t>(f[i])][static_cast<std::size_t>(obs[i].arm)]++;
      tot[static_cast<std::size_t>(obs[i].arm)]++;
    }
    bool ok = true;
    for (int j = 0; j < k && ok; ++j)
      for (int a = 0; a < 2 && ok; ++a)
        if (tot[a] - cnt[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)] < 1) {
          ok = false;
          last = "stage " + std::to_string(stage) + " fold " + std::to_string(j) + ": training set has no arm-" +
                 std::to_string(a) + " rows";
        }
    if (ok) return f;
  }
  throw std::runtime_error("fold re-draw exhausted after " + std::to_string(ps.split.max_attempts) +
                           " attempts (" + last + ")");
}

std::vector<Observation> sorted_copy(const std::vector<Observation>& data, int causes) {
  if (data.empty()) throw std::invalid_argument("pipeline: empty data");
  std::vector<Observation> obs = data;
  std::stable_sort(obs.begin(), obs.end(), [](const Observation& a, const Observation& b) { return a.id < b.id; });
  const std::size_t p = obs[0].x.size();
  for (std::size_t i = 0; i < obs.size(); ++i) {
    validate(obs[i], causes);
    if (obs[i].x.size() != p) throw std::invalid_argument("row id " + std::to_string(obs[i].id) + ": covariate count differs");
    if (i > 0 && obs[i].id == obs[i - 1].id) throw std::invalid_argument("duplicate id " + std::to_string(obs[i].id));
  }
  return obs;
}

void init_columns(AugmentedData& d, const PipelineSpec& ps) {
  const std::size_t n = d.obs.size();
  const auto tk = target_kinds_for(ps.learners);
  for (const auto& s : ps.estimands) {
    EstimandColumns c;
    c.spec = s;
    c.kinds = ps.export_all_cuts ? admissible_kinds(s.family) : std::vector<CutKind>{ps.cut};
    if (std::find(c.kinds.begin(), c.kinds.end(), ps.cut) == c.kinds.end()) c.kinds.push_back(ps.cut);
    c.cuts.assign(c.kinds.size(), std::vector<double>(n, 0.0));
    c.y.assign(n, 0.0);
    c.phi.assign(n, 0.0);
    for (int a = 0; a < 2; ++a) {
      c.mu_eta[a].assign(n, 0.0);
      c.mu_hat[a].assign(n, 0.0);
    }
    c.floored.assign(n, 0);
    c.pi_hat.assign(n, 0.5);
    c.target_kinds = tk;
    c.targets.assign(tk.size(), std::vector<TransformedSample>(n));
    d.columns.push_back(std::move(c));
  }
  d.pi1_stage1.assign(n, 0.5);
}

void stage1_row(const Observation& o, const NuisanceSet& eta, EstimandColumns& c, std::size_t i, const PipelineSpec& ps) {
  const auto& s = c.spec;
  int floored = 0;
  if (!s.separable()) {
    CutEvaluator ev(eta.arm[o.arm], s, ps.cut_options);
    for (std::size_t k = 0; k < c.kinds.size(); ++k) c.cuts[k][i] = ev(o, c.kinds[k]).value;
    CutValue y = ev(o, ps.cut);
    c.y[i] = y.value;
    floored += y.floored;
  } else {
    CutValue y = learner_cut(o, eta, s, CutKind::AIPCW, ps.cut_options);
    for (std::size_t k = 0; k < c.kinds.size(); ++k) c.cuts[k][i] = y.value;
    c.y[i] = y.value;
    floored += y.floored;
  }
  CutValue phi = if_transform(o, eta, s, ps.cut_options);
  c.phi[i] = phi.value;
  floored += phi.floored;
  for (int a = 0; a < 2; ++a) c.mu_eta[a][i] = implied_mean(eta, s, a);
  c.floored[i] = floored;
}

std::vector<double> horizons_of(const PipelineSpec& ps) {
  std::vector<double> h;
  for (const auto& s : ps.estimands) h.push_back(s.horizon);
  return h;
}

// Stage 1: nuisances on each training fold, CUTs / IF / implied means on
// the validation fold.
void run_stage1(AugmentedData& d, const PipelineSpec& ps, PipelineResult& res) {
  const int K = ps.split.k1;
  d.fold.push_back(draw_folds(d.obs, K, ps, 1));
  const auto& fold = d.fold[0];
  std::vector<FoldRecord> recs(static_cast<std::size_t>(K));
  std::vector<int> degenerate(static_cast<std::size_t>(K), 0);
  const auto horizons = horizons_of(ps);
  parallel_for(K, ps.workers, [&](int k) {
    Split s = split_rows(fold, k);
    std::shared_ptr<const NuisanceProvider> provider = ps.oracle;
    if (provider) {
      s.train.clear();  // the oracle is not trained on the sample
    } else {
      NuisanceConfig nc = ps.nuisance;
      nc.seed = stage_seed(ps.nuisance.seed ^ ps.seed, 1, k);
      auto fitted = fit_nuisances(pick(d.obs, s.train), horizons, ps.causes, nc);
      degenerate[static_cast<std::size_t>(k)] = fitted->degenerate_models();
      provider = fitted;
    }
    recs[static_cast<std::size_t>(k)] = make_record(d.obs, s, 1, k);
    for (auto i : s.valid) {
      const Observation& o = d.obs[i];
      NuisanceSet eta = provider->predict(o);
      d.pi1_stage1[i] = eta.pi1;
      for (auto& c : d.columns) stage1_row(o, eta, c, i, ps);
    }
  });
  for (auto& r : recs) d.records.push_back(std::move(r));
  for (int g : degenerate) res.degenerate_hazards += g;
}

struct Slot {
  std::size_t estimand;
  LearnerKind kind;
};

// Stage 2: propensity and mu per training fold, (w*, Y*) on the validation
// fold. In the evaluation pipeline S/T are also cross-fitted here.
void run_stage2(AugmentedData& d, const PipelineSpec& ps, std::vector<LearnerResult>* oof_results) {
  const int K = ps.split.k2;
  d.fold.push_back(draw_folds(d.obs, K, ps, 2));
  const auto& fold = d.fold[1];
  std::vector<FoldRecord> recs(static_cast<std::size_t>(K));
  parallel_for(K, ps.workers, [&](int k) {
    Split s = split_rows(fold, k);
    recs[static_cast<std::size_t>(k)] = make_record(d.obs, s, 2, k);
    const auto train = pick(d.obs, s.train);
    PropensityModel pm = fit_propensity(train, ps.nuisance);
    const Matrix xt = rows_matrix(d.obs, s.train), xv = rows_matrix(d.obs, s.valid);
    std::vector<int> at;
    for (auto i : s.train) at.push_back(d.obs[i].arm);
    const LearnerConfig lc = stage_learner_cfg(ps, 2, k);
    for (std::size_t e = 0; e < d.columns.size(); ++e) {
      auto& c = d.columns[e];
      Vector yt(static_cast<Eigen::Index>(s.train.size()));
      for (std::size_t r = 0; r < s.train.size(); ++r) yt[static_cast<Eigen::Index>(r)] = c.y[s.train[r]];
      for (auto i : s.valid) c.pi_hat[i] = pm.pi1(d.obs[i].x);
      if (ps.mu_mode == MuMode::Regression) {
        for (int a = 0; a < 2; ++a) {
          std::vector<Eigen::Index> rows;
          for (std::size_t r = 0; r < at.size(); ++r)
            if (at[r] == a) rows.push_back(static_cast<Eigen::Index>(r));
          if (rows.empty()) throw std::runtime_error("stage 2 fold " + std::to_string(k) + ": no arm-" + std::to_string(a) + " rows");
          auto m = fit_ensemble(xt(rows, Eigen::all), yt(rows), Vector::Ones(static_cast<Eigen::Index>(rows.size())), lc,
                                101 + static_cast<std::uint64_t>(a) + 10 * e);
          Vector pv = m->predict(xv);
          for (std::size_t r = 0; r < s.valid.size(); ++r) c.mu_hat[a][s.valid[r]] = pv[static_cast<Eigen::Index>(r)];
        }
      } else {
        for (auto i : s.valid)
          for (int a = 0; a < 2; ++a) c.mu_hat[a][i] = c.mu_eta[a][i];
      }
      for (std::size_t t = 0; t < c.target_kinds.size(); ++t) {
        const LearnerKind L = c.target_kinds[t];
        for (auto i : s.valid) {
          const double y = L == LearnerKind::IF ? c.phi[i] : c.y[i];
          TransformedSample ts =
              minimization_target(L, y, d.obs[i], c.mu_hat[0][i], c.mu_hat[1][i], c.pi_hat[i], ps.target);
          ts.fold = k;
          c.targets[t][i] = ts;
        }
      }
      if (!oof_results) continue;
      for (auto& lr : *oof_results) {
        if (lr.oof_stage != 2 || !(lr.spec.name() == c.spec.name())) continue;
        HteEstimate m;
        try {
          m = fit_mean_difference(lr.kind, c.spec, xt, at, yt, lc);
        } catch (const std::invalid_argument& ex) {
          throw std::runtime_error("stage 2 fold " + std::to_string(k) + ": " + ex.what());
        }
        Vector pv = m.predict(xv);
        for (std::size_t r = 0; r < s.valid.size(); ++r) lr.oof[s.valid[r]] = pv[static_cast<Eigen::Index>(r)];
      }
    }
  });
  for (auto& r : recs) d.records.push_back(std::move(r));
}

std::vector<TransformedSample> gather(const std::vector<TransformedSample>& all, const std::vector<std::size_t>& rows) {
  std::vector<TransformedSample> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(all[r]);
  return out;
}

PropensityFn propensity_fn(const PropensityModel& pm) {
  return [pm](const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    std::vector<double> x(row.data(), row.data() + row.size());
    return pm.pi1(x);
  };
}

void fill_diagnostics(LearnerResult& lr, const EstimandColumns& c, std::size_t n) {
  auto& d = lr.diagnostics;
  d.n = static_cast<int>(n);
  d.floored = 0;
  const bool transformed = is_transformed(lr.kind) || lr.kind == LearnerKind::X;
  const std::vector<TransformedSample>* tgt = nullptr;
  if (transformed) tgt = &c.target(lr.kind == LearnerKind::X ? LearnerKind::RA : lr.kind);
  for (std::size_t i = 0; i < n; ++i) {
    bool f = c.floored[i] > 0;
    if (tgt) f = f || (*tgt)[i].floored;
    d.floored += f ? 1 : 0;
  }
  if (tgt)
    for (std::size_t i = 0; i < n; ++i) d.zero_weight += (*tgt)[i].weight == 0.0 ? 1 : 0;
}

std::vector<LearnerResult> empty_results(const PipelineSpec& ps) {
  std::vector<LearnerResult> out;
  for (const auto& s : ps.estimands)
    for (LearnerKind k : ps.learners) {
      LearnerResult r;
      r.kind = k;
      r.spec = s;
      out.push_back(std::move(r));
    }
  return out;
}

std::size_t column_index(const AugmentedData& d, const EstimandSpec& s) {
  for (std::size_t e = 0; e < d.columns.size(); ++e)
    if (d.columns[e].spec.name() == s.name()) return e;
  throw std::logic_error("estimand column missing: " + s.name());
}

void warn_floors(const AugmentedData& d, const PipelineSpec& ps, PipelineResult& res) {
  for (const auto& c : d.columns) {
    std::size_t f = 0;
    for (int v : c.floored) f += v > 0 ? 1 : 0;
    const double frac = static_cast<double>(f) / static_cast<double>(c.floored.size());
    if (frac > ps.floor_warn_fraction) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s: %.1f%% of rows hit the denominator floor", c.spec.name().c_str(), 100.0 * frac);
      res.warnings.emplace_back(buf);
    }
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void PipelineSpec::validate(std::size_t n, bool three_split) const {
  if (estimands.empty()) throw std::invalid_argument("pipeline: no estimands");
  if (learners.empty()) throw std::invalid_argument("pipeline: no learners");
  if (causes < 1) throw std::invalid_argument("pipeline: causes must be >= 1");
  std::set<std::string> names;
  for (const auto& s : estimands) {
    s.validate(causes);
    if (!admissible(s.family, cut))
      throw std::invalid_argument("CUT kind " + to_string(cut) + " is not admissible for " + s.name());
    if (!names.insert(s.name()).second) throw std::invalid_argument("duplicate estimand " + s.name());
  }
  std::vector<int> ks{split.k1, split.k2};
  if (three_split) ks.push_back(split.k3);
  const long half = static_cast<long>(n / 2);
  int kmax = 0;
  for (int k : ks) {
    if (k < 2 || k > half)
      throw std::invalid_argument("fold count " + std::to_string(k) + " outside [2, " + std::to_string(half) + "]");
    kmax = std::max(kmax, k);
  }
  if (static_cast<long>(n) < 4L * kmax)
    throw std::invalid_argument("need n >= 4*max(K) = " + std::to_string(4 * kmax) + ", have " + std::to_string(n));
  if (split.max_attempts < 1) throw std::invalid_argument("max_attempts must be >= 1");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
}

std::vector<int> assign_folds(const std::vector<Observation>& data, int k, std::uint64_t seed, int stage, int attempt,
                              bool stratify) {
  if (k < 1) throw std::invalid_argument("assign_folds: k must be >= 1");
  const std::uint64_t salt = mix64(seed ^ mix64((static_cast<std::uint64_t>(stage) << 32) ^ static_cast<std::uint64_t>(attempt)));
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto stratum = [&](std::size_t i) { return stratify ? 2 * data[i].arm + (data[i].event() ? 1 : 0) : 0; };
  auto key = [&](std::size_t i) { return mix64(static_cast<std::uint64_t>(data[i].id) ^ salt); };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const int sa = stratum(a), sb = stratum(b);
    if (sa != sb) return sa < sb;
    const auto ka = key(a), kb = key(b);
    if (ka != kb) return ka < kb;
    return data[a].id < data[b].id;
  });
  std::vector<int> fold(data.size());
  for (std::size_t r = 0; r < order.size(); ++r) fold[order[r]] = static_cast<int>(r % static_cast<std::size_t>(k));
  return fold;
}

const std::vector<TransformedSample>& EstimandColumns::target(LearnerKind k) const {
  for (std::size_t t = 0; t < target_kinds.size(); ++t)
    if (target_kinds[t] == k) return targets[t];
  throw std::logic_error("no transformed target for " + to_string(k));
}

const LearnerResult& PipelineResult::find(LearnerKind k, const EstimandSpec& spec) const {
  for (const auto& l : learners)
    if (l.kind == k && l.spec.name() == spec.name()) return l;
  throw std::invalid_argument("no result for " + to_string(k) + " / " + spec.name());
}

void parallel_for(int tasks, int workers, const std::function<void(int)>& fn) {
  if (tasks <= 0) return;
  std::vector<std::exception_ptr> err(static_cast<std::size_t>(tasks));
  const int w = std::max(1, std::min(workers, tasks));
  if (w == 1) {
    for (int t = 0; t < tasks; ++t) {
      try {
        fn(t);
      } catch (...) {
        err[static_cast<std::size_t>(t)] = std::current_exception();
      }
    }
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int i = 0; i < w; ++i)
      pool.emplace_back([&] {
        for (int t = next++; t < tasks; t = next++) {
          try {
            fn(t);
          } catch (...) {
            err[static_cast<std::size_t>(t)] = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
  }
  for (auto& e : err)
    if (e) std::rethrow_exception(e);
}

PipelineResult run_pipeline(const std::vector<Observation>& data, const PipelineSpec& ps) {
  const auto t0 = std::chrono::steady_clock::now();
  PipelineResult res;
  AugmentedData& d = res.data;
  d.obs = sorted_copy(data, ps.causes);
  ps.validate(d.obs.size(), false);
  d.oracle = static_cast<bool>(ps.oracle);
  init_columns(d, ps);
  run_stage1(d, ps, res);
  run_stage2(d, ps, nullptr);

  const std::size_t n = d.obs.size();
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  const Matrix x = rows_matrix(d.obs, all);
  std::vector<int> arm;
  for (const auto& o : d.obs) arm.push_back(o.arm);

  res.learners = empty_results(ps);
  std::shared_ptr<PropensityModel> pm;
  for (auto& lr : res.learners)
    if (lr.kind == LearnerKind::X) pm = std::make_shared<PropensityModel>(fit_propensity(d.obs, ps.nuisance));
  parallel_for(static_cast<int>(res.learners.size()), ps.workers, [&](int t) {
    auto& lr = res.learners[static_cast<std::size_t>(t)];
    const auto& c = d.columns[column_index(d, lr.spec)];
    const LearnerConfig lc = stage_learner_cfg(ps, 4, t);
    Vector y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) y[static_cast<Eigen::Index>(i)] = c.y[i];
    if (lr.kind == LearnerKind::S || lr.kind == LearnerKind::T) {
      lr.model = fit_mean_difference(lr.kind, lr.spec, x, arm, y, lc);
    } else if (lr.kind == LearnerKind::X) {
      const auto& ra = c.target(LearnerKind::RA);
      Vector imp(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) imp[static_cast<Eigen::Index>(i)] = ra[i].outcome;
      lr.model = fit_x_learner(lr.spec, x, arm, imp, propensity_fn(*pm), lc);
    } else {
      lr.model = fit_transformed(lr.kind, lr.spec, x, c.target(lr.kind), lc);
    }
    fill_diagnostics(lr, c, n);
    lr.model->diagnostics() = lr.diagnostics;
  });
  warn_floors(d, ps, res);
  res.seconds = seconds_since(t0);
  return res;
}

PipelineResult run_evaluation_pipeline(const std::vector<Observation>& data, const PipelineSpec& ps) {
  const auto t0 = std::chrono::steady_clock::now();
  PipelineResult res;
  AugmentedData& d = res.data;
  d.obs = sorted_copy(data, ps.causes);
  ps.validate(d.obs.size(), true);
  d.oracle = static_cast<bool>(ps.oracle);
  init_columns(d, ps);
  const std::size_t n = d.obs.size();
  res.learners = empty_results(ps);
  for (auto& lr : res.learners) {
    lr.oof.assign(n, 0.0);
    lr.oof_stage = (lr.kind == LearnerKind::S || lr.kind == LearnerKind::T) ? 2 : 3;
  }
  run_stage1(d, ps, res);
  run_stage2(d, ps, &res.learners);

  const int K = ps.split.k3;
  d.fold.push_back(draw_folds(d.obs, K, ps, 3));
  const auto& fold = d.fold[2];
  std::vector<FoldRecord> recs(static_cast<std::size_t>(K));
  parallel_for(K, ps.workers, [&](int k) {
    Split s = split_rows(fold, k);
    recs[static_cast<std::size_t>(k)] = make_record(d.obs, s, 3, k);
    const Matrix xt = rows_matrix(d.obs, s.train), xv = rows_matrix(d.obs, s.valid);
    std::vector<int> at;
    for (auto i : s.train) at.push_back(d.obs[i].arm);
    std::shared_ptr<PropensityModel> pm;
    for (std::size_t t = 0; t < res.learners.size(); ++t) {
      auto& lr = res.learners[t];
      if (lr.oof_stage != 3) continue;
      const auto& c = d.columns[column_index(d, lr.spec)];
      const LearnerConfig lc = stage_learner_cfg(ps, 3, k * 64 + static_cast<int>(t));
      HteEstimate m;
      try {
        if (lr.kind == LearnerKind::X) {
          if (!pm) pm = std::make_shared<PropensityModel>(fit_propensity(pick(d.obs, s.train), ps.nuisance));
          const auto& ra = c.target(LearnerKind::RA);
          Vector imp(static_cast<Eigen::Index>(s.train.size()));
          for (std::size_t r = 0; r < s.train.size(); ++r) imp[static_cast<Eigen::Index>(r)] = ra[s.train[r]].outcome;
          m = fit_x_learner(lr.spec, xt, at, imp, propensity_fn(*pm), lc);
        } else {
          m = fit_transformed(lr.kind, lr.spec, xt, gather(c.target(lr.kind), s.train), lc);
        }
      } catch (const std::invalid_argument& ex) {
        throw std::runtime_error("stage 3 fold " + std::to_string(k) + ", " + to_string(lr.kind) + ": " + ex.what());
      }
      Vector pv = m.predict(xv);
      for (std::size_t r = 0; r < s.valid.size(); ++r) lr.oof[s.valid[r]] = pv[static_cast<Eigen::Index>(r)];
    }
  });
  for (auto& r : recs) d.records.push_back(std::move(r));
  for (auto& lr : res.learners) {
    fill_diagnostics(lr, d.columns[column_index(d, lr.spec)], n);
    const auto& f = d.fold[static_cast<std::size_t>(lr.oof_stage - 1)];
    lr.diagnostics.fold_sizes.assign(static_cast<std::size_t>(*std::max_element(f.begin(), f.end()) + 1), 0);
    for (int v : f) lr.diagnostics.fold_sizes[static_cast<std::size_t>(v)]++;
  }
  warn_floors(d, ps, res);
  res.seconds = seconds_since(t0);
  return res;
}

AuditReport audit_provenance(const PipelineResult& res) {
  AuditReport rep;
  const auto& d = res.data;
  auto record = [&](int stage, int fold) -> const FoldRecord* {
    for (const auto& r : d.records)
      if (r.stage == stage && r.fold == fold) return &r;
    return nullptr;
  };
  auto violation = [&](const std::string& m) {
    ++rep.violations;
    if (rep.messages.size() < 20) rep.messages.push_back(m);
  };
  // values produced per row at each stage: stage 1 CUT/IF/mu, stage 2 targets
  // (+ S/T predictions), stage 3 learner predictions.
  std::vector<long> per_stage(d.fold.size(), 0);
  for (const auto& c : d.columns) {
    per_stage[0] += static_cast<long>(c.kinds.size()) + 4;
    if (per_stage.size() > 1) per_stage[1] += 3 + 2 * static_cast<long>(c.target_kinds.size());
  }
  for (const auto& lr : res.learners)
    if (!lr.oof.empty()) per_stage[static_cast<std::size_t>(lr.oof_stage - 1)] += 1;
  for (std::size_t s = 0; s < d.fold.size(); ++s) {
    for (std::size_t i = 0; i < d.obs.size(); ++i) {
      const long id = d.obs[i].id;
      const int f = d.fold[s][i];
      const FoldRecord* r = record(static_cast<int>(s) + 1, f);
      rep.checked += per_stage[s];
      if (!r) {
        violation("stage " + std::to_string(s + 1) + " fold " + std::to_string(f) + ": no fold record");
        continue;
      }
      if (std::binary_search(r->train_ids.begin(), r->train_ids.end(), id))
        violation("id " + std::to_string(id) + " in training set of stage " + std::to_string(s + 1) + " fold " +
                  std::to_string(f));
      if (!std::binary_search(r->valid_ids.begin(), r->valid_ids.end(), id))
        violation("id " + std::to_string(id) + " missing from validation set of stage " + std::to_string(s + 1) +
                  " fold " + std::to_string(f));
    }
  }
  // stage-2 targets must carry the stage-2 fold
  if (d.fold.size() > 1)
    for (const auto& c : d.columns)
      for (const auto& tv : c.targets)
        for (std::size_t i = 0; i < tv.size(); ++i)
          if (tv[i].fold != d.fold[1][i]) violation("target fold tag mismatch for id " + std::to_string(d.obs[i].id));
  return rep;
}

void write_augmented_csv(const AugmentedData& d, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  const std::size_t p = d.obs.empty() ? 0 : d.obs[0].x.size();
  f << "id";
  for (std::size_t j = 0; j < p; ++j) f << ",x" << j + 1;
  f << ",a,time,status";
  for (std::size_t s = 0; s < d.fold.size(); ++s) f << ",fold" << s + 1;
  f << ",pi1_stage1";
  for (const auto& c : d.columns) {
    const std::string e = c.spec.name();
    for (CutKind k : c.kinds) f << "," << e << ":" << to_string(k);
    f << "," << e << ":phi," << e << ":mu0_eta," << e << ":mu1_eta," << e << ":floored";
    if (d.fold.size() > 1) {
      f << "," << e << ":pi1_hat," << e << ":mu0_hat," << e << ":mu1_hat";
      for (LearnerKind k : c.target_kinds) f << "," << e << ":" << to_string(k) << ":w," << e << ":" << to_string(k) << ":y";
    }
  }
  f << "\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (std::size_t i = 0; i < d.obs.size(); ++i) {
    const auto& o = d.obs[i];
    f << o.id;
    for (double v : o.x) f << "," << num(v);
    f << "," << o.arm << "," << num(o.time) << "," << o.cause;
    for (const auto& fv : d.fold) f << "," << fv[i];
    f << "," << num(d.pi1_stage1[i]);
    for (const auto& c : d.columns) {
      for (std::size_t k = 0; k < c.kinds.size(); ++k) f << "," << num(c.cuts[k][i]);
      f << "," << num(c.phi[i]) << "," << num(c.mu_eta[0][i]) << "," << num(c.mu_eta[1][i]) << "," << c.floored[i];
      if (d.fold.size() > 1) {
        f << "," << num(c.pi_hat[i]) << "," << num(c.mu_hat[0][i]) << "," << num(c.mu_hat[1][i]);
        for (const auto& tv : c.targets) f << "," << num(tv[i].weight) << "," << num(tv[i].outcome);
      }
    }
    f << "\n";
  }
  if (!f) throw std::runtime_error("write failed for " + path);
}

}  // namespace cutlearn
