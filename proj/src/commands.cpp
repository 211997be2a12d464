#include "cutlearn/commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"

namespace cutlearn {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t replication_seed(std::uint64_t seed, int replication) {
  return splitmix64(seed ^ (0xa0761d6478bd642fULL * static_cast<std::uint64_t>(replication + 1)));
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  return f;
}

void close_out(std::ofstream& f, const std::string& path) {
  f.close();
  if (!f) throw std::runtime_error("write failed for " + path);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir + ": " + ec.message());
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

template <class T>
bool parse_num(const std::string& s, T& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  auto r = std::from_chars(b, e, out);
  return r.ec == std::errc() && r.ptr == e;
}

std::string path_in(const ExperimentConfig& cfg, const std::string& file) { return (fs::path(cfg.output) / file).string(); }

json audit_json(const AuditReport& a) {
  return {{"checked", a.checked}, {"violations", a.violations}, {"messages", a.messages}};
}

std::vector<double> overlap_for(const ExperimentConfig& cfg, const std::vector<SubjectTruth>& truth,
                                const std::vector<Observation>& obs) {
  if (cfg.overlap == OverlapWeight::Uniform) return std::vector<double>(obs.size(), 1.0);
  std::map<long, double> pi;
  for (const auto& t : truth) pi[t.id] = t.pi1;
  std::vector<double> p;
  p.reserve(obs.size());
  for (const auto& o : obs) p.push_back(pi.at(o.id));
  return overlap_weights(p);
}

}  // namespace

void write_dataset(const std::vector<Observation>& obs, const std::string& path) {
  auto f = open_out(path);
  const std::size_t p = obs.empty() ? 6 : obs[0].x.size();
  f << "id";
  for (std::size_t j = 0; j < p; ++j) f << ",x" << j + 1;
  f << ",a,time,status\n";
  for (const auto& o : obs) {
    f << o.id;
    for (double v : o.x) f << ',' << format_number(v);
    f << ',' << o.arm << ',' << format_number(o.time) << ',' << o.cause << '\n';
  }
  close_out(f, path);
}

std::vector<Observation> read_dataset(const std::string& path, int max_cause) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ":1: empty file");
  const auto head = split_csv(line);
  const std::size_t cols = head.size();
  if (cols < 5 || head[0] != "id" || head[cols - 3] != "a" || head[cols - 2] != "time" || head[cols - 1] != "status")
    throw DataError(path + ":1: header must be id,x1,...,xp,a,time,status");
  const std::size_t p = cols - 4;
  for (std::size_t j = 0; j < p; ++j)
    if (head[j + 1] != "x" + std::to_string(j + 1))
      throw DataError(path + ":1: expected column x" + std::to_string(j + 1) + ", found '" + head[j + 1] + "'");
  std::vector<Observation> out;
  std::set<long> ids;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const std::string where = path + ":" + std::to_string(lineno) + ": ";
    const auto f = split_csv(line);
    if (f.size() != cols)
      throw DataError(where + "expected " + std::to_string(cols) + " fields, found " + std::to_string(f.size()));
    Observation o;
    if (!parse_num(f[0], o.id)) throw DataError(where + "id '" + f[0] + "' is not an integer");
    if (!ids.insert(o.id).second) throw DataError(where + "duplicate id " + f[0]);
    o.x.resize(p);
    for (std::size_t j = 0; j < p; ++j)
      if (!parse_num(f[j + 1], o.x[j]) || !std::isfinite(o.x[j]))
        throw DataError(where + "x" + std::to_string(j + 1) + " '" + f[j + 1] + "' is not a finite number");
    if (!parse_num(f[cols - 3], o.arm) || (o.arm != 0 && o.arm != 1)) throw DataError(where + "a must be 0 or 1");
    if (!parse_num(f[cols - 2], o.time) || !std::isfinite(o.time) || !(o.time > 0))
      throw DataError(where + "time must be a positive finite number");
    if (!parse_num(f[cols - 1], o.cause) || o.cause < 0 || o.cause > max_cause)
      throw DataError(where + "status must be in 0.." + std::to_string(max_cause));
    out.push_back(std::move(o));
  }
  if (out.empty()) throw DataError(path + ": no data rows");
  return out;
}

SimulateOutput cmd_simulate(const ExperimentConfig& cfg) {
  ensure_dir(cfg.output);
  SimConfig sc;
  sc.setting = cfg.setting;
  sc.n = cfg.n;
  sc.seed = cfg.seed;
  sc.law = cfg.law;
  const SimData sim = generate(sc);
  const TrueModel model(cfg.setting);
  SimulateOutput out{path_in(cfg, "data.csv"), path_in(cfg, "truth.csv"), path_in(cfg, "manifest.json")};
  write_dataset(sim.obs, out.data);

  {
    auto f = open_out(out.truth);
    f << "id,pi1,t0,t1,j0,j1,c0,c1";
    for (const auto& e : cfg.estimands) f << ",psi:" << e.name();
    f << '\n';
    std::vector<std::vector<double>> psi;
    for (const auto& e : cfg.estimands) psi.push_back(sim.psi(e));
    for (std::size_t i = 0; i < sim.truth.size(); ++i) {
      const auto& t = sim.truth[i];
      f << t.id << ',' << format_number(t.pi1) << ',' << format_number(t.time[0]) << ',' << format_number(t.time[1]) << ','
        << t.cause[0] << ',' << t.cause[1] << ',' << format_number(t.cens[0]) << ',' << format_number(t.cens[1]);
      for (const auto& v : psi) f << ',' << format_number(v[i]);
      f << '\n';
    }
    close_out(f, out.truth);
  }

  std::map<int, long> status;
  for (const auto& o : sim.obs) status[o.cause] += 1;
  json counts = json::object();
  for (const auto& [k, v] : status) counts[std::to_string(k)] = v;
  json m;
  m["command"] = "simulate";
  m["setting"] = cfg.setting;
  m["n"] = cfg.n;
  m["seed"] = cfg.seed;
  m["covariates"] = cfg.law == CovariateLaw::Uniform ? "uniform" : "normal";
  m["coefficient_hash"] = hex64(fnv1a64(model.coefficient_table()));
  m["arm_ratio"] = sim.arm_ratio();
  m["status_counts"] = counts;
  m["data_hash"] = [&] {
    std::ifstream in(out.data, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return hex64(fnv1a64(ss.str()));
  }();
  m["config"] = json::parse(config_json(cfg));
  m["config"].erase("output");  // keeps manifests comparable across output dirs
  auto f = open_out(out.manifest);
  f << m.dump(2) << '\n';
  close_out(f, out.manifest);
  return out;
}

std::vector<double> estimates(const FitRun& run, const LearnerResult& lr) {
  if (!lr.oof.empty()) return lr.oof;
  if (!lr.model) throw std::logic_error("learner result has neither a model nor out-of-fold values");
  const Vector v = lr.model->predict(covariate_matrix(run.result.data.obs));
  return std::vector<double>(v.data(), v.data() + v.size());
}

std::vector<FitRun> run_fit(const ExperimentConfig& cfg, const std::vector<Observation>& data) {
  std::vector<FitRun> runs;
  for (CutKind cut : cfg.cut_kinds) {
    PipelineSpec ps = cfg.pipeline_for(cut, cfg.seed);
    ps.workers = cfg.resolved_workers();
    FitRun r;
    r.cut = cut;
    r.result = cfg.evaluation ? run_evaluation_pipeline(data, ps) : run_pipeline(data, ps);
    r.audit = audit_provenance(r.result);
    runs.push_back(std::move(r));
  }
  return runs;
}

std::vector<FitRun> cmd_fit(const ExperimentConfig& cfg, std::ostream& log) {
  ensure_dir(cfg.output);
  const TrueModel model(cfg.setting);
  std::vector<Observation> data;
  if (!cfg.data.empty()) {
    data = read_dataset(cfg.data, model.causes());
  } else {
    SimConfig sc;
    sc.setting = cfg.setting;
    sc.n = cfg.n;
    sc.seed = cfg.seed;
    sc.law = cfg.law;
    data = generate(sc).obs;
  }
  if (cfg.oracle_nuisances && !data.empty() && data[0].x.size() != 6)
    throw ConfigError("oracle_nuisances", "true nuisances need the 6 simulated covariates");
  auto runs = run_fit(cfg, data);

  const std::string pred = path_in(cfg, "predictions.csv");
  auto f = open_out(pred);
  f << "id,learner,estimand,cut,psi_hat\n";
  json diag;
  diag["pipeline"] = cfg.evaluation ? "evaluation" : "two_split";
  diag["n"] = data.size();
  diag["runs"] = json::array();
  for (const auto& run : runs) {
    const std::string cut = to_string(run.cut);
    json jr;
    jr["cut"] = cut;
    jr["audit"] = audit_json(run.audit);
    jr["warnings"] = run.result.warnings;
    jr["degenerate_hazards"] = run.result.degenerate_hazards;
    jr["learners"] = json::array();
    for (const auto& lr : run.result.learners) {
      const auto est = estimates(run, lr);
      for (std::size_t i = 0; i < est.size(); ++i)
        f << run.result.data.obs[i].id << ',' << to_string(lr.kind) << ',' << lr.spec.name() << ',' << cut << ','
          << format_number(est[i]) << '\n';
      const auto& d = lr.diagnostics;
      json jl{{"learner", to_string(lr.kind)},
              {"estimand", lr.spec.name()},
              {"n", d.n},
              {"floored", d.floored},
              {"floored_fraction", d.floored_fraction()},
              {"zero_weight", d.zero_weight},
              {"fold_sizes", d.fold_sizes}};
      if (lr.model) jl["model"] = json::parse(summary_json(*lr.model));
      jr["learners"].push_back(jl);
    }
    // Shape residuals per learner across this run's estimands.
    json shape = json::array();
    for (LearnerKind k : cfg.learners) {
      std::vector<ShapeInput> in;
      for (const auto& lr : run.result.learners)
        if (lr.kind == k) in.push_back({lr.spec, estimates(run, lr)});
      for (const auto& c : shape_diagnostics(in, model.causes()).checks) {
        json jc{{"learner", to_string(k)}, {"check", c.name}, {"horizon", c.horizon}, {"complete", c.complete}};
        if (c.complete)
          jc["residual"] = {{"median", c.summary.median}, {"q75", c.summary.q75}, {"max", c.summary.max}};
        else
          jc["missing"] = c.missing;
        shape.push_back(jc);
      }
    }
    jr["shape"] = shape;
    diag["runs"].push_back(jr);
    const std::string aug = path_in(cfg, "augmented_" + cut + ".csv");
    write_augmented_csv(run.result.data, aug);
    log << "fit: cut " << cut << ", " << run.result.learners.size() << " learner fits, audit "
        << (run.audit.ok() ? "clean" : "FAILED") << ", " << run.result.seconds << " s\n";
    for (const auto& w : run.result.warnings) log << "warning: " << w << '\n';
  }
  close_out(f, pred);
  const std::string dpath = path_in(cfg, "diagnostics.json");
  auto d = open_out(dpath);
  d << diag.dump(2) << '\n';
  close_out(d, dpath);
  return runs;
}

long BenchReport::violations() const {
  long v = 0;
  for (const auto& a : audits) v += a.violations;
  return v;
}

std::vector<double> BenchReport::values(const std::string& learner, const std::string& estimand, const std::string& cut,
                                        const std::string& metric) const {
  std::vector<double> out;
  for (const auto& r : rows)
    if (r.learner == learner && r.estimand == estimand && r.cut == cut && r.metric == metric) out.push_back(r.value);
  return out;
}

double BenchReport::median(const std::string& learner, const std::string& estimand, const std::string& cut,
                           const std::string& metric) const {
  auto v = values(learner, estimand, cut, metric);
  if (v.empty()) throw std::out_of_range("no rows for " + learner + "/" + estimand + "/" + cut + "/" + metric);
  return summarize(v).median;
}

namespace {

struct RepOutput {
  std::vector<MetricRow> rows;
  std::vector<DistributionRow> dists;
  std::vector<AuditReport> audits;
  std::vector<std::string> warnings;
};

RepOutput bench_replication(const ExperimentConfig& cfg, int rep, int inner_workers) {
  RepOutput out;
  const std::uint64_t seed = replication_seed(cfg.seed, rep);
  SimConfig sc;
  sc.setting = cfg.setting;
  sc.n = cfg.n;
  sc.seed = seed;
  sc.law = cfg.law;
  const SimData sim = generate(sc);
  const TrueModel model(cfg.setting);

  std::map<std::string, std::vector<double>> psi0;
  for (const auto& e : cfg.estimands) psi0[e.name()] = sim.psi(e);  // generate() emits ids 1..n in order
  const std::vector<double> h = overlap_for(cfg, sim.truth, sim.obs);

  auto add = [&](const std::string& learner, const std::string& est, const std::string& cut, const std::string& metric,
                 double v) { out.rows.push_back({cfg.setting, rep, learner, est, cut, metric, v}); };
  auto add_metrics = [&](const std::string& learner, const std::string& est, const std::string& cut,
                         const std::vector<double>& psi_hat) {
    const MetricsReport m = evaluate(psi_hat, psi0.at(est), h);
    for (const auto& [k, v] : m.items()) add(learner, est, cut, k, v);
    out.dists.push_back({cfg.setting, rep, learner, est, cut, summarize(psi_hat)});
  };

  for (CutKind cut : cfg.cut_kinds) {
    const std::string cs = to_string(cut);
    PipelineSpec ps = cfg.pipeline_for(cut, seed);
    ps.workers = inner_workers;
    FitRun run;
    run.cut = cut;
    run.result = cfg.evaluation ? run_evaluation_pipeline(sim.obs, ps) : run_pipeline(sim.obs, ps);
    run.audit = audit_provenance(run.result);
    for (std::size_t i = 0; i < sim.obs.size(); ++i)
      if (run.result.data.obs[i].id != sim.obs[i].id) throw std::logic_error("bench: row order mismatch");
    out.audits.push_back(run.audit);
    for (const auto& w : run.result.warnings)
      out.warnings.push_back("replication " + std::to_string(rep) + " " + cs + ": " + w);

    for (const auto& e : cfg.estimands) {
      const auto& truth = psi0.at(e.name());
      out.dists.push_back({cfg.setting, rep, "truth", e.name(), cs, summarize(truth)});
      if (cfg.oracle_learner) add_metrics("oracle", e.name(), cs, truth);
    }
    std::map<LearnerKind, std::vector<ShapeInput>> shape_in;
    for (const auto& lr : run.result.learners) {
      auto est = estimates(run, lr);
      add_metrics(to_string(lr.kind), lr.spec.name(), cs, est);
      add(to_string(lr.kind), lr.spec.name(), cs, "floored_fraction", lr.diagnostics.floored_fraction());
      shape_in[lr.kind].push_back({lr.spec, std::move(est)});
    }
    for (const auto& [k, in] : shape_in)
      for (const auto& c : shape_diagnostics(in, model.causes()).checks)
        if (c.complete) {
          char hb[32];
          std::snprintf(hb, sizeof hb, "@%g", c.horizon);
          add(to_string(k), c.name + hb, cs, "shape_residual_median", c.summary.median);
          add(to_string(k), c.name + hb, cs, "shape_residual_max", c.summary.max);
        }
  }
  return out;
}

}  // namespace

BenchReport run_bench(const ExperimentConfig& cfg, std::ostream* log) {
  const auto t0 = std::chrono::steady_clock::now();
  const int total = cfg.resolved_workers();
  const int outer = std::max(1, std::min(total, cfg.replications));
  const int inner = std::max(1, total / outer);
  std::vector<RepOutput> reps(static_cast<std::size_t>(cfg.replications));
  std::mutex log_mu;
  parallel_for(cfg.replications, outer, [&](int r) {
    const auto ts = std::chrono::steady_clock::now();
    reps[static_cast<std::size_t>(r)] = bench_replication(cfg, r, inner);
    if (log) {
      std::lock_guard<std::mutex> lock(log_mu);
      *log << "bench: setting " << cfg.setting << " replication " << r + 1 << "/" << cfg.replications << " done in "
           << std::chrono::duration<double>(std::chrono::steady_clock::now() - ts).count() << " s\n";
    }
  });
  BenchReport rep;
  for (auto& r : reps) {
    rep.rows.insert(rep.rows.end(), r.rows.begin(), r.rows.end());
    rep.distributions.insert(rep.distributions.end(), r.dists.begin(), r.dists.end());
    rep.audits.insert(rep.audits.end(), r.audits.begin(), r.audits.end());
    rep.warnings.insert(rep.warnings.end(), r.warnings.begin(), r.warnings.end());
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

void write_bench(const BenchReport& rep, const ExperimentConfig& cfg, const std::string& dir) {
  ensure_dir(dir);
  const std::string mpath = (fs::path(dir) / "metrics.csv").string();
  auto m = open_out(mpath);
  m << "setting,replication,learner,estimand,cut,metric,value\n";
  for (const auto& r : rep.rows)
    m << r.setting << ',' << r.replication << ',' << r.learner << ',' << r.estimand << ',' << r.cut << ',' << r.metric << ','
      << format_number(r.value) << '\n';
  close_out(m, mpath);

  // Median / IQR per (setting, learner, estimand, cut, metric), first-seen order.
  using Key = std::tuple<int, std::string, std::string, std::string, std::string>;
  std::vector<Key> order;
  std::map<Key, std::vector<double>> groups;
  for (const auto& r : rep.rows) {
    Key k{r.setting, r.learner, r.estimand, r.cut, r.metric};
    auto [it, fresh] = groups.try_emplace(k);
    if (fresh) order.push_back(k);
    it->second.push_back(r.value);
  }
  const std::string spath = (fs::path(dir) / "summary.csv").string();
  auto s = open_out(spath);
  s << "setting,learner,estimand,cut,metric,n,median,q25,q75,iqr,whisker_lo,whisker_hi\n";
  for (const auto& k : order) {
    const Quantiles q = summarize(groups[k]);
    s << std::get<0>(k) << ',' << std::get<1>(k) << ',' << std::get<2>(k) << ',' << std::get<3>(k) << ',' << std::get<4>(k)
      << ',' << q.n << ',' << format_number(q.median) << ',' << format_number(q.q25) << ',' << format_number(q.q75) << ','
      << format_number(q.iqr()) << ',' << format_number(q.whisker_lo) << ',' << format_number(q.whisker_hi) << '\n';
  }
  close_out(s, spath);

  const std::string dpath = (fs::path(dir) / "psi_distribution.csv").string();
  auto d = open_out(dpath);
  d << "setting,replication,learner,estimand,cut,min,whisker_lo,q25,median,q75,whisker_hi,max,mean\n";
  for (const auto& r : rep.distributions)
    d << r.setting << ',' << r.replication << ',' << r.learner << ',' << r.estimand << ',' << r.cut << ','
      << format_number(r.q.min) << ',' << format_number(r.q.whisker_lo) << ',' << format_number(r.q.q25) << ','
      << format_number(r.q.median) << ',' << format_number(r.q.q75) << ',' << format_number(r.q.whisker_hi) << ','
      << format_number(r.q.max) << ',' << format_number(r.q.mean) << '\n';
  close_out(d, dpath);

  json b;
  b["command"] = "bench";
  b["config"] = json::parse(config_json(cfg));
  b["config"].erase("output");
  b["coefficient_hash"] = hex64(fnv1a64(TrueModel(cfg.setting).coefficient_table()));
  json seeds = json::array();
  for (int r = 0; r < cfg.replications; ++r) seeds.push_back(replication_seed(cfg.seed, r));
  b["replication_seeds"] = seeds;
  json audits = json::array();
  for (const auto& a : rep.audits) audits.push_back(audit_json(a));
  b["audits"] = audits;
  b["violations"] = rep.violations();
  b["warnings"] = rep.warnings;
  const std::string bpath = (fs::path(dir) / "bench.json").string();
  auto bf = open_out(bpath);
  bf << b.dump(2) << '\n';
  close_out(bf, bpath);
}

BenchReport cmd_bench(const ExperimentConfig& cfg, std::ostream& log) {
  BenchReport rep = run_bench(cfg, &log);
  write_bench(rep, cfg, cfg.output);
  log << "bench: " << rep.rows.size() << " metric rows, " << rep.violations() << " provenance violations, " << rep.seconds
      << " s\n";
  return rep;
}

}  // namespace cutlearn
