#include "cutlearn/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace cutlearn {

using nlohmann::json;

namespace {

const std::set<std::string> kBaseLearners{"constant", "ridge", "knn", "boosting"};

// Walks one JSON object, remembering which keys were consumed so that
// leftovers (typos) can be reported by name.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  const json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(field(key), "wrong type");
    }
  }

  template <class T, class F>
  void parse(const std::string& key, T& out, F&& fn) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(field(key), "expected a string");
    try {
      out = fn(v.get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(field(key), e.what());
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()), "unknown field");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_base(const json& j, const std::string& path, BaseLearnerConfig& b) {
  Reader r(j, path);
  r.get("ridge_scale", b.ridge_scale);
  r.get("knn_k", b.knn_k);
  r.get("trees", b.trees);
  r.get("depth", b.depth);
  r.get("shrinkage", b.shrinkage);
  r.get("subsample", b.subsample);
  r.get("bins", b.bins);
  r.get("min_leaf", b.min_leaf);
  r.get("seed", b.seed);
  r.finish();
  if (b.ridge_scale < 0) throw ConfigError(path + ".ridge_scale", "must be >= 0");
  if (b.knn_k < 0) throw ConfigError(path + ".knn_k", "must be >= 0");
  if (b.trees < 1) throw ConfigError(path + ".trees", "must be >= 1");
  if (b.depth < 1) throw ConfigError(path + ".depth", "must be >= 1");
  if (!(b.shrinkage > 0 && b.shrinkage <= 1)) throw ConfigError(path + ".shrinkage", "must be in (0, 1]");
  if (!(b.subsample > 0 && b.subsample <= 1)) throw ConfigError(path + ".subsample", "must be in (0, 1]");
  if (b.bins < 2) throw ConfigError(path + ".bins", "must be >= 2");
  if (b.min_leaf < 1) throw ConfigError(path + ".min_leaf", "must be >= 1");
}

std::vector<std::string> read_library(Reader& r, const std::string& key, std::vector<std::string> def) {
  if (!r.has(key)) return def;
  const json& v = r.at(key);
  if (!v.is_array() || v.empty()) throw ConfigError(r.field(key), "expected a non-empty list");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string f = r.field(key) + "[" + std::to_string(i) + "]";
    if (!v[i].is_string()) throw ConfigError(f, "expected a string");
    const std::string s = v[i].get<std::string>();
    if (!kBaseLearners.count(s)) throw ConfigError(f, "unknown base learner '" + s + "'");
    out.push_back(s);
  }
  return out;
}

EstimandSpec read_estimand(const json& v, const std::string& path, const TrueModel& model) {
  EstimandSpec s;
  s.horizon = model.default_horizon();
  auto family = [&](const std::string& name, const std::string& f) {
    try {
      s.family = parse_family(name);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(f, e.what());
    }
  };
  if (v.is_string()) {
    family(v.get<std::string>(), path);
    return s;
  }
  Reader r(v, path);
  if (!r.has("family")) throw ConfigError(path + ".family", "missing");
  if (!r.at("family").is_string()) throw ConfigError(path + ".family", "expected a string");
  family(r.at("family").get<std::string>(), path + ".family");
  r.get("horizon", s.horizon);
  r.get("cause", s.cause);
  r.get("arm", s.arm_param);
  r.finish();
  if (s.arm_param != 0 && s.arm_param != 1) throw ConfigError(path + ".arm", "must be 0 or 1");
  return s;
}

void read_nuisance(const json& j, NuisanceConfig& c) {
  Reader r(j, "nuisance");
  c.base_learners = read_library(r, "base_learners", c.base_learners);
  if (r.has("base")) read_base(r.at("base"), "nuisance.base", c.base);
  if (r.has("clip")) {
    const json& v = r.at("clip");
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      throw ConfigError("nuisance.clip", "expected [lo, hi]");
    c.clip_lo = v[0].get<double>();
    c.clip_hi = v[1].get<double>();
  }
  r.get("grid_cap", c.grid_cap);
  r.parse("arm_handling", c.arm_handling, parse_arm_handling);
  r.parse("hazard_learner", c.hazard_learner, parse_hazard_learner);
  r.get("person_period_learner", c.person_period_learner);
  r.get("hazard_ridge", c.hazard_ridge);
  r.get("propensity_ridge", c.propensity_ridge);
  r.get("seed", c.seed);
  r.finish();
  if (!(c.clip_lo > 0 && c.clip_lo < c.clip_hi && c.clip_hi < 1)) throw ConfigError("nuisance.clip", "need 0 < lo < hi < 1");
  if (c.grid_cap < 2) throw ConfigError("nuisance.grid_cap", "must be >= 2");
  if (!kBaseLearners.count(c.person_period_learner))
    throw ConfigError("nuisance.person_period_learner", "unknown base learner '" + c.person_period_learner + "'");
  if (c.hazard_ridge < 0) throw ConfigError("nuisance.hazard_ridge", "must be >= 0");
  if (c.propensity_ridge < 0) throw ConfigError("nuisance.propensity_ridge", "must be >= 0");
}

void read_learner(const json& j, LearnerConfig& c) {
  Reader r(j, "learner");
  c.base_learners = read_library(r, "base_learners", c.base_learners);
  if (r.has("base")) read_base(r.at("base"), "learner.base", c.base);
  r.get("cv_folds", c.cv_folds);
  r.get("seed", c.seed);
  r.get("min_arm_size", c.min_arm_size);
  r.parse("x_weight", c.x_weight, parse_x_weight);
  r.finish();
  if (c.cv_folds < 2) throw ConfigError("learner.cv_folds", "must be >= 2");
  if (c.min_arm_size < 1) throw ConfigError("learner.min_arm_size", "must be >= 1");
}

void read_split(const json& j, SplitPlan& s) {
  Reader r(j, "split");
  r.get("k1", s.k1);
  r.get("k2", s.k2);
  r.get("k3", s.k3);
  r.get("stratify", s.stratify);
  r.get("max_attempts", s.max_attempts);
  r.finish();
  if (s.max_attempts < 1) throw ConfigError("split.max_attempts", "must be >= 1");
}

void read_cut_options(const json& j, CutOptions& o) {
  Reader r(j, "cut_options");
  r.get("floor", o.floor);
  r.parse("aipcw_form", o.form, [](const std::string& s) {
    if (s == "event") return AipcwForm::Event;
    if (s == "censoring") return AipcwForm::Censoring;
    throw std::invalid_argument("unknown AIPCW form '" + s + "' (event|censoring)");
  });
  r.get("bracketed", o.bracketed);
  r.finish();
  if (!(o.floor > 0 && o.floor < 1)) throw ConfigError("cut_options.floor", "must be in (0, 1)");
}

std::string law_name(CovariateLaw l) { return l == CovariateLaw::Uniform ? "uniform" : "normal"; }

}  // namespace

int ExperimentConfig::resolved_workers() const {
  if (workers > 0) return workers;
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

PipelineSpec ExperimentConfig::pipeline_for(CutKind cut, std::uint64_t s) const {
  PipelineSpec ps = pipeline;
  ps.estimands = estimands;
  ps.learners = learners;
  ps.cut = cut;
  ps.seed = s;
  const TrueModel model(setting);
  ps.causes = model.causes();
  if (oracle_nuisances) {
    double h = 0;
    for (const auto& e : estimands) h = std::max(h, e.horizon);
    ps.oracle = std::make_shared<OracleNuisances>(model, h, oracle_cells);
  }
  return ps;
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  ExperimentConfig c;
  Reader r(j, "");
  r.get("name", c.name);
  r.get("setting", c.setting);
  if (c.setting < 1 || c.setting > 4) throw ConfigError("setting", "must be 1, 2, 3 or 4");
  const TrueModel model(c.setting);
  r.get("n", c.n);
  r.get("replications", c.replications);
  r.parse("covariates", c.law, [](const std::string& s) {
    if (s == "uniform") return CovariateLaw::Uniform;
    if (s == "normal") return CovariateLaw::Normal;
    throw std::invalid_argument("unknown covariate law '" + s + "' (uniform|normal)");
  });

  if (!r.has("estimands")) throw ConfigError("estimands", "missing");
  {
    const json& v = r.at("estimands");
    if (!v.is_array() || v.empty()) throw ConfigError("estimands", "expected a non-empty list");
    for (std::size_t i = 0; i < v.size(); ++i)
      c.estimands.push_back(read_estimand(v[i], "estimands[" + std::to_string(i) + "]", model));
  }
  if (r.has("cut_kinds")) {
    const json& v = r.at("cut_kinds");
    if (!v.is_array() || v.empty()) throw ConfigError("cut_kinds", "expected a non-empty list");
    c.cut_kinds.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string f = "cut_kinds[" + std::to_string(i) + "]";
      if (!v[i].is_string()) throw ConfigError(f, "expected a string");
      try {
        c.cut_kinds.push_back(parse_cut_kind(v[i].get<std::string>()));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(f, e.what());
      }
    }
  }
  if (r.has("learners")) {
    const json& v = r.at("learners");
    if (v.is_string() && v.get<std::string>() == "all") {
      c.learners = all_learners();
    } else {
      if (!v.is_array() || v.empty()) throw ConfigError("learners", "expected \"all\" or a non-empty list");
      c.learners.clear();
      for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string f = "learners[" + std::to_string(i) + "]";
        if (!v[i].is_string()) throw ConfigError(f, "expected a string");
        try {
          c.learners.push_back(parse_learner(v[i].get<std::string>()));
        } catch (const std::invalid_argument& e) {
          throw ConfigError(f, e.what());
        }
      }
    }
  }
  r.get("oracle_learner", c.oracle_learner);
  r.get("oracle_nuisances", c.oracle_nuisances);
  r.get("oracle_cells", c.oracle_cells);
  r.parse("pipeline", c.evaluation, [](const std::string& s) {
    if (s == "evaluation") return true;
    if (s == "two_split") return false;
    throw std::invalid_argument("unknown pipeline '" + s + "' (evaluation|two_split)");
  });
  r.parse("overlap", c.overlap, [](const std::string& s) {
    if (s == "true_propensity") return OverlapWeight::TruePropensity;
    if (s == "uniform") return OverlapWeight::Uniform;
    throw std::invalid_argument("unknown overlap weight '" + s + "' (true_propensity|uniform)");
  });
  r.parse("mu_mode", c.pipeline.mu_mode, parse_mu_mode);
  r.parse("ra_variant", c.pipeline.target.ra_cross_arm, [](const std::string& s) {
    if (s == "cross_arm") return true;
    if (s == "own_arm") return false;
    throw std::invalid_argument("unknown RA variant '" + s + "' (cross_arm|own_arm)");
  });
  r.get("residual_floor", c.pipeline.target.residual_floor);
  if (r.has("cut_options")) read_cut_options(r.at("cut_options"), c.pipeline.cut_options);
  if (r.has("nuisance")) read_nuisance(r.at("nuisance"), c.pipeline.nuisance);
  if (r.has("learner")) read_learner(r.at("learner"), c.pipeline.learner);
  if (r.has("split")) read_split(r.at("split"), c.pipeline.split);
  r.get("export_all_cuts", c.pipeline.export_all_cuts);
  r.get("floor_warn_fraction", c.pipeline.floor_warn_fraction);
  r.get("data", c.data);
  r.get("seed", c.seed);
  r.get("output", c.output);
  r.get("workers", c.workers);
  r.finish();
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void validate_config(const ExperimentConfig& c) {
  if (c.setting < 1 || c.setting > 4) throw ConfigError("setting", "must be 1, 2, 3 or 4");
  if (c.n < 20) throw ConfigError("n", "must be >= 20");
  if (c.replications < 1) throw ConfigError("replications", "must be >= 1");
  if (c.workers < 0) throw ConfigError("workers", "must be >= 0");
  if (c.oracle_cells < 10) throw ConfigError("oracle_cells", "must be >= 10");
  if (c.output.empty()) throw ConfigError("output", "must not be empty");
  if (!(c.pipeline.target.residual_floor > 0)) throw ConfigError("residual_floor", "must be > 0");
  if (!(c.pipeline.floor_warn_fraction >= 0 && c.pipeline.floor_warn_fraction <= 1))
    throw ConfigError("floor_warn_fraction", "must be in [0, 1]");
  const TrueModel model(c.setting);
  std::set<std::string> names;
  for (std::size_t i = 0; i < c.estimands.size(); ++i) {
    const std::string f = "estimands[" + std::to_string(i) + "]";
    const auto& e = c.estimands[i];
    try {
      e.validate(model.causes());
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(f, ex.what());
    }
    if (!supports(c.setting, e))
      throw ConfigError(f, e.name() + " is not available in setting " + std::to_string(c.setting));
    if (!names.insert(e.name()).second) throw ConfigError(f, "duplicate estimand " + e.name());
    for (std::size_t k = 0; k < c.cut_kinds.size(); ++k)
      if (!admissible(e.family, c.cut_kinds[k]))
        throw ConfigError("cut_kinds[" + std::to_string(k) + "]",
                          to_string(c.cut_kinds[k]) + " is not defined for " + to_string(e.family));
  }
  std::set<LearnerKind> seen;
  for (std::size_t i = 0; i < c.learners.size(); ++i)
    if (!seen.insert(c.learners[i]).second)
      throw ConfigError("learners[" + std::to_string(i) + "]", "duplicate learner " + to_string(c.learners[i]));
  try {
    PipelineSpec ps = c.pipeline_for(c.cut_kinds.front(), c.seed);
    ps.oracle.reset();
    ps.workers = 1;
    ps.validate(static_cast<std::size_t>(c.n), c.evaluation);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("split", e.what());
  }
}

std::string config_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["setting"] = c.setting;
  j["n"] = c.n;
  j["replications"] = c.replications;
  j["covariates"] = law_name(c.law);
  json est = json::array();
  for (const auto& e : c.estimands)
    est.push_back({{"family", to_string(e.family)}, {"horizon", e.horizon}, {"cause", e.cause}, {"arm", e.arm_param}});
  j["estimands"] = est;
  json cuts = json::array();
  for (auto k : c.cut_kinds) cuts.push_back(to_string(k));
  j["cut_kinds"] = cuts;
  json ls = json::array();
  for (auto k : c.learners) ls.push_back(to_string(k));
  j["learners"] = ls;
  j["oracle_learner"] = c.oracle_learner;
  j["oracle_nuisances"] = c.oracle_nuisances;
  j["oracle_cells"] = c.oracle_cells;
  j["pipeline"] = c.evaluation ? "evaluation" : "two_split";
  j["overlap"] = c.overlap == OverlapWeight::TruePropensity ? "true_propensity" : "uniform";
  const auto& p = c.pipeline;
  j["mu_mode"] = to_string(p.mu_mode);
  j["ra_variant"] = p.target.ra_cross_arm ? "cross_arm" : "own_arm";
  j["residual_floor"] = p.target.residual_floor;
  j["cut_options"] = {{"floor", p.cut_options.floor},
                      {"aipcw_form", p.cut_options.form == AipcwForm::Event ? "event" : "censoring"},
                      {"bracketed", p.cut_options.bracketed}};
  auto base = [](const BaseLearnerConfig& b) {
    return json{{"ridge_scale", b.ridge_scale}, {"knn_k", b.knn_k},         {"trees", b.trees},
                {"depth", b.depth},             {"shrinkage", b.shrinkage}, {"subsample", b.subsample},
                {"bins", b.bins},               {"min_leaf", b.min_leaf},   {"seed", b.seed}};
  };
  j["nuisance"] = {{"base_learners", p.nuisance.base_learners},
                   {"base", base(p.nuisance.base)},
                   {"clip", {p.nuisance.clip_lo, p.nuisance.clip_hi}},
                   {"grid_cap", p.nuisance.grid_cap},
                   {"arm_handling", to_string(p.nuisance.arm_handling)},
                   {"hazard_learner", to_string(p.nuisance.hazard_learner)},
                   {"person_period_learner", p.nuisance.person_period_learner},
                   {"hazard_ridge", p.nuisance.hazard_ridge},
                   {"propensity_ridge", p.nuisance.propensity_ridge},
                   {"seed", p.nuisance.seed}};
  j["learner"] = {{"base_learners", p.learner.base_learners},
                  {"base", base(p.learner.base)},
                  {"cv_folds", p.learner.cv_folds},
                  {"seed", p.learner.seed},
                  {"min_arm_size", p.learner.min_arm_size},
                  {"x_weight", to_string(p.learner.x_weight)}};
  j["split"] = {{"k1", p.split.k1},
                {"k2", p.split.k2},
                {"k3", p.split.k3},
                {"stratify", p.split.stratify},
                {"max_attempts", p.split.max_attempts}};
  j["export_all_cuts"] = p.export_all_cuts;
  j["floor_warn_fraction"] = p.floor_warn_fraction;
  j["data"] = c.data;
  j["seed"] = c.seed;
  j["output"] = c.output;
  j["workers"] = c.workers;
  return j.dump(2);
}

}  // namespace cutlearn
