#include "cutlearn/transforms.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace cutlearn {

// ---------------------------------------------------------------- names

std::string to_string(Family f) {
  switch (f) {
    case Family::Survival: return "survival";
    case Family::Rmst: return "rmst";
    case Family::Cif: return "cif";
    case Family::Rmtl: return "rmtl";
    case Family::SepDirectCif: return "sep_direct_cif";
    case Family::SepDirectRmtl: return "sep_direct_rmtl";
    case Family::SepIndirectCif: return "sep_indirect_cif";
    case Family::SepIndirectRmtl: return "sep_indirect_rmtl";
  }
  return "?";
}

Family parse_family(const std::string& s) {
  for (Family f : {Family::Survival, Family::Rmst, Family::Cif, Family::Rmtl, Family::SepDirectCif,
                   Family::SepDirectRmtl, Family::SepIndirectCif, Family::SepIndirectRmtl})
    if (to_string(f) == s) return f;
  throw std::invalid_argument("unknown estimand family '" + s + "'");
}

bool EstimandSpec::separable() const {
  return family == Family::SepDirectCif || family == Family::SepDirectRmtl || family == Family::SepIndirectCif ||
         family == Family::SepIndirectRmtl;
}
bool EstimandSpec::needs_cause() const { return family != Family::Survival && family != Family::Rmst; }
bool EstimandSpec::restricted() const {
  return family == Family::Rmst || family == Family::Rmtl || family == Family::SepDirectRmtl ||
         family == Family::SepIndirectRmtl;
}
double EstimandSpec::clip_bound() const { return restricted() ? horizon : 1.0; }

std::string EstimandSpec::name() const {
  std::string s = to_string(family);
  if (needs_cause()) s += "_j" + std::to_string(cause);
  if (separable()) s += (family == Family::SepDirectCif || family == Family::SepDirectRmtl ? "_ajbar" : "_aj") +
                        std::to_string(arm_param);
  char buf[32];
  std::snprintf(buf, sizeof buf, "@%g", horizon);
  return s + buf;
}

void EstimandSpec::validate(int max_cause) const {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("estimand horizon must be positive");
  if (needs_cause() && (cause < 1 || cause > max_cause))
    throw std::invalid_argument("estimand cause " + std::to_string(cause) + " outside [1, " +
                                std::to_string(max_cause) + "]");
  if (separable() && max_cause < 2) throw std::invalid_argument("separable estimands need at least two causes");
  if (separable() && arm_param != 0 && arm_param != 1) throw std::invalid_argument("separable arm must be 0 or 1");
}

std::string to_string(CutKind k) {
  switch (k) {
    case CutKind::BJ: return "BJ";
    case CutKind::IPCW1: return "IPCW1";
    case CutKind::IPCW2: return "IPCW2";
    case CutKind::IPCW: return "IPCW";
    case CutKind::AIPCW: return "AIPCW";
  }
  return "?";
}

CutKind parse_cut_kind(const std::string& s) {
  for (CutKind k : {CutKind::BJ, CutKind::IPCW1, CutKind::IPCW2, CutKind::IPCW, CutKind::AIPCW})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown CUT kind '" + s + "'");
}

bool admissible(Family f, CutKind k) {
  EstimandSpec s{f};
  if (s.separable()) return k == CutKind::AIPCW;
  if (k == CutKind::IPCW1 || k == CutKind::IPCW2) return f == Family::Survival;
  return true;
}

std::vector<CutKind> admissible_kinds(Family f) {
  std::vector<CutKind> out;
  for (CutKind k : {CutKind::BJ, CutKind::IPCW1, CutKind::IPCW2, CutKind::IPCW, CutKind::AIPCW})
    if (admissible(f, k)) out.push_back(k);
  return out;
}

// ---------------------------------------------------------------- engine

namespace detail {

struct Pt {
  double u, S, G, Gm, F, RM, RL, oa, os, qF, qRL;
};

struct Den {
  double floor;
  int n = 0;
  double operator()(double v) {
    if (v < floor) {
      ++n;
      return floor;
    }
    return v;
  }
};

using Fn = std::function<double(const Pt&, Den&)>;

// Step tracks on the grid. oa/os are competing-cause survivals of the
// evaluated arm and of a_star; qF/qRL a hybrid CIF and its integral.
struct Tracks {
  const std::vector<double>* g = nullptr;
  Grid keep;
  std::vector<double> S, G, F, RM, RL, oa, os, qF, qRL;
  std::vector<double> dall, dj, dother, dcens;

  Pt at_grid(std::size_t k) const {
    return {(*g)[k], S[k], G[k], k == 0 ? 1.0 : G[k - 1], F[k], RM[k], RL[k], oa[k], os[k], qF[k], qRL[k]};
  }

  Pt at(double x) const {
    std::size_t m = count_le(*g, x), mm = count_lt(*g, x);
    Pt p{};
    p.u = x;
    if (m == 0) {
      p.S = p.G = p.oa = p.os = 1.0;
      p.F = p.RL = p.qF = p.qRL = 0.0;
      p.RM = x;
    } else {
      std::size_t k = m - 1;
      double du = x - (*g)[k];
      p.S = S[k];
      p.G = G[k];
      p.F = F[k];
      p.RM = RM[k] + S[k] * du;
      p.RL = RL[k] + F[k] * du;
      p.oa = oa[k];
      p.os = os[k];
      p.qF = qF[k];
      p.qRL = qRL[k] + qF[k] * du;
    }
    p.Gm = mm == 0 ? 1.0 : G[mm - 1];
    return p;
  }
};

struct Integral {
  Counting type = Counting::AllCause;
  bool strict = false;
  int cause = 1;
  Fn h;
  std::vector<double> prefix;
  std::vector<int> nfl;
};

static std::vector<double> running_integral(const std::vector<double>& g, const std::vector<double>& v, double init) {
  std::vector<double> out(g.size());
  double acc = 0.0, prev_t = 0.0, prev_v = init;
  for (std::size_t k = 0; k < g.size(); ++k) {
    acc += prev_v * (g[k] - prev_t);
    out[k] = acc;
    prev_t = g[k];
    prev_v = v[k];
  }
  return out;
}

static std::vector<double> other_increments(const ArmCurves& c, int cause) {
  std::vector<double> d(c.size());
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = std::max(0.0, c.dall[k] - c.dcause[cause - 1][k]);
  return d;
}

static std::vector<double> survival_of(const std::vector<double>& d) {
  std::vector<double> s(d.size());
  double acc = 1.0;
  for (std::size_t k = 0; k < d.size(); ++k) s[k] = (acc *= (1.0 - d[k]));
  return s;
}

static std::unique_ptr<Tracks> make_tracks(const ArmCurves& c, int cause) {
  auto tr = std::make_unique<Tracks>();
  tr->keep = c.grid;
  tr->g = c.grid.get();
  const std::size_t K = c.size();
  tr->S = c.surv;
  tr->G = c.cens_surv;
  tr->dall = c.dall;
  tr->dcens = c.dcens;
  if (cause >= 1 && cause <= c.causes()) {
    tr->F = c.cif[cause - 1];
    tr->dj = c.dcause[cause - 1];
    tr->dother = other_increments(c, cause);
  } else {
    tr->F.assign(K, 0.0);
    tr->dj.assign(K, 0.0);
    tr->dother.assign(K, 0.0);
  }
  tr->RM = running_integral(*tr->g, tr->S, 1.0);
  tr->RL = running_integral(*tr->g, tr->F, 0.0);
  tr->oa.assign(K, 1.0);
  tr->os.assign(K, 1.0);
  tr->qF.assign(K, 0.0);
  tr->qRL.assign(K, 0.0);
  return tr;
}

static Integral make_integral(const Tracks& tr, Counting type, bool strict, int cause, Fn h, double floor) {
  const std::vector<double>& d = type == Counting::AllCause ? tr.dall
                                 : type == Counting::Cause  ? tr.dj
                                 : type == Counting::OtherCauses ? tr.dother
                                                                 : tr.dcens;
  Integral I;
  I.type = type;
  I.strict = strict;
  I.cause = cause;
  I.h = std::move(h);
  const std::size_t K = d.size();
  I.prefix.assign(K + 1, 0.0);
  I.nfl.assign(K + 1, 0);
  for (std::size_t k = 0; k < K; ++k) {
    double term = 0.0;
    int fl = 0;
    if (d[k] != 0.0) {
      Den den{floor};
      term = I.h(tr.at_grid(k), den) * d[k];
      fl = den.n > 0 ? 1 : 0;
    }
    I.prefix[k + 1] = I.prefix[k] + term;
    I.nfl[k + 1] = I.nfl[k] + fl;
  }
  return I;
}

// int_0^{t ^ T} h dM for one observation: jump term minus compensator prefix.
static CutValue eval_integral(const Integral& I, const Tracks& tr, const Observation& o, double t, double floor) {
  const auto& g = *tr.g;
  std::size_t m;
  bool jump;
  if (I.type == Counting::Censoring) {
    m = o.event() ? count_lt(g, o.time) : count_le(g, o.time);
    m = std::min(m, I.strict ? count_lt(g, t) : count_le(g, t));
    jump = o.cause == 0 && (I.strict ? o.time < t : o.time <= t);
  } else {
    m = count_le(g, std::min(t, o.time));
    jump = EventFilter{I.type, I.cause}.matches(o.cause) && o.time <= t;
  }
  CutValue r{-I.prefix[m], I.nfl[m]};
  if (jump) {
    Den den{floor};
    r.value += I.h(tr.at(o.time), den);
    r.floored += den.n;
  }
  return r;
}

}  // namespace detail

using detail::Den;
using detail::Pt;

namespace {

CutValue operator+(CutValue a, CutValue b) { return {a.value + b.value, a.floored + b.floored}; }
CutValue scaled(CutValue a, double c) { return {a.value * c, a.floored}; }

}  // namespace

// ---------------------------------------------------------------- CutEvaluator

CutEvaluator::~CutEvaluator() = default;

CutEvaluator::CutEvaluator(const ArmCurves& curves, const EstimandSpec& spec, const CutOptions& opts)
    : spec_(spec), opts_(opts) {
  if (spec.separable()) throw std::invalid_argument("CutEvaluator: use SeparableEvaluator for separable families");
  if (spec.needs_cause() && (spec.cause < 1 || spec.cause > curves.causes()))
    throw std::invalid_argument("missing cause curves for cause " + std::to_string(spec.cause));
  tr_ = detail::make_tracks(curves, spec.needs_cause() ? spec.cause : 0);
  const double t = spec.horizon, fl = opts.floor;
  const Pt pt = tr_->at(t);
  const double Ft = pt.F, RMt = pt.RM, RLt = pt.RL;
  auto add = [&](Counting c, bool strict, detail::Fn h) {
    ints_.push_back(detail::make_integral(*tr_, c, strict, spec.cause, std::move(h), fl));
  };
  switch (spec.family) {
    case Family::Survival:
      plug_in_ = pt.S;
      add(Counting::AllCause, false, [](const Pt& p, Den& d) { return 1.0 / (d(p.S) * d(p.Gm)); });
      add(Counting::Censoring, false, [](const Pt& p, Den& d) { return 1.0 / (d(p.S) * d(p.G)); });
      break;
    case Family::Rmst:
      plug_in_ = RMt;
      add(Counting::AllCause, false, [RMt](const Pt& p, Den& d) { return (RMt - p.RM) / (d(p.S) * d(p.Gm)); });
      add(Counting::Censoring, true, [](const Pt& p, Den& d) { return p.u / d(p.G); });
      add(Counting::Censoring, true, [RMt](const Pt& p, Den& d) { return (RMt - p.RM) / (d(p.S) * d(p.G)); });
      break;
    case Family::Cif:
      plug_in_ = Ft;
      add(Counting::AllCause, false, [Ft](const Pt& p, Den& d) { return (Ft - p.F) / (d(p.S) * d(p.Gm)); });
      add(Counting::Cause, false, [](const Pt& p, Den& d) { return 1.0 / d(p.Gm); });
      add(Counting::Censoring, false, [Ft](const Pt& p, Den& d) { return (Ft - p.F) / (d(p.S) * d(p.G)); });
      break;
    case Family::Rmtl:
      plug_in_ = RLt;
      add(Counting::Cause, false, [t](const Pt& p, Den& d) { return (t - p.u) / d(p.Gm); });
      add(Counting::AllCause, false, [RLt](const Pt& p, Den& d) { return (RLt - p.RL) / (d(p.S) * d(p.Gm)); });
      add(Counting::AllCause, false, [t](const Pt& p, Den& d) { return (t - p.u) * p.F / (d(p.S) * d(p.Gm)); });
      add(Counting::Censoring, true, [t](const Pt& p, Den& d) { return (t - p.u) * p.F / (d(p.S) * d(p.G)); });
      add(Counting::Censoring, true, [RLt](const Pt& p, Den& d) { return (RLt - p.RL) / (d(p.S) * d(p.G)); });
      break;
    default: break;
  }
}

CutValue CutEvaluator::operator()(const Observation& obs, CutKind kind) const {
  if (!admissible(spec_.family, kind))
    throw std::invalid_argument(to_string(kind) + " is not defined for " + to_string(spec_.family));
  switch (kind) {
    case CutKind::BJ: return bj(obs);
    case CutKind::AIPCW: return aipcw(obs, opts_.form);
    default: return ipcw(obs, kind);
  }
}

CutValue CutEvaluator::bj(const Observation& o) const {
  const double t = spec_.horizon;
  Den den{opts_.floor};
  CutValue r;
  const bool restricted_event = o.event() || o.time >= t;  // Delta(tau)
  switch (spec_.family) {
    case Family::Survival:
      if (o.time > t) r.value = 1.0;
      else if (o.event()) r.value = 0.0;
      else r.value = tr_->at(t).S / den(tr_->at(o.time).S);
      break;
    case Family::Rmst:
      r.value = std::min(o.time, t);
      if (!restricted_event) {
        Pt p = tr_->at(o.time);
        r.value += (plug_in_ - p.RM) / den(p.S);
      }
      break;
    case Family::Cif:
      r.value = (o.time <= t && o.cause == spec_.cause) ? 1.0 : 0.0;
      if (o.cause == 0 && o.time <= t) {
        Pt p = tr_->at(o.time);
        r.value += (plug_in_ - p.F) / den(p.S);
      }
      break;
    case Family::Rmtl:
      r.value = o.cause == spec_.cause ? t - std::min(o.time, t) : 0.0;
      if (!restricted_event) {
        Pt p = tr_->at(o.time);
        r.value += (plug_in_ - p.RL - p.F * (t - o.time)) / den(p.S);
      }
      break;
    default: break;
  }
  r.floored = den.n;
  return r;
}

CutValue CutEvaluator::ipcw(const Observation& o, CutKind kind) const {
  const double t = spec_.horizon;
  Den den{opts_.floor};
  CutValue r;
  switch (spec_.family) {
    case Family::Survival:
      if (kind == CutKind::IPCW1) {
        if (o.time > t) r.value = 1.0 / den(tr_->at(t).G);
      } else if (o.event() && o.time > t) {
        r.value = 1.0 / den(tr_->at(o.time).Gm);
      }
      break;
    case Family::Rmst:
      if (o.event() || o.time >= t) r.value = std::min(o.time, t) / den(tr_->at(std::min(o.time, t)).Gm);
      break;
    case Family::Cif:
      if (o.time <= t && o.cause == spec_.cause) r.value = 1.0 / den(tr_->at(o.time).Gm);
      break;
    case Family::Rmtl:
      if (o.cause == spec_.cause && o.time < t) r.value = (t - o.time) / den(tr_->at(o.time).Gm);
      break;
    default: break;
  }
  r.floored = den.n;
  return r;
}

CutValue CutEvaluator::aipcw(const Observation& o, AipcwForm form) const {
  const double t = spec_.horizon, fl = opts_.floor;
  auto I = [&](std::size_t i) { return detail::eval_integral(ints_[i], *tr_, o, t, fl); };
  const bool cens = form == AipcwForm::Censoring;
  switch (spec_.family) {
    case Family::Survival: {
      const double St = plug_in_;
      if (cens) return ipcw(o, CutKind::IPCW1) + scaled(I(1), St);
      CutValue m = I(0);
      return {St - St * m.value, m.floored};
    }
    case Family::Rmst:
      if (cens) return ipcw(o, CutKind::IPCW) + I(1) + I(2);
      return CutValue{plug_in_, 0} + scaled(I(0), -1.0);
    case Family::Cif:
      if (cens) return ipcw(o, CutKind::IPCW) + I(2);
      return CutValue{plug_in_, 0} + scaled(I(0), -1.0) + I(1);
    case Family::Rmtl:
      if (cens) return ipcw(o, CutKind::IPCW) + scaled(I(3), -1.0) + I(4);
      return CutValue{plug_in_, 0} + I(0) + scaled(I(1), -1.0) + I(2);
    default: break;
  }
  return {};
}

// ---------------------------------------------------------------- separable

HybridCurves hybrid_curves(const std::array<ArmCurves, 2>& c, int cause, int aj, int ajbar) {
  const ArmCurves& A = c[aj];
  const ArmCurves& B = c[ajbar];
  if (cause < 1 || cause > A.causes() || cause > B.causes())
    throw std::invalid_argument("missing cause curves for cause " + std::to_string(cause));
  const auto& dj = A.dcause[cause - 1];
  std::vector<double> dother = detail::other_increments(B, cause);
  const std::size_t K = A.size();
  HybridCurves h;
  h.surv.resize(K);
  h.cif.resize(K);
  double s = 1.0, f = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    f += s * dj[k];
    s *= (1.0 - std::min(1.0, dj[k] + dother[k]));
    h.surv[k] = s;
    h.cif[k] = f;
  }
  h.rmtl = detail::running_integral(*A.grid, h.cif, 0.0);
  return h;
}

namespace {

bool is_direct(Family f) { return f == Family::SepDirectCif || f == Family::SepDirectRmtl; }
bool is_cif_like(Family f) { return f == Family::SepDirectCif || f == Family::SepIndirectCif || f == Family::Cif; }

double value_at(const std::vector<double>& g, const std::vector<double>& v, double x, double init) {
  std::size_t m = count_le(g, x);
  return m == 0 ? init : v[m - 1];
}

double integral_at(const std::vector<double>& g, const std::vector<double>& v, const std::vector<double>& area,
                   double x, double init) {
  std::size_t m = count_le(g, x);
  if (m == 0) return init * x;
  return area[m - 1] + v[m - 1] * (x - g[m - 1]);
}

}  // namespace

SeparableEvaluator::~SeparableEvaluator() = default;

SeparableEvaluator::SeparableEvaluator(const std::array<ArmCurves, 2>& curves, const EstimandSpec& spec, int a,
                                       int a_star, const CutOptions& opts)
    : spec_(spec), opts_(opts) {
  if (!spec.separable()) throw std::invalid_argument("SeparableEvaluator: separable family required");
  if (a < 0 || a > 1 || a_star < 0 || a_star > 1) throw std::invalid_argument("arms must be 0 or 1");
  if (curves[0].grid->size() != curves[1].grid->size() ||
      (curves[0].grid != curves[1].grid && *curves[0].grid != *curves[1].grid))
    throw std::invalid_argument("separable CUT: arm curves must share a grid");
  const int j = spec.cause;
  if (j < 1 || j > curves[a].causes() || curves[a].causes() < 2)
    throw std::invalid_argument("separable CUT: needs at least two causes and cause " + std::to_string(j));
  direct_ = is_direct(spec.family);
  sigma_ = direct_ ? (a != a_star ? 1.0 : 0.0) : -1.0;

  tr_ = detail::make_tracks(curves[a], j);
  tr_->oa = detail::survival_of(detail::other_increments(curves[a], j));
  tr_->os = detail::survival_of(detail::other_increments(curves[a_star], j));
  HybridCurves q = hybrid_curves(curves, j, 1 - a_star, a_star);
  tr_->qF = q.cif;
  tr_->qRL = q.rmtl;
  HybridCurves target = direct_ ? hybrid_curves(curves, j, a, a_star) : hybrid_curves(curves, j, 1 - a_star, a);

  const auto& g = *tr_->g;
  const double t = spec.horizon, fl = opts.floor;
  const bool cif = is_cif_like(spec.family);
  plug_in_ = cif ? value_at(g, target.cif, t, 0.0) : integral_at(g, target.cif, target.rmtl, t, 0.0);

  const Pt pt = tr_->at(t);
  const double Ft = pt.F, RLt = pt.RL, qFt = pt.qF, qRLt = pt.qRL;
  const bool dir = direct_;
  const double sg = sigma_;
  auto rho = [dir](const Pt& p, Den& d) {
    double r = p.os / d(p.oa);
    return dir ? r : 1.0 - r;
  };
  auto add = [&](Counting c, detail::Fn h) {
    ints_.push_back(detail::make_integral(*tr_, c, false, j, std::move(h), fl));
  };
  if (cif) {
    add(Counting::Cause, [rho](const Pt& p, Den& d) { return rho(p, d) / d(p.Gm); });
    add(Counting::AllCause, [rho, Ft](const Pt& p, Den& d) { return rho(p, d) * (Ft - p.F) / (d(p.S) * d(p.Gm)); });
    add(Counting::OtherCauses, [qFt](const Pt& p, Den& d) { return (qFt - p.qF) / (d(p.S) * d(p.Gm)); });
    add(Counting::Cause, [rho, Ft](const Pt& p, Den& d) {
      double r = rho(p, d);
      return r / d(p.Gm) - r * (Ft - p.F) / (d(p.S) * d(p.Gm));
    });
    add(Counting::OtherCauses, [rho, Ft, qFt, sg](const Pt& p, Den& d) {
      return (sg * (qFt - p.qF) - rho(p, d) * (Ft - p.F)) / (d(p.S) * d(p.Gm));
    });
  } else {
    add(Counting::Cause, [rho, t](const Pt& p, Den& d) { return (t - p.u) * rho(p, d) / d(p.Gm); });
    add(Counting::AllCause, [rho, RLt](const Pt& p, Den& d) { return rho(p, d) * (RLt - p.RL) / (d(p.S) * d(p.Gm)); });
    add(Counting::AllCause, [rho, t](const Pt& p, Den& d) { return (t - p.u) * rho(p, d) * p.F / (d(p.S) * d(p.Gm)); });
    add(Counting::OtherCauses, [qRLt, t](const Pt& p, Den& d) {
      return ((qRLt - p.qRL) - (t - p.u) * p.qF) / (d(p.S) * d(p.Gm));
    });
    add(Counting::Cause, [rho, t, RLt](const Pt& p, Den& d) {
      double r = rho(p, d), sgm = d(p.S) * d(p.Gm);
      return (t - p.u) * r / d(p.Gm) - r * (RLt - p.RL) / sgm + (t - p.u) * r * p.F / sgm;
    });
    add(Counting::OtherCauses, [rho, t, RLt, qRLt, sg](const Pt& p, Den& d) {
      double r = rho(p, d), sgm = d(p.S) * d(p.Gm);
      return (-r * (RLt - p.RL) + (t - p.u) * r * p.F + sg * ((qRLt - p.qRL) - (t - p.u) * p.qF)) / sgm;
    });
  }
}

CutValue SeparableEvaluator::operator()(const Observation& obs) const { return value(obs, opts_.bracketed); }

CutValue SeparableEvaluator::value(const Observation& o, bool bracketed) const {
  const double t = spec_.horizon, fl = opts_.floor;
  auto I = [&](std::size_t i) { return detail::eval_integral(ints_[i], *tr_, o, t, fl); };
  CutValue base{plug_in_, 0};
  if (is_cif_like(spec_.family)) {
    if (bracketed) return base + I(3) + I(4);
    return base + I(0) + scaled(I(1), -1.0) + scaled(I(2), sigma_);
  }
  if (bracketed) return base + I(4) + I(5);
  return base + I(0) + scaled(I(1), -1.0) + I(2) + scaled(I(3), sigma_);
}

CutValue SeparableEvaluator::competing_term(const Observation& o) const {
  std::size_t idx = is_cif_like(spec_.family) ? 2 : 3;
  return detail::eval_integral(ints_[idx], *tr_, o, spec_.horizon, opts_.floor);
}

// ---------------------------------------------------------------- facade

CutValue cut_value(const Observation& obs, const NuisanceSet& eta, const EstimandSpec& spec, CutKind kind, int arm,
                   const CutOptions& opts) {
  if (arm != 0 && arm != 1) throw std::invalid_argument("arm must be 0 or 1");
  CutEvaluator ev(eta.arm[arm], spec, opts);
  return ev(obs, kind);
}

CutValue cut_separable(const Observation& obs, const NuisanceSet& eta, const EstimandSpec& spec, int a, int a_star,
                       const CutOptions& opts) {
  SeparableEvaluator ev(eta.arm, spec, a, a_star, opts);
  return ev(obs);
}

namespace {
int separable_a_star(const EstimandSpec& spec) { return is_direct(spec.family) ? spec.arm_param : 1 - spec.arm_param; }
}  // namespace

CutValue learner_cut(const Observation& obs, const NuisanceSet& eta, const EstimandSpec& spec, CutKind kind,
                     const CutOptions& opts) {
  if (!spec.separable()) return cut_value(obs, eta, spec, kind, obs.arm, opts);
  if (kind != CutKind::AIPCW) throw std::invalid_argument("separable estimands admit AIPCW only");
  return cut_separable(obs, eta, spec, obs.arm, separable_a_star(spec), opts);
}

double implied_mean(const NuisanceSet& eta, const EstimandSpec& spec, int arm) {
  const double t = spec.horizon;
  if (!spec.separable()) {
    const ArmCurves& c = eta.arm[arm];
    const auto& g = *c.grid;
    switch (spec.family) {
      case Family::Survival: return value_at(g, c.surv, t, 1.0);
      case Family::Rmst: return integral_at(g, c.surv, detail::running_integral(g, c.surv, 1.0), t, 1.0);
      case Family::Cif: return value_at(g, c.cif.at(spec.cause - 1), t, 0.0);
      case Family::Rmtl: {
        const auto& f = c.cif.at(spec.cause - 1);
        return integral_at(g, f, detail::running_integral(g, f, 0.0), t, 0.0);
      }
      default: break;
    }
  }
  HybridCurves h = is_direct(spec.family) ? hybrid_curves(eta.arm, spec.cause, arm, spec.arm_param)
                                          : hybrid_curves(eta.arm, spec.cause, spec.arm_param, arm);
  const auto& g = *eta.arm[0].grid;
  return is_cif_like(spec.family) ? value_at(g, h.cif, t, 0.0) : integral_at(g, h.cif, h.rmtl, t, 0.0);
}

CutValue if_transform(const Observation& obs, const NuisanceSet& eta, const EstimandSpec& spec,
                      const CutOptions& opts) {
  const int A = obs.arm;
  auto sgn = [](int a) { return a == 1 ? 1.0 : -1.0; };
  if (!spec.separable()) {
    const double mu1 = implied_mean(eta, spec, 1), mu0 = implied_mean(eta, spec, 0);
    CutEvaluator ev(eta.arm[A], spec, opts);
    CutValue y = ev.aipcw(obs, AipcwForm::Censoring);
    const double muA = A == 1 ? mu1 : mu0;
    return {mu1 - mu0 + sgn(A) * (y.value - muA) / eta.pi(A), y.floored};
  }
  if (is_direct(spec.family)) {
    const int as = spec.arm_param, a = 1 - as;
    const double mu_h = implied_mean(eta, spec, a), mu_s = implied_mean(eta, spec, as);
    if (A == a) {
      SeparableEvaluator ev(eta.arm, spec, a, as, opts);
      CutValue y = ev(obs);
      return {sgn(a) * (mu_h + (y.value - mu_h) / eta.pi(a)) + sgn(as) * mu_s, y.floored};
    }
    SeparableEvaluator ev(eta.arm, spec, as, as, opts);
    CutValue y = ev(obs), q = ev.competing_term(obs);
    double v = sgn(a) * (mu_h - q.value / eta.pi(as)) + sgn(as) * (mu_s + (y.value - mu_s) / eta.pi(as));
    return {v, y.floored + q.floored};
  }
  const int as = 1 - spec.arm_param, b = spec.arm_param;
  const double mu_b = implied_mean(eta, spec, b), mu_h = implied_mean(eta, spec, as);
  if (A == b) {
    SeparableEvaluator ev(eta.arm, spec, b, as, opts);
    CutValue y = ev(obs);
    return {sgn(b) * (mu_b + (y.value - mu_b) / eta.pi(b)) + sgn(as) * mu_h, y.floored};
  }
  SeparableEvaluator ev(eta.arm, spec, as, as, opts);
  CutValue q = ev.competing_term(obs);
  return {sgn(b) * (mu_b + q.value / eta.pi(as)) + sgn(as) * mu_h, q.floored};
}

// ---------------------------------------------------------------- learner targets

std::string to_string(LearnerKind k) {
  switch (k) {
    case LearnerKind::S: return "S";
    case LearnerKind::T: return "T";
    case LearnerKind::X: return "X";
    case LearnerKind::IF: return "IF";
    case LearnerKind::IPTW: return "IPTW";
    case LearnerKind::RA: return "RA";
    case LearnerKind::AIPTW: return "AIPTW";
    case LearnerKind::MC: return "MC";
    case LearnerKind::MCEA: return "MCEA";
    case LearnerKind::R: return "R";
    case LearnerKind::U: return "U";
  }
  return "?";
}

const std::vector<LearnerKind>& all_learners() {
  static const std::vector<LearnerKind> v{LearnerKind::S,    LearnerKind::T,  LearnerKind::X,     LearnerKind::IF,
                                          LearnerKind::IPTW, LearnerKind::RA, LearnerKind::AIPTW, LearnerKind::MC,
                                          LearnerKind::MCEA, LearnerKind::R,  LearnerKind::U};
  return v;
}

LearnerKind parse_learner(const std::string& s) {
  for (LearnerKind k : all_learners())
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown learner '" + s + "'");
}

bool is_transformed(LearnerKind k) { return k != LearnerKind::S && k != LearnerKind::T && k != LearnerKind::X; }

TransformedSample minimization_target(LearnerKind kind, double y, const Observation& obs, double mu0, double mu1,
                                      double pi1, const TargetOptions& opts) {
  if (!(pi1 > 0.0 && pi1 < 1.0)) throw std::invalid_argument("propensity must lie in (0, 1)");
  const double pi0 = 1.0 - pi1;
  const double A = obs.arm;
  const double s = 2.0 * A - 1.0;
  const double mu = pi0 * mu0 + pi1 * mu1;
  TransformedSample ts;
  ts.kind = kind;
  ts.id = obs.id;
  auto resid_den = [&](double v) {
    if (std::abs(v) < opts.residual_floor) {
      ts.floored = true;
      return v < 0 ? -opts.residual_floor : opts.residual_floor;
    }
    return v;
  };
  switch (kind) {
    case LearnerKind::IPTW: ts.outcome = y * (A - pi1) / (pi0 * pi1); break;
    case LearnerKind::RA:
      if (opts.ra_cross_arm) ts.outcome = obs.arm == 1 ? y - mu0 : mu1 - y;
      else ts.outcome = obs.arm == 1 ? y - mu1 : mu0 - y;
      break;
    case LearnerKind::AIPTW:
      ts.outcome = mu1 - mu0 + (obs.arm == 1 ? (y - mu1) / pi1 : -(y - mu0) / pi0);
      break;
    case LearnerKind::IF: ts.outcome = y; break;
    case LearnerKind::MC:
      ts.weight = s * (A - pi1) / (4.0 * pi0 * pi1);
      ts.outcome = 2.0 * s * y;
      break;
    case LearnerKind::MCEA:
      ts.weight = s * (A - pi1) / (4.0 * pi0 * pi1);
      ts.outcome = 2.0 * s * (y - mu);
      break;
    case LearnerKind::R:
      ts.weight = (A - pi1) * (A - pi1);
      ts.outcome = (y - mu) / resid_den(A - pi1);
      break;
    case LearnerKind::U: ts.outcome = (y - mu) / resid_den(A - pi1); break;
    default: throw std::invalid_argument("minimization_target: " + to_string(kind) + " is not a transformed learner");
  }
  return ts;
}

}  // namespace cutlearn
