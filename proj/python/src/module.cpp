#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cutlearn/commands.hpp"
#include "cutlearn/config.hpp"
#include "cutlearn/metrics.hpp"
#include "cutlearn/simgen.hpp"

namespace py = pybind11;
using namespace cutlearn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> vec(const Array& a) { return {a.data(), a.data() + a.size()}; }

std::vector<std::vector<double>> rows(const Array& x) {
  if (x.ndim() != 2) throw std::invalid_argument("x must be two-dimensional");
  const auto n = x.shape(0), p = x.shape(1);
  std::vector<std::vector<double>> out(static_cast<std::size_t>(n));
  for (py::ssize_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)].assign(x.data(i, 0), x.data(i, 0) + p);
  return out;
}

Array to_array(const std::vector<double>& v) {
  Array a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

py::dict simulate(int setting, int n, std::uint64_t seed, const std::string& law) {
  SimConfig sc;
  sc.setting = setting;
  sc.n = n;
  sc.seed = seed;
  if (law == "normal") sc.law = CovariateLaw::Normal;
  else if (law != "uniform") throw std::invalid_argument("law must be 'uniform' or 'normal'");
  const auto d = generate(sc);
  const auto p = static_cast<py::ssize_t>(d.obs.empty() ? 0 : d.obs[0].x.size());
  Array x({static_cast<py::ssize_t>(d.obs.size()), p});
  py::array_t<long> id(static_cast<py::ssize_t>(d.obs.size()));
  py::array_t<int> a(id.size()), status(id.size());
  std::vector<double> time, pi1;
  for (std::size_t i = 0; i < d.obs.size(); ++i) {
    const auto& o = d.obs[i];
    std::copy(o.x.begin(), o.x.end(), x.mutable_data(static_cast<py::ssize_t>(i), 0));
    id.mutable_at(i) = o.id;
    a.mutable_at(i) = o.arm;
    status.mutable_at(i) = o.cause;
    time.push_back(o.time);
    pi1.push_back(d.truth[i].pi1);
  }
  py::dict out;
  out["id"] = id;
  out["x"] = x;
  out["a"] = a;
  out["time"] = to_array(time);
  out["status"] = status;
  out["pi1"] = to_array(pi1);
  return out;
}

Array hte(int setting, const std::string& family, double horizon, const Array& x, int cause, int arm) {
  const EstimandSpec spec{parse_family(family), horizon, cause, arm};
  if (!supports(setting, spec)) throw std::invalid_argument(spec.name() + " is not available in setting " + std::to_string(setting));
  const TrueModel m(setting);
  std::vector<double> out;
  for (const auto& r : rows(x)) out.push_back(m.true_hte(spec, r));
  return to_array(out);
}

py::dict metrics(const Array& psi_hat, const Array& psi0, std::optional<Array> h) {
  const auto r = h ? evaluate(vec(psi_hat), vec(psi0), vec(*h)) : evaluate(vec(psi_hat), vec(psi0));
  py::dict out;
  for (const auto& [k, v] : r.items()) out[py::str(k)] = v;
  return out;
}

std::vector<Observation> dataset(const Array& x, const py::array_t<int>& a, const Array& time, const py::array_t<int>& status) {
  const auto xs = rows(x);
  if (a.size() != static_cast<py::ssize_t>(xs.size()) || time.size() != a.size() || status.size() != a.size())
    throw std::invalid_argument("x, a, time and status must have the same length");
  std::vector<Observation> obs(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    obs[i].id = static_cast<long>(i) + 1;
    obs[i].x = xs[i];
    obs[i].arm = a.at(i);
    obs[i].time = time.at(i);
    obs[i].cause = status.at(i);
  }
  return obs;
}

// {cut: {"ids": ..., "<learner>:<estimand>": psi-hat, ...}}
py::dict fit(const std::string& config, const Array& x, const py::array_t<int>& a, const Array& time,
             const py::array_t<int>& status) {
  const auto cfg = parse_config(config);
  const auto data = dataset(x, a, time, status);
  std::vector<FitRun> runs;
  {
    py::gil_scoped_release nogil;
    runs = run_fit(cfg, data);
  }
  py::dict out;
  for (const auto& run : runs) {
    py::dict d;
    std::vector<double> ids;
    for (const auto& o : run.result.data.obs) ids.push_back(static_cast<double>(o.id));
    d["ids"] = to_array(ids);
    for (const auto& lr : run.result.learners) d[py::str(to_string(lr.kind) + ":" + lr.spec.name())] = to_array(estimates(run, lr));
    d["audit_violations"] = run.audit.violations;
    out[py::str(to_string(run.cut))] = d;
  }
  return out;
}

py::list bench(const std::string& config) {
  const auto cfg = parse_config(config);
  BenchReport rep;
  {
    py::gil_scoped_release nogil;
    rep = run_bench(cfg);
  }
  py::list out;
  for (const auto& r : rep.rows)
    out.append(py::dict(py::arg("setting") = r.setting, py::arg("replication") = r.replication, py::arg("learner") = r.learner,
                        py::arg("estimand") = r.estimand, py::arg("cut") = r.cut, py::arg("metric") = r.metric,
                        py::arg("value") = r.value));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Censoring-unbiased transforms and HTE meta-learners";
  m.attr("__version__") = CUTLEARN_VERSION;

  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const DataError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def("simulate", &simulate, py::arg("setting"), py::arg("n"), py::arg("seed") = 1, py::arg("law") = "uniform",
        "Draw a dataset; returns id, x, a, time, status and the true pi1.");
  m.def("true_hte", &hte, py::arg("setting"), py::arg("family"), py::arg("horizon"), py::arg("x"), py::arg("cause") = 1,
        py::arg("arm") = 1);
  m.def("evaluate", &metrics, py::arg("psi_hat"), py::arg("psi0"), py::arg("h") = py::none());
  m.def("fit", &fit, py::arg("config"), py::arg("x"), py::arg("a"), py::arg("time"), py::arg("status"),
        "Run the configured pipeline on arrays; the config is a JSON string.");
  m.def("bench", &bench, py::arg("config"));
  m.def("normalize_config", [](const std::string& s) { return config_json(parse_config(s)); }, py::arg("config"));
}
