#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "deeptrader/experiment.hpp"

namespace py = pybind11;
using namespace deeptrader;

namespace {

py::dict metrics_dict(const MetricsReport& m) {
  py::dict d;
  d["expected_return"] = m.expected_return;
  d["std_return"] = m.std_return;
  d["sharpe"] = m.sharpe ? py::object(py::float_(*m.sharpe)) : py::object(py::none());
  d["mdd"] = m.mdd;
  d["hit"] = m.hit;
  return d;
}

}  // namespace

PYBIND11_MODULE(deeptrader, m) {
  m.doc() = "dollar-bar sampled deep-RL trading framework";

  py::class_<Trade>(m, "Trade")
      .def(py::init<>())
      .def(py::init([](const std::string& ts, double price, double volume) {
             return Trade{parse_iso8601(ts), price, volume};
           }),
           py::arg("timestamp"), py::arg("price"), py::arg("volume"))
      .def_readwrite("timestamp", &Trade::timestamp)
      .def_readwrite("price", &Trade::price)
      .def_readwrite("volume", &Trade::volume)
      .def("__repr__", [](const Trade& t) {
        std::ostringstream os;
        os << "Trade(" << format_iso8601(t.timestamp) << ", price=" << t.price << ", volume=" << t.volume
           << ")";
        return os.str();
      });

  py::class_<Bar>(m, "Bar")
      .def_readonly("open", &Bar::open)
      .def_readonly("high", &Bar::high)
      .def_readonly("low", &Bar::low)
      .def_readonly("close", &Bar::close)
      .def_readonly("volume", &Bar::volume)
      .def_readonly("dollar_volume", &Bar::dollar_volume)
      .def_readonly("start_ts", &Bar::start_ts)
      .def_readonly("end_ts", &Bar::end_ts);

  m.def("parse_iso8601", &parse_iso8601, py::arg("timestamp"));
  m.def("format_iso8601", &format_iso8601, py::arg("micros"));

  m.def("load_ticks", &load_ticks_file, py::arg("path"), "read a tick CSV into a list of trades");
  m.def("sample_stream", &sample_stream, py::arg("trades"), py::arg("tgt"), py::arg("initial_threshold"),
        "fold trades into dollar-volume bars");

  // reward arithmetic
  m.def("multiplicative_return", &multiplicative_return, py::arg("p_t"), py::arg("p_prev"));
  m.def("drift_weight", &drift_weight, py::arg("a_prev"), py::arg("y"));
  m.def("gross_return", &gross_return, py::arg("y"), py::arg("a_prev"));
  m.def("net_return", &net_return, py::arg("r_gross"), py::arg("a_chosen"), py::arg("a_drift"),
        py::arg("lambda_c"));
  m.def("linear_step_return", &linear_step_return, py::arg("y"), py::arg("a_chosen"), py::arg("a_drift"),
        py::arg("lambda_c"));

  // performance metrics
  m.def("sharpe", &sharpe, py::arg("expected"), py::arg("std"));
  m.def(
      "max_drawdown",
      [](const std::vector<double>& curve) { return max_drawdown(curve); },
      py::arg("equity_curve"));
  m.def(
      "hit_rate", [](const std::vector<double>& rets) { return hit_rate(rets); },
      py::arg("step_returns"));
  m.def("annualize", &annualize, py::arg("per_bar_mean"), py::arg("per_bar_std"),
        py::arg("bars_per_year"));

  // synthetic markets
  py::class_<SyntheticSpec> spec(m, "SyntheticSpec");
  spec.def(py::init<>())
      .def_readwrite("base_price", &SyntheticSpec::base_price)
      .def_readwrite("amplitude", &SyntheticSpec::amplitude)
      .def_readwrite("period_days", &SyntheticSpec::period_days)
      .def_readwrite("drift", &SyntheticSpec::drift)
      .def_readwrite("volatility", &SyntheticSpec::volatility)
      .def_readwrite("regime_length_days", &SyntheticSpec::regime_length_days)
      .def_readwrite("ticks_per_day", &SyntheticSpec::ticks_per_day)
      .def_readwrite("duration_days", &SyntheticSpec::duration_days)
      .def_readwrite("tick_volume", &SyntheticSpec::tick_volume)
      .def_property(
          "generator", [](const SyntheticSpec& s) { return to_string(s.generator); },
          [](SyntheticSpec& s, const std::string& g) { s.generator = generator_from_string(g); });
  m.def("generate_synthetic", &generate_synthetic, py::arg("spec"), py::arg("seed"));

  // experiments
  m.def("parse_config_file", &parse_config_file, py::arg("path"));
  m.def("parse_config_text", &parse_config_text, py::arg("text"));
  m.def("serialize_config", &serialize_config, py::arg("config"));

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_readwrite("lambda_sigma", &ExperimentConfig::lambda_sigma)
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("runs", &ExperimentConfig::runs)
      .def_readwrite("out", &ExperimentConfig::out)
      .def_readwrite("max_epochs", &ExperimentConfig::max_epochs)
      .def_property(
          "algorithm", [](const ExperimentConfig& c) { return to_string(c.algorithm); },
          [](ExperimentConfig& c, const std::string& a) { c.algorithm = algorithm_from_string(a); })
      .def_property(
          "seq", [](const ExperimentConfig& c) { return to_string(c.seq); },
          [](ExperimentConfig& c, const std::string& s) { c.seq = seq_kind_from_string(s); })
      .def("model_name", &ExperimentConfig::model_name);

  m.def(
      "run_experiment",
      [](const ExperimentConfig& cfg, bool write_outputs) {
        const ExperimentResult r = write_outputs ? run_experiment_to_dir(cfg) : run_experiment(cfg);
        py::dict out;
        out["model"] = cfg.model_name();
        out["average"] = metrics_dict(r.averaged);
        out["baseline"] = metrics_dict(r.baseline.metrics);
        py::list runs;
        for (const RunResult& rr : r.runs) {
          py::dict rd = metrics_dict(rr.backtest.metrics);
          rd["run"] = rr.run_index;
          rd["seed"] = rr.seed;
          rd["cumulative_log_return"] = rr.backtest.cumulative_log_return;
          runs.append(rd);
        }
        out["runs"] = runs;
        out["bars"] = r.bars.size();
        return out;
      },
      py::arg("config"), py::arg("write_outputs") = false,
      "run a full experiment and return the averaged metrics");
}
