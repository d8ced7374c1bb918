#include <optional>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "abp/commands.hpp"
#include "abp/config.hpp"
#include "abp/error.hpp"
#include "abp/evaluation.hpp"
#include "abp/hpd.hpp"
#include "abp/occ_pipeline.hpp"
#include "abp/univariate.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

abp::RunConfig resolve(const std::optional<std::string>& config_path, const std::optional<std::string>& config_json,
                       std::optional<std::uint64_t> seed) {
  if (config_path && config_json) throw py::value_error("pass either config_path or config_json, not both");
  abp::RunConfig c = config_path ? abp::load_config(*config_path)
                                 : abp::parse_config(config_json.value_or(R"({"version": 1})"));
  if (seed) c.seed = *seed;
  return c;
}

using Command = void (*)(const abp::CommandContext&);

void run_command(Command cmd, const std::string& out_dir, const std::optional<std::string>& config_path,
                 const std::optional<std::string>& config_json, std::optional<std::uint64_t> seed,
                 unsigned threads) {
  abp::CommandContext ctx;
  ctx.config = resolve(config_path, config_json, seed);
  ctx.out_dir = out_dir;
  ctx.threads = threads;
  py::gil_scoped_release release;
  cmd(ctx);
}

std::vector<abp::BinaryLabel> binary_labels(const std::vector<bool>& positive) {
  std::vector<abp::BinaryLabel> out;
  out.reserve(positive.size());
  for (bool p : positive) out.push_back(p ? abp::BinaryLabel::non_normal : abp::BinaryLabel::normal);
  return out;
}

py::dict metrics_dict(const abp::Metrics& m) {
  return py::dict("precision"_a = m.precision, "sensitivity"_a = m.sensitivity, "specificity"_a = m.specificity,
                  "f1"_a = m.f1, "g_mean"_a = m.g_mean, "balanced_accuracy"_a = m.balanced_accuracy,
                  "overall_accuracy"_a = m.overall_accuracy,
                  "accuracy_ci"_a = py::make_tuple(m.accuracy_ci.lo, m.accuracy_ci.hi),
                  "degenerate"_a = m.degenerate);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bayesian adaptive monitoring of longitudinal steroid profiles";

  static py::exception<abp::Error> error(m, "Error", PyExc_RuntimeError);
  static py::exception<abp::Error> config_error(m, "ConfigError", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const abp::Error& e) {
      const std::string msg = std::string(abp::errc_name(e.code())) + ": " + e.what();
      if (e.code() == abp::Errc::ConfigError)
        config_error(msg.c_str());
      else
        error(msg.c_str());
    }
  });

  py::class_<abp::NormalGammaParams>(m, "NormalGamma")
      .def(py::init([](double mu, double kappa, double alpha, double beta) {
             abp::NormalGammaParams p{mu, kappa, alpha, beta};
             p.validate();
             return p;
           }),
           "mu"_a = 0.0, "kappa"_a = 1.0, "alpha"_a = 10.0, "beta"_a = 1.0)
      .def_readonly("mu", &abp::NormalGammaParams::mu)
      .def_readonly("kappa", &abp::NormalGammaParams::kappa)
      .def_readonly("alpha", &abp::NormalGammaParams::alpha)
      .def_readonly("beta", &abp::NormalGammaParams::beta)
      .def("update", [](const abp::NormalGammaParams& p, const std::vector<double>& data) {
             return abp::posterior_update(p, data);
           }, "data"_a, "Posterior after observing log-scale data.")
      .def("predictive_hpd", [](const abp::NormalGammaParams& p, double alpha, std::size_t draws, std::size_t burn_in,
                                std::uint64_t seed) {
             abp::Rng rng(seed);
             const auto d = abp::sample_posterior(p, draws, rng, burn_in);
             const auto i = abp::predictive_hpd(d, alpha, rng);
             return py::make_tuple(i.lo, i.hi);
           }, "alpha"_a = 0.05, "draws"_a = 5000, "burn_in"_a = 1000, "seed"_a = 1,
           "Monte Carlo HPD interval of the posterior predictive.")
      .def("__repr__", [](const abp::NormalGammaParams& p) {
        return "NormalGamma(mu=" + std::to_string(p.mu) + ", kappa=" + std::to_string(p.kappa) +
               ", alpha=" + std::to_string(p.alpha) + ", beta=" + std::to_string(p.beta) + ")";
      });

  m.def("hpd_interval", [](std::vector<double> samples, double alpha) {
    const auto i = abp::hpd_interval_unsorted(std::move(samples), alpha);
    return py::make_tuple(i.lo, i.hi);
  }, "samples"_a, "alpha"_a = 0.05, "Shortest interval holding 1 - alpha of the samples.");

  m.def("metrics", [](std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
    return metrics_dict(abp::metrics({tp, fp, tn, fn}));
  }, "tp"_a, "fp"_a, "tn"_a, "fn"_a);

  m.def("roc_auc", [](const std::vector<double>& scores, const std::vector<bool>& positive) {
    return abp::roc_curve(scores, binary_labels(positive)).auc;
  }, "scores"_a, "positive"_a);

  m.def("pr_auc", [](const std::vector<double>& scores, const std::vector<bool>& positive) {
    return abp::pr_curve(scores, binary_labels(positive)).auc;
  }, "scores"_a, "positive"_a);

  m.def("random_oversample", [](const std::vector<bool>& positive, std::uint64_t seed) {
    abp::Rng rng(seed);
    return abp::random_oversample(binary_labels(positive), rng).indices;
  }, "positive"_a, "seed"_a = 1, "Row indices of the balanced set: the input rows, then minority replicates.");

  m.def("resolve_config", [](const std::optional<std::string>& config_path, const std::optional<std::string>& config_json,
                             std::optional<std::uint64_t> seed) {
    const auto c = resolve(config_path, config_json, seed);
    return py::make_tuple(abp::dump_config(c), abp::config_hash(c));
  }, "config_path"_a = py::none(), "config_json"_a = py::none(), "seed"_a = py::none(),
        "Validated config as (resolved JSON text, config hash).");

  auto bind_command = [&m](const char* name, Command cmd, const char* doc) {
    m.def(name, [cmd](const std::string& out_dir, const std::optional<std::string>& config_path,
                      const std::optional<std::string>& config_json, std::optional<std::uint64_t> seed,
                      unsigned threads) { run_command(cmd, out_dir, config_path, config_json, seed, threads); },
          "out_dir"_a = ".", "config_path"_a = py::none(), "config_json"_a = py::none(), "seed"_a = py::none(),
          "threads"_a = 1, doc);
  };
  bind_command("simulate", abp::cmd_simulate, "Write a synthetic cohort and its injection truth.");
  bind_command("fit", abp::cmd_fit, "Fit the population chains for every multivariate policy.");
  bind_command("classify", abp::cmd_classify, "Classify every monitored sample under every policy.");
  bind_command("evaluate", abp::cmd_evaluate, "Score the decisions: report, curves and plot.");
  bind_command("run", abp::cmd_run, "simulate, fit, classify and evaluate in turn.");
}
