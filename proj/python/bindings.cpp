#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qem/agent.hpp"
#include "qem/cfe.hpp"
#include "qem/diagnostics.hpp"
#include "qem/dist.hpp"
#include "qem/mdp.hpp"

namespace py = pybind11;
using namespace qem;

namespace {

std::vector<double> eigen_to_vec(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

WeightSpec weights_from_bands(const std::vector<std::tuple<double, double, double>>& bands) {
  WeightSpec w;
  for (const auto& [lo, hi, v] : bands) w.bands.push_back({lo, hi, v});
  w.validate();
  return w;
}

}  // namespace

PYBIND11_MODULE(_qem, m) {
  m.doc() = "Quantile DRL engine with the Cornish-Fisher WLS mean estimator";

  py::class_<Rng>(m, "Rng").def(py::init<std::uint64_t>());

  m.def("std_normal_quantile", &std_normal_quantile);
  m.def("default_tau_grid", &default_tau_grid);

  m.def(
      "qem_mean",
      [](const std::vector<double>& qhat, const std::vector<double>& taus,
         const std::vector<std::tuple<double, double, double>>& bands, int order) {
        return qem_mean(qhat, taus, weights_from_bands(bands), order);
      },
      py::arg("qhat"), py::arg("taus"),
      py::arg("bands") = std::vector<std::tuple<double, double, double>>{}, py::arg("order") = 3);

  m.def(
      "wls_fit",
      [](const std::vector<double>& qhat, const std::vector<double>& taus,
         const std::vector<std::tuple<double, double, double>>& bands, int order) {
        const auto fit = wls_fit(build_design(taus, order), weights_from_bands(bands), qhat);
        py::dict out;
        out["coefficients"] = eigen_to_vec(fit.coefficients);
        out["r_squared"] = fit.r_squared;
        out["residuals"] = eigen_to_vec(fit.residuals);
        if (fit.theoretical_variance_m1) {
          out["theoretical_variance_m1"] = *fit.theoretical_variance_m1;
        }
        return out;
      },
      py::arg("qhat"), py::arg("taus"),
      py::arg("bands") = std::vector<std::tuple<double, double, double>>{}, py::arg("order") = 3);

  m.def("variance_f", &variance_f);
  m.def("em_variance_theoretical", &em_variance_theoretical);
  m.def(
      "simulate_f_min",
      [](int n, double m_upper, long long trials, const std::string& tau_mode, std::uint64_t seed) {
        Rng rng(seed);
        return simulate_f_min(n, m_upper, trials,
                              tau_mode == "even" ? TauMode::Even : TauMode::UniformRandom, rng);
      },
      py::arg("n"), py::arg("m_upper"), py::arg("trials"), py::arg("tau_mode") = "uniform",
      py::arg("seed") = 1);

  m.def(
      "quantile_project",
      [](const std::vector<double>& values, const std::vector<double>& weights,
         const std::vector<double>& taus) {
        return quantile_project(WeightedSample{values, weights}, taus).atoms;
      },
      py::arg("values"), py::arg("weights"), py::arg("taus"));
  m.def(
      "categorical_project",
      [](const std::vector<double>& values, const std::vector<double>& weights,
         const std::vector<double>& support) {
        return categorical_project(WeightedSample{values, weights}, support).probs;
      },
      py::arg("values"), py::arg("weights"), py::arg("support"));
  m.def(
      "wasserstein1",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const auto taus = default_tau_grid(static_cast<int>(a.size()));
        return wasserstein1(QuantileRepr{a, taus}, QuantileRepr{b, taus});
      },
      py::arg("atoms_a"), py::arg("atoms_b"));
  m.def("left_truncated_variance", [](const std::vector<double>& atoms) {
    return left_truncated_variance(
        QuantileRepr{atoms, default_tau_grid(static_cast<int>(atoms.size()))});
  });

  py::class_<TabularMdp>(m, "TabularMdp")
      .def_readonly("n_states", &TabularMdp::n_states)
      .def_readonly("n_actions", &TabularMdp::n_actions)
      .def_readonly("gamma", &TabularMdp::gamma)
      .def_readonly("r_max", &TabularMdp::r_max)
      .def_readonly("name", &TabularMdp::name)
      .def("is_terminal", &TabularMdp::is_terminal)
      .def("p", &TabularMdp::p)
      .def("reward_mean", [](const TabularMdp& mdp, int x, int a) { return mdp.reward(x, a).mean(); });

  m.def("build_two_arm", &build_two_arm, py::arg("n_quantiles"), py::arg("gamma") = 0.999);
  m.def("build_five_state", &build_five_state);
  m.def("build_chain", [](double gamma) { return build_chain(gamma); }, py::arg("gamma") = 0.99);
  m.def("build_frozen_lake", &build_frozen_lake);

  m.def(
      "value_iteration",
      [](const TabularMdp& mdp) {
        const auto vi = value_iteration(mdp);
        return py::make_tuple(vi.values, vi.policy);
      },
      py::arg("mdp"));

  m.def(
      "run_training",
      [](const TabularMdp& mdp, const std::string& estimator, const std::string& mode,
         int n_quantiles, long long steps, std::uint64_t seed,
         const std::vector<std::tuple<double, double, double>>& bands, int order,
         bool epsilon_per_episode, long long log_every) {
        TrainConfig config;
        config.estimator = estimator == "qem" ? EstimatorSpec::qem(order, weights_from_bands(bands))
                                              : EstimatorSpec::em();
        config.mode = mode == "control" ? Mode::Control : Mode::Evaluation;
        config.n_quantiles = n_quantiles;
        config.steps = steps;
        config.seed = seed;
        config.epsilon_per_episode = epsilon_per_episode;
        config.log_every = log_every;
        config.probe_states = {mdp.start_state};
        const auto result = run_training(mdp, config);
        const auto& rec = result.records.back();
        py::dict out;
        out["q_em"] = rec.q_em;
        out["q_qem"] = rec.q_qem;
        out["atoms"] = rec.atoms;
        out["steps"] = rec.step;
        return out;
      },
      py::arg("mdp"), py::arg("estimator") = "qem", py::arg("mode") = "evaluation",
      py::arg("n_quantiles") = 64, py::arg("steps") = 10000, py::arg("seed") = 1,
      py::arg("bands") = std::vector<std::tuple<double, double, double>>{}, py::arg("order") = 3,
      py::arg("epsilon_per_episode") = false, py::arg("log_every") = 500);
}
