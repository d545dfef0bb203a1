// Python bindings for the sampling library. Structured values (mixtures,
// configs, summaries) cross the boundary as plain dicts via JSON.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "csample/config.hpp"
#include "csample/cost_model.hpp"
#include "csample/errors.hpp"
#include "csample/experiments.hpp"
#include "csample/forward.hpp"
#include "csample/gmm.hpp"
#include "csample/io.hpp"
#include "csample/posterior.hpp"
#include "csample/rng.hpp"
#include "csample/tikhonov.hpp"

namespace py = pybind11;
using namespace csample;
using nlohmann::json;

namespace {

json to_json(const py::handle& obj) {
  const std::string text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
  return json::parse(text);
}

py::object from_json(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

Ensemble ensemble_from(const std::vector<Vector>& samples) {
  Ensemble e;
  e.members = samples;
  e.validate();
  return e;
}

// pybind11 holders cannot be shared_ptr<const T>; operators are immutable anyway.
using PyOperator = std::shared_ptr<ForwardOperator>;

PyOperator mutable_op(OperatorPtr op) { return std::const_pointer_cast<ForwardOperator>(op); }

SpdMatrix cov_from(const Vector& diag_or_empty, std::size_t n, double fallback) {
  return diag_or_empty.empty() ? SpdMatrix::spherical(n, fallback) : SpdMatrix::diagonal(diag_or_empty);
}

} // namespace

PYBIND11_MODULE(csample, m) {
  m.doc() = "Multi-chain MCMC sampling for Bayesian inverse problems with Gaussian-mixture priors";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  py::class_<RngStream>(m, "RngStream")
      .def(py::init<std::uint64_t, std::uint64_t>(), py::arg("seed"), py::arg("stream") = 0)
      .def("uniform", &RngStream::uniform)
      .def("standard_normal", &RngStream::standard_normal)
      .def("normals", [](RngStream& r, std::size_t n) { return sample_standard_normal(r, n); });

  py::class_<GaussianMixture>(m, "GaussianMixture")
      .def(py::init([](const py::dict& d) { return gmm_from_json(to_json(d)); }), py::arg("params"),
           "Build from {'structure', 'weights', 'means', 'covariances'}.")
      .def_property_readonly("n_components", &GaussianMixture::n_components)
      .def_property_readonly("dim", &GaussianMixture::dim)
      .def_property_readonly("weights", &GaussianMixture::weights)
      .def_property_readonly("means", &GaussianMixture::means)
      .def("logpdf", [](const GaussianMixture& g, const Vector& x) { return gmm_logpdf(g, x); })
      .def("sample", [](const GaussianMixture& g, RngStream& r) { return gmm_sample(g, r); })
      .def("to_dict", [](const GaussianMixture& g) { return from_json(gmm_to_json(g)); });

  m.def("oned_generator", &oned_generator, "The eight-component 1-D generator mixture.");

  m.def(
      "em_fit",
      [](const std::vector<Vector>& samples, std::size_t n_components, const std::string& structure,
         std::uint64_t seed) {
        RngStream rng(seed, 0);
        EmResult r = em_fit(ensemble_from(samples), n_components, cov_structure_from_string(structure), rng);
        return py::make_tuple(r.mixture, r.log_likelihood, r.trace, r.converged);
      },
      py::arg("samples"), py::arg("n_components"), py::arg("structure") = "diagonal", py::arg("seed") = 0,
      "Returns (mixture, log_likelihood, trace, converged).");

  m.def(
      "select_model_aic",
      [](const std::vector<Vector>& samples, std::size_t lo, std::size_t hi, const std::string& structure,
         std::uint64_t seed) {
        ModelSelection s =
            select_model_aic(ensemble_from(samples), lo, hi, cov_structure_from_string(structure), RngStream(seed, 0));
        py::list cands;
        for (const AicCandidate& c : s.candidates) {
          py::dict d;
          d["n_components"] = c.n_components;
          d["ok"] = c.ok;
          d["log_likelihood"] = c.log_likelihood;
          d["aic"] = c.aic;
          cands.append(d);
        }
        return py::make_tuple(s.best.mixture, cands);
      },
      py::arg("samples"), py::arg("min_components") = 1, py::arg("max_components") = 10,
      py::arg("structure") = "diagonal", py::arg("seed") = 0);

  py::class_<ForwardOperator, PyOperator>(m, "ForwardOperator")
      .def_property_readonly("in_dim", &ForwardOperator::in_dim)
      .def_property_readonly("out_dim", &ForwardOperator::out_dim)
      .def_property_readonly("kind", &ForwardOperator::kind)
      .def_property_readonly("is_linear", &ForwardOperator::is_linear)
      .def("apply", [](const ForwardOperator& op, const Vector& x) { return op.apply(x); })
      .def("adjoint", [](const ForwardOperator& op, const Vector& x, const Vector& v) {
        return op.adjoint_jacobian_apply(x, v);
      });

  m.def("identity_operator", [](std::size_t n) { return mutable_op(make_identity(n)); }, py::arg("n"));
  m.def(
      "linear_operator",
      [](const std::vector<Vector>& rows) {
        if (rows.empty()) throw ConfigError("linear_operator: empty matrix");
        std::vector<double> flat;
        for (const Vector& r : rows) {
          if (r.size() != rows.front().size()) throw ConfigError("linear_operator: ragged matrix");
          flat.insert(flat.end(), r.begin(), r.end());
        }
        return mutable_op(make_linear(DenseMatrix(rows.size(), rows.front().size(), std::move(flat))));
      },
      py::arg("rows"));
  m.def(
      "gaussian_blur",
      [](std::size_t rows, std::size_t cols, std::size_t width, double sigma, const std::string& boundary) {
        return mutable_op(make_gaussian_blur(rows, cols, width, sigma, boundary_from_string(boundary)));
      },
      py::arg("rows"), py::arg("cols"), py::arg("width") = 5, py::arg("sigma") = 1.5,
      py::arg("boundary") = "reflect");
  m.def("saturated", [](PyOperator inner) { return mutable_op(make_saturated(std::move(inner))); }, py::arg("inner"));

  py::class_<PosteriorModel>(m, "PosteriorModel")
      .def(py::init([](const GaussianMixture& prior, const Vector& y, const Vector& obs_variances, PyOperator op) {
             return PosteriorModel(prior, y, cov_from(obs_variances, y.size(), 1.0), std::move(op));
           }),
           py::arg("prior"), py::arg("y"), py::arg("obs_variances"), py::arg("op"),
           "Observation covariance is diag(obs_variances).")
      .def_property_readonly("dim", &PosteriorModel::dim)
      .def("neg_log_posterior", [](const PosteriorModel& p, const Vector& x) { return p.neg_log_posterior(x); })
      .def("grad", [](const PosteriorModel& p, const Vector& x) { return p.grad_neg_log_posterior(x); })
      .def("log_likelihood", [](const PosteriorModel& p, const Vector& x) { return p.log_likelihood(x); })
      .def("responsibilities", [](const PosteriorModel& p, const Vector& x) { return p.responsibilities(x); });

  m.def(
      "predict_cost",
      [](std::size_t p, std::size_t n_c, std::size_t n_ens, std::size_t n_var, std::size_t burn_in,
         std::size_t stride, std::size_t leapfrog_steps, double t_s, double t_w, const std::string& gmm,
         const std::string& proposal) {
        CostModelInput in;
        in.p = p;
        in.n_c = n_c;
        in.n_ens = n_ens;
        in.n_var = n_var;
        in.burn_in = burn_in;
        in.stride = stride;
        in.leapfrog_steps = leapfrog_steps;
        in.t_s = t_s;
        in.t_w = t_w;
        in.gmm = gmm_regime_from_string(gmm);
        in.proposal = proposal_regime_from_string(proposal);
        const CostReport r = predict_cost(in);
        py::dict d;
        d["serial_cost"] = r.serial_cost;
        d["parallel_cost"] = r.parallel_cost;
        d["speedup"] = r.speedup;
        d["efficiency"] = r.efficiency;
        d["overhead"] = r.overhead;
        d["speedup_integral"] = r.speedup_integral;
        d["efficiency_integral"] = r.efficiency_integral;
        d["comm_cost"] = r.comm_cost;
        d["speedup_with_comm"] = r.speedup_with_comm;
        d["efficiency_with_comm"] = r.efficiency_with_comm;
        d["isoefficiency"] = r.isoefficiency;
        return d;
      },
      py::arg("p"), py::arg("n_c"), py::arg("n_ens"), py::arg("n_var"), py::arg("burn_in") = 0,
      py::arg("stride") = 1, py::arg("leapfrog_steps") = 1, py::arg("t_s") = 0.0, py::arg("t_w") = 0.0,
      py::arg("gmm") = "diagonal", py::arg("proposal") = "diagonal");

  m.def(
      "solve_tikhonov",
      [](PyOperator op, const Vector& y, double alpha, const Vector& x0) {
        TikhonovProblem p;
        p.op = std::move(op);
        p.y = y;
        p.obs_cov = SpdMatrix::identity(y.size());
        p.reg = SpdMatrix::identity(p.op->in_dim());
        p.alpha = alpha;
        const TikhonovSolution s = solve_tikhonov(p, x0.empty() ? Vector(p.op->in_dim(), 0.0) : x0);
        return py::make_tuple(s.x, s.converged);
      },
      py::arg("op"), py::arg("y"), py::arg("alpha"), py::arg("x0") = Vector{},
      "Identity R and C. Returns (x, converged).");

  m.def(
      "relative_error", [](const Vector& x, const Vector& truth) { return relative_error(x, truth); },
      py::arg("x"), py::arg("truth"));

  m.def(
      "default_config", [](const std::string& e) { return from_json(config_to_json(default_config(e))); },
      py::arg("experiment"));

  m.def(
      "run_experiment",
      [](const py::dict& config) {
        const ExperimentConfig cfg = parse_config(to_json(config));
        RunSummary s;
        {
          py::gil_scoped_release release;
          s = run_experiment(cfg);
        }
        return from_json(s.to_json());
      },
      py::arg("config"), "Runs one experiment from a config dict and returns the summary dict.");
}
