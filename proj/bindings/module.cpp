// Python bindings for the core library. The surface mirrors the C++ API:
// graph construction, objective assembly, the reference oracle, the solver in
// global and message-passing form, and the certificate checks. JSON payloads
// cross the boundary as strings so files written by the CLI round-trip here.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "dnadmm/certify.hpp"
#include "dnadmm/dataset.hpp"
#include "dnadmm/errors.hpp"
#include "dnadmm/graph.hpp"
#include "dnadmm/objective.hpp"
#include "dnadmm/problem.hpp"
#include "dnadmm/reference.hpp"
#include "dnadmm/simulator.hpp"
#include "dnadmm/solver.hpp"

namespace py = pybind11;
using namespace dnadmm;

namespace {

// The C++ factories hand out shared_ptr<const Regularizer>, which pybind11
// cannot use as a class holder; a thin value wrapper carries it instead.
struct Reg {
  std::shared_ptr<const Regularizer> ptr;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Decentralized consensus optimization with truncated-Newton ADMM steps";
  m.attr("__version__") = "0.1.0";

  // Most-specific translators must be registered last so they run first.
  auto err = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<NonFinite>(m, "DivergenceError", err);

  // --- graph ---------------------------------------------------------------
  py::class_<Graph>(m, "Graph")
      .def_static("make", &Graph::make, py::arg("n"), py::arg("edges"),
                  py::arg("anchor") = 0)
      .def_readonly("n", &Graph::n)
      .def_readonly("anchor", &Graph::anchor)
      .def_readonly("edges", &Graph::edges)
      .def_readonly("degree", &Graph::degree)
      .def_readonly("neighbors", &Graph::neighbors)
      .def("num_edges", &Graph::num_edges)
      .def("is_connected", &Graph::is_connected)
      .def("to_json", [](const Graph& g) { return g.to_json().dump(2); })
      .def_static("from_json", [](const std::string& text) {
        return Graph::from_json(nlohmann::json::parse(text));
      });

  m.def("build_random_connected", &build_random_connected, py::arg("n"),
        py::arg("p"), py::arg("seed"), py::arg("anchor") = 0,
        py::arg("resample_cap") = 10000);
  m.def("incidence_matrix", &incidence_matrix);
  m.def("lambda_min_anchor", &lambda_min_anchor);
  m.def("bt_apply", &bt_apply, py::arg("graph"), py::arg("d"), py::arg("x"));
  m.def("b_apply", &b_apply, py::arg("graph"), py::arg("d"), py::arg("y"));

  // --- objective -----------------------------------------------------------
  py::class_<QuadraticCost>(m, "QuadraticCost")
      .def(py::init<Eigen::MatrixXd, Eigen::VectorXd, double>(),
           py::arg("design"), py::arg("target"), py::arg("ridge") = 0.0)
      .def_property_readonly("design", &QuadraticCost::design)
      .def_property_readonly("target", &QuadraticCost::target)
      .def_property_readonly("ridge", &QuadraticCost::ridge)
      .def_property_readonly("hessian", &QuadraticCost::hessian)
      .def("dim", &QuadraticCost::dim)
      .def("rows", &QuadraticCost::rows)
      .def("value", &QuadraticCost::value)
      .def("gradient", &QuadraticCost::gradient);

  py::class_<SmoothBounds>(m, "SmoothBounds")
      .def_readonly("m_f", &SmoothBounds::m_f)
      .def_readonly("M_f", &SmoothBounds::M_f);
  m.def("smooth_bounds", &smooth_bounds);

  py::class_<Reg>(m, "Regularizer")
      .def("value", [](const Reg& r, const Eigen::VectorXd& z) {
        return r.ptr->value(z);
      })
      .def("prox",
           [](const Reg& r, const Eigen::VectorXd& v, double mu) {
             return r.ptr->prox(v, mu);
           })
      .def("subgradient_margin",
           [](const Reg& r, const Eigen::VectorXd& z, const Eigen::VectorXd& y,
              double active_tol) {
             return r.ptr->subgradient_margin(z, y, active_tol);
           })
      .def("kind", [](const Reg& r) { return r.ptr->kind(); });
  m.def("l1_regularizer",
        [](double weight) { return Reg{make_l1_regularizer(weight)}; });
  m.def("zero_regularizer", [] { return Reg{make_zero_regularizer()}; });

  // --- problem -------------------------------------------------------------
  py::class_<Problem>(m, "Problem")
      .def(py::init([](Graph g, std::vector<QuadraticCost> costs, const Reg& r) {
             return Problem(std::move(g), std::move(costs), r.ptr);
           }),
           py::arg("graph"), py::arg("costs"), py::arg("regularizer"))
      .def_property_readonly("graph",
                             [](const Problem& p) { return p.graph; })
      .def_property_readonly("costs",
                             [](const Problem& p) { return p.costs; })
      .def_property_readonly("regularizer",
                             [](const Problem& p) { return Reg{p.reg}; })
      .def("n", &Problem::n)
      .def("d", &Problem::d)
      .def("grad_smooth", &Problem::grad_smooth)
      .def("smooth_value_at", &Problem::smooth_value_at)
      .def("mean_cost_at_blocks", &Problem::mean_cost_at_blocks);

  m.def("global_cost",
        [](const std::vector<QuadraticCost>& costs, const Reg& r,
           const Eigen::VectorXd& x) { return global_cost(costs, *r.ptr, x); });
  m.def("problem_hash_hex", &problem_hash_hex);

  // --- reference oracle ----------------------------------------------------
  py::class_<KktResiduals>(m, "KktResiduals")
      .def_readonly("r_a", &KktResiduals::r_a)
      .def_readonly("r_b_ok", &KktResiduals::r_b_ok)
      .def_readonly("r_b_margin", &KktResiduals::r_b_margin)
      .def_readonly("r_c", &KktResiduals::r_c);

  py::class_<ReferenceSolution>(m, "ReferenceSolution")
      .def_readonly("x_star", &ReferenceSolution::x_star)
      .def_readonly("obj_star", &ReferenceSolution::obj_star)
      .def_readonly("y_star", &ReferenceSolution::y_star)
      .def_readonly("z_star", &ReferenceSolution::z_star)
      .def_readonly("residuals", &ReferenceSolution::residuals)
      .def("to_json",
           [](const ReferenceSolution& r) { return r.to_json().dump(2); })
      .def_static("from_json", [](const std::string& text) {
        return ReferenceSolution::from_json(nlohmann::json::parse(text));
      });

  m.def(
      "solve_centralized",
      [](const std::vector<QuadraticCost>& costs, const Reg& r, double tol,
         long max_iters) { return solve_centralized(costs, *r.ptr, tol, max_iters); },
      py::arg("costs"), py::arg("regularizer"), py::arg("tol") = 1e-12,
      py::arg("max_iters") = 500000, py::call_guard<py::gil_scoped_release>());
  m.def("compute_reference", &compute_reference, py::arg("problem"),
        py::arg("tol") = 1e-12, py::arg("max_iters") = 500000,
        py::call_guard<py::gil_scoped_release>());
  m.def("kkt_residuals", &kkt_residuals, py::arg("x"), py::arg("zhat"),
        py::arg("y"), py::arg("problem"), py::arg("membership_tol") = 1e-8);

  // --- solver --------------------------------------------------------------
  py::class_<Hyper>(m, "Hyper")
      .def(py::init([](double mu, double eps, int K, long max_iters, double tol) {
             Hyper h;
             h.mu = mu;
             h.eps = eps;
             h.K = K;
             h.max_iters = max_iters;
             h.tol = tol;
             h.validate();
             return h;
           }),
           py::arg("mu") = 1.0, py::arg("eps") = 1.0, py::arg("K") = 0,
           py::arg("max_iters") = 5000, py::arg("tol") = 1e-8)
      .def_readwrite("mu", &Hyper::mu)
      .def_readwrite("eps", &Hyper::eps)
      .def_readwrite("K", &Hyper::K)
      .def_readwrite("max_iters", &Hyper::max_iters)
      .def_readwrite("tol", &Hyper::tol)
      .def("validate", &Hyper::validate);

  py::class_<GlobalState>(m, "GlobalState")
      .def_static("zeros", &GlobalState::zeros)
      .def_readwrite("x", &GlobalState::x)
      .def_readwrite("y", &GlobalState::y)
      .def_readwrite("zhat", &GlobalState::zhat)
      .def_readwrite("iter", &GlobalState::iter);

  py::class_<TheoryParams>(m, "TheoryParams")
      .def_readonly("beta", &TheoryParams::beta)
      .def_readonly("eta", &TheoryParams::eta)
      .def_readonly("zeta", &TheoryParams::zeta)
      .def_readonly("gamma", &TheoryParams::gamma)
      .def_readonly("delta", &TheoryParams::delta)
      .def_readonly("lambda_min", &TheoryParams::lambda_min)
      .def_readonly("eps_theory", &TheoryParams::eps_theory);

  py::class_<IterRecord>(m, "IterRecord")
      .def_readonly("iter", &IterRecord::iter)
      .def_readonly("comm_rounds_cum", &IterRecord::comm_rounds_cum)
      .def_readonly("rel_cost", &IterRecord::rel_cost)
      .def_readonly("e_norm", &IterRecord::e_norm)
      .def_readonly("gamma_dx", &IterRecord::gamma_dx)
      .def_readonly("lyapunov", &IterRecord::lyapunov)
      .def_readonly("contraction", &IterRecord::contraction)
      .def_readonly("r_a", &IterRecord::r_a)
      .def_readonly("r_b_ok", &IterRecord::r_b_ok)
      .def_readonly("r_b_margin", &IterRecord::r_b_margin)
      .def_readonly("r_c", &IterRecord::r_c)
      .def_readonly("z_fixed_point", &IterRecord::z_fixed_point);

  py::class_<IterationTrace>(m, "IterationTrace")
      .def_readonly("records", &IterationTrace::records)
      .def_readonly("converged", &IterationTrace::converged)
      .def_readonly("final_state", &IterationTrace::final_state)
      .def_readonly("x_iterates", &IterationTrace::x_iterates);

  m.def("admm_step", &admm_step, py::arg("state"), py::arg("problem"),
        py::arg("hyper"));
  m.def("run", &run, py::arg("problem"), py::arg("hyper"),
        py::arg("star") = nullptr, py::arg("record_iterates") = false,
        py::call_guard<py::gil_scoped_release>());
  m.def("eps_theory_bound", &eps_theory_bound, py::arg("m_f"), py::arg("M_f"),
        py::arg("n"), py::arg("mu"));
  m.def("theory_params", &theory_params, py::arg("m_f"), py::arg("M_f"),
        py::arg("n"), py::arg("mu"), py::arg("eps"), py::arg("K"),
        py::arg("lambda_min"), py::arg("beta") = 2.0, py::arg("eta") = 2.0,
        py::arg("zeta_frac") = 0.5);
  m.def("theory_params_maximized", &theory_params_maximized, py::arg("m_f"),
        py::arg("M_f"), py::arg("n"), py::arg("mu"), py::arg("eps"),
        py::arg("K"), py::arg("lambda_min"),
        py::call_guard<py::gil_scoped_release>());

  // --- message-passing form ------------------------------------------------
  py::enum_<Scheduler>(m, "Scheduler")
      .value("serial", Scheduler::serial)
      .value("parallel", Scheduler::parallel);

  py::class_<CommStats>(m, "CommStats")
      .def_readonly("vectors_sent", &CommStats::vectors_sent)
      .def_readonly("message_rounds", &CommStats::message_rounds)
      .def_readonly("iterations", &CommStats::iterations);
  m.def("comm_rounds_per_iteration", &comm_rounds_per_iteration);

  py::class_<AgentTrace>(m, "AgentTrace")
      .def_readonly("x", &AgentTrace::x);

  py::class_<DistributedRun>(m, "DistributedRun")
      .def_readonly("records", &DistributedRun::records)
      .def_readonly("agents", &DistributedRun::agents)
      .def_readonly("comm", &DistributedRun::comm)
      .def_readonly("final_x", &DistributedRun::final_x)
      .def_readonly("final_zhat", &DistributedRun::final_zhat);

  m.def("run_distributed", &run_distributed, py::arg("problem"),
        py::arg("hyper"), py::arg("iterations"), py::arg("star") = nullptr,
        py::arg("scheduler") = Scheduler::serial,
        py::call_guard<py::gil_scoped_release>());

  // --- certification -------------------------------------------------------
  py::enum_<Fault>(m, "Fault")
      .value("none", Fault::none)
      .value("flip_coupling_sign", Fault::flip_coupling_sign);

  py::class_<CheckResult>(m, "CheckResult")
      .def_readonly("name", &CheckResult::name)
      .def_readonly("iterations", &CheckResult::iterations)
      .def_readonly("worst_margin", &CheckResult::worst_margin)
      .def_readonly("tolerance", &CheckResult::tolerance)
      .def_readonly("passed", &CheckResult::pass)
      .def_readonly("note", &CheckResult::note);

  py::class_<CertificateReport>(m, "CertificateReport")
      .def_readonly("checks", &CertificateReport::checks)
      .def_readonly("passed", &CertificateReport::pass)
      .def("table", &CertificateReport::table)
      .def("to_json",
           [](const CertificateReport& r) { return r.to_json().dump(2); });

  m.def("certify", &certify, py::arg("problem"), py::arg("hyper"),
        py::arg("theory"), py::arg("iters"), py::arg("star"),
        py::arg("fault") = Fault::none,
        py::call_guard<py::gil_scoped_release>());

  // --- datasets ------------------------------------------------------------
  py::class_<Dataset>(m, "Dataset")
      .def(py::init([](Eigen::MatrixXd features, Eigen::VectorXd labels,
                       std::vector<std::string> feature_names) {
             if (features.rows() != labels.size())
               throw DimensionMismatch(
                   "dataset: feature rows and label count disagree");
             Dataset ds;
             ds.features = std::move(features);
             ds.labels = std::move(labels);
             ds.feature_names = std::move(feature_names);
             ds.provenance = "in-memory";
             return ds;
           }),
           py::arg("features"), py::arg("labels"),
           py::arg("feature_names") = std::vector<std::string>{})
      .def_readonly("features", &Dataset::features)
      .def_readonly("labels", &Dataset::labels)
      .def_readonly("feature_names", &Dataset::feature_names)
      .def_readonly("provenance", &Dataset::provenance)
      .def("rows", &Dataset::rows)
      .def("d", &Dataset::d);

  m.def("parse_libsvm", &parse_libsvm, py::arg("path"), py::arg("d"));
  m.def("parse_libsvm_text", &parse_libsvm_text, py::arg("text"), py::arg("d"),
        py::arg("provenance") = "in-memory");
  m.def("parse_csv_dataset", &parse_csv_dataset, py::arg("path"),
        py::arg("label_column"));
  m.def("parse_csv_text", &parse_csv_text, py::arg("text"),
        py::arg("label_column"), py::arg("provenance") = "in-memory");
  m.def("write_libsvm", &write_libsvm, py::arg("dataset"), py::arg("path"));
  m.def("write_csv", &write_csv, py::arg("dataset"), py::arg("path"),
        py::arg("label_column"));
  m.def("normalize_columns", &normalize_columns);
  m.def("partition_even", &partition_even, py::arg("dataset"), py::arg("n"),
        py::arg("ridge") = 0.0,
        py::arg("shuffle_seed") = std::optional<std::uint64_t>{});
  m.def("shards_to_json", [](const std::vector<QuadraticCost>& costs) {
    return shards_to_json(costs).dump(2);
  });
  m.def(
      "costs_from_shards",
      [](const std::string& text, double ridge) {
        return costs_from_shards(nlohmann::json::parse(text), ridge);
      },
      py::arg("text"), py::arg("ridge") = 0.0);
}
