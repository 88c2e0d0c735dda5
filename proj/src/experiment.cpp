#include "dnadmm/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dnadmm/dataset.hpp"
#include "dnadmm/errors.hpp"
#include "dnadmm/graph.hpp"

namespace dnadmm {

namespace fs = std::filesystem;

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  cfg.graph_file = j.value("graph_file", cfg.graph_file);
  cfg.n = j.value("n", cfg.n);
  cfg.p = j.value("p", cfg.p);
  cfg.graph_seed = j.value("graph_seed", cfg.graph_seed);
  cfg.anchor = j.value("anchor", cfg.anchor);
  cfg.data_file = j.value("data_file", cfg.data_file);
  cfg.data_format = j.value("data_format", cfg.data_format);
  cfg.libsvm_dim = j.value("libsvm_dim", cfg.libsvm_dim);
  cfg.label_column = j.value("label_column", cfg.label_column);
  cfg.normalize = j.value("normalize", cfg.normalize);
  if (j.contains("shuffle_seed") && !j.at("shuffle_seed").is_null())
    cfg.shuffle_seed = j.at("shuffle_seed").get<std::uint64_t>();
  cfg.ridge = j.value("ridge", cfg.ridge);
  cfg.reg_weight = j.value("reg_weight", cfg.reg_weight);
  cfg.mu = j.value("mu", cfg.mu);
  cfg.eps = j.value("eps", cfg.eps);
  if (j.contains("K_list")) cfg.K_list = j.at("K_list").get<std::vector<int>>();
  cfg.iters = j.value("iters", cfg.iters);
  cfg.ref_tol = j.value("ref_tol", cfg.ref_tol);
  const std::string sched = j.value("scheduler", std::string("serial"));
  if (sched == "serial")
    cfg.scheduler = Scheduler::serial;
  else if (sched == "parallel")
    cfg.scheduler = Scheduler::parallel;
  else
    throw InvalidParameter("scheduler must be 'serial' or 'parallel', got '" + sched +
                           "'");
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  return cfg;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j{{"graph_file", graph_file},
                   {"n", n},
                   {"p", p},
                   {"graph_seed", graph_seed},
                   {"anchor", anchor},
                   {"data_file", data_file},
                   {"data_format", data_format},
                   {"libsvm_dim", libsvm_dim},
                   {"label_column", label_column},
                   {"normalize", normalize},
                   {"ridge", ridge},
                   {"reg_weight", reg_weight},
                   {"mu", mu},
                   {"eps", eps},
                   {"K_list", K_list},
                   {"iters", iters},
                   {"ref_tol", ref_tol},
                   {"scheduler", scheduler == Scheduler::serial ? "serial" : "parallel"},
                   {"output_dir", output_dir}};
  if (shuffle_seed)
    j["shuffle_seed"] = *shuffle_seed;
  else
    j["shuffle_seed"] = nullptr;
  return j;
}

namespace {

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidParameter("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& ex) {
    throw InvalidParameter(path + ": " + ex.what());
  }
}

}  // namespace

Problem build_problem(const ExperimentConfig& cfg) {
  Graph graph = cfg.graph_file.empty()
                    ? build_random_connected(cfg.n, cfg.p, cfg.graph_seed, cfg.anchor)
                    : Graph::from_json(load_json_file(cfg.graph_file));

  std::vector<QuadraticCost> costs;
  if (cfg.data_format == "libsvm" || cfg.data_format == "csv") {
    Dataset ds = cfg.data_format == "libsvm"
                     ? parse_libsvm(cfg.data_file, cfg.libsvm_dim)
                     : parse_csv_dataset(cfg.data_file, cfg.label_column);
    if (cfg.normalize) ds = normalize_columns(ds);
    costs = partition_even(ds, graph.n, cfg.ridge, cfg.shuffle_seed);
  } else if (cfg.data_format == "shards") {
    costs = costs_from_shards(load_json_file(cfg.data_file), cfg.ridge);
    if (static_cast<int>(costs.size()) != graph.n)
      throw DimensionMismatch("shards hold " + std::to_string(costs.size()) +
                              " agents but the graph has " + std::to_string(graph.n));
  } else {
    throw InvalidParameter("data_format must be libsvm, csv, or shards; got '" +
                           cfg.data_format + "'");
  }

  auto reg = cfg.reg_weight > 0.0 ? make_l1_regularizer(cfg.reg_weight)
                                  : make_zero_regularizer();
  return Problem(std::move(graph), std::move(costs), std::move(reg));
}

ReferenceSolution cached_reference(const Problem& problem, const ExperimentConfig& cfg) {
  const std::string hash = problem_hash_hex(problem);
  const fs::path cache = fs::path(cfg.output_dir) / ("reference-" + hash + ".json");

  if (fs::exists(cache)) {
    try {
      const nlohmann::json j = load_json_file(cache.string());
      if (j.value("problem_hash", std::string()) == hash) {
        ReferenceSolution ref = ReferenceSolution::from_json(j.at("solution"));
        // Integrity check before trusting a cached file.
        const KktResiduals res = kkt_residuals(stack_copies(ref.x_star, problem.n()),
                                               ref.z_star, ref.y_star, problem);
        if (res.r_a <= 1e-8 && res.r_b_ok && res.r_c <= 1e-8) return ref;
      }
    } catch (const Error&) {
      // fall through to recompute
    } catch (const nlohmann::json::exception&) {
      // fall through to recompute
    }
  }

  ReferenceSolution ref = compute_reference(problem, cfg.ref_tol);
  fs::create_directories(cfg.output_dir);
  std::ofstream out(cache);
  if (!out) throw InvalidParameter("cannot write " + cache.string());
  out << nlohmann::json{{"problem_hash", hash}, {"solution", ref.to_json()}}.dump(2)
      << '\n';
  return ref;
}

namespace {

void append_row(std::string& out, const IterRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%ld,%ld,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.iter,
                r.comm_rounds_cum, r.rel_cost, r.e_norm, r.gamma_dx, r.r_a, r.r_c);
  out += buf;
}

}  // namespace

void write_trace_csv(const std::string& path, const std::vector<IterRecord>& records,
                     const IterRecord& initial_row) {
  std::string body = "iter,comm_rounds_cum,rel_cost,e_norm,gamma_dx,r_a,r_c\n";
  append_row(body, initial_row);
  for (const auto& r : records) append_row(body, r);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidParameter("cannot write " + path);
  out << body;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const auto t_begin = std::chrono::steady_clock::now();
  std::vector<std::string> written;
  try {
    fs::create_directories(cfg.output_dir);
    const Problem problem = build_problem(cfg);
    const ReferenceSolution ref = cached_reference(problem, cfg);
    const int d = problem.d();

    // Residuals of the all-zero initial point, for the leading trace row.
    IterRecord row0;
    row0.rel_cost = 1.0;
    const Eigen::VectorXd x0 =
        Eigen::VectorXd::Zero(static_cast<Eigen::Index>(problem.n()) * d);
    const KktResiduals res0 =
        kkt_residuals(x0, Eigen::VectorXd::Zero(d),
                      Eigen::VectorXd::Zero(
                          static_cast<Eigen::Index>(problem.graph.num_edges() + 1) * d),
                      problem);
    row0.r_a = res0.r_a;
    row0.r_c = res0.r_c;

    ExperimentResult result;
    nlohmann::json runs = nlohmann::json::array();
    for (int K : cfg.K_list) {
      Hyper h;
      h.mu = cfg.mu;
      h.eps = cfg.eps;
      h.K = K;
      h.max_iters = cfg.iters;
      const DistributedRun run =
          run_distributed(problem, h, cfg.iters, &ref, cfg.scheduler);

      const fs::path trace =
          fs::path(cfg.output_dir) / ("trace-K" + std::to_string(K) + ".csv");
      write_trace_csv(trace.string(), run.records, row0);
      written.push_back(trace.string());
      result.trace_files.push_back(trace.string());

      const IterRecord& last = run.records.back();
      runs.push_back({{"K", K},
                      {"trace_file", trace.string()},
                      {"iterations", cfg.iters},
                      {"comm", run.comm.to_json()},
                      {"final",
                       {{"rel_cost", last.rel_cost},
                        {"r_a", last.r_a},
                        {"r_c", last.r_c},
                        {"e_norm", last.e_norm}}}});
    }

    const auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - t_begin)
                             .count();
    result.summary = {{"config", cfg.to_json()},
                      {"graph", problem.graph.to_json()},
                      {"problem_hash", problem_hash_hex(problem)},
                      {"reference",
                       {{"obj_star", ref.obj_star},
                        {"r_a", ref.residuals.r_a},
                        {"r_b_margin", ref.residuals.r_b_margin},
                        {"r_c", ref.residuals.r_c}}},
                      {"runs", runs},
                      {"wall_ms", wall_ms}};
    const fs::path summary_path = fs::path(cfg.output_dir) / "summary.json";
    std::ofstream out(summary_path);
    if (!out) throw InvalidParameter("cannot write " + summary_path.string());
    out << result.summary.dump(2) << '\n';
    result.summary_file = summary_path.string();
    return result;
  } catch (...) {
    std::error_code ec;
    for (const auto& f : written) fs::remove(f, ec);
    throw;
  }
}

}  // namespace dnadmm
