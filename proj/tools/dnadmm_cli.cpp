// dnadmm — command-line front end for the decentralized consensus toolkit.
//
// Subcommands: gen-graph, ingest, solve-ref, run, certify, sweep.
// Exit codes: 0 success, 1 validation/configuration error or a failed
// certificate, 2 divergence (a non-finite iterate aborted a run).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dnadmm/certify.hpp"
#include "dnadmm/dataset.hpp"
#include "dnadmm/errors.hpp"
#include "dnadmm/experiment.hpp"

namespace {

using namespace dnadmm;
namespace fs = std::filesystem;

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidParameter("cannot open " + path);
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(path + ": " + ex.what(), 0);
  }
}

void save_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw InvalidParameter("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw InvalidParameter("write failed: " + path);
}

Problem problem_from_files(const std::string& graph_file, const std::string& shards_file,
                           double reg_weight, double ridge) {
  Graph g = Graph::from_json(load_json(graph_file));
  std::vector<QuadraticCost> costs = costs_from_shards(load_json(shards_file), ridge);
  auto reg = reg_weight > 0.0 ? make_l1_regularizer(reg_weight) : make_zero_regularizer();
  return Problem(std::move(g), std::move(costs), std::move(reg));
}

// The subcommand bodies throw library errors; this maps them onto the exit
// code contract. Bodies return their own code for non-exceptional failures
// (a certificate that evaluated cleanly but did not pass).
int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const NonFinite& ex) {
    std::fprintf(stderr, "divergence: %s\n", ex.what());
    return 2;
  } catch (const Error& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
}

// Instance-defining flags shared by solve-ref and certify (graph and shard
// files plus the objective knobs).
struct InstanceFlags {
  std::string graph_file;
  std::string shards_file;
  double reg_weight = 0.0;
  double ridge = 0.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--graph", graph_file, "graph JSON file")->required();
    cmd->add_option("--shards", shards_file, "per-agent shard JSON file")->required();
    cmd->add_option("--reg-weight", reg_weight,
                    "l1 weight of the nonsmooth term (0 disables it)");
    cmd->add_option("--ridge", ridge, "ridge added to every local cost");
  }
};

// Experiment flags mirror ExperimentConfig. Each option remembers whether it
// was supplied so a --config file can be overridden field by field.
struct ExperimentFlags {
  ExperimentConfig opt;
  std::string scheduler_name;
  std::uint64_t shuffle_seed = 0;
  std::vector<std::pair<CLI::Option*, std::function<void(ExperimentConfig&)>>> applied;

  void remember(CLI::Option* o, std::function<void(ExperimentConfig&)> apply) {
    applied.emplace_back(o, std::move(apply));
  }

  void attach(CLI::App* cmd) {
    remember(cmd->add_option("--graph", opt.graph_file,
                             "graph JSON file (generated from --n/--p otherwise)"),
             [this](ExperimentConfig& c) { c.graph_file = opt.graph_file; });
    remember(cmd->add_option("--n", opt.n, "agent count for a generated graph"),
             [this](ExperimentConfig& c) { c.n = opt.n; });
    remember(cmd->add_option("--p", opt.p, "edge probability for a generated graph"),
             [this](ExperimentConfig& c) { c.p = opt.p; });
    remember(cmd->add_option("--graph-seed", opt.graph_seed, "graph generation seed"),
             [this](ExperimentConfig& c) { c.graph_seed = opt.graph_seed; });
    remember(cmd->add_option("--anchor", opt.anchor, "anchor agent id"),
             [this](ExperimentConfig& c) { c.anchor = opt.anchor; });
    remember(cmd->add_option("--data", opt.data_file, "dataset or shard file"),
             [this](ExperimentConfig& c) { c.data_file = opt.data_file; });
    remember(cmd->add_option("--format", opt.data_format,
                             "data format: libsvm | csv | shards"),
             [this](ExperimentConfig& c) { c.data_format = opt.data_format; });
    remember(cmd->add_option("--dim", opt.libsvm_dim, "feature count (libsvm)"),
             [this](ExperimentConfig& c) { c.libsvm_dim = opt.libsvm_dim; });
    remember(cmd->add_option("--label-column", opt.label_column, "label column (csv)"),
             [this](ExperimentConfig& c) { c.label_column = opt.label_column; });
    remember(cmd->add_flag("--normalize", opt.normalize,
                           "z-score feature columns before partitioning"),
             [this](ExperimentConfig& c) { c.normalize = opt.normalize; });
    remember(cmd->add_option("--shuffle-seed", shuffle_seed,
                             "shuffle rows with this seed before partitioning"),
             [this](ExperimentConfig& c) { c.shuffle_seed = shuffle_seed; });
    remember(cmd->add_option("--ridge", opt.ridge, "ridge added to every local cost"),
             [this](ExperimentConfig& c) { c.ridge = opt.ridge; });
    remember(cmd->add_option("--reg-weight", opt.reg_weight,
                             "l1 weight of the nonsmooth term (0 disables it)"),
             [this](ExperimentConfig& c) { c.reg_weight = opt.reg_weight; });
    remember(cmd->add_option("--mu", opt.mu, "penalty parameter"),
             [this](ExperimentConfig& c) { c.mu = opt.mu; });
    remember(cmd->add_option("--eps", opt.eps, "proximal damping"),
             [this](ExperimentConfig& c) { c.eps = opt.eps; });
    remember(cmd->add_option("--K", opt.K_list,
                             "truncation orders to run (repeatable)"),
             [this](ExperimentConfig& c) { c.K_list = opt.K_list; });
    remember(cmd->add_option("--iters", opt.iters, "outer iterations per run"),
             [this](ExperimentConfig& c) { c.iters = opt.iters; });
    remember(cmd->add_option("--ref-tol", opt.ref_tol,
                             "fixed-point tolerance of the reference solve"),
             [this](ExperimentConfig& c) { c.ref_tol = opt.ref_tol; });
    remember(cmd->add_option("--scheduler", scheduler_name,
                             "agent scheduler: serial | parallel")
                 ->check(CLI::IsMember({"serial", "parallel"})),
             [this](ExperimentConfig& c) {
               c.scheduler = scheduler_name == "parallel" ? Scheduler::parallel
                                                          : Scheduler::serial;
             });
    remember(cmd->add_option("--out", opt.output_dir, "output directory"),
             [this](ExperimentConfig& c) { c.output_dir = opt.output_dir; });
  }

  // Base config (from --config when given), overridden by supplied flags.
  ExperimentConfig resolve(const std::string& config_file) const {
    ExperimentConfig cfg =
        config_file.empty() ? ExperimentConfig{} : ExperimentConfig::from_json(load_json(config_file));
    for (const auto& [option, apply] : applied)
      if (option->count() > 0) apply(cfg);
    return cfg;
  }
};

void print_run_summary(const ExperimentResult& result) {
  std::printf("summary: %s\n", result.summary_file.c_str());
  for (const auto& r : result.summary.at("runs")) {
    std::printf("  K=%-3ld iterations=%-6ld final rel_cost=%.3e  trace=%s\n",
                r.at("K").get<long>(), r.at("iterations").get<long>(),
                r.at("final").at("rel_cost").get<double>(),
                r.at("trace_file").get<std::string>().c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decentralized consensus optimization with truncated-series Newton steps"};
  app.require_subcommand(1);
  int rc = 0;

  // ----------------------------------------------------------------- gen-graph
  auto* gen = app.add_subcommand("gen-graph", "sample a connected agent graph");
  struct {
    int n = 0;
    double p = 0.2;
    std::uint64_t seed = 1;
    int anchor = 0;
    std::string out;
  } gg;
  gen->add_option("--n", gg.n, "agent count")->required();
  gen->add_option("--p", gg.p, "edge probability");
  gen->add_option("--seed", gg.seed, "sampling seed");
  gen->add_option("--anchor", gg.anchor, "anchor agent id");
  gen->add_option("--out", gg.out, "output graph JSON")->required();
  gen->callback([&] {
    rc = guarded([&] {
      Graph g = build_random_connected(gg.n, gg.p, gg.seed, gg.anchor);
      save_json(gg.out, g.to_json());
      std::printf("wrote %s: n=%d edges=%d anchor=%d\n", gg.out.c_str(), g.n,
                  g.num_edges(), g.anchor);
      return 0;
    });
  });

  // -------------------------------------------------------------------- ingest
  auto* ingest = app.add_subcommand("ingest", "parse a dataset and shard it evenly");
  struct {
    std::string data, format, label_column, out;
    int dim = 0, n = 0;
    bool normalize = false;
    double ridge = 0.0;
    std::optional<std::uint64_t> shuffle_seed;
    std::uint64_t shuffle_raw = 0;
  } ig;
  ingest->add_option("--data", ig.data, "input dataset file")->required();
  ingest->add_option("--format", ig.format, "libsvm | csv")
      ->required()
      ->check(CLI::IsMember({"libsvm", "csv"}));
  ingest->add_option("--dim", ig.dim, "feature count (libsvm)");
  ingest->add_option("--label-column", ig.label_column, "label column name (csv)");
  ingest->add_option("--n", ig.n, "agent count")->required();
  ingest->add_flag("--normalize", ig.normalize, "z-score feature columns");
  auto* shuffle_opt =
      ingest->add_option("--shuffle-seed", ig.shuffle_raw, "row shuffle seed");
  ingest->add_option("--ridge", ig.ridge, "ridge added to every local cost");
  ingest->add_option("--out", ig.out, "output shard JSON")->required();
  ingest->callback([&] {
    rc = guarded([&] {
      Dataset ds;
      if (ig.format == "libsvm") {
        if (ig.dim <= 0) throw InvalidParameter("libsvm ingestion needs --dim");
        ds = parse_libsvm(ig.data, ig.dim);
      } else {
        if (ig.label_column.empty())
          throw InvalidParameter("csv ingestion needs --label-column");
        ds = parse_csv_dataset(ig.data, ig.label_column);
      }
      if (ig.normalize) ds = normalize_columns(ds);
      if (shuffle_opt->count() > 0) ig.shuffle_seed = ig.shuffle_raw;
      std::vector<QuadraticCost> costs =
          partition_even(ds, ig.n, ig.ridge, ig.shuffle_seed);
      save_json(ig.out, shards_to_json(costs));
      std::printf("wrote %s: %ld rows, %d features, %d agents\n", ig.out.c_str(),
                  ds.rows(), ds.d(), ig.n);
      return 0;
    });
  });

  // ----------------------------------------------------------------- solve-ref
  auto* solve = app.add_subcommand("solve-ref", "centralized reference solution");
  InstanceFlags sf;
  struct {
    double tol = 1e-12;
    std::string out;
  } sr;
  sf.attach(solve);
  solve->add_option("--tol", sr.tol, "fixed-point residual tolerance");
  solve->add_option("--out", sr.out, "output reference JSON")->required();
  solve->callback([&] {
    rc = guarded([&] {
      Problem problem =
          problem_from_files(sf.graph_file, sf.shards_file, sf.reg_weight, sf.ridge);
      ReferenceSolution ref = compute_reference(problem, sr.tol);
      save_json(sr.out, nlohmann::json{{"problem_hash", problem_hash_hex(problem)},
                                       {"solution", ref.to_json()}});
      std::printf("wrote %s: objective %.12g, r_a %.3e, r_c %.3e\n", sr.out.c_str(),
                  ref.obj_star, ref.residuals.r_a, ref.residuals.r_c);
      return 0;
    });
  });

  // ----------------------------------------------------------------------- run
  auto* runs = app.add_subcommand("run", "run the solver and emit traces");
  ExperimentFlags rf;
  std::string run_config;
  runs->add_option("--config", run_config, "experiment config JSON (flags override)");
  rf.attach(runs);
  runs->callback([&] {
    rc = guarded([&] {
      ExperimentResult result = run_experiment(rf.resolve(run_config));
      print_run_summary(result);
      return 0;
    });
  });

  // ------------------------------------------------------------------- certify
  auto* cert = app.add_subcommand(
      "certify", "run the per-iteration certificate checks on an instance");
  InstanceFlags cf;
  struct {
    double mu = 1.0;
    double eps = 0.0;
    int K = 2;
    long iters = 200;
    double ref_tol = 1e-13;
    bool grid = false;
    bool inject_fault = false;
    std::string out;
  } ct;
  cf.attach(cert);
  cert->add_option("--mu", ct.mu, "penalty parameter");
  auto* eps_opt = cert->add_option(
      "--eps", ct.eps, "proximal damping (default: the certified floor plus one)");
  cert->add_option("--K", ct.K, "truncation order");
  cert->add_option("--iters", ct.iters, "iterations to certify");
  cert->add_option("--ref-tol", ct.ref_tol, "reference solve tolerance");
  cert->add_flag("--grid", ct.grid,
                 "pick the rate constants by grid search instead of the defaults");
  cert->add_flag("--inject-fault", ct.inject_fault,
                 "flip the neighbor-coupling sign to demonstrate the checks "
                 "catching a wrong implementation");
  cert->add_option("--out", ct.out, "output certificate JSON");
  cert->callback([&] {
    rc = guarded([&] {
      Problem problem =
          problem_from_files(cf.graph_file, cf.shards_file, cf.reg_weight, cf.ridge);
      const SmoothBounds sb = smooth_bounds(problem.costs);
      const double lmin = lambda_min_anchor(problem.graph);
      const double eps = eps_opt->count() > 0
                             ? ct.eps
                             : eps_theory_bound(sb.m_f, sb.M_f, problem.n(), ct.mu) + 1.0;
      Hyper h;
      h.mu = ct.mu;
      h.eps = eps;
      h.K = ct.K;
      const TheoryParams tp =
          ct.grid ? theory_params_maximized(sb.m_f, sb.M_f, problem.n(), ct.mu, eps,
                                            ct.K, lmin)
                  : theory_params(sb.m_f, sb.M_f, problem.n(), ct.mu, eps, ct.K, lmin);
      const ReferenceSolution ref = compute_reference(problem, ct.ref_tol);
      const CertificateReport report =
          certify(problem, h, tp, ct.iters, ref,
                  ct.inject_fault ? Fault::flip_coupling_sign : Fault::none);

      std::printf("instance: n=%d d=%d mu=%g eps=%.17g K=%d (m_f=%g, M_f=%g)\n",
                  problem.n(), problem.d(), ct.mu, eps, ct.K, sb.m_f, sb.M_f);
      std::printf("constants: gamma=%.12g delta=%.6e eps floor=%.12g\n%s", tp.gamma,
                  tp.delta, tp.eps_theory, report.table().c_str());
      if (!ct.out.empty()) {
        save_json(ct.out,
                  nlohmann::json{{"instance",
                                  {{"n", problem.n()},
                                   {"d", problem.d()},
                                   {"mu", ct.mu},
                                   {"eps", eps},
                                   {"K", ct.K},
                                   {"iters", ct.iters},
                                   {"fault_injected", ct.inject_fault},
                                   {"problem_hash", problem_hash_hex(problem)}}},
                                 {"constants",
                                  {{"gamma", tp.gamma},
                                   {"delta", tp.delta},
                                   {"beta", tp.beta},
                                   {"eta", tp.eta},
                                   {"zeta", tp.zeta},
                                   {"lambda_min", tp.lambda_min},
                                   {"eps_theory", tp.eps_theory}}},
                                 {"report", report.to_json()}});
        std::printf("wrote %s\n", ct.out.c_str());
      }
      return report.pass ? 0 : 1;
    });
  });

  // --------------------------------------------------------------------- sweep
  auto* sweep = app.add_subcommand(
      "sweep", "run the experiment grid over penalty and damping values");
  ExperimentFlags wf;
  std::string sweep_config;
  std::vector<double> mu_list, eps_list;
  sweep->add_option("--config", sweep_config, "experiment config JSON (flags override)");
  sweep->add_option("--mu-list", mu_list, "penalty values (repeatable)");
  sweep->add_option("--eps-list", eps_list, "damping values (repeatable)");
  wf.attach(sweep);
  sweep->callback([&] {
    rc = guarded([&] {
      const ExperimentConfig base = wf.resolve(sweep_config);
      if (mu_list.empty()) mu_list = {base.mu};
      if (eps_list.empty()) eps_list = {base.eps};
      const fs::path root(base.output_dir);
      fs::create_directories(root);

      nlohmann::json combos = nlohmann::json::array();
      for (double mu : mu_list) {
        for (double eps : eps_list) {
          ExperimentConfig cfg = base;
          cfg.mu = mu;
          cfg.eps = eps;
          char name[64];
          std::snprintf(name, sizeof name, "mu%g-eps%g", mu, eps);
          cfg.output_dir = (root / name).string();
          fs::create_directories(cfg.output_dir);
          ExperimentResult result = run_experiment(cfg);
          std::printf("-- mu=%g eps=%g\n", mu, eps);
          print_run_summary(result);
          combos.push_back({{"mu", mu},
                            {"eps", eps},
                            {"dir", cfg.output_dir},
                            {"summary_file", result.summary_file},
                            {"runs", result.summary.at("runs")}});
        }
      }
      const std::string sweep_file = (root / "sweep.json").string();
      save_json(sweep_file, nlohmann::json{{"base_config", base.to_json()},
                                           {"combos", combos}});
      std::printf("wrote %s (%zu combinations)\n", sweep_file.c_str(), combos.size());
      return 0;
    });
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and friends exit 0; every actual parse failure is a validation
    // error under the exit-code contract.
    return app.exit(e) == 0 ? 0 : 1;
  }
  return rc;
}
