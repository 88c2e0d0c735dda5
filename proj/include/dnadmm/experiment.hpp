#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dnadmm/problem.hpp"
#include "dnadmm/reference.hpp"
#include "dnadmm/simulator.hpp"

namespace dnadmm {

// Everything one experiment needs, mirroring the CLI flags. A run emits the
// fully-resolved form of this next to its traces so results are reproducible.
struct ExperimentConfig {
  // Graph: loaded from file when set, generated otherwise.
  std::string graph_file;
  int n = 0;
  double p = 0.2;
  std::uint64_t graph_seed = 1;
  int anchor = 0;

  // Data: a raw dataset with its format, or pre-partitioned shards.
  std::string data_file;
  std::string data_format;  // "libsvm" | "csv" | "shards"
  int libsvm_dim = 0;
  std::string label_column;
  bool normalize = false;
  std::optional<std::uint64_t> shuffle_seed;
  double ridge = 0.0;

  // Objective and algorithm.
  double reg_weight = 0.0;  // 0 disables the nonsmooth part
  double mu = 1.0;
  double eps = 1.0;
  std::vector<int> K_list{0};
  long iters = 500;
  double ref_tol = 1e-12;

  Scheduler scheduler = Scheduler::serial;
  std::string output_dir = ".";

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct ExperimentResult {
  std::string summary_file;
  std::vector<std::string> trace_files;
  nlohmann::json summary;
};

// Assemble the problem instance a config describes (shared by every
// subcommand that needs one).
Problem build_problem(const ExperimentConfig& cfg);

// Reference solution with a hash-keyed cache file in output_dir: a cached
// solution is integrity-checked against the problem before reuse and
// recomputed when stale.
ReferenceSolution cached_reference(const Problem& problem, const ExperimentConfig& cfg);

// Trace CSV contract: header
//   iter,comm_rounds_cum,rel_cost,e_norm,gamma_dx,r_a,r_c
// one row per outer iteration plus a leading row for the initial point.
void write_trace_csv(const std::string& path, const std::vector<IterRecord>& records,
                     const IterRecord& initial_row);

// One simulator run per K in the list; emits trace CSVs and a summary JSON.
// Partial outputs are removed when any part fails.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace dnadmm
