#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "dnadmm/dataset.hpp"
#include "dnadmm/errors.hpp"
#include "dnadmm/experiment.hpp"
#include "helpers.hpp"

using namespace dnadmm;
namespace fs = std::filesystem;

namespace {

// Fresh working directory with a small synthetic CSV dataset inside.
struct ExpFixture {
  fs::path dir;
  ExperimentConfig cfg;

  explicit ExpFixture(const std::string& name) {
    dir = fs::temp_directory_path() / ("dnadmm-exp-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);

    auto rng = testutil::rng_for(401);
    Dataset ds;
    ds.features = testutil::randn(24, 3, rng);
    ds.labels = testutil::randn_vec(24, rng);
    ds.feature_names = {"a", "b", "c"};
    write_csv(ds, (dir / "data.csv").string(), "y");

    cfg.n = 4;
    cfg.p = 0.6;
    cfg.graph_seed = 7;
    cfg.data_file = (dir / "data.csv").string();
    cfg.data_format = "csv";
    cfg.label_column = "y";
    cfg.reg_weight = 0.2;
    cfg.mu = 1.0;
    cfg.eps = 1.0;
    cfg.K_list = {0, 2};
    cfg.iters = 120;
    cfg.output_dir = dir.string();
  }
  ~ExpFixture() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
};

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("experiment config JSON round-trip") {
  ExpFixture fx("config");
  fx.cfg.shuffle_seed = 12345u;
  fx.cfg.scheduler = Scheduler::parallel;
  ExperimentConfig back = ExperimentConfig::from_json(fx.cfg.to_json());
  CHECK(back.n == fx.cfg.n);
  CHECK(back.data_file == fx.cfg.data_file);
  CHECK(back.K_list == fx.cfg.K_list);
  CHECK(back.shuffle_seed == fx.cfg.shuffle_seed);
  CHECK(back.scheduler == Scheduler::parallel);
  CHECK(back.reg_weight == fx.cfg.reg_weight);

  // Absent shuffle seed stays absent through the round-trip.
  fx.cfg.shuffle_seed.reset();
  CHECK_FALSE(ExperimentConfig::from_json(fx.cfg.to_json()).shuffle_seed.has_value());
}

TEST_CASE("experiment emits schema-correct traces and a summary") {
  ExpFixture fx("run");
  ExperimentResult result = run_experiment(fx.cfg);

  REQUIRE(result.trace_files.size() == 2);
  for (std::size_t idx = 0; idx < result.trace_files.size(); ++idx) {
    auto lines = read_lines(result.trace_files[idx]);
    CHECK(lines[0] == "iter,comm_rounds_cum,rel_cost,e_norm,gamma_dx,r_a,r_c");
    // Header + initial row + one row per iteration.
    CHECK(lines.size() == 2 + static_cast<std::size_t>(fx.cfg.iters));
    // The initial row starts at iteration 0 with relative cost exactly 1.
    std::stringstream first(lines[1]);
    std::string cell;
    std::getline(first, cell, ',');
    CHECK(cell == "0");
    std::getline(first, cell, ',');
    CHECK(cell == "0");
    std::getline(first, cell, ',');
    CHECK(std::stod(cell) == 1.0);
    // Iteration column counts 1..iters; the communication column is its
    // (K+1) multiple.
    const int K = fx.cfg.K_list[idx];
    std::stringstream second(lines[2]);
    std::getline(second, cell, ',');
    CHECK(cell == "1");
    std::getline(second, cell, ',');
    CHECK(std::stoi(cell) == K + 1);
    std::stringstream last(lines.back());
    std::getline(last, cell, ',');
    CHECK(std::stol(cell) == fx.cfg.iters);
    std::getline(last, cell, ',');
    CHECK(std::stol(cell) == fx.cfg.iters * (K + 1));
  }

  // Summary carries the config echo, the problem digest, and per-K results.
  CHECK(fs::exists(result.summary_file));
  const nlohmann::json& s = result.summary;
  CHECK(s["config"]["n"] == 4);
  CHECK(s["problem_hash"].is_string());
  CHECK(s["reference"]["r_a"].get<double>() <= 1e-8);
  REQUIRE(s["runs"].size() == 2);
  CHECK(s["runs"][0]["K"] == 0);
  CHECK(s["runs"][1]["K"] == 2);
  for (const auto& r : s["runs"]) {
    CHECK(r["comm"]["message_rounds"].get<long>() ==
          fx.cfg.iters * (r["K"].get<long>() + 1));
    CHECK(r["final"]["rel_cost"].get<double>() < 1.0);
    CHECK(r["iterations"].get<long>() == fx.cfg.iters);
  }
  CHECK(s["wall_ms"].get<double>() >= 0.0);

  // Deeper truncation needs no more iterations to reach the cost target.
  // (Finals are not comparable here: after 120 iterations both runs sit at
  // the double-precision noise floor, where ordering is accidental.)
  auto first_crossing = [&](std::size_t idx) {
    auto lines = read_lines(result.trace_files[idx]);
    for (std::size_t row = 1; row < lines.size(); ++row) {
      std::stringstream ss(lines[row]);
      std::string iter_cell, comm_cell, rel_cell;
      std::getline(ss, iter_cell, ',');
      std::getline(ss, comm_cell, ',');
      std::getline(ss, rel_cell, ',');
      if (std::stod(rel_cell) <= 1e-6) return std::stol(iter_cell);
    }
    return std::numeric_limits<long>::max();
  };
  const long itersK0 = first_crossing(0);
  const long itersK2 = first_crossing(1);
  CHECK(itersK2 < std::numeric_limits<long>::max());
  CHECK(itersK2 <= itersK0);
}

TEST_CASE("reference cache is reused and survives corruption") {
  ExpFixture fx("cache");
  fx.cfg.K_list = {0};
  fx.cfg.iters = 10;

  Problem problem = build_problem(fx.cfg);
  ReferenceSolution first = cached_reference(problem, fx.cfg);
  // One cache file appeared.
  int cache_files = 0;
  fs::path cache_path;
  for (const auto& e : fs::directory_iterator(fx.dir)) {
    if (e.path().filename().string().rfind("reference-", 0) == 0) {
      ++cache_files;
      cache_path = e.path();
    }
  }
  REQUIRE(cache_files == 1);

  // Second call reuses the file bit-for-bit.
  ReferenceSolution second = cached_reference(problem, fx.cfg);
  CHECK((second.x_star - first.x_star).norm() == 0.0);
  CHECK(second.obj_star == first.obj_star);

  // A corrupted cache is detected and recomputed, not trusted.
  {
    std::ofstream out(cache_path, std::ios::trunc);
    out << "{ not json";
  }
  ReferenceSolution third = cached_reference(problem, fx.cfg);
  CHECK((third.x_star - first.x_star).norm() < 1e-9);

  // A cache holding a wrong solution fails its integrity check and is
  // recomputed too.
  {
    nlohmann::json j;
    j["problem_hash"] = problem_hash_hex(problem);
    ReferenceSolution wrong = first;
    wrong.x_star.array() += 1.0;
    wrong.z_star.array() += 1.0;
    j["solution"] = wrong.to_json();
    std::ofstream out(cache_path, std::ios::trunc);
    out << j.dump();
  }
  ReferenceSolution fourth = cached_reference(problem, fx.cfg);
  CHECK((fourth.x_star - first.x_star).norm() < 1e-9);
}

TEST_CASE("failed experiments clean up partial outputs") {
  ExpFixture fx("cleanup");
  // Second K is invalid: the run fails after the first trace is written.
  fx.cfg.K_list = {0, -3};
  fx.cfg.iters = 5;
  CHECK_THROWS_AS(run_experiment(fx.cfg), InvalidParameter);
  // The K=0 trace written before the failure is gone, and no summary exists.
  for (const auto& e : fs::directory_iterator(fx.dir)) {
    const std::string name = e.path().filename().string();
    CHECK(name.rfind("trace-", 0) != 0);
    CHECK(name != "summary.json");
  }
}

TEST_CASE("relative cost is invariant to constant cost offsets") {
  // Append a zero feature row with a nonzero label to each agent: the local
  // costs shift by a constant, gradients and Hessians do not move, and the
  // relative-cost trace must not move either.
  auto base = testutil::random_lasso(3, 2, 6, 411, 0.3);
  std::vector<QuadraticCost> shifted;
  for (const auto& c : base.costs) {
    Eigen::MatrixXd A(c.rows() + 1, c.dim());
    A << c.design(), Eigen::RowVectorXd::Zero(c.dim());
    Eigen::VectorXd b(c.rows() + 1);
    b << c.target(), 3.0;
    shifted.emplace_back(A, b, c.ridge());
  }
  Problem shifted_problem(base.graph, shifted, base.reg);

  Hyper h;
  h.K = 1;
  h.tol = std::numeric_limits<double>::infinity();
  h.max_iters = 25;
  ReferenceSolution ref_a = compute_reference(base, 1e-13);
  ReferenceSolution ref_b = compute_reference(shifted_problem, 1e-13);
  IterationTrace ta = run(base, h, &ref_a);
  IterationTrace tb = run(shifted_problem, h, &ref_b);
  REQUIRE(ta.records.size() == tb.records.size());
  for (std::size_t t = 0; t < ta.records.size(); ++t) {
    CHECK(ta.records[t].rel_cost ==
          doctest::Approx(tb.records[t].rel_cost).epsilon(1e-9));
  }
}
