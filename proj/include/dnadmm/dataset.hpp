#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dnadmm/objective.hpp"

namespace dnadmm {

// A regression table: one feature row and one label per observation.
struct Dataset {
  Eigen::MatrixXd features;  // rows × d
  Eigen::VectorXd labels;    // rows
  std::vector<std::string> feature_names;  // header order for CSV; empty otherwise
  std::string provenance;                  // source path + format

  long rows() const { return features.rows(); }
  int d() const { return static_cast<int>(features.cols()); }
};

// Sparse "label idx:val idx:val …" lines, 1-based indices, absent indices
// zero; an index outside [1, d] or a duplicate index rejects the line. Blank
// lines are skipped.
Dataset parse_libsvm(const std::string& path, int d);
Dataset parse_libsvm_text(const std::string& text, int d, const std::string& provenance);

// Header row required; the named label column is extracted and the remaining
// columns, in header order, become the features.
Dataset parse_csv_dataset(const std::string& path, const std::string& label_column);
Dataset parse_csv_text(const std::string& text, const std::string& label_column,
                       const std::string& provenance);

// Writers mirror the parsers; values print with 17 significant digits, so a
// parse → write → parse cycle reproduces every bit.
void write_libsvm(const Dataset& ds, const std::string& path);
void write_csv(const Dataset& ds, const std::string& path,
               const std::string& label_column);

// Contiguous even split: the first (rows mod n) agents receive ⌈rows/n⌉
// observations, the rest ⌊rows/n⌋; agent i's cost is the least-squares fit
// on its own rows (plus the shared ridge). A shuffle seed permutes the rows
// first (deterministically) so contiguity does not bake in file order.
std::vector<QuadraticCost> partition_even(const Dataset& ds, int n, double ridge = 0.0,
                                          std::optional<std::uint64_t> shuffle_seed = {});

// Per-column z-score over the features (population deviation); a constant
// column is centered and left unscaled. Labels are untouched.
Dataset normalize_columns(const Dataset& ds);

// Per-agent shard exchange format: an array of {agent, rows} objects where
// each row lists the d feature values followed by the label.
nlohmann::json shards_to_json(const std::vector<QuadraticCost>& costs);
std::vector<QuadraticCost> costs_from_shards(const nlohmann::json& shards, double ridge);

}  // namespace dnadmm
