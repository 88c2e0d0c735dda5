#include "dnadmm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "dnadmm/errors.hpp"

namespace dnadmm {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidParameter("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool is_blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

// Full-consumption double parse; rejects trailing garbage and non-finite
// values (the formats carry decimal text only).
double parse_number(const std::string& token, long line_no) {
  const char* begin = token.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || errno == ERANGE || !std::isfinite(v))
    throw MalformedLine("not a finite number: '" + token + "'", line_no);
  return v;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Dataset parse_libsvm_text(const std::string& text, int d, const std::string& provenance) {
  if (d < 1) throw InvalidParameter("feature count must be positive");
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> labels;

  std::istringstream lines(text);
  std::string line;
  long line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    const double label = parse_number(token, line_no);

    Eigen::VectorXd row = Eigen::VectorXd::Zero(d);
    std::vector<bool> seen(d, false);
    while (fields >> token) {
      const auto colon = token.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == token.size())
        throw MalformedLine("expected index:value, got '" + token + "'", line_no);
      const std::string idx_text = token.substr(0, colon);
      char* end = nullptr;
      const long idx = std::strtol(idx_text.c_str(), &end, 10);
      if (end == idx_text.c_str() || *end != '\0')
        throw MalformedLine("feature index is not an integer: '" + idx_text + "'",
                            line_no);
      if (idx < 1 || idx > d)
        throw IndexOutOfRange("feature index " + std::to_string(idx) +
                                  " outside [1, " + std::to_string(d) + "]",
                              line_no, idx);
      if (seen[idx - 1])
        throw MalformedLine("duplicate feature index " + std::to_string(idx), line_no);
      seen[idx - 1] = true;
      row(idx - 1) = parse_number(token.substr(colon + 1), line_no);
    }
    rows.push_back(std::move(row));
    labels.push_back(label);
  }

  Dataset ds;
  ds.features.resize(static_cast<Eigen::Index>(rows.size()), d);
  ds.labels.resize(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    ds.features.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    ds.labels(static_cast<Eigen::Index>(r)) = labels[r];
  }
  ds.provenance = provenance;
  return ds;
}

Dataset parse_libsvm(const std::string& path, int d) {
  return parse_libsvm_text(read_file(path), d, path + " (libsvm)");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t start = cell.find_first_not_of(' ');
    cells.push_back(start == std::string::npos ? "" : cell.substr(start));
  }
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

}  // namespace

Dataset parse_csv_text(const std::string& text, const std::string& label_column,
                       const std::string& provenance) {
  std::istringstream lines(text);
  std::string line;
  long line_no = 0;

  // Header row first.
  std::vector<std::string> header;
  while (std::getline(lines, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    header = split_csv_line(line);
    break;
  }
  if (header.empty()) throw MalformedRow("no header row", line_no);
  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) throw MissingColumn(label_column);
  const std::size_t label_idx = static_cast<std::size_t>(label_it - header.begin());
  const int d = static_cast<int>(header.size()) - 1;
  if (d < 1) throw MalformedRow("no feature columns besides the label", line_no);

  Dataset ds;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != label_idx) ds.feature_names.push_back(header[c]);

  std::vector<Eigen::VectorXd> rows;
  std::vector<double> labels;
  while (std::getline(lines, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw MalformedRow("expected " + std::to_string(header.size()) + " cells, got " +
                             std::to_string(cells.size()),
                         line_no);
    Eigen::VectorXd row(d);
    int f = 0;
    double label = 0.0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v;
      try {
        v = parse_number(cells[c], line_no);
      } catch (const MalformedLine& ex) {
        throw MalformedRow(ex.what(), line_no);
      }
      if (c == label_idx)
        label = v;
      else
        row(f++) = v;
    }
    rows.push_back(std::move(row));
    labels.push_back(label);
  }

  ds.features.resize(static_cast<Eigen::Index>(rows.size()), d);
  ds.labels.resize(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    ds.features.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    ds.labels(static_cast<Eigen::Index>(r)) = labels[r];
  }
  ds.provenance = provenance;
  return ds;
}

Dataset parse_csv_dataset(const std::string& path, const std::string& label_column) {
  return parse_csv_text(read_file(path), label_column, path + " (csv)");
}

void write_libsvm(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidParameter("cannot write " + path);
  for (Eigen::Index r = 0; r < ds.rows(); ++r) {
    out << format_number(ds.labels(r));
    for (Eigen::Index c = 0; c < ds.d(); ++c)
      if (ds.features(r, c) != 0.0)
        out << ' ' << (c + 1) << ':' << format_number(ds.features(r, c));
    out << '\n';
  }
}

void write_csv(const Dataset& ds, const std::string& path,
               const std::string& label_column) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidParameter("cannot write " + path);
  for (int c = 0; c < ds.d(); ++c) {
    const std::string name = static_cast<std::size_t>(c) < ds.feature_names.size()
                                 ? ds.feature_names[c]
                                 : "f" + std::to_string(c + 1);
    out << name << ',';
  }
  out << label_column << '\n';
  for (Eigen::Index r = 0; r < ds.rows(); ++r) {
    for (Eigen::Index c = 0; c < ds.d(); ++c) out << format_number(ds.features(r, c)) << ',';
    out << format_number(ds.labels(r)) << '\n';
  }
}

std::vector<QuadraticCost> partition_even(const Dataset& ds, int n, double ridge,
                                          std::optional<std::uint64_t> shuffle_seed) {
  if (n < 1) throw InvalidParameter("agent count must be positive");
  if (n > ds.rows())
    throw InvalidParameter("cannot split " + std::to_string(ds.rows()) + " rows over " +
                           std::to_string(n) + " agents");

  std::vector<Eigen::Index> order(ds.rows());
  std::iota(order.begin(), order.end(), 0);
  if (shuffle_seed) {
    std::mt19937_64 rng(*shuffle_seed);
    for (Eigen::Index i = ds.rows() - 1; i > 0; --i) {
      const Eigen::Index j = static_cast<Eigen::Index>(rng() % (i + 1));
      std::swap(order[i], order[j]);
    }
  }

  const long base = ds.rows() / n;
  const long extra = ds.rows() % n;
  std::vector<QuadraticCost> costs;
  costs.reserve(n);
  Eigen::Index cursor = 0;
  for (int i = 0; i < n; ++i) {
    const long count = base + (i < extra ? 1 : 0);
    Eigen::MatrixXd A(count, ds.d());
    Eigen::VectorXd b(count);
    for (long r = 0; r < count; ++r) {
      A.row(r) = ds.features.row(order[cursor]);
      b(r) = ds.labels(order[cursor]);
      ++cursor;
    }
    costs.emplace_back(std::move(A), std::move(b), ridge);
  }
  return costs;
}

Dataset normalize_columns(const Dataset& ds) {
  Dataset out = ds;
  for (Eigen::Index c = 0; c < ds.d(); ++c) {
    const double mean = ds.features.col(c).mean();
    out.features.col(c).array() -= mean;
    const double sd = std::sqrt(out.features.col(c).squaredNorm() / ds.rows());
    if (sd > 0.0) out.features.col(c) /= sd;
  }
  return out;
}

nlohmann::json shards_to_json(const std::vector<QuadraticCost>& costs) {
  nlohmann::json shards = nlohmann::json::array();
  for (std::size_t i = 0; i < costs.size(); ++i) {
    nlohmann::json rows = nlohmann::json::array();
    const auto& A = costs[i].design();
    const auto& b = costs[i].target();
    for (Eigen::Index r = 0; r < A.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < A.cols(); ++c) row.push_back(A(r, c));
      row.push_back(b(r));
      rows.push_back(std::move(row));
    }
    shards.push_back({{"agent", i}, {"rows", std::move(rows)}});
  }
  return shards;
}

std::vector<QuadraticCost> costs_from_shards(const nlohmann::json& shards, double ridge) {
  if (!shards.is_array() || shards.empty())
    throw InvalidParameter("shards: expected a non-empty array");
  std::vector<QuadraticCost> costs;
  costs.reserve(shards.size());
  for (std::size_t i = 0; i < shards.size(); ++i) {
    const auto& s = shards.at(i);
    if (s.at("agent").get<std::size_t>() != i)
      throw InvalidParameter("shards: agent ids must be 0..n-1 in order");
    const auto& rows = s.at("rows");
    if (!rows.is_array() || rows.empty())
      throw InvalidParameter("shards: agent " + std::to_string(i) + " has no rows");
    const std::size_t width = rows.at(0).size();
    if (width < 2)
      throw InvalidParameter("shards: rows need at least one feature and a label");
    Eigen::MatrixXd A(rows.size(), width - 1);
    Eigen::VectorXd b(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& row = rows.at(r);
      if (row.size() != width)
        throw InvalidParameter("shards: ragged rows at agent " + std::to_string(i));
      for (std::size_t c = 0; c + 1 < width; ++c)
        A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            row.at(c).get<double>();
      b(static_cast<Eigen::Index>(r)) = row.at(width - 1).get<double>();
    }
    costs.emplace_back(std::move(A), std::move(b), ridge);
  }
  return costs;
}

}  // namespace dnadmm
