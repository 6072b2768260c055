#include "dolce/csv_io.hpp"

#include "dolce/error.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace dolce {
namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t start = 0;
    while (start < cell.size() && cell[start] == ' ') ++start;
    cells.push_back(cell.substr(start));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (cell.empty() || ec != std::errc() || ptr != end)
    throw ParseError(row, "non-numeric cell '" + cell + "' in column '" + column + "'");
  return value;
}

// Column layout resolved from the header.
struct Layout {
  int d = 0;
  std::vector<std::string> lag_labels;
  std::vector<int> x_cols;
  std::vector<std::vector<int>> lag_cols;
  int action_col = -1;
  int reward_col = -1;
  int propensity_col = -1;
};

Layout parse_header(const std::vector<std::string>& header) {
  Layout layout;
  std::map<int, int> x_by_index;
  std::vector<std::string> lag_order;
  std::map<std::string, std::map<int, int>> lag_by_label;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    const std::string& name = header[c];
    if (name == "action") {
      layout.action_col = c;
    } else if (name == "reward") {
      layout.reward_col = c;
    } else if (name == "propensity") {
      layout.propensity_col = c;
    } else if (name.rfind("x_", 0) == 0) {
      x_by_index[std::stoi(name.substr(2))] = c;
    } else if (name.rfind("lag", 0) == 0 && name.find('_') != std::string::npos) {
      const auto us = name.rfind('_');
      const std::string label = name.substr(3, us - 3);
      if (!lag_by_label.count(label)) lag_order.push_back(label);
      lag_by_label[label][std::stoi(name.substr(us + 1))] = c;
    } else {
      throw ParseError(1, "unknown column '" + name + "'");
    }
  }
  if (layout.action_col < 0) throw ParseError(1, "missing required column 'action'");
  if (layout.reward_col < 0) throw ParseError(1, "missing required column 'reward'");
  layout.d = static_cast<int>(x_by_index.size());
  for (int j = 0; j < layout.d; ++j) {
    if (!x_by_index.count(j)) throw ParseError(1, "missing column 'x_" + std::to_string(j) + "'");
    layout.x_cols.push_back(x_by_index[j]);
  }
  for (const auto& label : lag_order) {
    const auto& cols = lag_by_label[label];
    if (static_cast<int>(cols.size()) != layout.d)
      throw ParseError(1, "lag '" + label + "' has " + std::to_string(cols.size()) + " columns, expected d=" +
                              std::to_string(layout.d));
    std::vector<int> ordered;
    for (int j = 0; j < layout.d; ++j) {
      if (!cols.count(j)) throw ParseError(1, "missing column 'lag" + label + "_" + std::to_string(j) + "'");
      ordered.push_back(cols.at(j));
    }
    layout.lag_labels.push_back(label);
    layout.lag_cols.push_back(std::move(ordered));
  }
  return layout;
}

}  // namespace

LaggedDataset parse_csv(std::istream& in, std::optional<int> num_actions) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty file (header row required)");
  const std::vector<std::string> header = split_row(line);
  const Layout layout = parse_header(header);

  std::vector<LaggedSample> samples;
  int max_action = -1;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_row(line);
    if (cells.size() != header.size())
      throw ParseError(row, "expected " + std::to_string(header.size()) + " cells, found " +
                                std::to_string(cells.size()));
    LaggedSample s;
    s.x.resize(layout.d);
    for (int j = 0; j < layout.d; ++j) s.x[j] = parse_number(cells[layout.x_cols[j]], row, header[layout.x_cols[j]]);
    for (const auto& cols : layout.lag_cols) {
      VectorXd lag(layout.d);
      for (int j = 0; j < layout.d; ++j) lag[j] = parse_number(cells[cols[j]], row, header[cols[j]]);
      s.x_lags.push_back(std::move(lag));
    }
    const double a = parse_number(cells[layout.action_col], row, "action");
    if (a < 0 || a != static_cast<double>(static_cast<long>(a)))
      throw ParseError(row, "action must be a nonnegative integer");
    s.a = static_cast<int>(a);
    max_action = std::max(max_action, s.a);
    s.r = parse_number(cells[layout.reward_col], row, "reward");
    if (layout.propensity_col >= 0) {
      const double p = parse_number(cells[layout.propensity_col], row, "propensity");
      if (!(p > 0.0 && p <= 1.0)) throw ParseError(row, "propensity outside (0, 1]");
      s.logged_propensity = p;
    }
    if (num_actions && s.a >= *num_actions) throw ParseError(row, "action exceeds num_actions");
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw ParseError(row, "no data rows");
  return LaggedDataset(std::move(samples), layout.d, num_actions.value_or(max_action + 1), layout.lag_labels);
}

LaggedDataset load_csv(const std::string& path, std::optional<int> num_actions) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  return parse_csv(in, num_actions);
}

void write_csv(const LaggedDataset& data, std::ostream& out) {
  const int d = data.dim();
  const bool with_prop = data.has_logged_propensities();
  bool first = true;
  auto sep = [&]() -> std::ostream& {
    if (!first) out << ',';
    first = false;
    return out;
  };
  for (int j = 0; j < d; ++j) sep() << "x_" << j;
  for (const auto& label : data.lag_labels())
    for (int j = 0; j < d; ++j) sep() << "lag" << label << '_' << j;
  sep() << "action";
  sep() << "reward";
  if (with_prop) sep() << "propensity";
  out << '\n';
  out << std::setprecision(17);
  for (const auto& s : data.samples()) {
    first = true;
    for (int j = 0; j < d; ++j) sep() << s.x[j];
    for (const auto& lag : s.x_lags)
      for (int j = 0; j < d; ++j) sep() << lag[j];
    sep() << s.a;
    sep() << s.r;
    if (with_prop) sep() << *s.logged_propensity;
    out << '\n';
  }
}

void save_csv(const LaggedDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  write_csv(data, out);
}

}  // namespace dolce
