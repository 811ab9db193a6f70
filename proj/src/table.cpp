#include "naslab/table.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "naslab/errors.hpp"

namespace naslab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cell);
      cell.clear();
    } else {
      cell += c;
    }
  }
  out.push_back(cell);
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_cell(const std::string& cell, double& out) {
  if (cell.empty() || cell == "nan" || cell == "NaN" || cell == "NA") {
    out = kNaN;
    return true;
  }
  if (cell == "inf" || cell == "+inf") {
    out = std::numeric_limits<double>::infinity();
    return true;
  }
  if (cell == "-inf") {
    out = -std::numeric_limits<double>::infinity();
    return true;
  }
  const char* first = cell.data();
  const char* last = first + cell.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

const std::vector<double>& ProxyTable::column(const std::string& name) const {
  const auto it = data.find(name);
  if (it == data.end()) throw DataError("table has no column '" + name + "'");
  return it->second;
}

void ProxyTable::set_column(const std::string& name, std::vector<double> values) {
  if (values.size() != ids.size()) throw DataError("column '" + name + "' length does not match the table");
  if (name == "id" || name == "val_acc") throw DataError("column name '" + name + "' is reserved");
  if (!has(name)) columns.push_back(name);
  data[name] = std::move(values);
}

void ProxyTable::remove_column(const std::string& name) {
  data.erase(name);
  std::erase(columns, name);
}

stats::ScoreVector ProxyTable::score(const std::string& name) const { return {ids, column(name), {}}; }

stats::ScoreVector ProxyTable::accuracy() const { return {ids, val_acc, {}}; }

void ProxyTable::validate() const {
  if (val_acc.size() != ids.size()) throw DataError("val_acc length does not match ids");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!seen.insert(ids[i]).second) throw DataError("duplicate id '" + ids[i] + "' at row " + std::to_string(i + 1));
    if (!std::isfinite(val_acc[i])) throw DataError("row " + std::to_string(i + 1) + ": val_acc must be finite");
  }
  if (columns.size() != data.size()) throw DataError("column list does not match column data");
  for (const auto& c : columns) {
    if (column(c).size() != ids.size()) throw DataError("column '" + c + "' length does not match ids");
  }
}

TableFormat table_format_for(const std::string& path) {
  return path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0 ? TableFormat::Json : TableFormat::Csv;
}

ProxyTable parse_csv_table(const std::string& text, const std::string& benchmark) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_csv_line(line);
      break;
    }
  }
  if (header.empty()) throw DataError("table has no header row");
  for (auto& h : header) h = trim(h);
  int id_col = -1, y_col = -1;
  std::set<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c].empty()) throw DataError("header column " + std::to_string(c + 1) + " has no name");
    if (!names.insert(header[c]).second) throw DataError("duplicate header column '" + header[c] + "'");
    if (header[c] == "id") id_col = static_cast<int>(c);
    if (header[c] == "val_acc") y_col = static_cast<int>(c);
  }
  if (id_col < 0) throw DataError("table header lacks required column 'id'");
  if (y_col < 0) throw DataError("table header lacks required column 'val_acc'");

  ProxyTable t;
  t.benchmark = benchmark;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (static_cast<int>(c) != id_col && static_cast<int>(c) != y_col) {
      t.columns.push_back(header[c]);
      t.data[header[c]];
    }
  }
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++row;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError("row " + std::to_string(row) + " (line " + std::to_string(line_no) + "): expected " +
                      std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string cell = trim(cells[c]);
      if (static_cast<int>(c) == id_col) {
        if (cell.empty()) throw DataError("row " + std::to_string(row) + ": empty id");
        t.ids.push_back(cell);
        continue;
      }
      double v;
      if (!parse_cell(cell, v)) {
        throw DataError("row " + std::to_string(row) + ", column '" + header[c] + "': non-numeric cell '" + cell + "'");
      }
      if (static_cast<int>(c) == y_col) {
        if (!std::isfinite(v)) throw DataError("row " + std::to_string(row) + ": val_acc must be finite");
        t.val_acc.push_back(v);
      } else {
        t.data[header[c]].push_back(v);
      }
    }
  }
  t.validate();
  return t;
}

std::string to_csv(const ProxyTable& t) {
  std::string out = "id,val_acc";
  for (const auto& c : t.columns) out += "," + quote_if_needed(c);
  out += "\n";
  for (std::size_t i = 0; i < t.size(); ++i) {
    out += quote_if_needed(t.ids[i]) + "," + format_number(t.val_acc[i]);
    for (const auto& c : t.columns) out += "," + format_number(t.data.at(c)[i]);
    out += "\n";
  }
  return out;
}

ProxyTable table_from_json(const nlohmann::json& j) {
  ProxyTable t;
  try {
    t.benchmark = j.value("benchmark", std::string());
    t.columns = j.at("columns").get<std::vector<std::string>>();
    for (const auto& c : t.columns) t.data[c];
    std::size_t row = 0;
    for (const auto& r : j.at("rows")) {
      ++row;
      t.ids.push_back(r.at("id").get<std::string>());
      if (!r.contains("val_acc") || !r.at("val_acc").is_number()) {
        throw DataError("row " + std::to_string(row) + ": val_acc missing or non-numeric");
      }
      t.val_acc.push_back(r.at("val_acc").get<double>());
      for (const auto& c : t.columns) {
        if (!r.contains(c) || r.at(c).is_null()) {
          t.data[c].push_back(kNaN);
        } else if (r.at(c).is_number()) {
          t.data[c].push_back(r.at(c).get<double>());
        } else if (r.at(c).is_string()) {
          double v;
          if (!parse_cell(r.at(c).get<std::string>(), v)) {
            throw DataError("row " + std::to_string(row) + ", column '" + c + "': non-numeric cell");
          }
          t.data[c].push_back(v);
        } else {
          throw DataError("row " + std::to_string(row) + ", column '" + c + "': non-numeric cell");
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("table json: ") + e.what());
  }
  t.validate();
  return t;
}

nlohmann::ordered_json table_to_json(const ProxyTable& t) {
  nlohmann::ordered_json j;
  j["benchmark"] = t.benchmark;
  j["columns"] = t.columns;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < t.size(); ++i) {
    nlohmann::ordered_json r;
    r["id"] = t.ids[i];
    r["val_acc"] = t.val_acc[i];
    for (const auto& c : t.columns) {
      const double v = t.data.at(c)[i];
      if (std::isnan(v)) {
        r[c] = nullptr;
      } else if (std::isinf(v)) {
        r[c] = format_number(v);
      } else {
        r[c] = v;
      }
    }
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j;
}

ProxyTable load_table(const std::string& path, TableFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open table '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  if (format == TableFormat::Csv) return parse_csv_table(ss.str());
  try {
    return table_from_json(nlohmann::json::parse(ss.str()));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("table '" + path + "': " + e.what());
  }
}

ProxyTable load_table(const std::string& path) { return load_table(path, table_format_for(path)); }

void save_table(const ProxyTable& t, const std::string& path, TableFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write table '" + path + "'");
  if (format == TableFormat::Csv) {
    out << to_csv(t);
  } else {
    out << table_to_json(t).dump(2) << "\n";
  }
}

}  // namespace naslab
