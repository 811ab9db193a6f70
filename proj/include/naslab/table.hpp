#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "naslab/stats.hpp"

namespace naslab {

// Architectures x named score columns, joined with validation accuracy.
// Missing or degenerate cells hold NaN.
struct ProxyTable {
  std::string benchmark;
  std::vector<std::string> ids;
  std::vector<double> val_acc;
  std::vector<std::string> columns;  // file order; excludes id and val_acc
  std::map<std::string, std::vector<double>> data;

  std::size_t size() const { return ids.size(); }
  bool has(const std::string& column) const { return data.count(column) > 0; }
  const std::vector<double>& column(const std::string& name) const;
  // Appends or replaces a column; length must match.
  void set_column(const std::string& name, std::vector<double> values);
  void remove_column(const std::string& name);

  stats::ScoreVector score(const std::string& name) const;
  stats::ScoreVector accuracy() const;

  // Unique ids, finite val_acc, aligned columns; DataError otherwise.
  void validate() const;
};

enum class TableFormat { Csv, Json };

// By extension: ".json" is Json, anything else Csv.
TableFormat table_format_for(const std::string& path);

ProxyTable parse_csv_table(const std::string& text, const std::string& benchmark = {});
std::string to_csv(const ProxyTable& t);
ProxyTable table_from_json(const nlohmann::json& j);
nlohmann::ordered_json table_to_json(const ProxyTable& t);

ProxyTable load_table(const std::string& path, TableFormat format);
ProxyTable load_table(const std::string& path);
void save_table(const ProxyTable& t, const std::string& path, TableFormat format);

// Shortest text that parses back to the same double; "nan" for NaN.
std::string format_number(double v);

}  // namespace naslab
