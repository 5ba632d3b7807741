#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "balmet/errors.hpp"

namespace balmet {

inline constexpr const char* kVersion = "0.1.0";

enum class Format { kDelimited, kJson };

inline Format parse_format(const std::string& s) {
  if (s == "csv" || s == "text" || s == "dsv") return Format::kDelimited;
  if (s == "json") return Format::kJson;
  throw DomainError("unknown output format '" + s + "' (expected csv or json)");
}

using Cell = std::variant<double, long long, std::string>;

// Column table plus the provenance header (command, parameters, version).
struct Table {
  std::string command;
  std::vector<std::pair<std::string, std::string>> params;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  int digits = 12;

  void add_param(std::string k, std::string v) { params.emplace_back(std::move(k), std::move(v)); }
  void add_param(std::string k, double v) { params.emplace_back(std::move(k), shortest(v)); }

  static std::string format_number(double v, int digits) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
  }

  // fewest digits that still read back as v
  static std::string shortest(double v) {
    for (int d = 6; d < 17; ++d) {
      std::string s = format_number(v, d);
      if (std::strtod(s.c_str(), nullptr) == v) return s;
    }
    return format_number(v, 17);
  }
};

namespace detail {

inline std::string cell_text(const Cell& c, int digits) {
  if (const double* d = std::get_if<double>(&c)) return Table::format_number(*d, digits);
  if (const long long* i = std::get_if<long long>(&c)) return std::to_string(*i);
  return std::get<std::string>(c);
}

inline nlohmann::json cell_json(const Cell& c, int digits) {
  if (const double* d = std::get_if<double>(&c)) {
    if (!std::isfinite(*d)) return Table::format_number(*d, digits);
    // round-trip through the requested precision so both formats agree
    return std::strtod(Table::format_number(*d, digits).c_str(), nullptr);
  }
  if (const long long* i = std::get_if<long long>(&c)) return *i;
  return std::get<std::string>(c);
}

}  // namespace detail

inline std::string header_text(const Table& t) {
  std::ostringstream os;
  os << "# balmet " << kVersion << '\n';
  os << "# command = " << t.command << '\n';
  for (const auto& [k, v] : t.params) os << "# " << k << " = " << v << '\n';
  return os.str();
}

inline std::string render(const Table& t, Format f, char delim = ',') {
  std::ostringstream os;
  if (f == Format::kDelimited) {
    os << header_text(t);
    for (std::size_t j = 0; j < t.columns.size(); ++j) os << (j ? std::string(1, delim) : "") << t.columns[j];
    os << '\n';
    for (const auto& r : t.rows) {
      for (std::size_t j = 0; j < r.size(); ++j) {
        std::string s = detail::cell_text(r[j], t.digits);
        if (s.find(delim) != std::string::npos) s = '"' + s + '"';
        os << (j ? std::string(1, delim) : "") << s;
      }
      os << '\n';
    }
    return os.str();
  }
  nlohmann::ordered_json j;
  j["version"] = kVersion;
  j["command"] = t.command;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for (const auto& [k, v] : t.params) params[k] = v;
  j["params"] = params;
  j["columns"] = t.columns;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : t.rows) {
    nlohmann::ordered_json rec = nlohmann::ordered_json::object();
    for (std::size_t k = 0; k < r.size() && k < t.columns.size(); ++k)
      rec[t.columns[k]] = detail::cell_json(r[k], t.digits);
    rows.push_back(rec);
  }
  j["rows"] = rows;
  return j.dump(1) + '\n';
}

// Write to a sibling temporary, then rename over the target.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DomainError("cannot open '" + tmp.string() + "' for writing");
    os << content;
    os.flush();
    if (!os) throw DomainError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw DomainError("cannot rename onto '" + path.string() + "': " + ec.message());
  }
}

}  // namespace balmet
