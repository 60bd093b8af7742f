#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sciss/report.hpp"
#include "sciss/simulation.hpp"

namespace sciss {

// ---------------------------------------------------------------------------
// Dataset CSV
//
// Header names the columns y1..yq, x1..xp, w1..wd (any order). Labeled rows
// fill every y column, unlabeled rows leave all of them empty. The intercept
// w0 = 1 is not stored in the file.

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::optional<double> parse_number(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

struct Column {
  char kind;   // 'y', 'x' or 'w'
  int index;   // 0-based within its kind
};

inline Column parse_column(std::string_view name) {
  if (name.size() < 2 || (name[0] != 'y' && name[0] != 'x' && name[0] != 'w'))
    throw SchemaError("unrecognized column '" + std::string(name) + "'");
  int idx = 0;
  const auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), idx);
  if (ec != std::errc() || ptr != name.data() + name.size() || idx < 1)
    throw SchemaError("unrecognized column '" + std::string(name) + "'");
  return {name[0], idx - 1};
}

}  // namespace detail

inline Dataset parse_dataset(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<detail::Column> cols;
  int counts[3] = {0, 0, 0};  // y, x, w
  auto slot = [](char k) { return k == 'y' ? 0 : k == 'x' ? 1 : 2; };

  while (std::getline(in, line)) {
    ++lineno;
    if (!detail::trim(line).empty()) break;
  }
  if (detail::trim(line).empty()) throw ParseError("missing header", lineno == 0 ? 1 : lineno);
  {
    std::vector<std::vector<bool>> seen(3);
    for (auto name : detail::split_fields(line)) {
      const detail::Column c = detail::parse_column(name);
      auto& s = seen[static_cast<std::size_t>(slot(c.kind))];
      if (static_cast<int>(s.size()) <= c.index) s.resize(static_cast<std::size_t>(c.index) + 1, false);
      if (s[static_cast<std::size_t>(c.index)]) throw SchemaError("duplicate column '" + std::string(name) + "'");
      s[static_cast<std::size_t>(c.index)] = true;
      cols.push_back(c);
    }
    for (int k = 0; k < 3; ++k) {
      for (bool b : seen[static_cast<std::size_t>(k)])
        if (!b) throw SchemaError(std::string("columns ") + "yxw"[k] + "1.." + std::to_string(seen[static_cast<std::size_t>(k)].size()) + " are not contiguous");
      counts[k] = static_cast<int>(seen[static_cast<std::size_t>(k)].size());
    }
  }
  Dataset data;
  data.q = counts[0];
  data.p = counts[1];
  data.d = counts[2];
  if (data.q < 1) throw SchemaError("no outcome columns");
  require_enumerable(data.q);

  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_fields(line);
    if (fields.size() != cols.size())
      throw ParseError("expected " + std::to_string(cols.size()) + " fields, found " + std::to_string(fields.size()), lineno);
    std::vector<int> y(static_cast<std::size_t>(data.q), 0);
    int y_present = 0;
    Vec x(data.p);
    Vec w(data.d + 1);
    w[0] = 1.0;
    for (std::size_t f = 0; f < fields.size(); ++f) {
      const auto [kind, idx] = cols[f];
      if (kind == 'y') {
        if (fields[f].empty()) continue;
        if (fields[f] != "0" && fields[f] != "1")
          throw ParseError("outcome y" + std::to_string(idx + 1) + " must be 0 or 1", lineno);
        y[static_cast<std::size_t>(idx)] = fields[f] == "1";
        ++y_present;
        continue;
      }
      const auto v = detail::parse_number(fields[f]);
      if (!v) throw ParseError(std::string("column ") + kind + std::to_string(idx + 1) + " is not a number", lineno);
      if (kind == 'x')
        x[idx] = *v;
      else
        w[idx + 1] = *v;
    }
    if (y_present == data.q)
      data.labeled.push_back({OutcomeConfig::from_bits(y), std::move(x), std::move(w)});
    else if (y_present == 0)
      data.unlabeled.push_back({std::move(x), std::move(w)});
    else
      throw ParseError("partial outcome row", lineno);
  }
  if (data.labeled.empty()) throw EmptyLabeled("dataset has no labeled rows");
  return data;
}

inline Dataset parse_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open dataset '" + path + "'");
  return parse_dataset(in);
}

inline void write_dataset(std::ostream& out, const Dataset& data) {
  std::vector<std::string> header;
  for (int j = 1; j <= data.q; ++j) header.push_back("y" + std::to_string(j));
  for (int j = 1; j <= data.p; ++j) header.push_back("x" + std::to_string(j));
  for (int j = 1; j <= data.d; ++j) header.push_back("w" + std::to_string(j));
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
  auto tail = [&](const Vec& x, const Vec& w) {
    for (Eigen::Index k = 0; k < x.size(); ++k) out << "," << x[k];
    for (Eigen::Index k = 1; k < w.size(); ++k) out << "," << w[k];
    out << "\n";
  };
  // Unlabeled rows keep q empty y fields.
  for (const auto& s : data.labeled) {
    for (int j = 0; j < data.q; ++j) out << (j ? "," : "") << s.y[j];
    tail(s.x, s.w);
  }
  for (const auto& s : data.unlabeled) {
    for (int j = 1; j < data.q; ++j) out << ",";
    tail(s.x, s.w);
  }
}

// ---------------------------------------------------------------------------
// Structured reports (JSON)

inline constexpr int kSchemaVersion = 1;

using Json = nlohmann::json;

namespace detail {

// Non-finite values are stored as null.
inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
inline double number(const Json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j.is_number()) throw SchemaError("expected a number");
  return j.get<double>();
}

inline Json numbers(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}
inline std::vector<double> numbers(const Json& j) {
  std::vector<double> out;
  for (const auto& x : j) out.push_back(number(x));
  return out;
}

inline Json params_json(const IsingParams& p) {
  Json pair = Json::array(), node = Json::array();
  for (int j = 0; j < p.q; ++j) {
    Json row = Json::array();
    for (int k = 0; k < p.q; ++k) row.push_back(number(p.pair_coefs(j, k)));
    pair.push_back(row);
    node.push_back(numbers(std::vector<double>(p.node_coefs[j].data(), p.node_coefs[j].data() + p.node_coefs[j].size())));
  }
  return {{"pair", pair}, {"node", node}};
}

inline IsingParams params_from_json(const Json& j, int q, int d) {
  IsingParams p(q, d);
  const Json& pair = j.at("pair");
  const Json& node = j.at("node");
  if (pair.size() != static_cast<std::size_t>(q) || node.size() != static_cast<std::size_t>(q))
    throw SchemaError("parameter block has the wrong number of rows");
  for (int r = 0; r < q; ++r) {
    if (pair[r].size() != static_cast<std::size_t>(q) || node[r].size() != static_cast<std::size_t>(d + 1))
      throw SchemaError("parameter block has the wrong shape");
    for (int k = 0; k < q; ++k) p.pair_coefs(r, k) = number(pair[r][k]);
    for (int c = 0; c <= d; ++c) p.node_coefs[r][c] = number(node[r][c]);
  }
  return p;
}

}  // namespace detail

inline Json to_json(const EstimateReport& r) {
  Json values = Json::object();
  for (const auto& [k, v] : r.diagnostics.values) values[k] = detail::numbers(v);
  return {{"method", to_string(r.method)},
          {"q", r.theta.q},
          {"d", r.theta.d},
          {"n_labeled", r.n_labeled},
          {"n_unlabeled", r.n_unlabeled},
          {"theta", detail::params_json(r.theta)},
          {"se", detail::params_json(r.se)},
          {"ci_low", detail::params_json(r.ci_low)},
          {"ci_high", detail::params_json(r.ci_high)},
          {"diagnostics", {{"notes", r.diagnostics.notes}, {"values", values}}}};
}

inline EstimateReport report_from_json(const Json& j) {
  try {
    EstimateReport r;
    r.method = parse_method(j.at("method").get<std::string>());
    const int q = j.at("q").get<int>();
    const int d = j.at("d").get<int>();
    r.n_labeled = j.at("n_labeled").get<std::size_t>();
    r.n_unlabeled = j.at("n_unlabeled").get<std::size_t>();
    r.theta = detail::params_from_json(j.at("theta"), q, d);
    r.se = detail::params_from_json(j.at("se"), q, d);
    r.ci_low = detail::params_from_json(j.at("ci_low"), q, d);
    r.ci_high = detail::params_from_json(j.at("ci_high"), q, d);
    const Json& diag = j.at("diagnostics");
    r.diagnostics.notes = diag.at("notes").get<std::vector<std::string>>();
    for (const auto& [k, v] : diag.at("values").items()) r.diagnostics.values[k] = detail::numbers(v);
    return r;
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("malformed report: ") + e.what());
  }
}

/// Report file: {"schema_version": 1, "reports": [...]}.
inline std::string write_reports(const std::vector<EstimateReport>& reports) {
  Json doc{{"schema_version", kSchemaVersion}, {"reports", Json::array()}};
  for (const auto& r : reports) doc["reports"].push_back(to_json(r));
  return doc.dump(2) + "\n";
}

inline std::vector<EstimateReport> read_reports(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw SchemaError(std::string("report file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("schema_version") || !doc["schema_version"].is_number_integer())
    throw SchemaError("report file lacks schema_version");
  if (doc["schema_version"].get<int>() != kSchemaVersion)
    throw SchemaError("unsupported schema_version " + doc["schema_version"].dump());
  if (!doc.contains("reports") || !doc["reports"].is_array()) throw SchemaError("report file lacks a reports array");
  std::vector<EstimateReport> out;
  for (const auto& r : doc["reports"]) out.push_back(report_from_json(r));
  return out;
}

inline Json to_json(const SimSummary& s) {
  Json methods = Json::array(), cells = Json::array();
  for (Method m : s.methods) methods.push_back(to_string(m));
  for (std::size_t p = 0; p < s.params.size(); ++p)
    for (std::size_t m = 0; m < s.methods.size(); ++m) {
      const SimCell& c = s.cells[p][m];
      cells.push_back({{"param", s.params[p]},
                       {"method", to_string(s.methods[m])},
                       {"truth", detail::number(c.truth)},
                       {"mean", detail::number(c.mean)},
                       {"bias", detail::number(c.bias)},
                       {"se", detail::number(c.se)},
                       {"re", detail::number(c.re)},
                       {"cp", detail::number(c.cp)},
                       {"mean_se", detail::number(c.mean_se)}});
    }
  return {{"schema_version", kSchemaVersion},
          {"label", s.label},
          {"params", s.params},
          {"methods", methods},
          {"reps_requested", s.reps_requested},
          {"reps_used", s.reps_used},
          {"failures", s.failures},
          {"warnings", s.warnings},
          {"cells", cells}};
}

inline SimSummary summary_from_json(const Json& j) {
  try {
    if (j.at("schema_version").get<int>() != kSchemaVersion) throw SchemaError("unsupported schema_version");
    SimSummary s;
    s.label = j.at("label").get<std::string>();
    s.params = j.at("params").get<std::vector<std::string>>();
    for (const auto& m : j.at("methods")) s.methods.push_back(parse_method(m.get<std::string>()));
    s.reps_requested = j.at("reps_requested").get<int>();
    s.reps_used = j.at("reps_used").get<int>();
    s.failures = j.at("failures").get<std::vector<std::string>>();
    s.warnings = j.at("warnings").get<std::vector<std::string>>();
    s.cells.assign(s.params.size(), std::vector<SimCell>(s.methods.size()));
    const Json& cells = j.at("cells");
    if (cells.size() != s.params.size() * s.methods.size()) throw SchemaError("summary cell count mismatch");
    std::size_t at = 0;
    for (auto& row : s.cells)
      for (SimCell& c : row) {
        const Json& e = cells[at++];
        c.truth = detail::number(e.at("truth"));
        c.mean = detail::number(e.at("mean"));
        c.bias = detail::number(e.at("bias"));
        c.se = detail::number(e.at("se"));
        c.re = detail::number(e.at("re"));
        c.cp = detail::number(e.at("cp"));
        c.mean_se = detail::number(e.at("mean_se"));
      }
    return s;
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("malformed summary: ") + e.what());
  }
}

/// Human-readable estimate table for one report.
inline std::string format_report(const EstimateReport& r) {
  std::ostringstream out;
  out << to_string(r.method) << "  (n = " << r.n_labeled << ", N = " << r.n_unlabeled << ")\n";
  out << std::left << std::setw(12) << "param" << std::right << std::setw(11) << "estimate" << std::setw(11) << "se"
      << std::setw(11) << "ci_low" << std::setw(11) << "ci_high" << "\n";
  out << std::fixed << std::setprecision(4);
  auto row = [&](const std::string& name, double t, double s, double lo, double hi) {
    out << std::left << std::setw(12) << name << std::right << std::setw(11) << t << std::setw(11) << s << std::setw(11)
        << lo << std::setw(11) << hi << "\n";
  };
  for (int j = 0; j < r.theta.q; ++j)
    for (int c = 0; c <= r.theta.d; ++c)
      row("theta" + std::to_string(j + 1) + std::to_string(j + 1) + (r.theta.d ? "[w" + std::to_string(c) + "]" : ""),
          r.theta.node_coefs[j][c], r.se.node_coefs[j][c], r.ci_low.node_coefs[j][c], r.ci_high.node_coefs[j][c]);
  for (int j = 0; j < r.theta.q; ++j)
    for (int k = j + 1; k < r.theta.q; ++k)
      row("theta" + std::to_string(j + 1) + std::to_string(k + 1), r.theta.pair_coefs(j, k), r.se.pair_coefs(j, k),
          r.ci_low.pair_coefs(j, k), r.ci_high.pair_coefs(j, k));
  for (const auto& n : r.diagnostics.notes) out << "note: " << n << "\n";
  return out.str();
}

}  // namespace sciss
