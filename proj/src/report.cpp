#include <cstdio>
#include <fstream>
#include <iostream>

#include "unravel/cli.hpp"

namespace unravel::cli {

namespace {

std::string csv_cell(const Cell& cell) {
  struct Visitor {
    std::string operator()(double x) const {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", x);
      return buf;
    }
    std::string operator()(std::int64_t x) const { return std::to_string(x); }
    std::string operator()(bool x) const { return x ? "true" : "false"; }
    std::string operator()(const std::string& x) const { return x; }
  };
  return std::visit(Visitor{}, cell);
}

nlohmann::json json_cell(const Cell& cell) {
  return std::visit([](const auto& x) { return nlohmann::json(x); }, cell);
}

}  // namespace

std::string render_csv(const RunReport& report) {
  std::string out;
  for (std::size_t k = 0; k < report.columns.size(); ++k) {
    if (k) out += ',';
    out += report.columns[k];
  }
  out += '\n';
  for (const auto& row : report.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out += ',';
      out += csv_cell(row[k]);
    }
    out += '\n';
  }
  return out;
}

nlohmann::json report_json(const RunReport& report) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& row : report.rows) {
    nlohmann::json rec = nlohmann::json::object();
    for (std::size_t k = 0; k < row.size(); ++k) rec[report.columns[k]] = json_cell(row[k]);
    records.push_back(std::move(rec));
  }
  nlohmann::json summary = report.summary;
  summary["verdict"] = to_string(report.verdict);
  summary["note"] = report.note;
  return {{"software", {{"name", "unravel"}, {"version", kVersion}}},
          {"command", report.config.command},
          {"seed", report.config.seed},
          {"config", config_to_json(report.config)},
          {"records", std::move(records)},
          {"summary", std::move(summary)},
          {"execution", {{"threads", report.config.threads}}}};
}

std::string render(const RunReport& report) {
  if (report.config.format == "csv") return render_csv(report);
  return report_json(report).dump(2) + '\n';
}

void write_report(const RunReport& report) {
  const std::string text = render(report);
  if (report.config.output.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream file(report.config.output, std::ios::binary);
  if (!file) throw ConfigError("cannot open output file '" + report.config.output + "'");
  file << text;
  if (!file) throw ConfigError("failed writing '" + report.config.output + "'");
}

}  // namespace unravel::cli
