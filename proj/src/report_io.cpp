#include "lovme/report_io.hpp"

#include <fstream>

#include <json.hpp>

#include "lovme/errors.hpp"

namespace lovme {

namespace {

using Json = nlohmann::ordered_json;

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad json in '" + path + "': " + e.what());
  }
  return j;
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw FormatError("write failed for '" + path + "'");
}

Json report_to_json(const UncertaintyReport& r) {
  Json j;
  j["sample_id"] = r.sample_id;
  j["mean_loss"] = r.mean_loss;
  j["var_loss"] = r.var_loss;
  j["var_n"] = r.var_n;
  j["skewness"] = r.skewness;
  j["excess_kurtosis"] = r.excess_kurtosis;
  j["degenerate"] = r.degenerate;
  j["h_score"] = r.h_score;
  j["n_recorded"] = r.n_recorded;
  j["accept_rate"] = r.accept_rate;
  return j;
}

UncertaintyReport report_from_json(const Json& j) {
  UncertaintyReport r;
  try {
    r.sample_id = j.at("sample_id").get<std::size_t>();
    r.mean_loss = j.at("mean_loss").get<double>();
    r.var_loss = j.at("var_loss").get<double>();
    r.var_n = j.at("var_n").get<double>();
    r.skewness = j.at("skewness").get<double>();
    r.excess_kurtosis = j.at("excess_kurtosis").get<double>();
    r.degenerate = j.at("degenerate").get<bool>();
    r.h_score = j.at("h_score").get<std::vector<double>>();
    r.n_recorded = j.at("n_recorded").get<std::size_t>();
    r.accept_rate = j.at("accept_rate").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad uncertainty report: ") + e.what());
  }
  return r;
}

}  // namespace

void write_reports_json(const std::string& path,
                        std::span<const UncertaintyReport> reports) {
  Json arr = Json::array();
  for (const UncertaintyReport& r : reports) arr.push_back(report_to_json(r));
  write_json_file(path, arr);
}

std::vector<UncertaintyReport> load_reports_json(const std::string& path) {
  const Json arr = load_json_file(path);
  if (!arr.is_array()) throw FormatError("'" + path + "': expected a json array");
  std::vector<UncertaintyReport> reports;
  reports.reserve(arr.size());
  for (const Json& j : arr) reports.push_back(report_from_json(j));
  return reports;
}

void write_ground_truth_json(const std::string& path,
                             const GroundTruthReport& report) {
  Json j;
  j["ensemble_size"] = report.ensemble_size;
  j["sample_ids"] = report.sample_ids;
  j["mean_prob"] = report.mean_prob;
  j["var_prob"] = report.var_prob;
  j["mean_loss"] = report.mean_loss;
  j["var_loss"] = report.var_loss;
  write_json_file(path, j);
}

GroundTruthReport load_ground_truth_json(const std::string& path) {
  const Json j = load_json_file(path);
  GroundTruthReport report;
  try {
    report.ensemble_size = j.at("ensemble_size").get<std::size_t>();
    report.sample_ids = j.at("sample_ids").get<std::vector<std::size_t>>();
    report.mean_prob = j.at("mean_prob").get<std::vector<double>>();
    report.var_prob = j.at("var_prob").get<std::vector<double>>();
    report.mean_loss = j.at("mean_loss").get<std::vector<double>>();
    report.var_loss = j.at("var_loss").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad ground-truth report: ") + e.what());
  }
  validate(report);
  return report;
}

void write_oracle_json(const std::string& path, const OracleResult& result) {
  Json j;
  j["log_z"] = result.log_z;
  j["mean_loss"] = result.mean_loss;
  j["mean_n"] = result.mean_n;
  j["var_loss"] = result.var_loss;
  j["var_n"] = result.var_n;
  j["k3_loss"] = result.k3_loss;
  j["k4_loss"] = result.k4_loss;
  write_json_file(path, j);
}

OracleResult load_oracle_json(const std::string& path) {
  const Json j = load_json_file(path);
  OracleResult result;
  try {
    result.log_z = j.at("log_z").get<double>();
    result.mean_loss = j.at("mean_loss").get<double>();
    result.mean_n = j.at("mean_n").get<double>();
    result.var_loss = j.at("var_loss").get<double>();
    result.var_n = j.at("var_n").get<double>();
    result.k3_loss = j.at("k3_loss").get<double>();
    result.k4_loss = j.at("k4_loss").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad oracle result: ") + e.what());
  }
  return result;
}

}  // namespace lovme
