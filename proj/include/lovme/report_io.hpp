#pragma once

#include <span>
#include <string>
#include <vector>

#include "lovme/baselines.hpp"
#include "lovme/gibbs_oracle.hpp"
#include "lovme/sampler.hpp"

namespace lovme {

void write_reports_json(const std::string& path,
                        std::span<const UncertaintyReport> reports);
std::vector<UncertaintyReport> load_reports_json(const std::string& path);

void write_ground_truth_json(const std::string& path,
                             const GroundTruthReport& report);
GroundTruthReport load_ground_truth_json(const std::string& path);

void write_oracle_json(const std::string& path, const OracleResult& result);
OracleResult load_oracle_json(const std::string& path);

}  // namespace lovme
