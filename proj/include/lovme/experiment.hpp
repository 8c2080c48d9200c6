#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lovme/dataset.hpp"
#include "lovme/eval.hpp"
#include "lovme/loss_oracle.hpp"
#include "lovme/sampler.hpp"
#include "lovme/trainer.hpp"

namespace lovme {

struct DatasetSpec {
  std::string source = "blobs";  // blobs | csv | idx
  // blobs
  std::size_t train_n = 400;
  std::size_t test_n = 200;
  std::size_t classes = 3;
  double noise_sigma = 0.35;
  double label_noise_rate = 0.0;
  std::uint64_t data_seed = 7;
  // csv
  std::string train_csv;
  std::string test_csv;
  // idx
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
  std::size_t train_limit = 0;  // 0 keeps all
  std::size_t test_limit = 0;
  // test-split perturbation (image-shaped data only)
  double perturb_fraction = 0.0;
  double rotation_max_deg = 15.0;
  double perturb_sigma = 0.1;
  std::uint64_t perturb_seed = 99;
};

struct ExperimentConfig {
  DatasetSpec data;
  TrainConfig train;
  ChainConfig chain;   // chain.params.beta ignored when beta_auto
  bool beta_auto = true;  // beta = 1 / mean maskless test loss
  LossMode oracle_mode = LossMode::PredictedLabel;
  std::uint64_t oracle_seed = 123;

  bool with_lovme = true;
  bool with_mc_dropout = false;
  bool with_ground_truth = false;
  double mc_p = 0.5;
  std::size_t mc_passes = 200;
  std::uint64_t mc_seed = 31;
  std::size_t ensemble_size = 50;
  std::uint64_t ensemble_seed = 41;

  std::vector<double> rejection_qs = {0.1};
  NormalizeMode normalize = NormalizeMode::MinMax;
  double restrict_below = 0.99;  // correlation probability cutoff

  bool emit_traces = false;
  int workers = 0;  // 0 = all hardware threads
  std::string output_dir = "out";
};

void validate(const ExperimentConfig& config);

// Everything a finished (or failed) run leaves behind, mirrored in
// <output_dir>/manifest.json under schema "lovme-manifest/1".
struct Manifest {
  std::string schema = "lovme-manifest/1";
  std::string status = "ok";        // ok | failed
  std::string failed_stage;         // set when status == failed
  std::string cleanup_policy = "partial artifacts kept";
  ExperimentConfig config;
  double resolved_beta = 0.0;
  int resolved_workers = 0;
  std::map<std::string, std::string> input_hashes;  // source path -> fnv1a64
  std::map<std::string, std::string> outputs;       // relative path -> fnv1a64
};

// train -> estimators -> eval, all artifacts under config.output_dir. Every
// random decision flows from a seed stored in the manifest, so a rerun
// reproduces every output hash regardless of worker count.
Manifest run_experiment(const ExperimentConfig& config);

Manifest load_manifest(const std::string& path);
void write_manifest(const std::string& path, const Manifest& manifest);

// Re-executes the run recorded in a manifest into `output_dir`.
// workers_override > 0 replaces the recorded worker count.
Manifest rerun_from_manifest(const std::string& manifest_path,
                             const std::string& output_dir,
                             int workers_override = 0);

struct OracleCheckRow {
  double beta = 0.0;
  double eta = 0.0;
  double oracle_mean = 0.0;
  double oracle_var = 0.0;
  double chain_mean = 0.0;
  double chain_var = 0.0;
  double rel_mean_err = 0.0;
  double rel_var_err = 0.0;
};

// Exact enumeration vs chain estimate over a (beta, eta) grid, one row per
// grid point. The network must be small enough to enumerate.
std::vector<OracleCheckRow> oracle_check(const Network& net,
                                         const Sample& sample,
                                         std::span<const GibbsParams> grid,
                                         const ChainConfig& chain_template,
                                         const LossOracle& oracle,
                                         std::size_t sample_index = 0);

void write_oracle_check_csv(const std::string& path,
                            std::span<const OracleCheckRow> rows);

}  // namespace lovme
