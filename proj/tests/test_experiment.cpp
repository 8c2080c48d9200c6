#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "doctest.h"
#include "lovme/dataset_io.hpp"
#include "lovme/errors.hpp"
#include "lovme/experiment.hpp"
#include "lovme/gibbs_oracle.hpp"
#include "lovme/report_io.hpp"
#include "lovme/util.hpp"
#include "test_helpers.hpp"

using namespace lovme;
namespace fs = std::filesystem;

namespace {

// Small enough to keep a full run under a second.
ExperimentConfig smoke_config(const std::string& output_dir) {
  ExperimentConfig config;
  config.data.train_n = 60;
  config.data.test_n = 24;
  config.data.classes = 3;
  config.data.noise_sigma = 0.3;
  config.data.data_seed = 12;
  config.train.hidden_widths = {8};
  config.train.epochs = 8;
  config.train.seed = 3;
  config.chain.transitions = 300;
  config.chain.burn_in = 50;
  config.chain.thin = 2;
  config.chain.seed = 21;
  config.workers = 2;
  config.output_dir = output_dir;
  return config;
}

nlohmann::json parse_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("experiment config validation") {
  ExperimentConfig config = smoke_config("out");
  CHECK_NOTHROW(validate(config));

  SUBCASE("unknown source") {
    config.data.source = "tarball";
    CHECK_THROWS_AS(validate(config), ConfigError);
  }
  SUBCASE("blobs cannot be perturbed") {
    config.data.perturb_fraction = 0.5;
    CHECK_THROWS_AS(validate(config), ConfigError);
  }
  SUBCASE("csv requires paths") {
    config.data.source = "csv";
    CHECK_THROWS_AS(validate(config), ConfigError);
  }
  SUBCASE("idx requires all four paths") {
    config.data.source = "idx";
    config.data.train_images = "a";
    CHECK_THROWS_AS(validate(config), ConfigError);
  }
  SUBCASE("train errors become config errors") {
    config.train.dropout_p = 0.0;
    CHECK_THROWS_AS(validate(config), ConfigError);
  }
  SUBCASE("auto beta ignores the placeholder value") {
    config.beta_auto = true;
    config.chain.params.beta = -5.0;
    CHECK_NOTHROW(validate(config));
    config.beta_auto = false;
    CHECK_THROWS_AS(validate(config), ConfigError);
  }
  SUBCASE("at least one estimator") {
    config.with_lovme = false;
    CHECK_THROWS_AS(validate(config), ConfigError);
  }
  SUBCASE("mc dropout bounds") {
    config.with_mc_dropout = true;
    config.mc_p = 0.0;
    CHECK_THROWS_AS(validate(config), ConfigError);
    config.mc_p = 0.5;
    config.mc_passes = 1;
    CHECK_THROWS_AS(validate(config), ConfigError);
  }
  SUBCASE("rejection quantile range") {
    config.rejection_qs = {0.1, 1.0};
    CHECK_THROWS_AS(validate(config), ConfigError);
  }
  SUBCASE("restrict_below range") {
    config.restrict_below = 0.0;
    CHECK_THROWS_AS(validate(config), ConfigError);
  }
  SUBCASE("workers and output dir") {
    config.workers = -1;
    CHECK_THROWS_AS(validate(config), ConfigError);
    config.workers = 0;
    config.output_dir = "";
    CHECK_THROWS_AS(validate(config), ConfigError);
  }
}

TEST_CASE("a small blobs run leaves a complete artifact tree") {
  test::TempDir dir;
  const std::string out = dir.file("run");
  const ExperimentConfig config = smoke_config(out);
  const Manifest man = run_experiment(config);

  CHECK(man.status == "ok");
  CHECK(man.failed_stage.empty());
  CHECK(man.resolved_beta > 0.0);
  CHECK(man.resolved_workers == 2);
  CHECK(man.input_hashes.empty());  // synthetic data has no input files

  for (const char* rel :
       {"train.csv", "test.csv", "flagged_ids.json", "weights.tnlw",
        "train_log.csv", "lovme_reports.json", "eval_summary.json",
        "curves/roc_lovme_class0.csv", "curves/roc_lovme_class1.csv",
        "curves/roc_lovme_class2.csv",
        "curves/roc_lovme_class0_optimistic.csv",
        "curves/roc_lovme_class2_pessimistic.csv"}) {
    INFO(rel);
    CHECK(man.outputs.count(rel) == 1);
  }
  CHECK(man.outputs.size() == 16);  // 7 flat files + 9 curve files

  // Every recorded hash matches the bytes on disk.
  for (const auto& [rel, hash] : man.outputs) {
    const std::string path = (fs::path(out) / rel).string();
    REQUIRE(fs::exists(path));
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx",
                  (unsigned long long)fnv1a64_file(path));
    CHECK(hash == buf);
  }

  // The manifest on disk equals the returned one.
  const Manifest loaded = load_manifest((fs::path(out) / "manifest.json").string());
  CHECK(loaded.status == "ok");
  CHECK(loaded.outputs == man.outputs);
  CHECK(loaded.resolved_beta == man.resolved_beta);
  CHECK(loaded.config.chain.seed == config.chain.seed);

  // Reports cover the test split in order.
  const auto reports =
      load_reports_json((fs::path(out) / "lovme_reports.json").string());
  REQUIRE(reports.size() == 24);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    CHECK(reports[i].sample_id == i);
    CHECK(reports[i].n_recorded == (300 - 50) / 2);
    CHECK(reports[i].h_score.size() == 3);
  }

  const auto summary =
      parse_file((fs::path(out) / "eval_summary.json").string());
  const auto& lovme = summary.at("estimators").at("lovme");
  const double auc = lovme.at("auc").get<double>();
  CHECK(auc >= 0.0);
  CHECK(auc <= 1.0);
  CHECK(lovme.at("auc_optimistic").get<double>() >= auc);
  CHECK(lovme.at("auc_pessimistic").get<double>() <= auc);
  CHECK(lovme.at("rejection").size() == 1);
  CHECK(lovme.at("rejection")[0].at("rejected").get<int>() == 3);  // ceil(2.4)

  // The reloaded dataset must be the bitwise dataset the run used.
  const Dataset test_back = load_csv((fs::path(out) / "test.csv").string());
  CHECK(test_back.size() == 24);
  CHECK(test_back.class_count == 3);
}

TEST_CASE("rerun from manifest reproduces every output hash") {
  test::TempDir dir;
  ExperimentConfig config = smoke_config(dir.file("first"));
  config.workers = 1;
  const Manifest first = run_experiment(config);

  const Manifest again = rerun_from_manifest(
      (fs::path(dir.file("first")) / "manifest.json").string(),
      dir.file("second"), 4);

  CHECK(again.status == "ok");
  CHECK(again.resolved_workers == 4);
  CHECK(again.resolved_beta == first.resolved_beta);
  REQUIRE(again.outputs.size() == first.outputs.size());
  for (const auto& [rel, hash] : first.outputs) {
    INFO(rel);
    CHECK(again.outputs.at(rel) == hash);
  }
}

TEST_CASE("trace emission does not change the reports") {
  test::TempDir dir;
  ExperimentConfig parallel = smoke_config(dir.file("parallel"));
  ExperimentConfig serial = smoke_config(dir.file("serial"));
  serial.emit_traces = true;
  serial.workers = 1;

  const Manifest mp = run_experiment(parallel);
  const Manifest ms = run_experiment(serial);
  CHECK(mp.outputs.at("lovme_reports.json") ==
        ms.outputs.at("lovme_reports.json"));
  CHECK(ms.outputs.count("traces/sample_0.csv") == 1);
  CHECK(ms.outputs.count("traces/sample_23.csv") == 1);
}

TEST_CASE("csv sources are hashed as inputs") {
  test::TempDir dir;
  const BlobsResult tr = synth_blobs(40, 2, 0.3, 0.0, 5);
  const BlobsResult te = synth_blobs(16, 2, 0.3, 0.0, 6);
  save_csv(dir.file("train.csv"), tr.data);
  save_csv(dir.file("test.csv"), te.data);

  ExperimentConfig config = smoke_config(dir.file("run"));
  config.data.source = "csv";
  config.data.train_csv = dir.file("train.csv");
  config.data.test_csv = dir.file("test.csv");
  config.chain.transitions = 120;
  config.chain.burn_in = 20;

  const Manifest man = run_experiment(config);
  CHECK(man.status == "ok");
  REQUIRE(man.input_hashes.size() == 2);
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                (unsigned long long)fnv1a64_file(dir.file("train.csv")));
  CHECK(man.input_hashes.at(dir.file("train.csv")) == buf);
}

TEST_CASE("label noise flags test samples in the summary") {
  test::TempDir dir;
  ExperimentConfig config = smoke_config(dir.file("run"));
  config.data.test_n = 40;
  config.data.label_noise_rate = 0.2;

  const Manifest man = run_experiment(config);
  const auto flagged =
      parse_file((fs::path(dir.file("run")) / "flagged_ids.json").string());
  const auto ids = flagged.at("noised_label_ids").get<std::vector<std::size_t>>();
  CHECK_FALSE(ids.empty());
  CHECK(std::is_sorted(ids.begin(), ids.end()));
  CHECK(flagged.at("perturbed_ids").empty());

  const auto summary =
      parse_file((fs::path(dir.file("run")) / "eval_summary.json").string());
  CHECK(summary.at("flagged_count").get<std::size_t>() == ids.size());
  CHECK(summary.at("estimators").at("lovme").contains("flagged_only_auc"));
  CHECK(man.status == "ok");
}

TEST_CASE("ground truth enables the correlation block") {
  test::TempDir dir;
  ExperimentConfig config = smoke_config(dir.file("run"));
  config.data.test_n = 18;
  config.chain.transitions = 200;
  config.chain.burn_in = 40;
  config.with_ground_truth = true;
  config.ensemble_size = 3;
  config.train.epochs = 5;

  const Manifest man = run_experiment(config);
  CHECK(man.outputs.count("ground_truth.json") == 1);
  CHECK(man.outputs.count("scatter.csv") == 1);

  const auto summary =
      parse_file((fs::path(dir.file("run")) / "eval_summary.json").string());
  REQUIRE(summary.contains("correlation"));
  CHECK(summary.at("correlation").at("n").get<std::size_t>() == 18);
  CHECK(summary.at("pearson_r").get<double>() ==
        summary.at("correlation").at("r").get<double>());

  const GroundTruthReport gt = load_ground_truth_json(
      (fs::path(dir.file("run")) / "ground_truth.json").string());
  CHECK(gt.ensemble_size == 3);
  CHECK(gt.sample_ids.size() == 18);
}

TEST_CASE("mc dropout artifacts appear beside the lovme ones") {
  test::TempDir dir;
  ExperimentConfig config = smoke_config(dir.file("run"));
  config.data.test_n = 12;
  config.with_mc_dropout = true;
  config.mc_passes = 40;

  const Manifest man = run_experiment(config);
  CHECK(man.outputs.count("mc_reports.json") == 1);
  CHECK(man.outputs.count("curves/roc_mc_dropout_class0.csv") == 1);

  const auto summary =
      parse_file((fs::path(dir.file("run")) / "eval_summary.json").string());
  CHECK(summary.at("estimators").contains("mc_dropout"));
  CHECK(summary.at("estimators").contains("lovme"));
}

TEST_CASE("failures leave a manifest naming the stage") {
  test::TempDir dir;

  SUBCASE("data stage") {
    ExperimentConfig config = smoke_config(dir.file("run"));
    config.data.source = "csv";
    config.data.train_csv = dir.file("absent_train.csv");
    config.data.test_csv = dir.file("absent_test.csv");
    CHECK_THROWS_AS(run_experiment(config), FormatError);
    const Manifest man = load_manifest(
        (fs::path(dir.file("run")) / "manifest.json").string());
    CHECK(man.status == "failed");
    CHECK(man.failed_stage == "data");
    CHECK(man.cleanup_policy == "partial artifacts kept");
  }

  SUBCASE("train stage") {
    ExperimentConfig config = smoke_config(dir.file("run"));
    config.train.learning_rate = 1e18;
    config.train.epochs = 40;
    CHECK_THROWS_AS(run_experiment(config), TrainError);
    const Manifest man = load_manifest(
        (fs::path(dir.file("run")) / "manifest.json").string());
    CHECK(man.status == "failed");
    CHECK(man.failed_stage == "train");
    // Artifacts written before the failure are still recorded.
    CHECK(man.outputs.count("train.csv") == 1);
  }
}

TEST_CASE("manifests round trip through json") {
  test::TempDir dir;
  Manifest man;
  man.status = "failed";
  man.failed_stage = "estimate";
  man.config = smoke_config("elsewhere/out");
  man.config.rejection_qs = {0.05, 0.25};
  man.config.normalize = NormalizeMode::StdDev;
  man.config.chain.kernel = ProposalKernel::SizeResample;
  man.config.oracle_mode = LossMode::RandomLabel;
  man.resolved_beta = 2.75;
  man.resolved_workers = 6;
  man.input_hashes["a.csv"] = "00000000deadbeef";
  man.outputs["train.csv"] = "123456789abcdef0";

  const std::string path = dir.file("manifest.json");
  write_manifest(path, man);
  const Manifest back = load_manifest(path);

  CHECK(back.schema == "lovme-manifest/1");
  CHECK(back.status == "failed");
  CHECK(back.failed_stage == "estimate");
  CHECK(back.cleanup_policy == man.cleanup_policy);
  CHECK(back.config.data.train_n == man.config.data.train_n);
  CHECK(back.config.train.hidden_widths == man.config.train.hidden_widths);
  CHECK(back.config.chain.kernel == ProposalKernel::SizeResample);
  CHECK(back.config.oracle_mode == LossMode::RandomLabel);
  CHECK(back.config.rejection_qs == man.config.rejection_qs);
  CHECK(back.config.normalize == NormalizeMode::StdDev);
  CHECK(back.config.output_dir == "elsewhere/out");
  CHECK(back.resolved_beta == 2.75);
  CHECK(back.resolved_workers == 6);
  CHECK(back.input_hashes == man.input_hashes);
  CHECK(back.outputs == man.outputs);
}

TEST_CASE("manifest loader rejects malformed files") {
  test::TempDir dir;
  CHECK_THROWS_AS(load_manifest(dir.file("absent.json")), FormatError);

  auto spit = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir.file(name));
    out << text;
  };
  spit("syntax.json", "{\"schema\": ");
  CHECK_THROWS_AS(load_manifest(dir.file("syntax.json")), FormatError);

  spit("schema.json", "{\"schema\": \"lovme-manifest/9\"}");
  CHECK_THROWS_AS(load_manifest(dir.file("schema.json")), FormatError);

  spit("missing.json", "{\"schema\": \"lovme-manifest/1\", \"status\": \"ok\"}");
  CHECK_THROWS_AS(load_manifest(dir.file("missing.json")), FormatError);
}

TEST_CASE("oracle check reports small chain error on an enumerable net") {
  const Network net = test::tiny_net(8, 4);
  const Sample sample = test::blob_sample();
  const std::vector<GibbsParams> grid = {{0.5, 0.1}, {2.0, 0.0}};
  const LossOracle oracle{LossMode::TrueLabel, 0};

  ChainConfig chain;
  chain.transitions = 40000;
  chain.burn_in = 2000;
  chain.thin = 1;
  chain.seed = 17;

  const auto rows = oracle_check(net, sample, grid, chain, oracle);
  REQUIRE(rows.size() == 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].beta == grid[i].beta);
    CHECK(rows[i].eta == grid[i].eta);
    const OracleResult exact =
        enumerate_gibbs(net, sample, grid[i], oracle, 0);
    CHECK(rows[i].oracle_mean == exact.mean_loss);
    CHECK(rows[i].oracle_var == exact.var_loss);
    CHECK(rows[i].rel_mean_err < 0.05);
    CHECK(rows[i].rel_var_err < 0.20);
    CHECK(rows[i].rel_mean_err ==
          doctest::Approx(std::fabs(rows[i].chain_mean - rows[i].oracle_mean) /
                          std::max(std::fabs(rows[i].oracle_mean), 1e-12)));
  }

  CHECK_THROWS_AS(
      oracle_check(net, sample, std::vector<GibbsParams>{}, chain, oracle),
      ParamError);
}

TEST_CASE("oracle check rows serialize to csv") {
  test::TempDir dir;
  std::vector<OracleCheckRow> rows(2);
  rows[0] = {0.5, 0.1, 1.25, 0.5, 1.2, 0.55, 0.04, 0.1};
  rows[1] = {2.0, 0.0, 0.75, 0.25, 0.75, 0.25, 0.0, 0.0};
  const std::string path = dir.file("check.csv");
  write_oracle_check_csv(path, rows);

  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line ==
        "beta,eta,oracle_mean,oracle_var,chain_mean,chain_var,"
        "rel_mean_err,rel_var_err");
  REQUIRE(std::getline(in, line));
  CHECK(line == "0.5,0.1,1.25,0.5,1.2,0.55,0.04,0.1");
  REQUIRE(std::getline(in, line));
  CHECK(line == "2,0,0.75,0.25,0.75,0.25,0,0");
  CHECK_FALSE(std::getline(in, line));
}
