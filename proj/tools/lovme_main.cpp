// lovme: uncertainty estimation for dropout-trained classifiers.
//
// Subcommands: train, lovme, mc-dropout, ground-truth, eval, oracle-check,
// run. Exit codes: 0 success, 2 configuration error, 3 data-format error,
// 4 numeric/chain error.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lovme/baselines.hpp"
#include "lovme/dataset_io.hpp"
#include "lovme/errors.hpp"
#include "lovme/eval.hpp"
#include "lovme/experiment.hpp"
#include "lovme/gibbs_oracle.hpp"
#include "lovme/report_io.hpp"
#include "lovme/sampler.hpp"
#include "lovme/trainer.hpp"
#include "lovme/util.hpp"
#include "lovme/weights_io.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

struct CliState {
  lovme::ExperimentConfig config;
  std::string beta_text = "auto";  // "auto" or a number
  std::string estimators = "lovme";
  std::string oracle_mode = "predicted_label";
  std::string kernel = "single_flip";
  std::string normalize = "minmax";
  // single-dataset commands
  std::string data_csv;
  std::string weights;
  std::string reports_out = "reports.json";
  std::string traces_dir;
  std::string ground_truth_json;
  std::string summary_out = "eval_summary.json";
  std::string curves_dir;
  std::string weights_out = "weights.tnlw";
  std::string log_out;
  std::string from_manifest;
  std::size_t sample_index = 0;
  std::vector<double> betas{1.0};
  std::vector<double> etas{0.0};
  std::string oracle_json;
  std::string table_out = "oracle_check.csv";
};

void add_dataset_flags(CLI::App* cmd, lovme::DatasetSpec& d) {
  cmd->add_option("--source", d.source, "dataset source: blobs | csv | idx");
  cmd->add_option("--train-n", d.train_n, "blob training samples");
  cmd->add_option("--test-n", d.test_n, "blob test samples");
  cmd->add_option("--classes", d.classes, "blob class count");
  cmd->add_option("--noise-sigma", d.noise_sigma, "blob feature noise sigma");
  cmd->add_option("--label-noise-rate", d.label_noise_rate,
                  "fraction of labels flipped");
  cmd->add_option("--data-seed", d.data_seed, "dataset seed");
  cmd->add_option("--train-csv", d.train_csv, "training split csv");
  cmd->add_option("--test-csv", d.test_csv, "test split csv");
  cmd->add_option("--train-images", d.train_images, "idx training images");
  cmd->add_option("--train-labels", d.train_labels, "idx training labels");
  cmd->add_option("--test-images", d.test_images, "idx test images");
  cmd->add_option("--test-labels", d.test_labels, "idx test labels");
  cmd->add_option("--train-limit", d.train_limit, "cap on training samples");
  cmd->add_option("--test-limit", d.test_limit, "cap on test samples");
  cmd->add_option("--perturb-fraction", d.perturb_fraction,
                  "fraction of test images to perturb");
  cmd->add_option("--rotation-max-deg", d.rotation_max_deg,
                  "perturbation rotation bound (degrees)");
  cmd->add_option("--perturb-sigma", d.perturb_sigma,
                  "perturbation pixel noise sigma");
  cmd->add_option("--perturb-seed", d.perturb_seed, "perturbation seed");
}

void add_train_flags(CLI::App* cmd, lovme::TrainConfig& t) {
  cmd->add_option("--hidden", t.hidden_widths, "hidden layer widths");
  cmd->add_option("--dropout-p", t.dropout_p, "keep probability");
  cmd->add_option("--lr", t.learning_rate, "learning rate");
  cmd->add_option("--momentum", t.momentum, "sgd momentum");
  cmd->add_option("--epochs", t.epochs, "training epochs");
  cmd->add_option("--batch-size", t.batch_size, "minibatch size");
  cmd->add_option("--train-seed", t.seed, "training seed");
}

void add_chain_flags(CLI::App* cmd, CliState& s) {
  cmd->add_option("--beta", s.beta_text,
                  "inverse temperature; 'auto' = 1/mean test loss");
  cmd->add_option("--eta", s.config.chain.params.eta, "chemical potential");
  cmd->add_option("--transitions", s.config.chain.transitions,
                  "chain transitions");
  cmd->add_option("--burn-in", s.config.chain.burn_in, "burn-in transitions");
  cmd->add_option("--thin", s.config.chain.thin, "record every thin-th state");
  cmd->add_option("--kernel", s.kernel,
                  "proposal kernel: single_flip | size_resample");
  cmd->add_option("--chain-seed", s.config.chain.seed, "chain master seed");
}

void add_oracle_flags(CLI::App* cmd, CliState& s) {
  cmd->add_option("--oracle-mode", s.oracle_mode,
                  "loss target: true_label | predicted_label | random_label");
  cmd->add_option("--oracle-seed", s.config.oracle_seed,
                  "seed for random_label mode");
}

// Resolves the string-typed flags into the config enums; throws ConfigError
// on bad values.
void finish_config(CliState& s) {
  try {
    s.config.chain.kernel = lovme::kernel_from_string(s.kernel);
    s.config.oracle_mode = lovme::loss_mode_from_string(s.oracle_mode);
    s.config.normalize = lovme::normalize_mode_from_string(s.normalize);
    if (s.beta_text == "auto") {
      s.config.beta_auto = true;
    } else {
      s.config.beta_auto = false;
      std::size_t pos = 0;
      s.config.chain.params.beta = std::stod(s.beta_text, &pos);
      if (pos != s.beta_text.size())
        throw lovme::ConfigError("bad --beta value '" + s.beta_text + "'");
    }
    s.config.with_lovme = s.config.with_mc_dropout =
        s.config.with_ground_truth = false;
    std::stringstream ss(s.estimators);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item == "lovme") s.config.with_lovme = true;
      else if (item == "mc_dropout") s.config.with_mc_dropout = true;
      else if (item == "ground_truth") s.config.with_ground_truth = true;
      else throw lovme::ConfigError("unknown estimator '" + item + "'");
    }
  } catch (const std::invalid_argument&) {
    throw lovme::ConfigError("bad --beta value '" + s.beta_text + "'");
  } catch (const lovme::ParamError& e) {
    throw lovme::ConfigError(e.what());
  }
}

lovme::Dataset load_internal_csv(const std::string& path) {
  if (path.empty()) throw lovme::ConfigError("--data is required");
  return lovme::load_csv(path);
}

int cmd_train(CliState& s) {
  finish_config(s);
  lovme::validate(s.config.train);
  lovme::Dataset train_d;
  if (s.config.data.source == "blobs") {
    auto tr = lovme::synth_blobs(s.config.data.train_n, s.config.data.classes,
                                 s.config.data.noise_sigma,
                                 s.config.data.label_noise_rate,
                                 lovme::derive_seed(s.config.data.data_seed, 0));
    train_d = std::move(tr.data);
  } else if (s.config.data.source == "csv") {
    train_d = lovme::load_csv(s.config.data.train_csv);
  } else {
    train_d = lovme::load_idx(s.config.data.train_images,
                              s.config.data.train_labels,
                              s.config.data.train_limit);
  }
  std::vector<lovme::EpochStats> history;
  const lovme::Network net = lovme::train(s.config.train, train_d, &history);
  lovme::save_weights(net, s.weights_out);
  if (!s.log_out.empty()) lovme::write_train_log_csv(s.log_out, history);
  const lovme::EpochStats final = lovme::evaluate(net, train_d);
  std::printf("trained %zu epochs: loss %.6f accuracy %.4f -> %s\n",
              s.config.train.epochs, final.loss, final.accuracy,
              s.weights_out.c_str());
  return 0;
}

int cmd_lovme(CliState& s) {
  finish_config(s);
  const lovme::Network net = lovme::load_weights(s.weights);
  const lovme::Dataset data = load_internal_csv(s.data_csv);
  lovme::ChainConfig cc = s.config.chain;
  if (s.config.beta_auto) {
    const double mean_loss = lovme::evaluate(net, data).loss;
    cc.params.beta = 1.0 / std::max(mean_loss, 1e-6);
  }
  const lovme::LossOracle oracle{s.config.oracle_mode, s.config.oracle_seed};
  const int workers = s.config.workers;
  std::vector<lovme::UncertaintyReport> reports;
  if (!s.traces_dir.empty()) {
    fs::create_directories(s.traces_dir);
    reports.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      lovme::ChainConfig local = cc;
      local.seed = lovme::derive_seed(cc.seed, i);
      const lovme::LossTrace trace =
          lovme::run_chain(net, data.samples[i], local, oracle, i);
      reports[i] = lovme::estimate(trace, net, data.samples[i], i);
      char rel[64];
      std::snprintf(rel, sizeof rel, "sample_%zu.csv", i);
      lovme::write_trace_csv((fs::path(s.traces_dir) / rel).string(), trace);
    }
  } else {
    reports = lovme::run_chains_parallel(net, data, cc, oracle,
                                         workers > 0 ? workers : 1);
  }
  lovme::write_reports_json(s.reports_out, reports);
  std::printf("lovme: %zu chains (beta %.6g, eta %.6g) -> %s\n", data.size(),
              cc.params.beta, cc.params.eta, s.reports_out.c_str());
  return 0;
}

int cmd_mc_dropout(CliState& s) {
  finish_config(s);
  const lovme::Network net = lovme::load_weights(s.weights);
  const lovme::Dataset data = load_internal_csv(s.data_csv);
  const lovme::LossOracle oracle{s.config.oracle_mode, s.config.oracle_seed};
  const int workers = s.config.workers > 0 ? s.config.workers : 1;
  const std::vector<lovme::UncertaintyReport> reports =
      lovme::mc_dropout_all(net, data, s.config.mc_p, s.config.mc_passes,
                            s.config.mc_seed, oracle, workers);
  lovme::write_reports_json(s.reports_out, reports);
  std::printf("mc-dropout: %zu samples x %zu passes (p %.3f) -> %s\n",
              data.size(), s.config.mc_passes, s.config.mc_p,
              s.reports_out.c_str());
  return 0;
}

int cmd_ground_truth(CliState& s) {
  finish_config(s);
  lovme::Dataset train_d, test_d;
  if (s.config.data.source == "blobs") {
    auto tr = lovme::synth_blobs(s.config.data.train_n, s.config.data.classes,
                                 s.config.data.noise_sigma,
                                 s.config.data.label_noise_rate,
                                 lovme::derive_seed(s.config.data.data_seed, 0));
    auto te = lovme::synth_blobs(s.config.data.test_n, s.config.data.classes,
                                 s.config.data.noise_sigma,
                                 s.config.data.label_noise_rate,
                                 lovme::derive_seed(s.config.data.data_seed, 1));
    train_d = std::move(tr.data);
    test_d = std::move(te.data);
  } else if (s.config.data.source == "csv") {
    train_d = lovme::load_csv(s.config.data.train_csv);
    test_d = lovme::load_csv(s.config.data.test_csv, train_d.class_count);
  } else {
    train_d = lovme::load_idx(s.config.data.train_images,
                              s.config.data.train_labels,
                              s.config.data.train_limit);
    test_d = lovme::load_idx(s.config.data.test_images,
                             s.config.data.test_labels,
                             s.config.data.test_limit);
  }
  test_d.split = lovme::Split::Test;
  const int workers = s.config.workers > 0 ? s.config.workers : 1;
  const lovme::GroundTruthReport gt = lovme::ground_truth_ensemble(
      s.config.train, train_d, test_d, s.config.ensemble_size,
      s.config.ensemble_seed, workers);
  lovme::write_ground_truth_json(s.reports_out, gt);
  std::printf("ground-truth: ensemble of %zu over %zu samples -> %s\n",
              gt.ensemble_size, test_d.size(), s.reports_out.c_str());
  return 0;
}

int cmd_eval(CliState& s) {
  finish_config(s);
  const std::vector<lovme::UncertaintyReport> reports =
      lovme::load_reports_json(s.reports_out);
  const lovme::Dataset data = load_internal_csv(s.data_csv);
  if (reports.size() != data.size())
    throw lovme::FormatError("report count does not match dataset size");

  std::vector<double> raw(reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) raw[i] = reports[i].var_loss;
  const std::vector<double> u =
      lovme::normalize_uncertainty(raw, s.config.normalize);
  std::vector<lovme::MulticlassRecord> records(reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    records[i].sample_id = reports[i].sample_id;
    records[i].probs = reports[i].h_score;
    records[i].label = int(data.samples[i].label);
    records[i].u = u[i];
  }
  const int class_count = int(data.class_count);

  Json summary;
  const lovme::MacroAuc base = lovme::macro_auc(records, class_count);
  summary["auc"] = base.macro;
  summary["auc_per_class"] = base.per_class;
  lovme::KahanSum<double> opt_sum, pes_sum;
  for (int c = 0; c < class_count; ++c) {
    const lovme::BandRoc bands =
        lovme::band_roc(lovme::multiclass_to_binary(records, c));
    opt_sum.add(bands.optimistic.auc);
    pes_sum.add(bands.pessimistic.auc);
  }
  summary["auc_optimistic"] = opt_sum.value() / double(class_count);
  summary["auc_pessimistic"] = pes_sum.value() / double(class_count);
  Json rejections = Json::array();
  for (double q : s.config.rejection_qs) {
    const lovme::MacroRejectionResult r =
        lovme::macro_rejection_auc(records, class_count, q);
    Json row;
    row["q"] = q;
    row["auc"] = r.auc.macro;
    row["kept_fraction"] = r.kept_fraction;
    row["rejected"] = r.rejected;
    rejections.push_back(row);
  }
  summary["rejection"] = rejections;

  if (!s.ground_truth_json.empty()) {
    const lovme::GroundTruthReport gt =
        lovme::load_ground_truth_json(s.ground_truth_json);
    const lovme::CorrelationReport corr = lovme::uncertainty_correlation(
        raw, gt.mean_prob, s.config.restrict_below);
    summary["pearson_r"] = corr.r;
    summary["pearson_p_value"] = corr.p_value;
    summary["pearson_r_restricted"] = corr.r_restricted;
    summary["pearson_p_value_restricted"] = corr.p_value_restricted;
  }

  if (!s.curves_dir.empty()) {
    fs::create_directories(s.curves_dir);
    for (int c = 0; c < class_count; ++c) {
      const std::vector<lovme::EvalRecord> binary =
          lovme::multiclass_to_binary(records, c);
      char rel[64];
      std::snprintf(rel, sizeof rel, "roc_class%d.csv", c);
      lovme::write_roc_csv((fs::path(s.curves_dir) / rel).string(),
                           lovme::roc_auc(binary));
    }
  }

  std::ofstream out(s.summary_out);
  if (!out) throw lovme::FormatError("cannot open '" + s.summary_out + "'");
  out << summary.dump(2) << '\n';
  std::printf("eval: macro auc %.6f -> %s\n", base.macro,
              s.summary_out.c_str());
  return 0;
}

int cmd_oracle_check(CliState& s) {
  finish_config(s);
  const lovme::Network net = lovme::load_weights(s.weights);
  const lovme::Dataset data = load_internal_csv(s.data_csv);
  if (s.sample_index >= data.size())
    throw lovme::ConfigError("--sample-index outside dataset");
  const lovme::Sample& sample = data.samples[s.sample_index];
  const lovme::LossOracle oracle{s.config.oracle_mode, s.config.oracle_seed};

  std::vector<lovme::GibbsParams> grid;
  for (double b : s.betas)
    for (double e : s.etas) grid.push_back({b, e});
  const std::vector<lovme::OracleCheckRow> rows = lovme::oracle_check(
      net, sample, grid, s.config.chain, oracle, s.sample_index);
  lovme::write_oracle_check_csv(s.table_out, rows);

  if (!s.oracle_json.empty()) {
    Json arr = Json::array();
    for (const lovme::GibbsParams& params : grid) {
      const lovme::OracleResult r =
          lovme::enumerate_gibbs(net, sample, params, oracle, s.sample_index);
      Json j;
      j["beta"] = params.beta;
      j["eta"] = params.eta;
      j["log_z"] = r.log_z;
      j["mean_loss"] = r.mean_loss;
      j["mean_n"] = r.mean_n;
      j["var_loss"] = r.var_loss;
      j["var_n"] = r.var_n;
      j["k3_loss"] = r.k3_loss;
      j["k4_loss"] = r.k4_loss;
      arr.push_back(j);
    }
    std::ofstream out(s.oracle_json);
    if (!out) throw lovme::FormatError("cannot open '" + s.oracle_json + "'");
    out << arr.dump(2) << '\n';
  }
  double worst = 0.0;
  for (const lovme::OracleCheckRow& r : rows)
    worst = std::max(worst, r.rel_var_err);
  std::printf("oracle-check: %zu grid points, worst var rel err %.4f -> %s\n",
              rows.size(), worst, s.table_out.c_str());
  return 0;
}

int cmd_run(CliState& s) {
  lovme::Manifest man;
  if (!s.from_manifest.empty()) {
    man = lovme::rerun_from_manifest(s.from_manifest, s.config.output_dir,
                                     s.config.workers);
  } else {
    finish_config(s);
    man = lovme::run_experiment(s.config);
  }
  std::printf("run: %zu outputs under %s (status %s)\n", man.outputs.size(),
              man.config.output_dir.c_str(), man.status.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"loss-variance uncertainty estimation for dropout networks"};
  app.require_subcommand(1);
  CliState s;

  CLI::App* train = app.add_subcommand("train", "train a dropout classifier");
  add_dataset_flags(train, s.config.data);
  add_train_flags(train, s.config.train);
  train->add_option("--weights-out", s.weights_out, "weight file to write");
  train->add_option("--log-out", s.log_out, "training log csv");

  CLI::App* chain = app.add_subcommand("lovme", "run loss-variance chains");
  chain->add_option("--weights", s.weights, "trained weight file")->required();
  chain->add_option("--data", s.data_csv, "dataset csv")->required();
  add_chain_flags(chain, s);
  add_oracle_flags(chain, s);
  chain->add_option("--workers", s.config.workers, "worker threads");
  chain->add_option("--reports-out", s.reports_out, "report json to write");
  chain->add_option("--traces-dir", s.traces_dir,
                    "directory for per-sample trace csvs");

  CLI::App* mc = app.add_subcommand("mc-dropout", "uniform mc-dropout baseline");
  mc->add_option("--weights", s.weights, "trained weight file")->required();
  mc->add_option("--data", s.data_csv, "dataset csv")->required();
  mc->add_option("--p", s.config.mc_p, "keep probability");
  mc->add_option("--passes", s.config.mc_passes, "forward passes per sample");
  mc->add_option("--seed", s.config.mc_seed, "sampling seed");
  add_oracle_flags(mc, s);
  mc->add_option("--workers", s.config.workers, "worker threads");
  mc->add_option("--reports-out", s.reports_out, "report json to write");

  CLI::App* gt = app.add_subcommand("ground-truth",
                                    "retrained-ensemble ground truth");
  add_dataset_flags(gt, s.config.data);
  add_train_flags(gt, s.config.train);
  gt->add_option("--ensemble-size", s.config.ensemble_size, "member count");
  gt->add_option("--ensemble-seed", s.config.ensemble_seed, "master seed");
  gt->add_option("--workers", s.config.workers, "worker threads");
  gt->add_option("--reports-out", s.reports_out, "report json to write");

  CLI::App* ev = app.add_subcommand("eval", "roc/auc, bands and rejection");
  ev->add_option("--reports", s.reports_out, "uncertainty report json")
      ->required();
  ev->add_option("--data", s.data_csv, "dataset csv with labels")->required();
  ev->add_option("--ground-truth", s.ground_truth_json,
                 "ensemble report json for the correlation study");
  ev->add_option("--rejection-q", s.config.rejection_qs,
                 "uncertainty quantiles to reject");
  ev->add_option("--normalize", s.normalize,
                 "band width scaling: minmax | raw | stddev");
  ev->add_option("--restrict-below", s.config.restrict_below,
                 "correlation probability cutoff");
  ev->add_option("--summary-out", s.summary_out, "summary json to write");
  ev->add_option("--curves-dir", s.curves_dir, "directory for roc csvs");

  CLI::App* oc = app.add_subcommand("oracle-check",
                                    "exact enumeration vs chain estimates");
  oc->add_option("--weights", s.weights, "trained weight file")->required();
  oc->add_option("--data", s.data_csv, "dataset csv")->required();
  oc->add_option("--sample-index", s.sample_index, "sample to analyze");
  oc->add_option("--betas", s.betas, "inverse temperatures to check");
  oc->add_option("--etas", s.etas, "chemical potentials to check");
  oc->add_option("--transitions", s.config.chain.transitions,
                 "chain transitions");
  oc->add_option("--burn-in", s.config.chain.burn_in, "burn-in transitions");
  oc->add_option("--thin", s.config.chain.thin, "record every thin-th state");
  oc->add_option("--kernel", s.kernel, "proposal kernel");
  oc->add_option("--chain-seed", s.config.chain.seed, "chain seed");
  add_oracle_flags(oc, s);
  oc->add_option("--out", s.table_out, "comparison table csv");
  oc->add_option("--oracle-json", s.oracle_json, "exact moment json to write");

  CLI::App* run = app.add_subcommand("run", "full train/estimate/eval pipeline");
  run->set_config("--config", "", "key=value configuration file");
  add_dataset_flags(run, s.config.data);
  add_train_flags(run, s.config.train);
  add_chain_flags(run, s);
  add_oracle_flags(run, s);
  run->add_option("--estimators", s.estimators,
                  "comma list of lovme,mc_dropout,ground_truth");
  run->add_option("--mc-p", s.config.mc_p, "mc-dropout keep probability");
  run->add_option("--mc-passes", s.config.mc_passes, "mc-dropout passes");
  run->add_option("--mc-seed", s.config.mc_seed, "mc-dropout seed");
  run->add_option("--ensemble-size", s.config.ensemble_size,
                  "ground-truth ensemble members");
  run->add_option("--ensemble-seed", s.config.ensemble_seed,
                  "ground-truth master seed");
  run->add_option("--rejection-q", s.config.rejection_qs,
                  "uncertainty quantiles to reject");
  run->add_option("--normalize", s.normalize,
                  "band width scaling: minmax | raw | stddev");
  run->add_option("--restrict-below", s.config.restrict_below,
                  "correlation probability cutoff");
  run->add_flag("--emit-traces", s.config.emit_traces,
                "write per-sample trace csvs");
  run->add_option("--workers", s.config.workers, "worker threads (0 = all)");
  run->add_option("--out", s.config.output_dir, "artifact directory");
  run->add_option("--from-manifest", s.from_manifest,
                  "re-execute a recorded run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) return cmd_train(s);
    if (chain->parsed()) return cmd_lovme(s);
    if (mc->parsed()) return cmd_mc_dropout(s);
    if (gt->parsed()) return cmd_ground_truth(s);
    if (ev->parsed()) return cmd_eval(s);
    if (oc->parsed()) return cmd_oracle_check(s);
    if (run->parsed()) return cmd_run(s);
  } catch (const lovme::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const lovme::ParamError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const lovme::CapacityError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const lovme::FormatError& e) {
    std::fprintf(stderr, "data-format error: %s\n", e.what());
    return 3;
  } catch (const lovme::ShapeError& e) {
    std::fprintf(stderr, "data-format error: %s\n", e.what());
    return 3;
  } catch (const lovme::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
  return 0;
}
