#include "lovme/experiment.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "lovme/baselines.hpp"
#include "lovme/dataset_io.hpp"
#include "lovme/errors.hpp"
#include "lovme/gibbs_oracle.hpp"
#include "lovme/report_io.hpp"
#include "lovme/util.hpp"
#include "lovme/weights_io.hpp"

namespace lovme {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

std::string hash_hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  return buf;
}

std::string file_hash_hex(const std::string& path) {
  return hash_hex(fnv1a64_file(path));
}

Json dataset_spec_to_json(const DatasetSpec& d) {
  Json j;
  j["source"] = d.source;
  j["train_n"] = d.train_n;
  j["test_n"] = d.test_n;
  j["classes"] = d.classes;
  j["noise_sigma"] = d.noise_sigma;
  j["label_noise_rate"] = d.label_noise_rate;
  j["data_seed"] = d.data_seed;
  j["train_csv"] = d.train_csv;
  j["test_csv"] = d.test_csv;
  j["train_images"] = d.train_images;
  j["train_labels"] = d.train_labels;
  j["test_images"] = d.test_images;
  j["test_labels"] = d.test_labels;
  j["train_limit"] = d.train_limit;
  j["test_limit"] = d.test_limit;
  j["perturb_fraction"] = d.perturb_fraction;
  j["rotation_max_deg"] = d.rotation_max_deg;
  j["perturb_sigma"] = d.perturb_sigma;
  j["perturb_seed"] = d.perturb_seed;
  return j;
}

DatasetSpec dataset_spec_from_json(const Json& j) {
  DatasetSpec d;
  d.source = j.at("source").get<std::string>();
  d.train_n = j.at("train_n").get<std::size_t>();
  d.test_n = j.at("test_n").get<std::size_t>();
  d.classes = j.at("classes").get<std::size_t>();
  d.noise_sigma = j.at("noise_sigma").get<double>();
  d.label_noise_rate = j.at("label_noise_rate").get<double>();
  d.data_seed = j.at("data_seed").get<std::uint64_t>();
  d.train_csv = j.at("train_csv").get<std::string>();
  d.test_csv = j.at("test_csv").get<std::string>();
  d.train_images = j.at("train_images").get<std::string>();
  d.train_labels = j.at("train_labels").get<std::string>();
  d.test_images = j.at("test_images").get<std::string>();
  d.test_labels = j.at("test_labels").get<std::string>();
  d.train_limit = j.at("train_limit").get<std::size_t>();
  d.test_limit = j.at("test_limit").get<std::size_t>();
  d.perturb_fraction = j.at("perturb_fraction").get<double>();
  d.rotation_max_deg = j.at("rotation_max_deg").get<double>();
  d.perturb_sigma = j.at("perturb_sigma").get<double>();
  d.perturb_seed = j.at("perturb_seed").get<std::uint64_t>();
  return d;
}

Json train_config_to_json(const TrainConfig& t) {
  Json j;
  j["hidden_widths"] = t.hidden_widths;
  j["dropout_p"] = t.dropout_p;
  j["learning_rate"] = t.learning_rate;
  j["momentum"] = t.momentum;
  j["epochs"] = t.epochs;
  j["batch_size"] = t.batch_size;
  j["seed"] = t.seed;
  return j;
}

TrainConfig train_config_from_json(const Json& j) {
  TrainConfig t;
  t.hidden_widths = j.at("hidden_widths").get<std::vector<std::size_t>>();
  t.dropout_p = j.at("dropout_p").get<double>();
  t.learning_rate = j.at("learning_rate").get<double>();
  t.momentum = j.at("momentum").get<double>();
  t.epochs = j.at("epochs").get<std::size_t>();
  t.batch_size = j.at("batch_size").get<std::size_t>();
  t.seed = j.at("seed").get<std::uint64_t>();
  return t;
}

Json chain_config_to_json(const ChainConfig& c) {
  Json j;
  j["beta"] = c.params.beta;
  j["eta"] = c.params.eta;
  j["transitions"] = c.transitions;
  j["burn_in"] = c.burn_in;
  j["thin"] = c.thin;
  j["kernel"] = to_string(c.kernel);
  j["seed"] = c.seed;
  j["record_masks"] = c.record_masks;
  return j;
}

ChainConfig chain_config_from_json(const Json& j) {
  ChainConfig c;
  c.params.beta = j.at("beta").get<double>();
  c.params.eta = j.at("eta").get<double>();
  c.transitions = j.at("transitions").get<std::size_t>();
  c.burn_in = j.at("burn_in").get<std::size_t>();
  c.thin = j.at("thin").get<std::size_t>();
  c.kernel = kernel_from_string(j.at("kernel").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  c.record_masks = j.at("record_masks").get<bool>();
  return c;
}

Json config_to_json(const ExperimentConfig& c) {
  Json j;
  j["data"] = dataset_spec_to_json(c.data);
  j["train"] = train_config_to_json(c.train);
  j["chain"] = chain_config_to_json(c.chain);
  j["beta_auto"] = c.beta_auto;
  j["oracle_mode"] = to_string(c.oracle_mode);
  j["oracle_seed"] = c.oracle_seed;
  j["with_lovme"] = c.with_lovme;
  j["with_mc_dropout"] = c.with_mc_dropout;
  j["with_ground_truth"] = c.with_ground_truth;
  j["mc_p"] = c.mc_p;
  j["mc_passes"] = c.mc_passes;
  j["mc_seed"] = c.mc_seed;
  j["ensemble_size"] = c.ensemble_size;
  j["ensemble_seed"] = c.ensemble_seed;
  j["rejection_qs"] = c.rejection_qs;
  j["normalize"] = to_string(c.normalize);
  j["restrict_below"] = c.restrict_below;
  j["emit_traces"] = c.emit_traces;
  j["workers"] = c.workers;
  j["output_dir"] = c.output_dir;
  return j;
}

ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig c;
  c.data = dataset_spec_from_json(j.at("data"));
  c.train = train_config_from_json(j.at("train"));
  c.chain = chain_config_from_json(j.at("chain"));
  c.beta_auto = j.at("beta_auto").get<bool>();
  c.oracle_mode = loss_mode_from_string(j.at("oracle_mode").get<std::string>());
  c.oracle_seed = j.at("oracle_seed").get<std::uint64_t>();
  c.with_lovme = j.at("with_lovme").get<bool>();
  c.with_mc_dropout = j.at("with_mc_dropout").get<bool>();
  c.with_ground_truth = j.at("with_ground_truth").get<bool>();
  c.mc_p = j.at("mc_p").get<double>();
  c.mc_passes = j.at("mc_passes").get<std::size_t>();
  c.mc_seed = j.at("mc_seed").get<std::uint64_t>();
  c.ensemble_size = j.at("ensemble_size").get<std::size_t>();
  c.ensemble_seed = j.at("ensemble_seed").get<std::uint64_t>();
  c.rejection_qs = j.at("rejection_qs").get<std::vector<double>>();
  c.normalize = normalize_mode_from_string(j.at("normalize").get<std::string>());
  c.restrict_below = j.at("restrict_below").get<double>();
  c.emit_traces = j.at("emit_traces").get<bool>();
  c.workers = j.at("workers").get<int>();
  c.output_dir = j.at("output_dir").get<std::string>();
  return c;
}

struct BuiltData {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> noised_label_ids;  // in the test split
  std::vector<std::size_t> perturbed_ids;
};

BuiltData build_datasets(const DatasetSpec& spec,
                         std::map<std::string, std::string>& input_hashes) {
  BuiltData built;
  if (spec.source == "blobs") {
    BlobsResult tr = synth_blobs(spec.train_n, spec.classes, spec.noise_sigma,
                                 spec.label_noise_rate,
                                 derive_seed(spec.data_seed, 0));
    BlobsResult te = synth_blobs(spec.test_n, spec.classes, spec.noise_sigma,
                                 spec.label_noise_rate,
                                 derive_seed(spec.data_seed, 1));
    built.train = std::move(tr.data);
    built.test = std::move(te.data);
    built.noised_label_ids = std::move(te.noised_ids);
  } else if (spec.source == "csv") {
    input_hashes[spec.train_csv] = file_hash_hex(spec.train_csv);
    input_hashes[spec.test_csv] = file_hash_hex(spec.test_csv);
    built.train = load_csv(spec.train_csv);
    built.test = load_csv(spec.test_csv, built.train.class_count);
  } else if (spec.source == "idx") {
    for (const std::string& p : {spec.train_images, spec.train_labels,
                                 spec.test_images, spec.test_labels})
      input_hashes[p] = file_hash_hex(p);
    built.train = load_idx(spec.train_images, spec.train_labels,
                           spec.train_limit);
    built.test = load_idx(spec.test_images, spec.test_labels, spec.test_limit);
  } else {
    throw ConfigError("unknown dataset source '" + spec.source + "'");
  }
  built.train.split = Split::Train;
  built.test.split = Split::Test;
  if (built.train.class_count != built.test.class_count)
    throw FormatError("train and test class counts differ");

  if (spec.perturb_fraction > 0.0) {
    PerturbResult pr = perturb(built.test, spec.perturb_fraction,
                               spec.rotation_max_deg, spec.perturb_sigma,
                               spec.perturb_seed);
    built.test = std::move(pr.data);
    built.perturbed_ids = std::move(pr.perturbed_ids);
  }
  validate(built.train);
  validate(built.test);
  return built;
}

std::vector<MulticlassRecord> make_records(
    const Dataset& test, std::span<const UncertaintyReport> reports,
    NormalizeMode normalize) {
  if (reports.size() != test.size())
    throw ShapeError("report count does not match test set size");
  std::vector<double> raw(reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) raw[i] = reports[i].var_loss;
  const std::vector<double> u = normalize_uncertainty(raw, normalize);

  std::vector<MulticlassRecord> records(reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    records[i].sample_id = reports[i].sample_id;
    records[i].probs = reports[i].h_score;
    records[i].label = int(test.samples[i].label);
    records[i].u = u[i];
  }
  return records;
}

Json eval_estimator(const std::vector<MulticlassRecord>& records,
                    int class_count, const ExperimentConfig& config,
                    const std::set<std::size_t>& flagged) {
  Json j;
  const MacroAuc base = macro_auc(records, class_count);
  j["auc"] = base.macro;
  j["auc_per_class"] = base.per_class;

  KahanSum<double> opt_sum, pes_sum;
  for (int c = 0; c < class_count; ++c) {
    const BandRoc bands = band_roc(multiclass_to_binary(records, c));
    opt_sum.add(bands.optimistic.auc);
    pes_sum.add(bands.pessimistic.auc);
  }
  j["auc_optimistic"] = opt_sum.value() / double(class_count);
  j["auc_pessimistic"] = pes_sum.value() / double(class_count);

  Json rejections = Json::array();
  for (double q : config.rejection_qs) {
    const MacroRejectionResult r = macro_rejection_auc(records, class_count, q);
    Json row;
    row["q"] = q;
    row["auc"] = r.auc.macro;
    row["kept_fraction"] = r.kept_fraction;
    row["rejected"] = r.rejected;
    rejections.push_back(row);
  }
  j["rejection"] = rejections;

  if (!flagged.empty()) {
    std::vector<MulticlassRecord> subset;
    for (const MulticlassRecord& r : records)
      if (flagged.count(r.sample_id)) subset.push_back(r);
    try {
      j["flagged_only_auc"] = macro_auc(subset, class_count).macro;
    } catch (const Error&) {
      j["flagged_only_auc"] = nullptr;  // subset too small or single-class
    }
  } else {
    j["flagged_only_auc"] = nullptr;
  }
  return j;
}

void write_estimator_curves(const std::string& dir, const std::string& name,
                            const std::vector<MulticlassRecord>& records,
                            int class_count, Manifest& man,
                            const std::string& out_root);

Json manifest_to_json(const Manifest& m) {
  Json j;
  j["schema"] = m.schema;
  j["status"] = m.status;
  j["failed_stage"] = m.failed_stage;
  j["cleanup_policy"] = m.cleanup_policy;
  j["config"] = config_to_json(m.config);
  Json resolved;
  resolved["beta"] = m.resolved_beta;
  resolved["workers"] = m.resolved_workers;
  j["resolved"] = resolved;
  j["input_hashes"] = m.input_hashes;
  j["outputs"] = m.outputs;
  return j;
}

Manifest manifest_from_json(const Json& j) {
  Manifest m;
  try {
    m.schema = j.at("schema").get<std::string>();
    if (m.schema != "lovme-manifest/1")
      throw FormatError("unsupported manifest schema '" + m.schema + "'");
    m.status = j.at("status").get<std::string>();
    m.failed_stage = j.at("failed_stage").get<std::string>();
    m.cleanup_policy = j.at("cleanup_policy").get<std::string>();
    m.config = config_from_json(j.at("config"));
    m.resolved_beta = j.at("resolved").at("beta").get<double>();
    m.resolved_workers = j.at("resolved").at("workers").get<int>();
    m.input_hashes =
        j.at("input_hashes").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad manifest: ") + e.what());
  }
  return m;
}

// Registers a freshly written artifact under its path relative to the run
// directory and hashes its bytes.
void add_output(Manifest& man, const std::string& out_root,
                const std::string& rel) {
  man.outputs[rel] = file_hash_hex((fs::path(out_root) / rel).string());
}

void write_estimator_curves(const std::string& dir, const std::string& name,
                            const std::vector<MulticlassRecord>& records,
                            int class_count, Manifest& man,
                            const std::string& out_root) {
  for (int c = 0; c < class_count; ++c) {
    const std::vector<EvalRecord> binary = multiclass_to_binary(records, c);
    const RocCurve base = roc_auc(binary);
    const BandRoc bands = band_roc(binary);
    char rel[128];
    std::snprintf(rel, sizeof rel, "curves/roc_%s_class%d.csv", name.c_str(), c);
    write_roc_csv((fs::path(dir) / rel).string(), base);
    add_output(man, out_root, rel);
    std::snprintf(rel, sizeof rel, "curves/roc_%s_class%d_optimistic.csv",
                  name.c_str(), c);
    write_roc_csv((fs::path(dir) / rel).string(), bands.optimistic);
    add_output(man, out_root, rel);
    std::snprintf(rel, sizeof rel, "curves/roc_%s_class%d_pessimistic.csv",
                  name.c_str(), c);
    write_roc_csv((fs::path(dir) / rel).string(), bands.pessimistic);
    add_output(man, out_root, rel);
  }
}

void write_json_artifact(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw FormatError("write failed for '" + path + "'");
}

}  // namespace

void validate(const ExperimentConfig& config) {
  const DatasetSpec& d = config.data;
  if (d.source != "blobs" && d.source != "csv" && d.source != "idx")
    throw ConfigError("unknown dataset source '" + d.source + "'");
  if (d.source == "blobs") {
    if (d.classes < 2) throw ConfigError("blobs need at least 2 classes");
    if (d.train_n < d.classes || d.test_n < d.classes)
      throw ConfigError("blob split sizes must be >= class count");
    if (!(d.label_noise_rate >= 0.0 && d.label_noise_rate <= 1.0))
      throw ConfigError("label_noise_rate must be in [0, 1]");
    if (!(d.noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
    if (d.perturb_fraction > 0.0)
      throw ConfigError("perturbation needs image-shaped data, not blobs");
  } else if (d.source == "csv") {
    if (d.train_csv.empty() || d.test_csv.empty())
      throw ConfigError("csv source needs train_csv and test_csv paths");
  } else {
    if (d.train_images.empty() || d.train_labels.empty() ||
        d.test_images.empty() || d.test_labels.empty())
      throw ConfigError("idx source needs all four image/label paths");
  }
  if (!(d.perturb_fraction >= 0.0 && d.perturb_fraction <= 1.0))
    throw ConfigError("perturb_fraction must be in [0, 1]");

  try {
    validate(config.train);
    ChainConfig probe = config.chain;
    if (config.beta_auto) probe.params.beta = 1.0;
    validate(probe);
  } catch (const ParamError& e) {
    throw ConfigError(e.what());
  }

  if (!config.with_lovme && !config.with_mc_dropout && !config.with_ground_truth)
    throw ConfigError("no estimator selected");
  if (config.with_mc_dropout) {
    if (!(config.mc_p > 0.0) || config.mc_p > 1.0)
      throw ConfigError("mc_p must be in (0, 1]");
    if (config.mc_passes < 2) throw ConfigError("mc_passes must be >= 2");
  }
  if (config.with_ground_truth && config.ensemble_size < 2)
    throw ConfigError("ensemble_size must be >= 2");
  for (double q : config.rejection_qs)
    if (!(q >= 0.0 && q < 1.0))
      throw ConfigError("rejection quantiles must be in [0, 1)");
  if (!(config.restrict_below > 0.0 && config.restrict_below <= 1.0))
    throw ConfigError("restrict_below must be in (0, 1]");
  if (config.workers < 0) throw ConfigError("workers must be >= 0");
  if (config.output_dir.empty()) throw ConfigError("output_dir is empty");
}

Manifest run_experiment(const ExperimentConfig& config) {
  validate(config);
  const std::string dir = config.output_dir;
  fs::create_directories(fs::path(dir) / "curves");
  if (config.emit_traces) fs::create_directories(fs::path(dir) / "traces");

  Manifest man;
  man.config = config;
  man.resolved_workers =
      config.workers > 0 ? config.workers : omp_get_max_threads();
  const int workers = man.resolved_workers;

  std::string stage = "data";
  try {
    BuiltData built = build_datasets(config.data, man.input_hashes);
    save_csv((fs::path(dir) / "train.csv").string(), built.train);
    add_output(man, dir, "train.csv");
    save_csv((fs::path(dir) / "test.csv").string(), built.test);
    add_output(man, dir, "test.csv");
    {
      Json flagged;
      flagged["noised_label_ids"] = built.noised_label_ids;
      flagged["perturbed_ids"] = built.perturbed_ids;
      write_json_artifact((fs::path(dir) / "flagged_ids.json").string(),
                          flagged);
      add_output(man, dir, "flagged_ids.json");
    }

    stage = "train";
    std::vector<EpochStats> history;
    const Network net = train(config.train, built.train, &history);
    save_weights(net, (fs::path(dir) / "weights.tnlw").string());
    add_output(man, dir, "weights.tnlw");
    write_train_log_csv((fs::path(dir) / "train_log.csv").string(), history);
    add_output(man, dir, "train_log.csv");

    const double test_loss = evaluate(net, built.test).loss;
    man.resolved_beta = config.beta_auto
                            ? 1.0 / std::max(test_loss, 1e-6)
                            : config.chain.params.beta;

    stage = "estimate";
    const LossOracle oracle{config.oracle_mode, config.oracle_seed};
    std::vector<UncertaintyReport> lovme_reports, mc_reports;
    GroundTruthReport gt;

    if (config.with_lovme) {
      ChainConfig cc = config.chain;
      cc.params.beta = man.resolved_beta;
      if (config.emit_traces) {
        // Serial pass that keeps the traces; seeds match the parallel path,
        // so reports are identical either way.
        lovme_reports.resize(built.test.size());
        for (std::size_t i = 0; i < built.test.size(); ++i) {
          ChainConfig local = cc;
          local.seed = derive_seed(cc.seed, i);
          const LossTrace trace =
              run_chain(net, built.test.samples[i], local, oracle, i);
          lovme_reports[i] = estimate(trace, net, built.test.samples[i], i);
          char rel[64];
          std::snprintf(rel, sizeof rel, "traces/sample_%zu.csv", i);
          write_trace_csv((fs::path(dir) / rel).string(), trace);
          add_output(man, dir, rel);
        }
      } else {
        lovme_reports =
            run_chains_parallel(net, built.test, cc, oracle, workers);
      }
      write_reports_json((fs::path(dir) / "lovme_reports.json").string(),
                         lovme_reports);
      add_output(man, dir, "lovme_reports.json");
    }

    if (config.with_mc_dropout) {
      mc_reports = mc_dropout_all(net, built.test, config.mc_p,
                                  config.mc_passes, config.mc_seed, oracle,
                                  workers);
      write_reports_json((fs::path(dir) / "mc_reports.json").string(),
                         mc_reports);
      add_output(man, dir, "mc_reports.json");
    }

    if (config.with_ground_truth) {
      gt = ground_truth_ensemble(config.train, built.train, built.test,
                                 config.ensemble_size, config.ensemble_seed,
                                 workers);
      write_ground_truth_json((fs::path(dir) / "ground_truth.json").string(),
                              gt);
      add_output(man, dir, "ground_truth.json");
    }

    stage = "eval";
    const int class_count = int(built.test.class_count);
    std::set<std::size_t> flagged(built.noised_label_ids.begin(),
                                  built.noised_label_ids.end());
    flagged.insert(built.perturbed_ids.begin(), built.perturbed_ids.end());

    Json summary;
    Json estimators;
    if (config.with_lovme) {
      const std::vector<MulticlassRecord> records =
          make_records(built.test, lovme_reports, config.normalize);
      estimators["lovme"] =
          eval_estimator(records, class_count, config, flagged);
      write_estimator_curves(dir, "lovme", records, class_count, man, dir);
    }
    if (config.with_mc_dropout) {
      const std::vector<MulticlassRecord> records =
          make_records(built.test, mc_reports, config.normalize);
      estimators["mc_dropout"] =
          eval_estimator(records, class_count, config, flagged);
      write_estimator_curves(dir, "mc_dropout", records, class_count, man, dir);
    }
    summary["estimators"] = estimators;
    summary["flagged_count"] = flagged.size();

    if (config.with_lovme && config.with_ground_truth) {
      std::vector<double> u(lovme_reports.size());
      for (std::size_t i = 0; i < lovme_reports.size(); ++i)
        u[i] = lovme_reports[i].var_loss;
      const CorrelationReport corr =
          uncertainty_correlation(u, gt.mean_prob, config.restrict_below);
      Json cj;
      cj["r"] = corr.r;
      cj["p_value"] = corr.p_value;
      cj["n"] = corr.n;
      cj["degenerate"] = corr.degenerate;
      cj["r_restricted"] = corr.r_restricted;
      cj["p_value_restricted"] = corr.p_value_restricted;
      cj["n_restricted"] = corr.n_restricted;
      cj["degenerate_restricted"] = corr.degenerate_restricted;
      cj["restrict_below"] = config.restrict_below;
      summary["pearson_r"] = corr.r;
      summary["correlation"] = cj;
      write_scatter_csv((fs::path(dir) / "scatter.csv").string(),
                        gt.sample_ids, u, gt.mean_prob);
      add_output(man, dir, "scatter.csv");
    }

    write_json_artifact((fs::path(dir) / "eval_summary.json").string(),
                        summary);
    add_output(man, dir, "eval_summary.json");

    stage = "manifest";
    write_manifest((fs::path(dir) / "manifest.json").string(), man);
    return man;
  } catch (const Error&) {
    man.status = "failed";
    man.failed_stage = stage;
    write_manifest((fs::path(dir) / "manifest.json").string(), man);
    throw;
  }
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad json in '" + path + "': " + e.what());
  }
  return manifest_from_json(j);
}

void write_manifest(const std::string& path, const Manifest& manifest) {
  write_json_artifact(path, manifest_to_json(manifest));
}

Manifest rerun_from_manifest(const std::string& manifest_path,
                             const std::string& output_dir,
                             int workers_override) {
  Manifest recorded = load_manifest(manifest_path);
  ExperimentConfig config = recorded.config;
  config.output_dir = output_dir;
  if (workers_override > 0) config.workers = workers_override;
  return run_experiment(config);
}

std::vector<OracleCheckRow> oracle_check(const Network& net,
                                         const Sample& sample,
                                         std::span<const GibbsParams> grid,
                                         const ChainConfig& chain_template,
                                         const LossOracle& oracle,
                                         std::size_t sample_index) {
  if (grid.empty()) throw ParamError("oracle check needs a nonempty grid");
  std::vector<OracleCheckRow> rows;
  rows.reserve(grid.size());
  for (const GibbsParams& params : grid) {
    OracleCheckRow row;
    row.beta = params.beta;
    row.eta = params.eta;
    const OracleResult exact =
        enumerate_gibbs(net, sample, params, oracle, sample_index);
    row.oracle_mean = exact.mean_loss;
    row.oracle_var = exact.var_loss;
    ChainConfig cc = chain_template;
    cc.params = params;
    const LossTrace trace = run_chain(net, sample, cc, oracle, sample_index);
    const UncertaintyReport est = estimate(trace);
    row.chain_mean = est.mean_loss;
    row.chain_var = est.var_loss;
    row.rel_mean_err = std::fabs(row.chain_mean - row.oracle_mean) /
                       std::max(std::fabs(row.oracle_mean), 1e-12);
    row.rel_var_err = std::fabs(row.chain_var - row.oracle_var) /
                      std::max(std::fabs(row.oracle_var), 1e-12);
    rows.push_back(row);
  }
  return rows;
}

void write_oracle_check_csv(const std::string& path,
                            std::span<const OracleCheckRow> rows) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << "beta,eta,oracle_mean,oracle_var,chain_mean,chain_var,"
         "rel_mean_err,rel_var_err\n";
  for (const OracleCheckRow& r : rows) {
    out << format_double(r.beta) << ',' << format_double(r.eta) << ','
        << format_double(r.oracle_mean) << ',' << format_double(r.oracle_var)
        << ',' << format_double(r.chain_mean) << ','
        << format_double(r.chain_var) << ',' << format_double(r.rel_mean_err)
        << ',' << format_double(r.rel_var_err) << '\n';
  }
  if (!out) throw FormatError("write failed for '" + path + "'");
}

}  // namespace lovme
