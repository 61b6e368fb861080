#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "botuq/bloc/encode.hpp"
#include "botuq/bloc/tfidf.hpp"
#include "botuq/bnn/model.hpp"
#include "botuq/errors.hpp"
#include "botuq/eval/metrics.hpp"
#include "botuq/ingest/dataset.hpp"
#include "botuq/ingest/timeline.hpp"
#include "botuq/io/checkpoint.hpp"
#include "botuq/io/config.hpp"
#include "botuq/io/csv.hpp"
#include "botuq/rng.hpp"
#include "botuq/synth/generate.hpp"
#include "botuq/train/trainer.hpp"
#include "botuq/uq/predict.hpp"
#include "botuq/uq/prediction.hpp"

namespace {

using namespace botuq;
using nlohmann::json;

// ---------------------------------------------------------------------------
// shared helpers

std::vector<Index> parse_widths(const std::string& text) {
  std::vector<Index> widths;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    std::string part = text.substr(start, comma == std::string::npos ? comma : comma - start);
    if (part.empty()) throw ValidationError("bad hidden widths '" + text + "'");
    try {
      std::size_t used = 0;
      long v = std::stol(part, &used);
      if (used != part.size() || v < 1) throw std::invalid_argument(part);
      widths.push_back(static_cast<Index>(v));
    } catch (const std::exception&) {
      throw ValidationError("bad hidden widths '" + text + "'");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (widths.empty()) throw ValidationError("bad hidden widths '" + text + "'");
  return widths;
}

io::ConfigMap load_command_config(const std::string& path,
                                  const std::vector<std::string>& allowed) {
  if (path.empty()) return {};
  io::ConfigMap cfg = io::read_config(path);
  io::require_known(cfg, allowed);
  return cfg;
}

// A config value applies only when the flag was not given on the command line.
bool config_wins(const io::ConfigMap& cfg, const CLI::App* cmd, const char* key,
                 const char* flag) {
  return cfg.count(key) > 0 && cmd->count(flag) == 0;
}

void write_features_csv(const std::string& path, const FeatureMatrix<double>& features) {
  std::vector<std::string> header{"account_id"};
  header.insert(header.end(), features.vocabulary.begin(), features.vocabulary.end());
  std::vector<std::vector<std::string>> rows;
  rows.reserve(features.account_ids.size());
  for (Index r = 0; r < features.rows(); ++r) {
    std::vector<std::string> row{features.account_ids[static_cast<std::size_t>(r)]};
    for (Index c = 0; c < features.cols(); ++c)
      row.push_back(io::format_double(features.weights(r, c)));
    rows.push_back(std::move(row));
  }
  io::write_csv(path, header, rows);
}

void write_labels_csv(const std::string& path, const std::vector<std::string>& ids,
                      const std::vector<int>& labels) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i)
    rows.push_back({ids[i], std::to_string(labels[i]), "synthetic"});
  io::write_csv(path, {"account_id", "label", "source"}, rows);
}

json report_to_json(const train::TrainReport& report) {
  return json{{"train_losses", report.train_losses},
              {"val_losses", report.val_losses},
              {"stopped_epoch", report.stopped_epoch},
              {"best_epoch", report.best_epoch},
              {"wall_seconds", report.wall_seconds}};
}

void write_json_out(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw ValidationError("failed writing " + path);
}

std::string metric_cell(const eval::MetricValue& m, bool spread) {
  if (!m.defined) return "";
  return io::format_double(spread ? m.stddev : m.value);
}

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
  std::string mode = "gaussian";
  Index n_per_class = 1000;
  double overlap = 0.0;
  Index dim = 8;
  std::uint64_t seed = 0;
  Index min_events = 40;
  Index max_events = 120;
  std::string out_features, out_timelines, out_labels, config;
};

void run_synth(const SynthOptions& opts, const CLI::App* cmd) {
  auto cfg = load_command_config(
      opts.config, {"mode", "n_per_class", "overlap", "dim", "seed", "min_events",
                    "max_events", "out_features", "out_timelines", "out_labels"});
  SynthOptions o = opts;
  if (config_wins(cfg, cmd, "mode", "--mode")) o.mode = io::config_string(cfg, "mode", o.mode);
  if (config_wins(cfg, cmd, "n_per_class", "--n-per-class"))
    o.n_per_class = io::config_int(cfg, "n_per_class", o.n_per_class);
  if (config_wins(cfg, cmd, "overlap", "--overlap"))
    o.overlap = io::config_double(cfg, "overlap", o.overlap);
  if (config_wins(cfg, cmd, "dim", "--dim")) o.dim = io::config_int(cfg, "dim", o.dim);
  if (config_wins(cfg, cmd, "seed", "--seed")) o.seed = io::config_u64(cfg, "seed", o.seed);
  if (config_wins(cfg, cmd, "min_events", "--min-events"))
    o.min_events = io::config_int(cfg, "min_events", o.min_events);
  if (config_wins(cfg, cmd, "max_events", "--max-events"))
    o.max_events = io::config_int(cfg, "max_events", o.max_events);
  if (config_wins(cfg, cmd, "out_features", "--out-features"))
    o.out_features = io::config_string(cfg, "out_features", o.out_features);
  if (config_wins(cfg, cmd, "out_timelines", "--out-timelines"))
    o.out_timelines = io::config_string(cfg, "out_timelines", o.out_timelines);
  if (config_wins(cfg, cmd, "out_labels", "--out-labels"))
    o.out_labels = io::config_string(cfg, "out_labels", o.out_labels);

  synth::SynthConfig scfg;
  scfg.mode = synth::synth_mode_from_string(o.mode);
  scfg.n_per_class = o.n_per_class;
  scfg.overlap = o.overlap;
  scfg.dim = o.dim;
  scfg.seed = o.seed;
  scfg.min_events = o.min_events;
  scfg.max_events = o.max_events;
  if (o.out_labels.empty()) throw ValidationError("synth: --out-labels is required");

  if (scfg.mode == synth::SynthMode::Gaussian) {
    if (o.out_features.empty())
      throw ValidationError("synth: gaussian mode needs --out-features");
    auto data = synth::gaussian_benchmark(scfg);
    FeatureMatrix<double> fm;
    for (Index j = 0; j < scfg.dim; ++j) fm.vocabulary.push_back("f" + std::to_string(j));
    fm.account_ids = data.ids;
    fm.weights = std::move(data.features);
    write_features_csv(o.out_features, fm);
    write_labels_csv(o.out_labels, data.ids, data.labels);
    std::cout << "synth: " << fm.rows() << " accounts, " << scfg.dim
              << " features, overlap " << scfg.overlap << "\n";
  } else {
    if (o.out_timelines.empty())
      throw ValidationError("synth: bloc mode needs --out-timelines");
    auto data = synth::bloclike_benchmark(scfg);
    std::ofstream out(o.out_timelines);
    if (!out) throw ValidationError("cannot write " + o.out_timelines);
    std::int64_t events = 0;
    for (const auto& timeline : data.timelines) {
      for (const auto& event : timeline.events) {
        json row{{"account_id", timeline.account_id},
                 {"timestamp", static_cast<std::int64_t>(event.timestamp)},
                 {"action", ingest::action_name(event.action)},
                 {"entities", event.entities}};
        out << row.dump() << '\n';
        ++events;
      }
    }
    if (!out) throw ValidationError("failed writing " + o.out_timelines);
    write_labels_csv(o.out_labels, data.ids, data.labels);
    std::cout << "synth: " << data.timelines.size() << " accounts, " << events
              << " events, overlap " << scfg.overlap << "\n";
  }
}

// ---------------------------------------------------------------------------
// featurize

struct FeaturizeOptions {
  std::string timelines;
  std::string format = "jsonl";
  std::string out, sidecar, vocab, config;
  std::int64_t max_words = 512;
};

void run_featurize(const FeaturizeOptions& opts, const CLI::App* cmd) {
  auto cfg = load_command_config(
      opts.config, {"timelines", "format", "out", "sidecar", "vocab", "max_words"});
  FeaturizeOptions o = opts;
  if (config_wins(cfg, cmd, "format", "--format"))
    o.format = io::config_string(cfg, "format", o.format);
  if (config_wins(cfg, cmd, "max_words", "--max-words"))
    o.max_words = io::config_int(cfg, "max_words", o.max_words);
  if (config_wins(cfg, cmd, "sidecar", "--sidecar"))
    o.sidecar = io::config_string(cfg, "sidecar", o.sidecar);
  if (config_wins(cfg, cmd, "vocab", "--vocab"))
    o.vocab = io::config_string(cfg, "vocab", o.vocab);

  ingest::TimelineFormat format;
  if (o.format == "jsonl") format = ingest::TimelineFormat::Jsonl;
  else if (o.format == "csv") format = ingest::TimelineFormat::Csv;
  else throw ValidationError("featurize: unknown format '" + o.format + "'");

  auto parsed = ingest::parse_timelines(o.timelines, format);
  auto alphabet = bloc::BlocAlphabet::defaults();
  FeatureMatrix<double> features;
  if (!o.vocab.empty()) {
    bloc::Vocabulary vocab = io::load_vocabulary(o.vocab);
    features = bloc::featurize_timelines(parsed.timelines, alphabet, vocab);
  } else {
    features = bloc::featurize_timelines(parsed.timelines, alphabet, o.max_words);
  }
  write_features_csv(o.out, features);
  if (!o.sidecar.empty()) {
    bloc::Vocabulary vocab{features.vocabulary, features.doc_freq, features.total_docs};
    io::save_vocabulary(o.sidecar, vocab);
  }
  std::cout << "featurize: " << features.rows() << " accounts, " << features.cols()
            << " features, " << parsed.malformed << " malformed rows skipped\n";
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  std::string features, labels, out, report, split_out, vocab, config;
  std::string mode = "bayesian";
  bool no_aleatoric = false;
  std::string hidden = "64,32,16";
  Index flow_len = 2;
  Index r_flow_len = 1;
  Index batch_size = 1024;
  Index max_epochs = 100;
  double lr = 5e-4;
  double kl_scale = 1e-4;
  Index aleatoric_samples = 1000;
  int patience = 5;
  std::uint64_t seed = 0;
  double val_frac = 0.15;
  double test_frac = 0.15;
};

const std::vector<std::string> kTrainConfigKeys{
    "mode",       "no_aleatoric", "hidden",            "flow_len", "r_flow_len",
    "batch_size", "max_epochs",   "lr",                "kl_scale", "aleatoric_samples",
    "patience",   "seed",         "val_frac",          "test_frac"};

void apply_train_config(TrainOptions& o, const io::ConfigMap& cfg, const CLI::App* cmd) {
  if (config_wins(cfg, cmd, "mode", "--mode")) o.mode = io::config_string(cfg, "mode", o.mode);
  if (config_wins(cfg, cmd, "no_aleatoric", "--no-aleatoric"))
    o.no_aleatoric = io::config_bool(cfg, "no_aleatoric", o.no_aleatoric);
  if (config_wins(cfg, cmd, "hidden", "--hidden"))
    o.hidden = io::config_string(cfg, "hidden", o.hidden);
  if (config_wins(cfg, cmd, "flow_len", "--flow-len"))
    o.flow_len = io::config_int(cfg, "flow_len", o.flow_len);
  if (config_wins(cfg, cmd, "r_flow_len", "--r-flow-len"))
    o.r_flow_len = io::config_int(cfg, "r_flow_len", o.r_flow_len);
  if (config_wins(cfg, cmd, "batch_size", "--batch-size"))
    o.batch_size = io::config_int(cfg, "batch_size", o.batch_size);
  if (config_wins(cfg, cmd, "max_epochs", "--max-epochs"))
    o.max_epochs = io::config_int(cfg, "max_epochs", o.max_epochs);
  if (config_wins(cfg, cmd, "lr", "--lr")) o.lr = io::config_double(cfg, "lr", o.lr);
  if (config_wins(cfg, cmd, "kl_scale", "--kl-scale"))
    o.kl_scale = io::config_double(cfg, "kl_scale", o.kl_scale);
  if (config_wins(cfg, cmd, "aleatoric_samples", "--aleatoric-samples"))
    o.aleatoric_samples = io::config_int(cfg, "aleatoric_samples", o.aleatoric_samples);
  if (config_wins(cfg, cmd, "patience", "--patience"))
    o.patience = static_cast<int>(io::config_int(cfg, "patience", o.patience));
  if (config_wins(cfg, cmd, "seed", "--seed")) o.seed = io::config_u64(cfg, "seed", o.seed);
  if (config_wins(cfg, cmd, "val_frac", "--val-frac"))
    o.val_frac = io::config_double(cfg, "val_frac", o.val_frac);
  if (config_wins(cfg, cmd, "test_frac", "--test-frac"))
    o.test_frac = io::config_double(cfg, "test_frac", o.test_frac);
}

train::TrainConfig<double> to_train_config(const TrainOptions& o) {
  train::TrainConfig<double> cfg;
  cfg.model.hidden_widths = parse_widths(o.hidden);
  cfg.model.flow_len = o.flow_len;
  cfg.model.r_flow_len = o.r_flow_len;
  if (o.mode == "bayesian") cfg.model.mode = bnn::ModelMode::Bayesian;
  else if (o.mode == "deterministic") cfg.model.mode = bnn::ModelMode::Deterministic;
  else throw ValidationError("train: unknown mode '" + o.mode + "'");
  cfg.model.aleatoric = !o.no_aleatoric;
  cfg.batch_size = o.batch_size;
  cfg.max_epochs = o.max_epochs;
  cfg.initial_lr = o.lr;
  cfg.kl_scale = o.kl_scale;
  cfg.aleatoric_samples = o.aleatoric_samples;
  cfg.patience = o.patience;
  cfg.seed = o.seed;
  return cfg;
}

ingest::SplitFractions to_fractions(const TrainOptions& o) {
  if (!(o.val_frac > 0 && o.test_frac >= 0 && o.val_frac + o.test_frac < 1))
    throw ValidationError("train: bad validation/test fractions");
  return {1.0 - o.val_frac - o.test_frac, o.val_frac, o.test_frac};
}

void write_split_csv(const std::string& path, const ingest::SplitBundle& split) {
  std::vector<std::vector<std::string>> rows;
  auto add = [&](const ingest::LabeledDataset& subset, const char* name) {
    for (const auto& r : subset.records)
      rows.push_back({r.account_id, name, std::to_string(r.label)});
  };
  add(split.train, "train");
  add(split.validation, "validation");
  add(split.test, "test");
  add(split.excess, "excess");
  io::write_csv(path, {"account_id", "subset", "label"}, rows);
}

void run_train(const TrainOptions& opts, const CLI::App* cmd) {
  std::vector<std::string> allowed = kTrainConfigKeys;
  allowed.insert(allowed.end(), {"features", "labels", "out", "report", "split_out", "vocab"});
  auto cfg = load_command_config(opts.config, allowed);
  TrainOptions o = opts;
  apply_train_config(o, cfg, cmd);

  std::optional<bloc::Vocabulary> vocab;
  if (!o.vocab.empty()) vocab = io::load_vocabulary(o.vocab);

  auto [features, labeled] = ingest::load_feature_matrix(o.features, o.labels);
  auto split = ingest::balance_and_split(labeled, to_fractions(o), o.seed);
  auto [x_train, y_train] = ingest::assemble(features, split.train);
  auto [x_val, y_val] = ingest::assemble(features, split.validation);

  auto outcome = train::fit(to_train_config(o), x_train, y_train, x_val, y_val);
  io::save_checkpoint(o.out, outcome.model, vocab ? &*vocab : nullptr);
  if (!o.report.empty()) {
    json j = report_to_json(outcome.report);
    j["format"] = "botuq-train-report";
    j["version"] = 1;
    j["seed"] = o.seed;
    j["n_train"] = split.train.size();
    j["n_validation"] = split.validation.size();
    j["n_test"] = split.test.size();
    j["n_excess"] = split.excess.size();
    write_json_out(o.report, j);
  }
  if (!o.split_out.empty()) write_split_csv(o.split_out, split);

  double best_val = outcome.report.val_losses[static_cast<std::size_t>(
      outcome.report.best_epoch - 1)];
  std::cout << "train: " << outcome.report.stopped_epoch << " epochs, best epoch "
            << outcome.report.best_epoch << ", val loss " << io::format_double(best_val)
            << ", checkpoint " << o.out << "\n";
}

// ---------------------------------------------------------------------------
// predict

struct PredictOptions {
  std::string features, checkpoint, out, split, posterior_out, config;
  std::string subset = "test";
  std::string uncertainty = "quadrature";
  double k_sigma = 3.0;
  std::int64_t n_samples = 10000;
  Index n_noise = 256;
  Index batch_size = 1024;
  std::uint64_t seed = 0;
  bool deterministic = false;
};

void write_predictions_csv(const std::string& path,
                           const std::vector<uq::AccountPrediction>& preds) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(preds.size());
  for (const auto& p : preds)
    rows.push_back({p.account_id, io::format_double(p.p_mean),
                    io::format_double(p.sigma_epistemic),
                    io::format_double(p.sigma_aleatoric),
                    io::format_double(p.sigma_total), std::to_string(p.n_weight_samples),
                    uq::to_string(p.decision)});
  io::write_csv(path,
                {"account_id", "p_mean", "sigma_epistemic", "sigma_aleatoric",
                 "sigma_total", "n_weight_samples", "decision"},
                rows);
}

void run_predict(const PredictOptions& opts, const CLI::App* cmd) {
  auto cfg = load_command_config(
      opts.config, {"features", "checkpoint", "out", "split", "subset", "posterior_out",
                    "uncertainty", "k_sigma", "n_samples", "n_noise", "batch_size",
                    "seed", "deterministic"});
  PredictOptions o = opts;
  if (config_wins(cfg, cmd, "subset", "--subset"))
    o.subset = io::config_string(cfg, "subset", o.subset);
  if (config_wins(cfg, cmd, "uncertainty", "--uncertainty"))
    o.uncertainty = io::config_string(cfg, "uncertainty", o.uncertainty);
  if (config_wins(cfg, cmd, "k_sigma", "--k-sigma"))
    o.k_sigma = io::config_double(cfg, "k_sigma", o.k_sigma);
  if (config_wins(cfg, cmd, "n_samples", "--n-samples"))
    o.n_samples = io::config_int(cfg, "n_samples", o.n_samples);
  if (config_wins(cfg, cmd, "n_noise", "--n-noise"))
    o.n_noise = io::config_int(cfg, "n_noise", o.n_noise);
  if (config_wins(cfg, cmd, "batch_size", "--batch-size"))
    o.batch_size = io::config_int(cfg, "batch_size", o.batch_size);
  if (config_wins(cfg, cmd, "seed", "--seed")) o.seed = io::config_u64(cfg, "seed", o.seed);
  if (config_wins(cfg, cmd, "deterministic", "--deterministic"))
    o.deterministic = io::config_bool(cfg, "deterministic", o.deterministic);

  FeatureMatrix<double> features = ingest::load_features(o.features);
  if (!o.split.empty()) {
    io::CsvTable table = io::read_csv(o.split);
    if (table.rows.empty() || table.rows[0] !=
        std::vector<std::string>{"account_id", "subset", "label"})
      throw ValidationError("predict: '" + o.split + "' is not a split file");
    std::unordered_set<std::string> wanted;
    for (std::size_t r = 1; r < table.rows.size(); ++r) {
      if (table.rows[r].size() != 3)
        throw ValidationError("predict: malformed split row " + std::to_string(r + 1));
      if (table.rows[r][1] == o.subset) wanted.insert(table.rows[r][0]);
    }
    if (wanted.empty())
      throw ValidationError("predict: split file has no '" + o.subset + "' rows");
    FeatureMatrix<double> filtered;
    filtered.vocabulary = features.vocabulary;
    std::vector<Index> keep;
    for (Index r = 0; r < features.rows(); ++r)
      if (wanted.count(features.account_ids[static_cast<std::size_t>(r)]) > 0)
        keep.push_back(r);
    if (keep.empty())
      throw ValidationError("predict: no feature rows in subset '" + o.subset + "'");
    filtered.weights.resize(static_cast<Index>(keep.size()), features.cols());
    for (std::size_t i = 0; i < keep.size(); ++i) {
      filtered.weights.row(static_cast<Index>(i)) = features.weights.row(keep[i]);
      filtered.account_ids.push_back(features.account_ids[static_cast<std::size_t>(keep[i])]);
    }
    features = std::move(filtered);
  }

  auto ckpt = io::load_checkpoint(o.checkpoint);
  uq::UncertaintyKind kind = uq::uncertainty_from_string(o.uncertainty);
  bool deterministic =
      o.deterministic || ckpt.model.config().mode == bnn::ModelMode::Deterministic;

  std::vector<uq::AccountPrediction> preds;
  if (deterministic) {
    if (!o.posterior_out.empty())
      throw ValidationError("predict: posterior scores need a sampling run");
    if (cmd->count("--uncertainty") > 0 && kind != uq::UncertaintyKind::None)
      throw ValidationError("predict: plain scores carry no uncertainty; use --uncertainty none");
    kind = uq::UncertaintyKind::None;
    preds = uq::deterministic_predict(ckpt.model, features.weights, features.account_ids);
  } else {
    uq::PosteriorConfig pcfg;
    pcfg.n_weight_samples = o.n_samples;
    pcfg.n_noise_samples = o.n_noise;
    pcfg.seed = o.seed;
    pcfg.batch_size = o.batch_size;
    if (!o.posterior_out.empty()) {
      Matrix<double> scores;
      preds = uq::posterior_predict(ckpt.model, features.weights, features.account_ids,
                                    pcfg, &scores);
      std::vector<std::string> header{"account_id"};
      for (std::int64_t s = 0; s < o.n_samples; ++s)
        header.push_back("s" + std::to_string(s));
      std::vector<std::vector<std::string>> rows;
      rows.reserve(preds.size());
      for (Index r = 0; r < scores.rows(); ++r) {
        std::vector<std::string> row{features.account_ids[static_cast<std::size_t>(r)]};
        for (Index c = 0; c < scores.cols(); ++c)
          row.push_back(io::format_double(scores(r, c)));
        rows.push_back(std::move(row));
      }
      io::write_csv(o.posterior_out, header, rows);
    } else {
      preds = uq::posterior_predict(ckpt.model, features.weights, features.account_ids,
                                    pcfg);
    }
  }
  preds = uq::decide_all(std::move(preds), kind, o.k_sigma);
  write_predictions_csv(o.out, preds);
  std::cout << "predict: " << preds.size() << " accounts, "
            << (deterministic ? std::int64_t(1) : o.n_samples) << " weight sample(s), "
            << "uncertainty " << uq::to_string(kind) << "\n";
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOptions {
  std::string predictions, labels, out_prefix, posterior, config;
  double k_sigma = 3.0;
  int bins = 10;
  double band_sigma = 5.0;
};

std::vector<uq::AccountPrediction> read_predictions_csv(const std::string& path) {
  io::CsvTable table = io::read_csv(path);
  if (table.rows.size() < 2)
    throw ValidationError("evaluate: '" + path + "' has no prediction rows");
  const auto& header = table.rows[0];
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t c = 0; c < header.size(); ++c) col[header[c]] = c;
  for (const char* need : {"account_id", "p_mean", "sigma_epistemic", "sigma_aleatoric",
                           "sigma_total", "n_weight_samples"})
    if (col.count(need) == 0)
      throw ValidationError("evaluate: '" + path + "' is missing column " + need);

  auto number = [&](const std::vector<std::string>& row, const char* name) {
    const std::string& text = row[col.at(name)];
    try {
      std::size_t used = 0;
      double v = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return v;
    } catch (const std::exception&) {
      throw ValidationError("evaluate: bad " + std::string(name) + " value '" + text + "'");
    }
  };

  std::vector<uq::AccountPrediction> preds;
  for (std::size_t r = 1; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != header.size())
      throw ValidationError("evaluate: ragged row " + std::to_string(r + 1) + " in " + path);
    uq::AccountPrediction p;
    p.account_id = row[col.at("account_id")];
    p.p_mean = number(row, "p_mean");
    p.sigma_epistemic = number(row, "sigma_epistemic");
    p.sigma_aleatoric = number(row, "sigma_aleatoric");
    p.sigma_total = number(row, "sigma_total");
    p.n_weight_samples = static_cast<std::int64_t>(number(row, "n_weight_samples"));
    preds.push_back(std::move(p));
  }
  return preds;
}

json metric_json(const eval::MetricValue& m) {
  if (!m.defined) return nullptr;
  return json{{"value", m.value}, {"stddev", m.stddev}};
}

json class_json(const eval::ClassMetrics& m) {
  return json{{"precision", metric_json(m.precision)},
              {"recall", metric_json(m.recall)},
              {"f1", metric_json(m.f1)}};
}

void run_evaluate(const EvaluateOptions& opts, const CLI::App* cmd) {
  auto cfg = load_command_config(opts.config, {"predictions", "labels", "out_prefix",
                                               "posterior", "k_sigma", "bins",
                                               "band_sigma"});
  EvaluateOptions o = opts;
  if (config_wins(cfg, cmd, "k_sigma", "--k-sigma"))
    o.k_sigma = io::config_double(cfg, "k_sigma", o.k_sigma);
  if (config_wins(cfg, cmd, "bins", "--bins"))
    o.bins = static_cast<int>(io::config_int(cfg, "bins", o.bins));
  if (config_wins(cfg, cmd, "band_sigma", "--band-sigma"))
    o.band_sigma = io::config_double(cfg, "band_sigma", o.band_sigma);

  auto preds = read_predictions_csv(o.predictions);
  auto labeled = ingest::load_labels(o.labels);
  std::unordered_map<std::string, int> label_of;
  for (const auto& r : labeled.records) label_of[r.account_id] = r.label;
  std::vector<int> labels;
  labels.reserve(preds.size());
  for (const auto& p : preds) {
    auto it = label_of.find(p.account_id);
    if (it == label_of.end())
      throw ValidationError("evaluate: account '" + p.account_id + "' has no label");
    labels.push_back(it->second);
  }

  auto rows = eval::abstention_report(preds, labels, o.k_sigma);
  std::vector<double> p_means;
  p_means.reserve(preds.size());
  for (const auto& p : preds) p_means.push_back(p.p_mean);
  auto curve = eval::roc_auc(p_means, labels);
  auto profile = uq::uncertainty_profile(preds, o.bins);

  // metrics.csv
  {
    std::vector<std::vector<std::string>> out_rows;
    for (const auto& row : rows) {
      std::vector<std::string> r{uq::to_string(row.kind),
                                 io::format_double(row.k_sigma),
                                 std::to_string(row.n_total),
                                 std::to_string(row.n_retained),
                                 row.empty_retained ? "1" : "0",
                                 metric_cell(row.acc, false),
                                 metric_cell(row.acc, true)};
      for (const auto* cls : {&row.bot, &row.human}) {
        r.push_back(metric_cell(cls->precision, false));
        r.push_back(metric_cell(cls->precision, true));
        r.push_back(metric_cell(cls->recall, false));
        r.push_back(metric_cell(cls->recall, true));
        r.push_back(metric_cell(cls->f1, false));
        r.push_back(metric_cell(cls->f1, true));
      }
      r.push_back(io::format_double(row.rejection_overall));
      r.push_back(io::format_double(row.rejection_bot));
      r.push_back(io::format_double(row.rejection_human));
      out_rows.push_back(std::move(r));
    }
    io::write_csv(
        o.out_prefix + ".metrics.csv",
        {"kind", "k_sigma", "n_total", "n_retained", "empty_retained", "accuracy",
         "accuracy_stddev", "bot_precision", "bot_precision_stddev", "bot_recall",
         "bot_recall_stddev", "bot_f1", "bot_f1_stddev", "human_precision",
         "human_precision_stddev", "human_recall", "human_recall_stddev", "human_f1",
         "human_f1_stddev", "rejection_overall", "rejection_bot", "rejection_human"},
        out_rows);
  }
  // roc.csv
  {
    std::vector<std::vector<std::string>> out_rows;
    for (std::size_t i = 0; i < curve.thresholds.size(); ++i)
      out_rows.push_back({io::format_double(curve.thresholds[i]),
                          io::format_double(curve.fpr[i]),
                          io::format_double(curve.tpr[i])});
    io::write_csv(o.out_prefix + ".roc.csv", {"threshold", "fpr", "tpr"}, out_rows);
  }
  // profile.csv
  {
    std::vector<std::vector<std::string>> out_rows;
    for (const auto& bin : profile) {
      auto cell = [&](double v) {
        return bin.count == 0 ? std::string() : io::format_double(v);
      };
      out_rows.push_back({io::format_double(bin.lo), io::format_double(bin.hi),
                          std::to_string(bin.count), cell(bin.mean_p),
                          cell(bin.mean_epistemic), cell(bin.mean_aleatoric),
                          cell(bin.mean_total)});
    }
    io::write_csv(o.out_prefix + ".profile.csv",
                  {"lo", "hi", "count", "mean_p", "mean_epistemic", "mean_aleatoric",
                   "mean_total"},
                  out_rows);
  }

  json j{{"format", "botuq-metrics"},
         {"version", 1},
         {"n_accounts", preds.size()},
         {"k_sigma", o.k_sigma},
         {"auc", curve.auc}};
  json jrows = json::array();
  for (const auto& row : rows)
    jrows.push_back(json{{"kind", uq::to_string(row.kind)},
                         {"n_total", row.n_total},
                         {"n_retained", row.n_retained},
                         {"empty_retained", row.empty_retained},
                         {"accuracy", metric_json(row.acc)},
                         {"bot", class_json(row.bot)},
                         {"human", class_json(row.human)},
                         {"rejection_overall", row.rejection_overall},
                         {"rejection_bot", row.rejection_bot},
                         {"rejection_human", row.rejection_human}});
  j["abstention"] = std::move(jrows);

  if (!o.posterior.empty()) {
    io::CsvTable table = io::read_csv(o.posterior);
    if (table.rows.size() != preds.size() + 1)
      throw ValidationError("evaluate: posterior rows do not match the predictions");
    Index samples = static_cast<Index>(table.rows[0].size()) - 1;
    if (samples < 2) throw ValidationError("evaluate: posterior file has too few samples");
    Matrix<double> scores(static_cast<Index>(preds.size()), samples);
    for (std::size_t r = 1; r < table.rows.size(); ++r) {
      const auto& row = table.rows[r];
      if (row.empty() || row[0] != preds[r - 1].account_id)
        throw ValidationError("evaluate: posterior accounts do not line up at row " +
                              std::to_string(r + 1));
      if (static_cast<Index>(row.size()) != samples + 1)
        throw ValidationError("evaluate: ragged posterior row " + std::to_string(r + 1));
      for (Index c = 0; c < samples; ++c) {
        char* end = nullptr;
        double v = std::strtod(row[static_cast<std::size_t>(c + 1)].c_str(), &end);
        if (end == row[static_cast<std::size_t>(c + 1)].c_str() || *end != '\0')
          throw ValidationError("evaluate: bad posterior value at row " +
                                std::to_string(r + 1));
        scores(static_cast<Index>(r - 1), c) = v;
      }
    }
    auto band = eval::roc_band(scores, labels, o.band_sigma);
    std::vector<std::vector<std::string>> out_rows;
    for (std::size_t g = 0; g < band.thresholds.size(); ++g)
      out_rows.push_back(
          {io::format_double(band.thresholds[g]), io::format_double(band.fpr_mean[g]),
           io::format_double(band.fpr_lo[g]), io::format_double(band.fpr_hi[g]),
           io::format_double(band.tpr_mean[g]), io::format_double(band.tpr_lo[g]),
           io::format_double(band.tpr_hi[g])});
    io::write_csv(o.out_prefix + ".roc_band.csv",
                  {"threshold", "fpr_mean", "fpr_lo", "fpr_hi", "tpr_mean", "tpr_lo",
                   "tpr_hi"},
                  out_rows);
    j["auc_mean"] = band.auc_mean;
    j["auc_stddev"] = band.auc_stddev;
    j["band_sigma"] = band.n_sigma;
  }
  write_json_out(o.out_prefix + ".metrics.json", j);

  const auto& none_row = rows[0];
  std::cout << "evaluate: auc " << io::format_double(curve.auc);
  if (none_row.acc.defined)
    std::cout << ", accuracy " << io::format_double(none_row.acc.value);
  std::cout << ", " << preds.size() << " accounts\n";
}

// ---------------------------------------------------------------------------
// closure

struct ClosureOptions {
  TrainOptions train;  // features/labels + hyperparameters (out fields unused)
  std::string out, summary, config;
  double threshold = 3.0;
  std::int64_t n_samples = 2000;
  Index batch_size = 1024;
};

void run_closure(const ClosureOptions& opts, const CLI::App* cmd) {
  std::vector<std::string> allowed = kTrainConfigKeys;
  allowed.insert(allowed.end(),
                 {"features", "labels", "out", "summary", "threshold", "n_samples"});
  auto cfg = load_command_config(opts.config, allowed);
  ClosureOptions o = opts;
  apply_train_config(o.train, cfg, cmd);
  if (config_wins(cfg, cmd, "threshold", "--threshold"))
    o.threshold = io::config_double(cfg, "threshold", o.threshold);
  if (config_wins(cfg, cmd, "n_samples", "--n-samples"))
    o.n_samples = io::config_int(cfg, "n_samples", o.n_samples);

  auto [features, labeled] = ingest::load_feature_matrix(o.train.features, o.train.labels);
  auto split = ingest::balance_and_split(labeled, to_fractions(o.train), o.train.seed);
  auto [x_train, y_train] = ingest::assemble(features, split.train);
  auto [x_val, y_val] = ingest::assemble(features, split.validation);
  auto [x_test, y_test] = ingest::assemble(features, split.test);
  (void)y_test;  // closure ignores ground truth
  std::vector<std::string> test_ids;
  for (const auto& r : split.test.records) test_ids.push_back(r.account_id);

  // Two trainings on identical seeds and data: one with the label-noise head
  // off (epistemic channel alone), one with the full joint loss.  When the
  // decomposition is clean their probabilities agree within their epistemic
  // spreads.
  std::uint64_t posterior_seed = Rng(o.train.seed).derive("posterior").seed();
  std::vector<std::vector<uq::AccountPrediction>> runs;
  for (bool joint : {false, true}) {
    TrainOptions run_opts = o.train;
    run_opts.no_aleatoric = !joint;
    auto outcome = train::fit(to_train_config(run_opts), x_train, y_train, x_val, y_val);
    uq::PosteriorConfig pcfg;
    pcfg.n_weight_samples = o.n_samples;
    pcfg.n_noise_samples = 2;  // the z score never looks at the aleatoric channel
    pcfg.seed = posterior_seed;
    pcfg.batch_size = o.batch_size;
    runs.push_back(uq::posterior_predict(outcome.model, x_test, test_ids, pcfg));
  }

  auto result = uq::closure_zscore(runs[0], runs[1]);
  std::vector<std::vector<std::string>> rows;
  for (const auto& pair : result.pairs)
    rows.push_back({pair.account_id, io::format_double(pair.z)});
  io::write_csv(o.out, {"account_id", "z"}, rows);

  double mean = 0, var = 0, outliers = 0;
  for (const auto& pair : result.pairs) mean += pair.z;
  if (!result.pairs.empty()) mean /= static_cast<double>(result.pairs.size());
  for (const auto& pair : result.pairs) {
    var += (pair.z - mean) * (pair.z - mean);
    if (std::abs(pair.z) > o.threshold) outliers += 1;
  }
  double stddev =
      result.pairs.empty() ? 0 : std::sqrt(var / static_cast<double>(result.pairs.size()));
  double frac =
      result.pairs.empty() ? 0 : outliers / static_cast<double>(result.pairs.size());
  if (!o.summary.empty())
    write_json_out(o.summary, json{{"format", "botuq-closure"},
                                   {"version", 1},
                                   {"pairs", result.pairs.size()},
                                   {"excluded", result.n_excluded},
                                   {"threshold", o.threshold},
                                   {"mean_z", mean},
                                   {"stddev_z", stddev},
                                   {"frac_beyond_threshold", frac}});
  std::cout << "closure: " << result.pairs.size() << " pairs, " << result.n_excluded
            << " excluded, |z|>" << o.threshold << " on "
            << io::format_double(frac * 100) << "% of accounts\n";
}

// ---------------------------------------------------------------------------

void add_train_flags(CLI::App* cmd, TrainOptions& o) {
  cmd->add_option("--mode", o.mode, "bayesian or deterministic");
  cmd->add_flag("--no-aleatoric", o.no_aleatoric, "single-output head, plain likelihood");
  cmd->add_option("--hidden", o.hidden, "hidden widths, comma separated");
  cmd->add_option("--flow-len", o.flow_len, "latent flow steps per layer");
  cmd->add_option("--r-flow-len", o.r_flow_len, "auxiliary flow steps per layer");
  cmd->add_option("--batch-size", o.batch_size, "training batch size");
  cmd->add_option("--max-epochs", o.max_epochs, "epoch cap");
  cmd->add_option("--lr", o.lr, "initial learning rate");
  cmd->add_option("--kl-scale", o.kl_scale, "divergence weight in the loss");
  cmd->add_option("--aleatoric-samples", o.aleatoric_samples,
                  "label-noise draws per training step");
  cmd->add_option("--patience", o.patience, "epochs without improvement before stopping");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--val-frac", o.val_frac, "validation fraction per class");
  cmd->add_option("--test-frac", o.test_frac, "test fraction per class");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"social bot detection with calibrated uncertainty"};
  app.require_subcommand(1);

  SynthOptions synth_opts;
  auto* synth_cmd = app.add_subcommand("synth", "generate benchmark data");
  synth_cmd->add_option("--mode", synth_opts.mode, "gaussian or bloc");
  synth_cmd->add_option("--n-per-class", synth_opts.n_per_class, "accounts per class");
  synth_cmd->add_option("--overlap", synth_opts.overlap, "class overlap in [0,1]");
  synth_cmd->add_option("--dim", synth_opts.dim, "gaussian feature width");
  synth_cmd->add_option("--seed", synth_opts.seed, "master seed");
  synth_cmd->add_option("--min-events", synth_opts.min_events, "events per timeline, lower bound");
  synth_cmd->add_option("--max-events", synth_opts.max_events, "events per timeline, upper bound");
  synth_cmd->add_option("--out-features", synth_opts.out_features, "feature CSV to write");
  synth_cmd->add_option("--out-timelines", synth_opts.out_timelines, "event JSONL to write");
  synth_cmd->add_option("--out-labels", synth_opts.out_labels, "label CSV to write");
  synth_cmd->add_option("--config", synth_opts.config, "key=value config file");
  synth_cmd->callback([&] { run_synth(synth_opts, synth_cmd); });

  FeaturizeOptions feat_opts;
  auto* feat_cmd = app.add_subcommand("featurize", "turn timelines into behavioural features");
  feat_cmd->add_option("--timelines", feat_opts.timelines, "event log to read")->required();
  feat_cmd->add_option("--format", feat_opts.format, "jsonl or csv");
  feat_cmd->add_option("--out", feat_opts.out, "feature CSV to write")->required();
  feat_cmd->add_option("--sidecar", feat_opts.sidecar, "vocabulary JSON to write");
  feat_cmd->add_option("--vocab", feat_opts.vocab, "frozen vocabulary JSON to apply");
  feat_cmd->add_option("--max-words", feat_opts.max_words, "vocabulary cap");
  feat_cmd->add_option("--config", feat_opts.config, "key=value config file");
  feat_cmd->callback([&] { run_featurize(feat_opts, feat_cmd); });

  TrainOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "fit a detector");
  train_cmd->add_option("--features", train_opts.features, "feature CSV")->required();
  train_cmd->add_option("--labels", train_opts.labels, "label CSV")->required();
  train_cmd->add_option("--out", train_opts.out, "checkpoint JSON to write")->required();
  train_cmd->add_option("--report", train_opts.report, "training report JSON to write");
  train_cmd->add_option("--split-out", train_opts.split_out, "subset assignment CSV to write");
  train_cmd->add_option("--vocab", train_opts.vocab, "vocabulary JSON to embed");
  add_train_flags(train_cmd, train_opts);
  train_cmd->add_option("--config", train_opts.config, "key=value config file");
  train_cmd->callback([&] { run_train(train_opts, train_cmd); });

  PredictOptions pred_opts;
  auto* pred_cmd = app.add_subcommand("predict", "score accounts with a trained detector");
  pred_cmd->add_option("--features", pred_opts.features, "feature CSV")->required();
  pred_cmd->add_option("--checkpoint", pred_opts.checkpoint, "model JSON")->required();
  pred_cmd->add_option("--out", pred_opts.out, "prediction CSV to write")->required();
  pred_cmd->add_option("--split", pred_opts.split, "subset assignment CSV");
  pred_cmd->add_option("--subset", pred_opts.subset, "subset to score when --split is given");
  pred_cmd->add_option("--uncertainty", pred_opts.uncertainty,
                       "none, epistemic, aleatoric, or quadrature");
  pred_cmd->add_option("--k-sigma", pred_opts.k_sigma, "abstention band width");
  pred_cmd->add_option("--n-samples", pred_opts.n_samples, "posterior weight samples");
  pred_cmd->add_option("--n-noise", pred_opts.n_noise, "label-noise draws per weight sample");
  pred_cmd->add_option("--batch-size", pred_opts.batch_size, "scoring batch size");
  pred_cmd->add_option("--seed", pred_opts.seed, "sampling seed");
  pred_cmd->add_option("--posterior-out", pred_opts.posterior_out,
                       "per-sample score matrix CSV to write");
  pred_cmd->add_flag("--deterministic", pred_opts.deterministic,
                     "score with the posterior means only");
  pred_cmd->add_option("--config", pred_opts.config, "key=value config file");
  pred_cmd->callback([&] { run_predict(pred_opts, pred_cmd); });

  EvaluateOptions eval_opts;
  auto* eval_cmd = app.add_subcommand("evaluate", "score predictions against ground truth");
  eval_cmd->add_option("--predictions", eval_opts.predictions, "prediction CSV")->required();
  eval_cmd->add_option("--labels", eval_opts.labels, "label CSV")->required();
  eval_cmd->add_option("--out-prefix", eval_opts.out_prefix, "output file prefix")->required();
  eval_cmd->add_option("--posterior", eval_opts.posterior, "per-sample score matrix CSV");
  eval_cmd->add_option("--k-sigma", eval_opts.k_sigma, "abstention band width");
  eval_cmd->add_option("--bins", eval_opts.bins, "profile bin count");
  eval_cmd->add_option("--band-sigma", eval_opts.band_sigma, "roc band width in spreads");
  eval_cmd->add_option("--config", eval_opts.config, "key=value config file");
  eval_cmd->callback([&] { run_evaluate(eval_opts, eval_cmd); });

  ClosureOptions closure_opts;
  auto* closure_cmd = app.add_subcommand("closure", "agreement check between two runs");
  closure_cmd->add_option("--features", closure_opts.train.features, "feature CSV")->required();
  closure_cmd->add_option("--labels", closure_opts.train.labels, "label CSV")->required();
  closure_cmd->add_option("--out", closure_opts.out, "per-account z CSV to write")->required();
  closure_cmd->add_option("--summary", closure_opts.summary, "summary JSON to write");
  closure_cmd->add_option("--threshold", closure_opts.threshold, "|z| considered disagreement");
  closure_cmd->add_option("--n-samples", closure_opts.n_samples, "posterior weight samples");
  add_train_flags(closure_cmd, closure_opts.train);
  closure_cmd->add_option("--config", closure_opts.config, "key=value config file");
  closure_cmd->callback([&] { run_closure(closure_opts, closure_cmd); });

  try {
    app.parse(argc, argv);
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const botuq::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const botuq::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
}
