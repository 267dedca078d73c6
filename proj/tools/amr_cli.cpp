// Command-line entry point: stats, train, eval, predict, saliency, ablate.
// A JSON config file provides defaults; every key can be overridden by the
// same-named flag. All randomness derives from --seed via named sub-seeds.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "amr/analysis.hpp"
#include "amr/data.hpp"
#include "amr/model.hpp"
#include "amr/train.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
  std::string train_path, val_path, test_path;
  std::string embeddings_path, checkpoint_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  std::string variant;
  int index = 0;
  bool dry_run = false;
  bool verify = false;

  amr::ModelConfig model;
  amr::TrainConfig train;
};

/// Staged flag values for one subcommand; merged in resolve() so that the
/// precedence is defaults < config file < variant < explicit flags.
struct Cli {
  CLI::App* cmd = nullptr;

  std::string config_path;
  std::string train_path, val_path, test_path, embeddings_path, checkpoint_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string variant;
  int index = 0;
  bool dry_run = false;
  bool verify = false;

  int r = 0, d = 0, n_cap = 0, m_cap = 0;
  std::string path_mode;
  bool use_attention = false, use_rereading = false;
  bool aug_identity = false, aug_diff = false, aug_prod = false;
  bool train_embeddings = false;
  double learning_rate = 0;
  int batch_size = 0, max_epochs = 0, patience = 0;
  double dropout_rate = 0;

  std::map<std::string, CLI::Option*> opts;

  template <typename T>
  void opt(const std::string& name, T& target, const std::string& help) {
    opts[name] = cmd->add_option(name, target, help);
  }
  void flag(const std::string& name, bool& target, const std::string& help) {
    opts[name] = cmd->add_flag(name, target, help);
  }
  bool given(const std::string& name) const {
    auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }
};

void add_common(Cli& c) {
  c.opt("--config", c.config_path, "JSON config file");
  c.opt("--seed", c.seed, "master seed for all randomness");
  c.opt("--out", c.out_dir, "output directory");
}

void add_model_flags(Cli& c) {
  c.opt("--variant", c.variant, "named ablation variant");
  c.opt("--r", c.r, "embedding width");
  c.opt("--d", c.d, "hidden width");
  c.opt("--n-cap", c.n_cap, "maximum comment length");
  c.opt("--m-cap", c.m_cap, "maximum response length");
  c.opt("--path-mode", c.path_mode, "both|utterance_only|conversation_only");
  c.opt("--use-attention", c.use_attention, "enable the attention stage");
  c.opt("--use-rereading", c.use_rereading, "enable the re-reading stage");
  c.opt("--aug-identity", c.aug_identity, "include base and attended terms");
  c.opt("--aug-diff", c.aug_diff, "include the difference term");
  c.opt("--aug-prod", c.aug_prod, "include the product term");
  c.opt("--train-embeddings", c.train_embeddings, "fine-tune embeddings");
}

void add_train_flags(Cli& c) {
  c.opt("--learning-rate", c.learning_rate, "Adam learning rate");
  c.opt("--batch-size", c.batch_size, "batch size");
  c.opt("--dropout-rate", c.dropout_rate, "dropout rate");
  c.opt("--max-epochs", c.max_epochs, "maximum epochs");
  c.opt("--patience", c.patience, "non-improving epochs before stopping");
}

void apply_config_file(const std::string& path, RunConfig& rc) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json obj = json::parse(in);

  auto str = [&](const char* key, std::string& out) {
    if (obj.contains(key)) out = obj[key].get<std::string>();
  };
  str("train", rc.train_path);
  str("val", rc.val_path);
  str("test", rc.test_path);
  str("embeddings", rc.embeddings_path);
  str("checkpoint", rc.checkpoint_path);
  str("out", rc.out_dir);
  str("variant", rc.variant);
  if (obj.contains("seed")) rc.seed = obj["seed"].get<std::uint64_t>();

  amr::ModelConfig& m = rc.model;
  if (obj.contains("r")) m.r = obj["r"].get<int>();
  if (obj.contains("d")) m.d = obj["d"].get<int>();
  if (obj.contains("n_cap")) m.n_cap = obj["n_cap"].get<int>();
  if (obj.contains("m_cap")) m.m_cap = obj["m_cap"].get<int>();
  if (obj.contains("path_mode")) {
    m.path_mode = amr::path_mode_from_name(obj["path_mode"].get<std::string>());
  }
  auto boolean = [&](const char* key, bool& out) {
    if (obj.contains(key)) out = obj[key].get<bool>();
  };
  boolean("use_attention", m.use_attention);
  boolean("use_rereading", m.use_rereading);
  boolean("aug_identity", m.aug_identity);
  boolean("aug_diff", m.aug_diff);
  boolean("aug_prod", m.aug_prod);
  boolean("train_embeddings", m.train_embeddings);

  amr::TrainConfig& t = rc.train;
  if (obj.contains("learning_rate")) t.learning_rate = obj["learning_rate"].get<double>();
  if (obj.contains("batch_size")) t.batch_size = obj["batch_size"].get<int>();
  if (obj.contains("dropout_rate")) t.dropout_rate = obj["dropout_rate"].get<double>();
  if (obj.contains("max_epochs")) t.max_epochs = obj["max_epochs"].get<int>();
  if (obj.contains("patience")) t.patience = obj["patience"].get<int>();
}

RunConfig resolve(const Cli& c) {
  RunConfig rc;
  if (c.given("--config")) apply_config_file(c.config_path, rc);

  if (c.given("--variant")) rc.variant = c.variant;
  if (!rc.variant.empty()) amr::apply_variant(rc.model, rc.variant);

  if (c.given("--train")) rc.train_path = c.train_path;
  if (c.given("--val")) rc.val_path = c.val_path;
  if (c.given("--test")) rc.test_path = c.test_path;
  if (c.given("--embeddings")) rc.embeddings_path = c.embeddings_path;
  if (c.given("--checkpoint")) rc.checkpoint_path = c.checkpoint_path;
  if (c.given("--out")) rc.out_dir = c.out_dir;
  if (c.given("--seed")) rc.seed = c.seed;
  if (c.given("--index")) rc.index = c.index;
  if (c.given("--dry-run")) rc.dry_run = c.dry_run;
  if (c.given("--verify")) rc.verify = c.verify;

  amr::ModelConfig& m = rc.model;
  if (c.given("--r")) m.r = c.r;
  if (c.given("--d")) m.d = c.d;
  if (c.given("--n-cap")) m.n_cap = c.n_cap;
  if (c.given("--m-cap")) m.m_cap = c.m_cap;

  auto override_bool = [&](const char* name, bool& field, bool staged) {
    if (!c.given(name)) return;
    if (!rc.variant.empty() && field != staged) {
      std::cerr << "warning: " << name << " overrides variant `" << rc.variant
                << "`\n";
    }
    field = staged;
  };
  if (c.given("--path-mode")) {
    amr::PathMode staged = amr::path_mode_from_name(c.path_mode);
    if (!rc.variant.empty() && m.path_mode != staged) {
      std::cerr << "warning: --path-mode overrides variant `" << rc.variant << "`\n";
    }
    m.path_mode = staged;
  }
  override_bool("--use-attention", m.use_attention, c.use_attention);
  override_bool("--use-rereading", m.use_rereading, c.use_rereading);
  override_bool("--aug-identity", m.aug_identity, c.aug_identity);
  override_bool("--aug-diff", m.aug_diff, c.aug_diff);
  override_bool("--aug-prod", m.aug_prod, c.aug_prod);
  override_bool("--train-embeddings", m.train_embeddings, c.train_embeddings);

  amr::TrainConfig& t = rc.train;
  if (c.given("--learning-rate")) t.learning_rate = c.learning_rate;
  if (c.given("--batch-size")) t.batch_size = c.batch_size;
  if (c.given("--dropout-rate")) t.dropout_rate = c.dropout_rate;
  if (c.given("--max-epochs")) t.max_epochs = c.max_epochs;
  if (c.given("--patience")) t.patience = c.patience;
  t.seed = rc.seed;
  return rc;
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw std::runtime_error("missing required path: " + what);
  if (!fs::exists(path)) throw std::runtime_error(what + " not found: " + path);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
}

json model_config_json(const amr::ModelConfig& m) {
  return json{{"r", m.r},
              {"d", m.d},
              {"n_cap", m.n_cap},
              {"m_cap", m.m_cap},
              {"path_mode", amr::path_mode_name(m.path_mode)},
              {"use_attention", m.use_attention},
              {"use_rereading", m.use_rereading},
              {"aug_identity", m.aug_identity},
              {"aug_diff", m.aug_diff},
              {"aug_prod", m.aug_prod},
              {"train_embeddings", m.train_embeddings}};
}

json resolved_config_json(const RunConfig& rc) {
  json obj = model_config_json(rc.model);
  obj["learning_rate"] = rc.train.learning_rate;
  obj["batch_size"] = rc.train.batch_size;
  obj["dropout_rate"] = rc.train.dropout_rate;
  obj["max_epochs"] = rc.train.max_epochs;
  obj["patience"] = rc.train.patience;
  obj["seed"] = rc.seed;
  obj["variant"] = rc.variant;
  obj["train"] = rc.train_path;
  obj["val"] = rc.val_path;
  obj["test"] = rc.test_path;
  obj["embeddings"] = rc.embeddings_path;
  return obj;
}

std::vector<amr::Example> load_truncated(const std::string& path,
                                         const amr::ModelConfig& m,
                                         bool require_label = true) {
  std::vector<amr::Example> examples = amr::load_corpus(path, require_label);
  for (amr::Example& e : examples) e = amr::truncate(e, m.n_cap, m.m_cap);
  return examples;
}

// ------------------------------------------------------------- commands

int cmd_stats(const RunConfig& rc) {
  require_file(rc.train_path, "--train corpus");
  auto examples = amr::load_corpus(rc.train_path);
  amr::CorpusStats stats = amr::compute_stats(examples);

  json obj;
  for (int y = 0; y < 2; ++y) {
    json cls;
    cls["count"] = stats.per_class[y].count;
    if (stats.per_class[y].mean_comment_len) {
      cls["mean_comment_len"] = *stats.per_class[y].mean_comment_len;
      cls["mean_response_len"] = *stats.per_class[y].mean_response_len;
    }
    obj[y == 1 ? "sarcastic" : "non_sarcastic"] = cls;
  }
  obj["total"] = stats.total();

  fs::create_directories(rc.out_dir);
  write_text((fs::path(rc.out_dir) / "stats.json").string(), obj.dump(2) + "\n");

  std::cout << "class          count  avg_comment  avg_response\n";
  for (int y = 1; y >= 0; --y) {
    const auto& cls = stats.per_class[y];
    std::cout << (y ? "sarcastic      " : "non-sarcastic  ") << cls.count;
    if (cls.mean_comment_len) {
      std::cout << "  " << *cls.mean_comment_len << "  " << *cls.mean_response_len;
    }
    std::cout << "\n";
  }
  return 0;
}

struct TrainedRun {
  amr::TrainResult result;
  amr::Vocabulary vocab;
};

TrainedRun run_training(const RunConfig& rc, const amr::ModelConfig& model_cfg,
                        std::uint64_t seed) {
  auto train_all = load_truncated(rc.train_path, model_cfg);
  std::vector<amr::Example> train_split, val_split;
  if (!rc.val_path.empty()) {
    train_split = std::move(train_all);
    val_split = load_truncated(rc.val_path, model_cfg);
  } else {
    std::tie(train_split, val_split) =
        amr::split_train_val(train_all, 0.10, amr::sub_seed(seed, "split"));
  }

  amr::Vocabulary vocab = amr::build_vocab(train_split);
  amr::EmbeddingMatrix embeddings =
      rc.embeddings_path.empty()
          ? amr::random_embeddings(vocab, model_cfg.r, amr::sub_seed(seed, "embeddings"))
          : amr::load_embeddings(rc.embeddings_path, vocab, model_cfg.r,
                                 amr::sub_seed(seed, "embeddings"));

  amr::AmrParams params =
      amr::init_model(model_cfg, vocab, embeddings, amr::sub_seed(seed, "init"));

  amr::TrainConfig tcfg = rc.train;
  tcfg.seed = seed;
  TrainedRun run{amr::train_loop(model_cfg, std::move(params), vocab, train_split,
                                 val_split, tcfg),
                 std::move(vocab)};
  return run;
}

int cmd_train(const RunConfig& rc) {
  rc.model.validate();
  rc.train.validate();
  require_file(rc.train_path, "--train corpus");
  if (!rc.val_path.empty()) require_file(rc.val_path, "--val corpus");
  if (!rc.embeddings_path.empty()) require_file(rc.embeddings_path, "--embeddings file");
  fs::create_directories(rc.out_dir);

  TrainedRun run = run_training(rc, rc.model, rc.seed);

  const std::string ckpt = (fs::path(rc.out_dir) / "checkpoint.amr").string();
  amr::save_checkpoint(run.result.best_params, rc.model, run.vocab, ckpt);
  amr::write_history((fs::path(rc.out_dir) / "history.jsonl").string(),
                     run.result.history);
  write_text((fs::path(rc.out_dir) / "config.json").string(),
             resolved_config_json(rc).dump(2) + "\n");

  std::cout << "best epoch " << run.result.best_epoch << ", val accuracy "
            << run.result.best_val_accuracy << "\n"
            << "checkpoint: " << ckpt << "\n";
  return 0;
}

int cmd_eval(const RunConfig& rc) {
  require_file(rc.checkpoint_path, "--checkpoint");
  require_file(rc.test_path, "--test corpus");
  fs::create_directories(rc.out_dir);

  amr::Checkpoint ck = amr::load_checkpoint(rc.checkpoint_path);
  auto data = load_truncated(rc.test_path, ck.config);

  amr::MetricsReport report =
      amr::evaluate(ck.params, ck.config, ck.vocab, data, rc.train.batch_size);
  write_text((fs::path(rc.out_dir) / "metrics.json").string(),
             amr::metrics_to_json(report) + "\n");
  std::cout << amr::metrics_to_json(report) << "\n";

  if (ck.config.path_mode == amr::PathMode::both) {
    amr::PathAttribution attribution = amr::path_attribution(
        ck.params, ck.config, ck.vocab, data, rc.train.batch_size);
    write_text((fs::path(rc.out_dir) / "path_attribution.json").string(),
               amr::path_attribution_to_json(attribution) + "\n");

    std::vector<amr::SystemOutcomes> systems(3);
    systems[0].name = "amr";
    systems[1].name = "utterance_head";
    systems[2].name = "conversation_head";
    for (const auto& rec : attribution.records) {
      systems[0].predicted.push_back(rec.combined);
      systems[1].predicted.push_back(rec.utterance);
      systems[2].predicted.push_back(rec.conversation);
    }
    amr::LengthStudy study = amr::length_study(systems, data);
    write_text((fs::path(rc.out_dir) / "length_study.csv").string(),
               amr::length_study_to_csv(study));
  }
  return 0;
}

int cmd_predict(const RunConfig& rc) {
  require_file(rc.checkpoint_path, "--checkpoint");
  require_file(rc.test_path, "--test input");
  fs::create_directories(rc.out_dir);

  amr::Checkpoint ck = amr::load_checkpoint(rc.checkpoint_path);
  auto data = load_truncated(rc.test_path, ck.config, /*require_label=*/false);
  auto preds =
      amr::predict_dataset(ck.params, ck.config, ck.vocab, data, rc.train.batch_size);

  const std::string out_path = (fs::path(rc.out_dir) / "predictions.jsonl").string();
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot open for writing: " + out_path);
  for (const auto& p : preds) {
    json line;
    line["label"] = p.combined;
    line["probabilities"] = {p.p0, p.p1};
    out << line.dump() << '\n';
  }
  std::cout << "wrote " << preds.size() << " predictions to " << out_path << "\n";
  return 0;
}

int cmd_saliency(const RunConfig& rc) {
  require_file(rc.checkpoint_path, "--checkpoint");
  require_file(rc.test_path, "--test corpus");
  fs::create_directories(rc.out_dir);

  amr::Checkpoint ck = amr::load_checkpoint(rc.checkpoint_path);
  auto data = load_truncated(rc.test_path, ck.config);
  if (rc.index < 0 || rc.index >= static_cast<int>(data.size())) {
    throw std::runtime_error("--index " + std::to_string(rc.index) +
                             " outside corpus of " + std::to_string(data.size()));
  }
  const amr::Example& example = data[rc.index];

  amr::SaliencyMap map = amr::saliency(ck.params, ck.config, ck.vocab, example);
  const std::string out_path = (fs::path(rc.out_dir) / "saliency.json").string();
  write_text(out_path, amr::saliency_to_json(map) + "\n");
  std::cout << "wrote " << out_path << " (predicted " << map.predicted_label
            << ", p=" << map.predicted_probability << ")\n";

  if (rc.verify) {
    amr::SaliencyCheckReport check =
        amr::saliency_fd_check(ck.params, ck.config, ck.vocab, example, 1e-4, 1e-3);
    std::cout << "finite-difference check: max rel err " << check.max_rel_err
              << " over " << check.entries_checked << " entries -> "
              << (check.pass ? "pass" : "FAIL") << "\n";
    if (!check.pass) return 1;
  }
  return 0;
}

int cmd_ablate(const RunConfig& rc) {
  rc.train.validate();
  require_file(rc.train_path, "--train corpus");
  if (!rc.val_path.empty()) require_file(rc.val_path, "--val corpus");
  if (!rc.dry_run) require_file(rc.test_path, "--test corpus");
  fs::create_directories(rc.out_dir);

  const auto& names = amr::variant_names();

  if (rc.dry_run) {
    json plan = json::array();
    for (std::size_t row = 0; row < names.size(); ++row) {
      amr::ModelConfig cfg = rc.model;
      amr::apply_variant(cfg, names[row]);
      cfg.validate();
      // shapes only; a tiny vocabulary suffices for the structure check
      amr::Example seed_example;
      seed_example.comment_tokens = {"a"};
      seed_example.response_tokens = {"b"};
      amr::Vocabulary vocab = amr::build_vocab({seed_example});
      amr::EmbeddingMatrix em = amr::random_embeddings(vocab, cfg.r, 1);
      amr::AmrParams params = amr::init_model(cfg, vocab, em, 1);
      const std::size_t count = amr::parameter_count(params);
      std::cout << names[row] << ": ok, parameters (tiny vocab) = " << count << "\n";
      plan.push_back({{"variant", names[row]},
                      {"row", row + 1},
                      {"parameters_tiny_vocab", count},
                      {"config", model_config_json(cfg)}});
    }
    write_text((fs::path(rc.out_dir) / "ablation_plan.json").string(),
               plan.dump(2) + "\n");
    return 0;
  }

  std::ostringstream csv;
  csv << "variant,row,precision,recall,f1,accuracy,parameters\n";
  for (std::size_t row = 0; row < names.size(); ++row) {
    amr::ModelConfig cfg = rc.model;
    amr::apply_variant(cfg, names[row]);
    cfg.validate();

    RunConfig sub = rc;
    sub.out_dir = (fs::path(rc.out_dir) / names[row]).string();
    fs::create_directories(sub.out_dir);

    TrainedRun run = run_training(sub, cfg, amr::sub_seed(rc.seed, names[row]));
    const std::size_t params_count = amr::parameter_count(run.result.best_params);

    amr::save_checkpoint(run.result.best_params, cfg, run.vocab,
                         (fs::path(sub.out_dir) / "checkpoint.amr").string());
    amr::write_history((fs::path(sub.out_dir) / "history.jsonl").string(),
                       run.result.history);

    auto test = load_truncated(rc.test_path, cfg);
    amr::MetricsReport report = amr::evaluate(run.result.best_params, cfg, run.vocab,
                                              test, rc.train.batch_size);
    char line[256];
    std::snprintf(line, sizeof(line), "%s,%zu,%.6f,%.6f,%.6f,%.6f,%zu\n",
                  names[row].c_str(), row + 1, report.precision, report.recall,
                  report.f1, report.accuracy, params_count);
    csv << line;
    std::cout << names[row] << ": acc " << report.accuracy << ", f1 " << report.f1
              << ", params " << params_count << "\n";
  }
  write_text((fs::path(rc.out_dir) / "ablation.csv").string(), csv.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attentional multi-reading sarcasm detection"};
  app.require_subcommand(1);

  std::vector<Cli> clis(6);
  Cli& stats = clis[0];
  Cli& train = clis[1];
  Cli& eval = clis[2];
  Cli& predict = clis[3];
  Cli& sal = clis[4];
  Cli& ablate = clis[5];

  stats.cmd = app.add_subcommand("stats", "dataset statistics");
  add_common(stats);
  stats.opt("--train", stats.train_path, "corpus to analyze");

  train.cmd = app.add_subcommand("train", "train a model");
  add_common(train);
  train.opt("--train", train.train_path, "training corpus");
  train.opt("--val", train.val_path, "validation corpus (else 10% held out)");
  train.opt("--embeddings", train.embeddings_path, "GloVe text file");
  add_model_flags(train);
  add_train_flags(train);

  eval.cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval);
  eval.opt("--checkpoint", eval.checkpoint_path, "model checkpoint");
  eval.opt("--test", eval.test_path, "evaluation corpus");
  eval.opt("--batch-size", eval.batch_size, "inference batch size");

  predict.cmd = app.add_subcommand("predict", "label a JSONL file");
  add_common(predict);
  predict.opt("--checkpoint", predict.checkpoint_path, "model checkpoint");
  predict.opt("--test", predict.test_path, "input JSONL (labels optional)");
  predict.opt("--batch-size", predict.batch_size, "inference batch size");

  sal.cmd = app.add_subcommand("saliency", "attention saliency for one example");
  add_common(sal);
  sal.opt("--checkpoint", sal.checkpoint_path, "model checkpoint");
  sal.opt("--test", sal.test_path, "corpus with the example");
  sal.opt("--index", sal.index, "example index (default 0)");
  sal.flag("--verify", sal.verify, "finite-difference check");

  ablate.cmd = app.add_subcommand("ablate", "run the full ablation matrix");
  add_common(ablate);
  ablate.opt("--train", ablate.train_path, "training corpus");
  ablate.opt("--val", ablate.val_path, "validation corpus");
  ablate.opt("--test", ablate.test_path, "evaluation corpus");
  ablate.flag("--dry-run", ablate.dry_run, "validate configs without training");
  add_model_flags(ablate);
  add_train_flags(ablate);

  CLI11_PARSE(app, argc, argv);

  try {
    if (stats.cmd->parsed()) return cmd_stats(resolve(stats));
    if (train.cmd->parsed()) return cmd_train(resolve(train));
    if (eval.cmd->parsed()) return cmd_eval(resolve(eval));
    if (predict.cmd->parsed()) return cmd_predict(resolve(predict));
    if (sal.cmd->parsed()) return cmd_saliency(resolve(sal));
    if (ablate.cmd->parsed()) return cmd_ablate(resolve(ablate));
    std::cerr << "no command selected\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
