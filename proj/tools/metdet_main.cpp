// metdet: metaphor-detection pipeline over dictionary-grounded corpora.
//
// Subcommands: augment, train, evaluate, predict, significance, report.
// Exit codes: 0 success, 1 I/O failure, 2 usage/validation failure,
// 3 numeric failure.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "metdet/corpus.hpp"
#include "metdet/error.hpp"
#include "metdet/eval.hpp"
#include "metdet/lexicon.hpp"
#include "metdet/train.hpp"
#include "metdet/tsv.hpp"
#include "metdet/version.hpp"
#include "metdet/wsd.hpp"

namespace fs = std::filesystem;
using namespace metdet;

namespace {

int exit_code_for(const error& e) {
  switch (e.kind()) {
    case errc::io: return 1;
    case errc::validation: return 2;
    case errc::numeric: return 3;
  }
  return 1;
}

std::string provenance(const std::string& command,
                       const std::vector<std::pair<std::string, std::string>>& flags) {
  std::string out = std::string(kToolName) + " " + kToolVersion + " " + command;
  for (const auto& [k, v] : flags) out += " --" + k + "=" + v;
  return out;
}

std::unique_ptr<GlossScorer> make_scorer(const std::string& name,
                                         const std::string& stopwords_path) {
  if (name == "overlap") {
    if (stopwords_path.empty()) return std::make_unique<OverlapScorer>();
    std::ifstream in(stopwords_path);
    if (!in) throw io_error("FileOpen", "cannot open " + stopwords_path);
    std::set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      words.insert(line);
    }
    return std::make_unique<OverlapScorer>(std::move(words));
  }
  if (name == "encoder") return make_hashed_encoder_scorer();
  throw validation_error("BadScorer", "unknown scorer '" + name + "'");
}

bool config_file_sets_key(const fs::path& path, const std::string& key) {
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string k = line.substr(0, eq);
    k.erase(0, k.find_first_not_of(" \t"));
    const auto end = k.find_last_not_of(" \t");
    if (end != std::string::npos) k.erase(end + 1);
    if (k == key) return true;
  }
  return false;
}

bool looks_pruned(const std::string& path) {
  return path.find("(-)") != std::string::npos ||
         path.find("pruned") != std::string::npos;
}

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

// ---------------------------------------------------------------------------

struct AugmentArgs {
  std::string corpus, lexicon, out, pruned_out, scorer = "overlap", stopwords;
};

int cmd_augment(const AugmentArgs& args) {
  const auto corpus = load_corpus(args.corpus);
  const auto lexicon = LexiconSnapshot::load(args.lexicon);
  const auto scorer = make_scorer(args.scorer, args.stopwords);

  const auto augmented = augment_corpus(corpus, lexicon, *scorer);
  std::size_t selected = 0;
  for (const auto& aug : augmented)
    if (aug.sense_source == SenseSource::Selected) ++selected;

  std::vector<std::pair<std::string, std::string>> flags = {
      {"corpus", args.corpus}, {"lexicon", args.lexicon},
      {"out", args.out},       {"scorer", args.scorer}};
  write_augmented(augmented, args.out, provenance("augment", flags));

  std::cout << "total: " << augmented.size() << '\n';
  std::cout << "selected: " << selected << '\n';
  std::cout << "fallback: " << augmented.size() - selected << '\n';

  if (!args.pruned_out.empty()) {
    const auto pruned = prune_missing_senses(augmented);
    flags.emplace_back("pruned-out", args.pruned_out);
    write_augmented(pruned, args.pruned_out, provenance("augment", flags));
    std::cout << "pruned: " << pruned.size() << '\n';
  }
  return 0;
}

struct TrainArgs {
  std::string train, val, config, out_dir;
  std::vector<int> seed_flags;
  std::string seeds_csv;
  double class_weight = -1.0;
  int epochs = -1;
  double learning_rate = -1.0;
  int warmup_epochs = -1;
  double dropout = -1.0;
  int batch_size = -1;
  int encoder_dim = -1;
  int hidden_dim = -1;
  int max_seq_len = -1;
  bool share_def_encoders = false;
  std::string vocab;
};

int cmd_train(const TrainArgs& args) {
  TrainConfig cfg;
  bool class_weight_set = false;
  if (!args.config.empty()) {
    cfg = TrainConfig::load(args.config);
    class_weight_set = config_file_sets_key(args.config, "class_weight");
  }
  if (args.epochs >= 0) cfg.epochs = args.epochs;
  if (args.learning_rate >= 0) cfg.learning_rate = args.learning_rate;
  if (args.warmup_epochs >= 0) cfg.warmup_epochs = args.warmup_epochs;
  if (args.dropout >= 0) cfg.dropout = args.dropout;
  if (args.batch_size >= 0) cfg.batch_size = args.batch_size;
  if (args.encoder_dim >= 0) cfg.encoder_dim = args.encoder_dim;
  if (args.hidden_dim >= 0) cfg.hidden_dim = args.hidden_dim;
  if (args.max_seq_len >= 0) cfg.max_seq_len = args.max_seq_len;
  if (args.share_def_encoders) cfg.share_def_encoders = true;
  if (!args.vocab.empty()) cfg.vocab_file = args.vocab;
  if (!args.seeds_csv.empty()) cfg.set("seeds", args.seeds_csv);
  if (!args.seed_flags.empty()) cfg.seeds = args.seed_flags;
  if (args.class_weight >= 0) {
    cfg.class_weight = args.class_weight;
    class_weight_set = true;
  }
  if (!class_weight_set && looks_pruned(args.train)) {
    cfg.class_weight = default_class_weight(/*pruned=*/true);
    std::cerr << "note: pruned training file detected, using class weight "
              << cfg.class_weight << '\n';
  }
  cfg.validate();

  const auto train_data = read_augmented(args.train);
  const auto val_data = read_augmented(args.val);

  auto [runs, aggregate] = run_seeds(cfg, train_data, val_data, args.out_dir);

  std::vector<std::pair<std::string, std::string>> flags = {
      {"train", args.train}, {"val", args.val}, {"out-dir", args.out_dir}};
  for (const auto& [k, v] : cfg.to_kv()) flags.emplace_back(k, v);
  write_metrics_report(aggregate, fs::path(args.out_dir) / "metrics.tsv",
                       provenance("train", flags));

  for (const auto& run : runs) {
    std::cout << "seed " << run.seed << ": val F1 " << fmt4(run.val_metrics.f1)
              << ", final epoch loss " << fmt4(run.per_epoch_loss.back()) << ", "
              << run.checkpoint_path.string() << '\n';
  }
  std::cout << "mean val F1 over " << runs.size() << " seed(s): "
            << fmt4(aggregate.f1) << '\n';
  return 0;
}

struct EvaluateArgs {
  std::string test, checkpoint, out, metrics_out;
  bool by_pos = false;
};

int cmd_evaluate(const EvaluateArgs& args) {
  const auto data = read_augmented(args.test);
  const auto ckpt = load_checkpoint(args.checkpoint);

  std::vector<double> probs;
  const auto preds = predict_all(ckpt, data, &probs);

  std::vector<Prediction> rows;
  std::vector<int> labels;
  std::vector<CorpusInstance> bases;
  rows.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    rows.push_back(Prediction{data[i].base.sentence_id, preds[i], probs[i]});
    labels.push_back(data[i].base.label);
    bases.push_back(data[i].base);
  }

  MetricsReport report;
  const Prf overall = precision_recall_f1(confusion(preds, labels));
  report.precision = overall.precision;
  report.recall = overall.recall;
  report.f1 = overall.f1;
  if (args.by_pos) report.per_pos = evaluate_by_pos(preds, bases);

  std::vector<std::pair<std::string, std::string>> flags = {
      {"test", args.test}, {"checkpoint", args.checkpoint}, {"out", args.out}};
  if (args.by_pos) flags.emplace_back("by-pos", "true");
  write_predictions(rows, args.out, provenance("evaluate", flags));

  fs::path metrics_path = args.metrics_out.empty()
                              ? fs::path(args.out).replace_extension(".metrics.tsv")
                              : fs::path(args.metrics_out);
  write_metrics_report(report, metrics_path, provenance("evaluate", flags));

  std::cout << "precision: " << fmt4(report.precision) << '\n';
  std::cout << "recall: " << fmt4(report.recall) << '\n';
  std::cout << "f1: " << fmt4(report.f1) << '\n';
  for (const auto& [tag, m] : report.per_pos)
    std::cout << "f1[" << to_string(tag) << "]: " << fmt4(m.f1) << '\n';
  std::cout << "predictions: " << args.out << '\n';
  std::cout << "metrics: " << metrics_path.string() << '\n';
  return 0;
}

struct PredictArgs {
  std::string sentence;
  int target_index = -1;
  std::string pos = "OTHER";
  std::string checkpoint, lexicon, scorer = "overlap", stopwords;
};

int cmd_predict(const PredictArgs& args) {
  CorpusInstance inst;
  inst.sentence_id = "cli";
  std::istringstream ss(args.sentence);
  std::string word;
  while (ss >> word) inst.tokens.push_back(word);
  if (inst.tokens.empty())
    throw validation_error("EmptySentence", "--sentence must contain tokens");
  if (args.target_index < 0 ||
      static_cast<std::size_t>(args.target_index) >= inst.tokens.size())
    throw validation_error("BadTargetIndex",
                           "--target-index out of range for " +
                               std::to_string(inst.tokens.size()) + " tokens");
  inst.target_index = static_cast<std::size_t>(args.target_index);
  bool known = false;
  inst.pos_tag = parse_pos_tag(args.pos, &known);
  if (!known)
    std::cerr << "warning: POS tag '" << args.pos << "' outside the closed set, "
              << "using OTHER\n";
  inst.label = 0;  // unknown; not reported

  const auto lexicon = LexiconSnapshot::load(args.lexicon);
  const auto scorer = make_scorer(args.scorer, args.stopwords);
  const auto augmented = augment_corpus({inst}, lexicon, *scorer);
  const auto& aug = augmented.front();

  const auto ckpt = load_checkpoint(args.checkpoint);
  const auto views = encode_views(aug, ckpt.stack(), ckpt.vocab, ckpt.max_len);
  const double p = ckpt.head.p_metaphor(views);

  std::cout << "target word: " << aug.base.target_word() << '\n';
  std::cout << "lemma: " << normalize(aug.base.target_word(), aug.base.pos_tag) << '\n';
  std::cout << "sense definition (" << to_string(aug.sense_source)
            << "): " << aug.sense_definition << '\n';
  std::cout << "basic definition (" << to_string(aug.basic_source)
            << "): " << aug.basic_definition << '\n';
  std::cout << "P(metaphor): " << fmt4(p) << '\n';
  std::cout << "prediction: " << (p > 0.5 ? "metaphorical" : "literal") << '\n';
  return 0;
}

struct SignificanceArgs {
  std::string run_a, run_b;
  bool welch = false;
};

int cmd_significance(const SignificanceArgs& args) {
  auto seed_f1 = [](const std::string& path) {
    std::vector<double> f1;
    for (const auto& row : read_seed_metrics(path)) f1.push_back(row.f1);
    if (f1.size() < 2)
      throw validation_error("SampleTooSmall",
                             path + " holds fewer than two per-seed rows");
    return f1;
  };
  const auto a = seed_f1(args.run_a);
  const auto b = seed_f1(args.run_b);
  const auto res = two_tailed_ttest(a, b, args.welch);

  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", res.t_statistic);
  std::cout << "t = " << buf << '\n';
  std::snprintf(buf, sizeof(buf), "%g", res.degrees_of_freedom);
  std::cout << "df = " << buf << '\n';
  std::snprintf(buf, sizeof(buf), "%.6f", res.p_value);
  std::cout << "p = " << buf << '\n';
  std::cout << (res.significant_at_05 ? "significant at p < 0.05"
                                      : "not significant at p < 0.05")
            << '\n';
  return 0;
}

struct ReportArgs {
  std::vector<std::string> preds;
  std::string test, out;
};

int cmd_report(const ReportArgs& args) {
  const auto dataset = read_augmented(args.test);
  std::vector<std::pair<std::string, std::vector<int>>> model_preds;
  for (const auto& path : args.preds) {
    const auto rows = read_predictions(path);
    if (rows.size() != dataset.size())
      throw validation_error("LengthMismatch",
                             path + " holds " + std::to_string(rows.size()) +
                                 " predictions for " + std::to_string(dataset.size()) +
                                 " test instances");
    std::vector<int> labels;
    labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].sentence_id != dataset[i].base.sentence_id)
        throw validation_error("LengthMismatch",
                               path + ": row " + std::to_string(i + 1) +
                                   " sentence_id '" + rows[i].sentence_id +
                                   "' does not match the test file");
      labels.push_back(rows[i].label);
    }
    model_preds.emplace_back(fs::path(path).stem().string(), std::move(labels));
  }

  const auto rows = case_studies(model_preds, dataset);
  std::cout << render_case_studies_text(rows);
  if (!args.out.empty()) {
    std::ofstream out(args.out);
    if (!out) throw io_error("FileOpen", "cannot write " + args.out);
    std::vector<std::pair<std::string, std::string>> flags = {{"test", args.test}};
    out << "# " << provenance("report", flags) << '\n';
    out << render_case_studies_tsv(rows);
    if (!out) throw io_error("FileWrite", "write failure on " + args.out);
    std::cout << "report: " << args.out << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metaphor detection via sense/basic-definition contrast"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  AugmentArgs aug_args;
  auto* augment = app.add_subcommand(
      "augment", "attach word-sense and basic definitions to a corpus");
  augment->add_option("--corpus", aug_args.corpus, "input corpus TSV")->required();
  augment->add_option("--lexicon", aug_args.lexicon, "lexicon snapshot file")->required();
  augment->add_option("--out", aug_args.out, "augmented output TSV")->required();
  augment->add_option("--pruned-out", aug_args.pruned_out,
                      "also write the variant with fallback rows removed");
  augment->add_option("--scorer", aug_args.scorer, "gloss scorer: overlap|encoder")
      ->check(CLI::IsMember({"overlap", "encoder"}));
  augment->add_option("--stopwords", aug_args.stopwords,
                      "stopword list file for the overlap scorer");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train classification heads per seed");
  train->add_option("--train", train_args.train, "augmented training TSV")->required();
  train->add_option("--val", train_args.val, "augmented validation TSV")->required();
  train->add_option("--config", train_args.config, "key = value config file");
  train->add_option("--out-dir", train_args.out_dir, "checkpoint/metrics directory")
      ->required();
  auto* seed_opt = train->add_option("--seed", train_args.seed_flags,
                                     "single seed (repeatable)");
  train->add_option("--seeds", train_args.seeds_csv, "comma-separated seed list")
      ->excludes(seed_opt);
  train->add_option("--class-weight", train_args.class_weight,
                    "metaphor class weight (default 3; pruned data defaults to 4)");
  train->add_option("--epochs", train_args.epochs, "training epochs");
  train->add_option("--lr", train_args.learning_rate, "peak learning rate");
  train->add_option("--warmup-epochs", train_args.warmup_epochs, "warmup epochs");
  train->add_option("--dropout", train_args.dropout, "dropout rate");
  train->add_option("--batch-size", train_args.batch_size, "batch size");
  train->add_option("--encoder-dim", train_args.encoder_dim, "encoder dimension");
  train->add_option("--hidden-dim", train_args.hidden_dim, "head hidden dimension");
  train->add_option("--max-seq-len", train_args.max_seq_len, "maximum input length");
  train->add_flag("--share-def-encoders", train_args.share_def_encoders,
                  "share the sense/basic definition encoders");
  train->add_option("--vocab", train_args.vocab, "vocabulary file (else built from data)");

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "run a checkpoint over a test set");
  evaluate->add_option("--test", eval_args.test, "augmented test TSV")->required();
  evaluate->add_option("--checkpoint", eval_args.checkpoint, "checkpoint file")
      ->required();
  evaluate->add_option("--out", eval_args.out, "predictions output TSV")->required();
  evaluate->add_option("--metrics-out", eval_args.metrics_out,
                       "metrics output path (default: <out>.metrics.tsv)");
  evaluate->add_flag("--by-pos", eval_args.by_pos, "add per-POS metric rows");

  PredictArgs pred_args;
  auto* predict = app.add_subcommand("predict", "classify one target word in a sentence");
  predict->add_option("--sentence", pred_args.sentence, "whitespace-tokenized sentence")
      ->required();
  predict->add_option("--target-index", pred_args.target_index,
                      "0-based index of the target word")
      ->required();
  predict->add_option("--pos", pred_args.pos, "POS tag: VERB|NOUN|ADJ|ADV|OTHER");
  predict->add_option("--checkpoint", pred_args.checkpoint, "checkpoint file")
      ->required();
  predict->add_option("--lexicon", pred_args.lexicon, "lexicon snapshot file")
      ->required();
  predict->add_option("--scorer", pred_args.scorer, "gloss scorer: overlap|encoder")
      ->check(CLI::IsMember({"overlap", "encoder"}));
  predict->add_option("--stopwords", pred_args.stopwords, "stopword list file");

  SignificanceArgs sig_args;
  auto* significance =
      app.add_subcommand("significance", "t-test over two per-seed metric files");
  significance->add_option("--run-a", sig_args.run_a, "first metrics.tsv")->required();
  significance->add_option("--run-b", sig_args.run_b, "second metrics.tsv")->required();
  significance->add_flag("--welch", sig_args.welch, "use the Welch variant");

  ReportArgs rep_args;
  auto* report = app.add_subcommand("report", "disagreement table across models");
  report->add_option("--preds", rep_args.preds, "prediction TSVs, one per model")
      ->required()
      ->expected(-1);
  report->add_option("--test", rep_args.test, "augmented test TSV")->required();
  report->add_option("--out", rep_args.out, "write the TSV rendering here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (augment->parsed()) return cmd_augment(aug_args);
    if (train->parsed()) return cmd_train(train_args);
    if (evaluate->parsed()) return cmd_evaluate(eval_args);
    if (predict->parsed()) return cmd_predict(pred_args);
    if (significance->parsed()) return cmd_significance(sig_args);
    if (report->parsed()) return cmd_report(rep_args);
  } catch (const error& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
