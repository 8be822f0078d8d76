#include "hashtag/cli.hpp"

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "hashtag/annosvc.hpp"
#include "hashtag/annotation.hpp"
#include "hashtag/error.hpp"
#include "hashtag/metrics.hpp"
#include "hashtag/pipeline.hpp"
#include "hashtag/text.hpp"

namespace hashtag::cli {

namespace fs = std::filesystem;
using pipeline::UsageError;

fs::path resolve_data_path(const fs::path& path) {
  if (path.empty() || path.is_absolute() || fs::exists(path)) return path;
  if (const char* env = std::getenv("HASHTAG_DATA_DIR"); env != nullptr && *env != '\0') {
    if (auto candidate = fs::path(env) / path; fs::exists(candidate)) return candidate;
  }
#ifdef HASHTAG_DEFAULT_DATA_DIR
  if (auto candidate = fs::path(HASHTAG_DEFAULT_DATA_DIR) / path; fs::exists(candidate)) return candidate;
#endif
  return path;
}

namespace {

fs::path existing_input(const fs::path& path) {
  auto resolved = resolve_data_path(path);
  if (!fs::exists(resolved)) throw DataError("input not found: " + path.string());
  return resolved;
}

std::vector<fs::path> existing_inputs(const std::vector<std::string>& paths) {
  std::vector<fs::path> out;
  for (const auto& p : paths) out.push_back(existing_input(p));
  return out;
}

// Flag values gathered by CLI11, one block per subcommand.
struct PreprocessFlags {
  std::string input = "sample_reviews.csv";
  std::string outdir;
  std::string model = "both";
  std::uint64_t seed = 42;
  double val_ratio = 0.15;
  double test_ratio = 0.15;
  std::size_t vocab_cap = corpus::kDefaultVocabCap;
  std::size_t max_target_len = corpus::kDefaultTargetLen;
  std::string title_column = "review_title";
  std::string text_column = "review_text";
  std::string id_column;
  bool strict = false;
  bool force = false;
};

struct TrainFlags {
  std::string model;
  std::string data;
  std::string output;
  std::string history;
  std::string preset = "standard";
  std::optional<std::size_t> epochs;
  std::size_t batch = 128;
  double lr = 1e-3;
  std::uint64_t seed = 42;
  std::size_t patience = 3;
  std::optional<double> target_accuracy;
  bool force = false;
};

struct PredictFlags {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  std::string output;
  std::size_t max_len = corpus::kDefaultTargetLen;
  bool force = false;
};

struct EvaluateFlags {
  std::string preds;
  std::string report;
  std::string info_corpus;
  bool force = false;
};

struct StatsFlags {
  std::string preds;
  std::string output;
  bool force = false;
};

struct WordcloudFlags {
  std::string preds;
  std::string texts;
  std::string field = "predicted_title";
  std::string output;
  std::size_t top = 200;
  bool force = false;
};

struct AnnotateFlags {
  std::vector<std::string> preds;
  std::string store;
  std::string annotator;
  bool reveal = false;
  bool sample = false;
  std::optional<double> sample_fraction;
  std::uint64_t seed = 42;
};

struct ServeFlags {
  std::vector<std::string> preds;
  std::string store;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
};

void print_metric_lines(const metrics::MetricReport& report, std::ostream& out) {
  for (const auto& [name, m] : report.metrics) {
    out << name << ": " << metrics::format_mean_sd(m.stats.mean, m.stats.sd) << " (normalized mean "
        << m.normalized_mean << ")\n";
  }
}

int cmd_preprocess(const PreprocessFlags& f, std::ostream& err) {
  pipeline::PreprocessOptions o;
  o.input = existing_input(f.input);
  o.outdir = f.outdir;
  if (f.model == "both") {
    o.models = {pipeline::ModelKind::bilstm, pipeline::ModelKind::maskedlm};
  } else {
    o.models = {pipeline::parse_model_kind(f.model)};
  }
  o.seed = f.seed;
  o.ratios = {1.0 - f.val_ratio - f.test_ratio, f.val_ratio, f.test_ratio};
  o.vocab_cap = f.vocab_cap;
  o.examples.max_target_len = f.max_target_len;
  o.schema = {f.title_column, f.text_column, f.id_column, f.strict};
  o.force = f.force;
  pipeline::preprocess(o, &err);
  return kExitOk;
}

int cmd_train(const TrainFlags& f, std::ostream& err) {
  pipeline::TrainOptions o;
  o.model = pipeline::parse_model_kind(f.model);
  o.data_dir = existing_input(f.data);
  o.checkpoint = f.output;
  o.history = f.history.empty() ? fs::path(f.output).replace_extension(".history.jsonl") : fs::path(f.history);
  o.preset = pipeline::parse_preset(f.preset);
  o.fit.epochs = f.epochs.value_or(o.model == pipeline::ModelKind::bilstm ? 20 : 5);
  o.fit.batch_size = f.batch;
  o.fit.seed = f.seed;
  o.fit.patience = f.patience;
  o.fit.target_train_accuracy = f.target_accuracy;
  o.learning_rate = f.lr;
  o.force = f.force;
  pipeline::train(o, &err);
  return kExitOk;
}

int cmd_predict(const PredictFlags& f, std::ostream& err) {
  pipeline::ensure_writable(f.output, f.force);
  const auto bundle = load_checkpoint(existing_input(f.checkpoint));
  const auto records = pipeline::read_records(pipeline::records_file(existing_input(f.data), f.split));
  const auto predictions = pipeline::predict(bundle, records, f.max_len);
  pipeline::write_jsonl(f.output, predictions);
  err << "predict: wrote " << predictions.size() << " predictions to " << f.output << "\n";
  return kExitOk;
}

int cmd_evaluate(const EvaluateFlags& f, std::ostream& out) {
  pipeline::ensure_writable(f.report, f.force);
  std::optional<fs::path> info;
  if (!f.info_corpus.empty()) info = existing_input(f.info_corpus);
  const auto report = metrics::evaluate_file(existing_input(f.preds), info);
  pipeline::write_text_file(f.report, report.to_json().dump(2) + "\n");
  print_metric_lines(report, out);
  if (report.skipped_lines > 0) out << "skipped " << report.skipped_lines << " malformed line(s)\n";
  return kExitOk;
}

int cmd_stats(const StatsFlags& f, std::ostream& out) {
  if (!f.output.empty()) pipeline::ensure_writable(f.output, f.force);
  const auto file = metrics::read_predictions(existing_input(f.preds));
  auto doc = metrics::length_and_creativity_json(file.records);
  doc["rows"] = file.records.size();
  doc["skipped_lines"] = file.skipped_lines;
  if (f.output.empty()) {
    out << doc.dump(2) << "\n";
  } else {
    pipeline::write_text_file(f.output, doc.dump(2) + "\n");
  }
  return kExitOk;
}

int cmd_wordcloud(const WordcloudFlags& f) {
  if (f.preds.empty() == f.texts.empty()) throw UsageError("give exactly one of --preds or --texts");
  pipeline::ensure_writable(f.output, f.force);
  std::vector<std::string> texts;
  if (!f.preds.empty()) {
    for (const auto& p : metrics::read_predictions(existing_input(f.preds)).records) {
      if (f.field == "predicted_title") texts.push_back(p.predicted_title);
      else if (f.field == "original_title") texts.push_back(p.original_title);
      else texts.push_back(p.review_text);
    }
  } else {
    std::ifstream in(existing_input(f.texts), std::ios::binary);
    std::string line;
    while (std::getline(in, line)) texts.push_back(clean_text(line));
  }
  std::string tsv;
  for (const auto& wc : metrics::word_frequencies(texts, f.top)) {
    tsv += wc.token + "\t" + std::to_string(wc.count) + "\n";
  }
  pipeline::write_text_file(f.output, tsv);
  return kExitOk;
}

int cmd_annotate(const AnnotateFlags& f, std::istream& in, std::ostream& out) {
  const auto pool = annotation::load_item_pool(existing_inputs(f.preds));
  annotation::ScoreStore store(f.store);
  annotation::TerminalOptions o;
  o.annotator = f.annotator;
  o.reveal = f.reveal;
  o.seed = f.seed;
  if (f.sample_fraction) {
    if (*f.sample_fraction <= 0.0 || *f.sample_fraction > 1.0) throw UsageError("--sample-fraction must be in (0, 1]");
    o.sample_fraction = f.sample_fraction;
  } else if (f.sample) {
    o.sample_fraction = annotation::kDefaultSampleFraction;
  }
  const auto result = annotation::annotate_terminal(pool, store, o, in, out);
  const auto scores = store.effective_scores();
  const auto summary = annotation::summary_json(pool, scores);
  out << "recorded " << result.recorded << " score(s); overall metricF "
      << (summary["overall"]["display"].is_null() ? std::string("n/a") : summary["overall"]["display"].get<std::string>())
      << "\n";
  return kExitOk;
}

annosvc::Server* g_server = nullptr;

void handle_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

int cmd_serve(const ServeFlags& f, std::ostream& err) {
  auto pool = annotation::load_item_pool(existing_inputs(f.preds));
  annotation::ScoreStore store(f.store);
  annosvc::AnnotationService service(std::move(pool), store);
  std::optional<fs::path> static_dir;
  if (!f.static_dir.empty()) static_dir = f.static_dir;
  annosvc::Server server(service, static_dir);
  const int port = server.bind(f.host, f.port);
  err << "serving " << service.pool().size() << " items on http://" << f.host << ":" << port << "\n";
  g_server = &server;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  server.run();
  g_server = nullptr;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hashtag generation from product reviews: data preparation, training, evaluation and annotation",
               "hashtag"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  PreprocessFlags pre;
  auto* p = app.add_subcommand("preprocess", "Clean, split and encode a review CSV");
  p->add_option("--input", pre.input, "Review CSV (looked up in $HASHTAG_DATA_DIR when relative)")->capture_default_str();
  p->add_option("--outdir", pre.outdir, "Dataset output directory")->required();
  p->add_option("--model", pre.model, "Framing to emit")
      ->check(CLI::IsMember({"bilstm", "maskedlm", "both"}))
      ->capture_default_str();
  p->add_option("--seed", pre.seed, "Split seed")->capture_default_str();
  p->add_option("--val-ratio", pre.val_ratio, "Validation fraction")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  p->add_option("--test-ratio", pre.test_ratio, "Test fraction")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  p->add_option("--vocab-cap", pre.vocab_cap, "Vocabulary size including specials")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  p->add_option("--max-target-len", pre.max_target_len, "Title words kept for the seq2seq target")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  p->add_option("--title-column", pre.title_column, "CSV title column")->capture_default_str();
  p->add_option("--text-column", pre.text_column, "CSV review text column")->capture_default_str();
  p->add_option("--id-column", pre.id_column, "CSV id column (rows are numbered when omitted)");
  p->add_flag("--strict", pre.strict, "Fail on malformed CSV rows instead of skipping them");
  p->add_flag("--force", pre.force, "Overwrite existing outputs");

  TrainFlags tr;
  auto* t = app.add_subcommand("train", "Train a model on a preprocessed dataset");
  t->add_option("--model", tr.model, "bilstm or maskedlm")->required()->check(CLI::IsMember({"bilstm", "maskedlm"}));
  t->add_option("--data", tr.data, "Dataset directory from preprocess")->required();
  t->add_option("--output", tr.output, "Checkpoint path (JSON)")->required();
  t->add_option("--history", tr.history, "Per-epoch history log (default: output path with extension .history.jsonl)");
  t->add_option("--preset", tr.preset, "Model dims: tiny, standard or base (masked LM only)")
      ->check(CLI::IsMember({"tiny", "standard", "base"}))
      ->capture_default_str();
  t->add_option("--epochs", tr.epochs, "Epochs (default 20 for bilstm, 5 for maskedlm)")->check(CLI::PositiveNumber);
  t->add_option("--batch", tr.batch, "Batch size")->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--lr", tr.lr, "Adam learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--seed", tr.seed, "Initialization and shuffling seed")->capture_default_str();
  t->add_option("--patience", tr.patience, "Early-stopping patience on val accuracy (0 disables)")->capture_default_str();
  t->add_option("--target-accuracy", tr.target_accuracy, "Stop once train accuracy reaches this value")
      ->check(CLI::Range(0.0, 1.0));
  t->add_flag("--force", tr.force, "Overwrite existing outputs");

  PredictFlags pr;
  auto* d = app.add_subcommand("predict", "Generate titles for a dataset split");
  d->add_option("--checkpoint", pr.checkpoint, "Checkpoint from train")->required();
  d->add_option("--data", pr.data, "Dataset directory from preprocess")->required();
  d->add_option("--split", pr.split, "Split to predict")->check(CLI::IsMember({"train", "val", "test"}))->capture_default_str();
  d->add_option("--output", pr.output, "Predictions JSONL")->required();
  d->add_option("--max-len", pr.max_len, "Maximum decoded title length (seq2seq)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  d->add_flag("--force", pr.force, "Overwrite existing outputs");

  EvaluateFlags ev;
  auto* e = app.add_subcommand("evaluate", "Score predictions with BLEU, NIST and METEOR");
  e->add_option("--preds", ev.preds, "Predictions JSONL")->required();
  e->add_option("--report", ev.report, "Report JSON output")->required();
  e->add_option("--info-corpus", ev.info_corpus, "Plain-text corpus for NIST weights (default: original titles)");
  e->add_flag("--force", ev.force, "Overwrite existing outputs");

  StatsFlags st;
  auto* s = app.add_subcommand("stats", "Title length and vocabulary statistics");
  s->add_option("--preds", st.preds, "Predictions JSONL")->required();
  s->add_option("--output", st.output, "JSON output (stdout when omitted)");
  s->add_flag("--force", st.force, "Overwrite existing outputs");

  WordcloudFlags wc;
  auto* w = app.add_subcommand("wordcloud", "Export word frequencies as TSV");
  w->add_option("--preds", wc.preds, "Predictions JSONL");
  w->add_option("--texts", wc.texts, "Plain text file, one text per line");
  w->add_option("--field", wc.field, "Prediction field to count")
      ->check(CLI::IsMember({"predicted_title", "original_title", "review_text"}))
      ->capture_default_str();
  w->add_option("--output", wc.output, "TSV output")->required();
  w->add_option("--top", wc.top, "Number of words kept")->check(CLI::PositiveNumber)->capture_default_str();
  w->add_flag("--force", wc.force, "Overwrite existing outputs");

  AnnotateFlags an;
  auto* a = app.add_subcommand("annotate", "Score titles interactively (0 / 5 / 1 keys)");
  a->add_option("--preds", an.preds, "Predictions JSONL file(s)")->required();
  a->add_option("--store", an.store, "Score store (JSON lines, appended)")->required();
  a->add_option("--annotator", an.annotator, "Annotator id")->required();
  a->add_flag("--reveal", an.reveal, "Show which model produced each title");
  a->add_flag("--sample", an.sample, "Only present a 6% sample of the items");
  a->add_option("--sample-fraction", an.sample_fraction, "Only present this fraction of the items");
  a->add_option("--seed", an.seed, "Presentation order seed")->capture_default_str();

  ServeFlags sv;
  auto* v = app.add_subcommand("serve", "Run the annotation HTTP API");
  v->add_option("--preds", sv.preds, "Predictions JSONL file(s)")->required();
  v->add_option("--store", sv.store, "Score store (JSON lines, appended)")->required();
  v->add_option("--host", sv.host, "Bind address")->capture_default_str();
  v->add_option("--port", sv.port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535))->capture_default_str();
  v->add_option("--static", sv.static_dir, "Directory with the annotation UI bundle");

  std::vector<std::string> argv_storage{"hashtag"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a_ : argv_storage) argv.push_back(a_.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex, out, err) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex, out, err) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::ParseError& ex) {
    app.exit(ex, out, err);
    return kExitUsage;
  }

  try {
    if (p->parsed()) return cmd_preprocess(pre, err);
    if (t->parsed()) return cmd_train(tr, err);
    if (d->parsed()) return cmd_predict(pr, err);
    if (e->parsed()) return cmd_evaluate(ev, out);
    if (s->parsed()) return cmd_stats(st, out);
    if (w->parsed()) return cmd_wordcloud(wc);
    if (a->parsed()) return cmd_annotate(an, in, out);
    if (v->parsed()) return cmd_serve(sv, err);
  } catch (const UsageError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace hashtag::cli
