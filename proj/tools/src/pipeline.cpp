#include "hashtag/pipeline.hpp"

#include <fstream>
#include <set>
#include <variant>

#include "hashtag/error.hpp"
#include "hashtag/text.hpp"

namespace hashtag::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path records_file(const fs::path& dir, std::string_view split) {
  return dir / ("records_" + std::string(split) + ".jsonl");
}

fs::path dataset_file(const fs::path& dir, std::string_view model, std::string_view split) {
  return dir / (std::string(model) + "_" + std::string(split) + ".jsonl");
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "bilstm") return ModelKind::bilstm;
  if (name == "maskedlm") return ModelKind::maskedlm;
  throw UsageError("unknown model '" + std::string(name) + "' (expected bilstm or maskedlm)");
}

std::string_view model_name(ModelKind kind) { return kind == ModelKind::bilstm ? "bilstm" : "maskedlm"; }

Preset parse_preset(std::string_view name) {
  if (name == "tiny") return Preset::tiny;
  if (name == "standard") return Preset::standard;
  if (name == "base") return Preset::base;
  throw UsageError("unknown preset '" + std::string(name) + "' (expected tiny, standard or base)");
}

void ensure_writable(const fs::path& path, bool force) {
  if (!force && fs::exists(path)) {
    throw UsageError("refusing to overwrite " + path.string() + " (pass --force)");
  }
}

void write_text_file(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << contents;
  if (!out) throw DataError("write failed: " + path.string());
}

namespace {

template <typename Items, typename ToJson>
std::string jsonl(const Items& items, ToJson&& to_json) {
  std::string out;
  for (const auto& item : items) {
    out += to_json(item).dump();
    out += '\n';
  }
  return out;
}

template <typename T, typename FromJson>
std::vector<T> read_jsonl(const fs::path& path, FromJson&& from_json) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<T> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::vector<corpus::ReviewRecord> read_records(const fs::path& path) {
  return read_jsonl<corpus::ReviewRecord>(path, [](const json& j) { return corpus::record_from_json(j); });
}

std::vector<corpus::Seq2SeqExample> read_seq2seq_examples(const fs::path& path) {
  return read_jsonl<corpus::Seq2SeqExample>(path, [](const json& j) { return corpus::seq2seq_example_from_json(j); });
}

std::vector<corpus::MaskedStepExample> read_masked_examples(const fs::path& path) {
  return read_jsonl<corpus::MaskedStepExample>(path, [](const json& j) { return corpus::masked_example_from_json(j); });
}

Vocabulary read_vocabulary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return Vocabulary::from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

json preprocess(const PreprocessOptions& options, std::ostream* log) {
  if (options.models.empty()) throw UsageError("no model framing selected");
  const auto loaded = corpus::load_reviews(options.input, options.schema);
  if (log) {
    for (const auto& w : loaded.warnings) *log << "warning: " << w << "\n";
  }
  std::size_t uncleanable = 0;
  auto records = corpus::filter_cleanable(loaded.records, &uncleanable);
  if (records.size() < 3) throw DataError("need at least 3 usable reviews, found " + std::to_string(records.size()));
  const auto split = corpus::split_corpus(std::move(records), options.ratios, options.seed);
  const std::array<const std::vector<corpus::ReviewRecord>*, 3> parts = {&split.train, &split.validation, &split.test};

  std::vector<std::string> vocab_texts;
  for (const auto& r : split.train) {
    vocab_texts.push_back(clean_text(r.title_raw));
    vocab_texts.push_back(clean_text(r.text_raw));
  }
  const Vocabulary vocab = Vocabulary::build(vocab_texts, options.vocab_cap);

  // Everything is computed before any file is touched.
  std::vector<std::pair<fs::path, std::string>> outputs;
  outputs.emplace_back(options.outdir / kVocabFile, vocab.to_json().dump(2) + "\n");
  json summary;
  summary["input_rows"] = loaded.records.size() + loaded.dropped_empty + loaded.malformed;
  summary["dropped_empty"] = loaded.dropped_empty;
  summary["malformed_rows"] = loaded.malformed;
  summary["dropped_uncleanable"] = uncleanable;
  summary["seed"] = options.seed;
  summary["ratios"] = {options.ratios.train, options.ratios.validation, options.ratios.test};
  summary["vocab_size"] = vocab.size();
  summary["vocab_cap"] = options.vocab_cap;

  for (std::size_t s = 0; s < kSplits.size(); ++s) {
    const auto& recs = *parts[s];
    summary["records"][kSplits[s]] = recs.size();
    outputs.emplace_back(records_file(options.outdir, kSplits[s]),
                         jsonl(recs, [](const corpus::ReviewRecord& r) { return corpus::to_json(r); }));
    for (ModelKind kind : options.models) {
      const std::string name(model_name(kind));
      if (kind == ModelKind::bilstm) {
        std::vector<corpus::Seq2SeqExample> examples;
        for (const auto& r : recs) {
          if (auto ex = corpus::make_seq2seq_example(r, vocab, options.examples)) examples.push_back(std::move(*ex));
        }
        summary["examples"][name][kSplits[s]] = examples.size();
        outputs.emplace_back(dataset_file(options.outdir, name, kSplits[s]),
                             jsonl(examples, [](const corpus::Seq2SeqExample& e) { return corpus::to_json(e); }));
      } else {
        std::vector<corpus::MaskedStepExample> examples;
        std::size_t too_long = 0;
        for (const auto& r : recs) {
          auto expanded = corpus::expand_masked_examples(r, vocab, options.examples);
          if (expanded.empty()) ++too_long;
          for (auto& e : expanded) examples.push_back(std::move(e));
        }
        summary["examples"][name][kSplits[s]] = examples.size();
        summary["dropped_too_long"][kSplits[s]] = too_long;
        outputs.emplace_back(dataset_file(options.outdir, name, kSplits[s]),
                             jsonl(examples, [](const corpus::MaskedStepExample& e) { return corpus::to_json(e); }));
      }
    }
  }
  outputs.emplace_back(options.outdir / kSummaryFile, summary.dump(2) + "\n");

  for (const auto& [path, _] : outputs) ensure_writable(path, options.force);
  fs::create_directories(options.outdir);
  for (const auto& [path, contents] : outputs) write_text_file(path, contents);
  if (log) {
    *log << "preprocess: " << split.train.size() << "/" << split.validation.size() << "/" << split.test.size()
         << " train/val/test records, vocabulary " << vocab.size() << "\n";
  }
  return summary;
}

namespace {

seq2seq::Seq2SeqConfig seq2seq_config(Preset preset, std::size_t vocab_size) {
  switch (preset) {
    case Preset::tiny:
      return seq2seq::Seq2SeqConfig::tiny(vocab_size);
    case Preset::standard:
      return seq2seq::Seq2SeqConfig::paper(vocab_size);
    case Preset::base:
      break;
  }
  throw UsageError("preset 'base' applies to the masked LM only");
}

mlm::TransformerConfig mlm_config(Preset preset, std::size_t vocab_size) {
  switch (preset) {
    case Preset::tiny:
      return mlm::TransformerConfig::tiny(vocab_size);
    case Preset::base:
      return mlm::TransformerConfig::base(vocab_size);
    case Preset::standard:
      break;
  }
  mlm::TransformerConfig c;
  c.vocab_size = vocab_size;
  return c;
}

template <typename Model, typename Example, typename TrainFn, typename EvalFn>
TrainResult fit_model(Model& model, const TrainOptions& options, const std::vector<Example>& train_set,
                      const std::vector<Example>& val_set, TrainFn&& train_fn, EvalFn&& eval_fn,
                      std::ofstream& history, std::ostream* log) {
  AdamOptimizer optimizer(AdamConfig{options.learning_rate});
  TrainResult result;
  result.train_examples = train_set.size();
  result.val_examples = val_set.size();
  result.history = fit_loop(
      options.fit,
      [&](std::uint64_t seed) { return train_fn(model, optimizer, train_set, options.fit.batch_size, seed); },
      [&]() -> std::optional<EpochStats> {
        if (val_set.empty()) return std::nullopt;
        return eval_fn(model, val_set);
      },
      [&](const HistoryEntry& entry) {
        history << entry.to_json().dump() << '\n' << std::flush;
        if (log) {
          *log << "epoch " << entry.epoch << ": loss " << entry.train_loss << ", train_acc " << entry.train_acc;
          if (entry.val_acc) *log << ", val_acc " << *entry.val_acc;
          *log << "\n";
        }
      });
  return result;
}

}  // namespace

TrainResult train(const TrainOptions& options, std::ostream* log) {
  if (options.fit.batch_size == 0) throw UsageError("batch size must be positive");
  if (options.fit.epochs == 0) throw UsageError("epochs must be positive");
  if (!(options.learning_rate > 0.0)) throw UsageError("learning rate must be positive");
  ensure_writable(options.checkpoint, options.force);
  ensure_writable(options.history, options.force);

  const Vocabulary vocab = read_vocabulary(options.data_dir / kVocabFile);
  const std::string name(model_name(options.model));
  const auto train_path = dataset_file(options.data_dir, name, "train");
  const auto val_path = dataset_file(options.data_dir, name, "val");

  if (options.history.has_parent_path()) fs::create_directories(options.history.parent_path());
  std::ofstream history(options.history, std::ios::binary | std::ios::trunc);
  if (!history) throw DataError("cannot write " + options.history.string());

  TrainResult result;
  if (options.model == ModelKind::bilstm) {
    const auto train_set = read_seq2seq_examples(train_path);
    const auto val_set = fs::exists(val_path) ? read_seq2seq_examples(val_path) : std::vector<corpus::Seq2SeqExample>{};
    if (train_set.empty()) throw DataError("no training examples in " + train_path.string());
    auto config = seq2seq_config(options.preset, vocab.size());
    config.max_target_len = train_set.front().target_ids.size() - 2;
    seq2seq::Seq2SeqModel model(config, options.fit.seed);
    result = fit_model(
        model, options, train_set, val_set,
        [](auto& m, auto& o, const auto& ex, std::size_t b, std::uint64_t s) { return seq2seq::train_epoch(m, o, ex, b, s); },
        [](const auto& m, const auto& ex) { return seq2seq::evaluate(m, ex); }, history, log);
    save_checkpoint(options.checkpoint, model, vocab);
  } else {
    const auto train_set = read_masked_examples(train_path);
    const auto val_set =
        fs::exists(val_path) ? read_masked_examples(val_path) : std::vector<corpus::MaskedStepExample>{};
    if (train_set.empty()) throw DataError("no training examples in " + train_path.string());
    mlm::MaskedLMModel model(mlm_config(options.preset, vocab.size()), options.fit.seed);
    result = fit_model(
        model, options, train_set, val_set,
        [](auto& m, auto& o, const auto& ex, std::size_t b, std::uint64_t s) { return mlm::train_epoch(m, o, ex, b, s); },
        [](const auto& m, const auto& ex) { return mlm::evaluate(m, ex); }, history, log);
    save_checkpoint(options.checkpoint, model, vocab);
  }
  if (log) *log << "saved " << options.checkpoint.string() << "\n";
  return result;
}

std::string predict_one(const ModelBundle& bundle, std::string_view cleaned_text, std::size_t max_title_len) {
  return std::visit(
      [&](const auto& b) -> std::string {
        using B = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<B, Seq2SeqBundle>) {
          const auto source = corpus::encode(cleaned_text, b.vocab, b.model.config().max_source_len, true);
          return corpus::decode(b.model.greedy_decode(source, max_title_len).tokens, b.vocab);
        } else {
          const auto review = corpus::encode(cleaned_text, b.vocab, b.model.config().max_len, false);
          const auto trace =
              mlm::generate_autoregressive(mlm::model_predictor(b.model), review, b.model.config().max_len);
          return corpus::decode(trace.tokens, b.vocab);
        }
      },
      bundle);
}

std::vector<metrics::PredictionRecord> predict(const ModelBundle& bundle, std::span<const corpus::ReviewRecord> records,
                                               std::size_t max_title_len) {
  const std::string kind = std::holds_alternative<Seq2SeqBundle>(bundle) ? "bilstm" : "maskedlm";
  std::vector<metrics::PredictionRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const std::string text = clean_text(r.text_raw);
    const std::string title = clean_text(r.title_raw);
    if (text.empty() || title.empty()) continue;
    out.push_back({r.id, text, title, predict_one(bundle, text, max_title_len), kind});
  }
  return out;
}

void write_jsonl(const fs::path& path, std::span<const metrics::PredictionRecord> records) {
  write_text_file(path, jsonl(records, [](const metrics::PredictionRecord& p) { return p.to_json(); }));
}

}  // namespace hashtag::pipeline
