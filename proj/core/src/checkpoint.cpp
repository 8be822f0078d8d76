#include "hashtag/checkpoint.hpp"

#include <fstream>
#include <set>

#include "hashtag/error.hpp"

namespace hashtag {

nlohmann::json params_to_json(const ParameterSet& params) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& p : params.all()) {
    doc[p.name] = {{"shape", p.value.shape()}, {"data", p.value.values()}};
  }
  return doc;
}

void params_from_json(ParameterSet& params, const nlohmann::json& doc) {
  if (!doc.is_object()) throw DataError("checkpoint params must be an object");
  std::set<std::string> expected;
  for (auto& p : params.all()) {
    expected.insert(p.name);
    if (!doc.contains(p.name)) throw DataError("checkpoint is missing parameter " + p.name);
    const auto& entry = doc.at(p.name);
    try {
      const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      if (shape != p.value.shape()) throw DataError("checkpoint parameter " + p.name + " has the wrong shape");
      auto data = entry.at("data").get<std::vector<double>>();
      p.value = Tensor(shape, std::move(data));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("checkpoint parameter " + p.name + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw DataError("checkpoint parameter " + p.name + ": " + e.what());
    }
    p.grad = Tensor(p.value.shape());
  }
  for (const auto& [name, _] : doc.items()) {
    if (!expected.contains(name)) throw DataError("checkpoint has unknown parameter " + name);
  }
}

namespace {

nlohmann::json envelope(std::string_view kind, nlohmann::json config, const Vocabulary& vocab,
                        const ParameterSet& params) {
  return {{"format_version", kCheckpointFormatVersion},
          {"model_kind", kind},
          {"config", std::move(config)},
          {"vocab", vocab.to_json()},
          {"params", params_to_json(params)}};
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint: " + path.string());
  out << doc.dump() << '\n';
  if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

}  // namespace

nlohmann::json checkpoint_json(const seq2seq::Seq2SeqModel& model, const Vocabulary& vocab) {
  return envelope(kSeq2SeqKind, model.config().to_json(), vocab, model.params());
}

nlohmann::json checkpoint_json(const mlm::MaskedLMModel& model, const Vocabulary& vocab) {
  return envelope(kMaskedLMKind, model.config().to_json(), vocab, model.params());
}

void save_checkpoint(const std::filesystem::path& path, const seq2seq::Seq2SeqModel& model, const Vocabulary& vocab) {
  write_json(path, checkpoint_json(model, vocab));
}

void save_checkpoint(const std::filesystem::path& path, const mlm::MaskedLMModel& model, const Vocabulary& vocab) {
  write_json(path, checkpoint_json(model, vocab));
}

ModelBundle checkpoint_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("format_version") || !doc.contains("model_kind")) {
    throw DataError("not a checkpoint document");
  }
  if (doc.at("format_version") != kCheckpointFormatVersion) {
    throw DataError("unsupported checkpoint format_version " + doc.at("format_version").dump());
  }
  const auto kind = doc.at("model_kind").get<std::string>();
  Vocabulary vocab = Vocabulary::from_json(doc.at("vocab"));
  if (kind == kSeq2SeqKind) {
    const auto config = seq2seq::Seq2SeqConfig::from_json(doc.at("config"));
    if (config.vocab_size != vocab.size()) throw DataError("checkpoint vocab size does not match config");
    seq2seq::Seq2SeqModel model(config, 0);
    params_from_json(model.params(), doc.at("params"));
    return Seq2SeqBundle{std::move(model), std::move(vocab)};
  }
  if (kind == kMaskedLMKind) {
    const auto config = mlm::TransformerConfig::from_json(doc.at("config"));
    if (config.vocab_size != vocab.size()) throw DataError("checkpoint vocab size does not match config");
    mlm::MaskedLMModel model(config, 0);
    params_from_json(model.params(), doc.at("params"));
    return MaskedLMBundle{std::move(model), std::move(vocab)};
  }
  throw DataError("unknown model_kind '" + kind + "'");
}

ModelBundle load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint is not valid JSON: " + std::string(e.what()));
  }
  return checkpoint_from_json(doc);
}

}  // namespace hashtag
