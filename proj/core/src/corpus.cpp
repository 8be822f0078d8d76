#include "hashtag/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "hashtag/csv.hpp"
#include "hashtag/error.hpp"
#include "hashtag/rng.hpp"
#include "hashtag/text.hpp"

namespace hashtag::corpus {

namespace {

std::string trim(std::string_view s) {
  const auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_ws(s[b])) ++b;
  while (e > b && is_ws(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::optional<std::size_t> find_column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (trim(header[i]) == name) return i;
  }
  return std::nullopt;
}

}  // namespace

LoadResult load_reviews(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open reviews file: " + path.string());
  return load_reviews(in, schema);
}

LoadResult load_reviews(std::istream& in, const CsvSchema& schema) {
  CsvReader reader(in);
  auto header = reader.next();
  if (!header || !header->well_formed) throw DataError("reviews CSV has no readable header row");

  const auto title_col = find_column(header->fields, schema.title_column);
  const auto text_col = find_column(header->fields, schema.text_column);
  if (!title_col) throw DataError("missing column '" + schema.title_column + "'");
  if (!text_col) throw DataError("missing column '" + schema.text_column + "'");
  std::optional<std::size_t> id_col;
  if (!schema.id_column.empty()) {
    id_col = find_column(header->fields, schema.id_column);
    if (!id_col) throw DataError("missing column '" + schema.id_column + "'");
  }

  LoadResult result;
  std::set<std::string> seen_ids;
  std::size_t data_row = 0;
  const auto reject = [&](std::size_t line, const std::string& why) {
    const std::string msg = "line " + std::to_string(line) + ": " + why;
    if (schema.strict) throw DataError("malformed CSV row, " + msg);
    ++result.malformed;
    result.warnings.push_back(msg);
  };

  while (auto row = reader.next()) {
    ++data_row;
    if (row->fields.size() == 1 && row->fields.front().empty()) {
      --data_row;  // blank line
      continue;
    }
    if (!row->well_formed) {
      reject(row->line, row->problem);
      continue;
    }
    if (row->fields.size() != header->fields.size()) {
      reject(row->line, "expected " + std::to_string(header->fields.size()) + " fields, got " +
                            std::to_string(row->fields.size()));
      continue;
    }
    std::string id = id_col ? trim(row->fields[*id_col]) : "row-" + std::to_string(data_row);
    if (id.empty() || !seen_ids.insert(id).second) {
      reject(row->line, "missing or duplicate id '" + id + "'");
      continue;
    }
    std::string title = trim(row->fields[*title_col]);
    std::string text = trim(row->fields[*text_col]);
    if (title.empty() || text.empty()) {
      ++result.dropped_empty;
      continue;
    }
    result.records.push_back(ReviewRecord{std::move(id), std::move(title), std::move(text)});
  }
  return result;
}

std::vector<TokenId> encode(std::string_view cleaned, const Vocabulary& vocab, std::size_t max_len,
                            bool pad) {
  if (max_len == 0) throw std::invalid_argument("encode: max_len must be at least 1");
  std::vector<TokenId> ids;
  for (const auto& tok : split_tokens(cleaned)) {
    if (ids.size() == max_len) break;
    ids.push_back(vocab.id(tok));
  }
  if (pad) ids.resize(max_len, special::kPad);
  return ids;
}

std::string decode(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::vector<std::string> tokens;
  for (TokenId id : ids) {
    if (id != special::kPad) tokens.push_back(vocab.token(id));
  }
  return join_tokens(tokens);
}

std::optional<Seq2SeqExample> make_seq2seq_example(const ReviewRecord& record, const Vocabulary& vocab,
                                                   const ExampleOptions& options) {
  const std::string title = clean_text(record.title_raw);
  const std::string text = clean_text(record.text_raw);
  if (title.empty() || text.empty()) return std::nullopt;

  Seq2SeqExample ex;
  ex.id = record.id;
  ex.source_ids = encode(text, vocab, options.max_source_len, true);
  const auto title_ids = encode(title, vocab, options.max_target_len, false);
  ex.target_ids.reserve(options.max_target_len + 2);
  ex.target_ids.push_back(special::kStart);
  ex.target_ids.insert(ex.target_ids.end(), title_ids.begin(), title_ids.end());
  ex.target_ids.push_back(special::kEnd);
  ex.target_ids.resize(options.max_target_len + 2, special::kPad);
  return ex;
}

std::vector<MaskedStepExample> expand_masked_examples(const ReviewRecord& record,
                                                      const Vocabulary& vocab,
                                                      const ExampleOptions& options) {
  const std::string title = clean_text(record.title_raw);
  const std::string text = clean_text(record.text_raw);
  const auto title_tokens = split_tokens(title);
  const auto text_tokens = split_tokens(text);
  if (title_tokens.empty() || text_tokens.empty()) return {};

  const std::size_t n = title_tokens.size();
  // Longest context: text, SEP, all n title tokens, MASK.
  if (text_tokens.size() + n + 2 > options.max_context_len) return {};

  std::vector<TokenId> prefix;
  prefix.reserve(options.max_context_len);
  for (const auto& t : text_tokens) prefix.push_back(vocab.id(t));
  prefix.push_back(special::kSep);

  std::vector<MaskedStepExample> out;
  out.reserve(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    MaskedStepExample ex;
    ex.id = record.id;
    ex.context_ids = prefix;
    ex.mask_position = ex.context_ids.size();
    ex.context_ids.push_back(special::kMask);
    ex.context_ids.resize(options.max_context_len, special::kPad);
    ex.target_id = k < n ? vocab.id(title_tokens[k]) : special::kSep;
    out.push_back(std::move(ex));
    if (k < n) prefix.push_back(vocab.id(title_tokens[k]));
  }
  return out;
}

CorpusSplit split_corpus(std::vector<ReviewRecord> records, const SplitRatios& ratios,
                         std::uint64_t seed) {
  if (ratios.train < 0 || ratios.validation < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must be nonnegative and sum to 1");
  }
  if (records.size() < 3) throw DataError("need at least 3 records to split");

  Rng rng(seed);
  rng.shuffle(std::span<ReviewRecord>(records));

  const double n = static_cast<double>(records.size());
  // The epsilon absorbs representation error (0.15 * 116780 = 17516.999...).
  const auto n_val = static_cast<std::size_t>(std::floor(n * ratios.validation + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(n * ratios.test + 1e-9));
  const std::size_t n_train = records.size() - n_val - n_test;

  CorpusSplit split;
  split.seed = seed;
  split.ratios = ratios;
  auto first = std::make_move_iterator(records.begin());
  split.train.assign(first, first + static_cast<std::ptrdiff_t>(n_train));
  split.validation.assign(first + static_cast<std::ptrdiff_t>(n_train),
                          first + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(first + static_cast<std::ptrdiff_t>(n_train + n_val), std::make_move_iterator(records.end()));
  return split;
}

std::vector<ReviewRecord> filter_cleanable(std::vector<ReviewRecord> records, std::size_t* dropped) {
  std::vector<ReviewRecord> kept;
  kept.reserve(records.size());
  std::size_t removed = 0;
  for (auto& r : records) {
    if (clean_text(r.title_raw).empty() || clean_text(r.text_raw).empty()) {
      ++removed;
    } else {
      kept.push_back(std::move(r));
    }
  }
  if (dropped) *dropped = removed;
  return kept;
}

nlohmann::json to_json(const Seq2SeqExample& ex) {
  return {{"id", ex.id}, {"source_ids", ex.source_ids}, {"target_ids", ex.target_ids}};
}

nlohmann::json to_json(const MaskedStepExample& ex) {
  return {{"id", ex.id},
          {"context_ids", ex.context_ids},
          {"mask_position", ex.mask_position},
          {"target_id", ex.target_id}};
}

Seq2SeqExample seq2seq_example_from_json(const nlohmann::json& doc) {
  try {
    Seq2SeqExample ex;
    ex.id = doc.at("id").get<std::string>();
    ex.source_ids = doc.at("source_ids").get<std::vector<TokenId>>();
    ex.target_ids = doc.at("target_ids").get<std::vector<TokenId>>();
    if (ex.target_ids.size() < 2 || ex.target_ids.front() != special::kStart) {
      throw DataError("target_ids must start with START");
    }
    return ex;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad seq2seq example: ") + e.what());
  }
}

MaskedStepExample masked_example_from_json(const nlohmann::json& doc) {
  try {
    MaskedStepExample ex;
    ex.id = doc.at("id").get<std::string>();
    ex.context_ids = doc.at("context_ids").get<std::vector<TokenId>>();
    ex.mask_position = doc.at("mask_position").get<std::size_t>();
    ex.target_id = doc.at("target_id").get<TokenId>();
    if (ex.mask_position >= ex.context_ids.size() || ex.context_ids[ex.mask_position] != special::kMask) {
      throw DataError("mask_position does not point at MASK");
    }
    return ex;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad masked example: ") + e.what());
  }
}

nlohmann::json to_json(const ReviewRecord& record) {
  return {{"id", record.id}, {"review_title", record.title_raw}, {"review_text", record.text_raw}};
}

ReviewRecord record_from_json(const nlohmann::json& doc) {
  try {
    return ReviewRecord{doc.at("id").get<std::string>(), doc.at("review_title").get<std::string>(),
                        doc.at("review_text").get<std::string>()};
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad record line: ") + e.what());
  }
}

}  // namespace hashtag::corpus
