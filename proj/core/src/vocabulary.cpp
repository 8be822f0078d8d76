#include "hashtag/vocabulary.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "hashtag/error.hpp"
#include "hashtag/text.hpp"

namespace hashtag {

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
  id_to_token_.reserve(special::kCount + tokens.size());
  for (auto name : special::kNames) id_to_token_.emplace_back(name);
  for (auto& t : tokens) id_to_token_.push_back(std::move(t));
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    const auto [it, inserted] = token_to_id_.emplace(id_to_token_[i], static_cast<TokenId>(i));
    if (!inserted) throw DataError("vocabulary: duplicate token '" + id_to_token_[i] + "'");
  }
}

Vocabulary Vocabulary::build(std::span<const std::string> cleaned_texts, std::size_t cap) {
  if (cap <= special::kCount) {
    throw std::invalid_argument("vocabulary cap must exceed the number of special tokens");
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& text : cleaned_texts) {
    for (auto& tok : split_tokens(text)) ++counts[std::move(tok)];
  }
  // Specials never compete for slots even if they show up verbatim in text.
  for (auto name : special::kNames) counts.erase(std::string(name));

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t keep = std::min(ranked.size(), cap - special::kCount);
  std::vector<std::string> tokens;
  tokens.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) tokens.push_back(std::move(ranked[i].first));
  return Vocabulary(std::move(tokens));
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? special::kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return token_to_id_.contains(std::string(token));
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

nlohmann::json Vocabulary::to_json() const {
  nlohmann::json doc;
  doc["specials"] = std::vector<std::string>(id_to_token_.begin(), id_to_token_.begin() + special::kCount);
  doc["tokens"] = std::vector<std::string>(words().begin(), words().end());
  return doc;
}

Vocabulary Vocabulary::from_json(const nlohmann::json& doc) {
  if (!doc.contains("specials") || !doc.contains("tokens")) {
    throw DataError("vocabulary JSON needs 'specials' and 'tokens'");
  }
  const auto specials = doc.at("specials").get<std::vector<std::string>>();
  if (specials.size() != special::kCount ||
      !std::equal(specials.begin(), specials.end(), special::kNames.begin())) {
    throw DataError("vocabulary JSON has unexpected special tokens");
  }
  return Vocabulary(doc.at("tokens").get<std::vector<std::string>>());
}

}  // namespace hashtag
