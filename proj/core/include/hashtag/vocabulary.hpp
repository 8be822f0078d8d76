#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace hashtag {

using TokenId = std::int32_t;

// Reserved ids, always the first six entries of every vocabulary.
namespace special {
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kStart = 2;
inline constexpr TokenId kEnd = 3;
inline constexpr TokenId kSep = 4;
inline constexpr TokenId kMask = 5;
inline constexpr std::size_t kCount = 6;
inline constexpr std::array<std::string_view, kCount> kNames = {"<pad>",   "<unk>", "<start>",
                                                                 "<end>",   "[SEP]", "[MASK]"};
}  // namespace special

class Vocabulary {
 public:
  /// Vocabulary holding only the special tokens.
  Vocabulary();

  /// `tokens` are the non-special entries in id order (ids start at 6).
  explicit Vocabulary(std::vector<std::string> tokens);

  /// Specials plus up to (cap - 6) tokens by descending frequency, ties
  /// broken lexicographically. Requires cap > 6.
  static Vocabulary build(std::span<const std::string> cleaned_texts, std::size_t cap);

  std::size_t size() const { return id_to_token_.size(); }
  TokenId id(std::string_view token) const;  // UNK when absent
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;

  /// Non-special tokens in id order.
  std::span<const std::string> words() const {
    return std::span<const std::string>(id_to_token_).subspan(special::kCount);
  }

  static bool is_special(TokenId id) { return id >= 0 && static_cast<std::size_t>(id) < special::kCount; }

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& doc);

  bool operator==(const Vocabulary& other) const { return id_to_token_ == other.id_to_token_; }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
};

}  // namespace hashtag
