#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace hashtag {

/// Normalizes review text: lowercase, drop digits and every character that is
/// not a (Latin, possibly accented) letter, whitespace or one of `. , ! ?`,
/// surround each kept punctuation mark with single spaces, collapse
/// whitespace and trim. Invalid UTF-8 bytes are dropped. Idempotent.
std::string clean_text(std::string_view raw);

/// Splits on ASCII whitespace, skipping empty pieces.
std::vector<std::string> split_tokens(std::string_view text);

std::string join_tokens(const std::vector<std::string>& tokens);

/// True for the four punctuation tokens kept by clean_text.
bool is_punctuation_token(std::string_view token);

}  // namespace hashtag
