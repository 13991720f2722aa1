#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace headroom {

struct TokenStream {
  std::vector<std::string> tokens;  // lowercase
  std::vector<std::string> stems;   // parallel to tokens

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }

  friend bool operator==(const TokenStream&, const TokenStream&) = default;
};

// Lowercased runs of Unicode letters; an apostrophe (' or U+2019) is kept
// only when it sits between two letters. Everything else separates tokens.
// Input is UTF-8; invalid sequences act as separators.
std::vector<std::string> tokenize_words(std::string_view text);

TokenStream tokenize(std::string_view text);

// Porter (1980) suffix stripper. Words of one or two characters and words
// containing non-ASCII bytes are returned unchanged.
std::string porter_stem(std::string_view word);

}  // namespace headroom
