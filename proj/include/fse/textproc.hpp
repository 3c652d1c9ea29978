#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fse {

// Word-level vocabulary with five reserved ids. The special surface strings
// ("[PAD]" .. "[SEP]") are never admitted as corpus tokens; they always map to
// their reserved ids.
struct Vocab {
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kBos = 2;
  static constexpr std::size_t kEos = 3;
  static constexpr std::size_t kSep = 4;

  std::unordered_map<std::string, std::size_t> token_to_id;
  std::vector<std::string> id_to_token;  // includes specials at ids 0..4
  std::size_t min_freq = 1;
  bool lowercase = false;  // whether corpus words were lowercased when built

  std::size_t size() const { return id_to_token.size(); }
};

struct TokenSequence {
  std::vector<std::size_t> ids;

  std::size_t size() const { return ids.size(); }

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

// The five reserved surface strings, in id order.
const std::array<std::string, 5>& special_tokens();

// Builds a vocabulary over whitespace-split words of the corpus documents.
// Words with frequency >= min_freq get ids from 5 upward, ordered by
// descending frequency then lexicographically. min_freq must be >= 1.
Vocab build_vocab(std::span<const std::string> corpus, std::size_t min_freq,
                  bool lowercase = false);

// Whitespace-splits text and maps each word to its id. Special strings map to
// their reserved ids; unknown words map to kUnk. Applies the vocabulary's
// lowercase flag to non-special words.
TokenSequence encode(const Vocab& vocab, std::string_view text);

// Inverse rendering: tokens joined by single spaces, kPad dropped, kUnk
// rendered as "[UNK]". Ids beyond the vocabulary raise std::out_of_range.
std::string decode(const Vocab& vocab, const TokenSequence& sequence);

// Vocabulary file: JSON {"min_freq": n, "tokens": [ids 5..]}; the five
// specials are implied and not stored.
void save_vocab(const Vocab& vocab, const std::filesystem::path& path);
Vocab load_vocab(const std::filesystem::path& path);

}  // namespace fse
