#include "fse/textproc.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>

#include "fse/annotations.hpp"  // split_whitespace
#include "json.hpp"

namespace fse {

namespace {

const std::array<std::string, 5> kSpecials = {"[PAD]", "[UNK]", "[BOS]", "[EOS]", "[SEP]"};

bool is_special(const std::string& word) {
  return std::find(kSpecials.begin(), kSpecials.end(), word) != kSpecials.end();
}

std::string ascii_lower(std::string word) {
  for (char& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return word;
}

Vocab vocab_from_words(std::vector<std::string> words, std::size_t min_freq, bool lowercase) {
  Vocab vocab;
  vocab.min_freq = min_freq;
  vocab.lowercase = lowercase;
  vocab.id_to_token.assign(kSpecials.begin(), kSpecials.end());
  for (std::string& word : words) vocab.id_to_token.push_back(std::move(word));
  for (std::size_t id = 0; id < vocab.id_to_token.size(); ++id) {
    vocab.token_to_id.emplace(vocab.id_to_token[id], id);
  }
  return vocab;
}

}  // namespace

const std::array<std::string, 5>& special_tokens() { return kSpecials; }

Vocab build_vocab(std::span<const std::string> corpus, std::size_t min_freq, bool lowercase) {
  if (min_freq < 1) throw std::domain_error("build_vocab: min_freq must be >= 1");

  std::map<std::string, std::size_t> frequency;  // ordered for deterministic iteration
  for (const std::string& document : corpus) {
    for (std::string& word : split_whitespace(document)) {
      if (is_special(word)) continue;  // reserved ids cover these already
      frequency[lowercase ? ascii_lower(std::move(word)) : std::move(word)] += 1;
    }
  }

  std::vector<std::pair<std::size_t, std::string>> admitted;  // (frequency, word)
  for (const auto& [word, count] : frequency) {
    if (count >= min_freq) admitted.emplace_back(count, word);
  }
  std::sort(admitted.begin(), admitted.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  std::vector<std::string> words;
  words.reserve(admitted.size());
  for (auto& [count, word] : admitted) words.push_back(std::move(word));
  return vocab_from_words(std::move(words), min_freq, lowercase);
}

TokenSequence encode(const Vocab& vocab, std::string_view text) {
  TokenSequence sequence;
  for (std::string& word : split_whitespace(text)) {
    if (is_special(word)) {
      sequence.ids.push_back(vocab.token_to_id.at(word));
      continue;
    }
    if (vocab.lowercase) word = ascii_lower(std::move(word));
    const auto found = vocab.token_to_id.find(word);
    sequence.ids.push_back(found == vocab.token_to_id.end() ? Vocab::kUnk : found->second);
  }
  return sequence;
}

std::string decode(const Vocab& vocab, const TokenSequence& sequence) {
  std::string out;
  for (std::size_t id : sequence.ids) {
    if (id >= vocab.size()) {
      throw std::out_of_range("decode: id " + std::to_string(id) + " outside vocabulary of " +
                              std::to_string(vocab.size()));
    }
    if (id == Vocab::kPad) continue;
    if (!out.empty()) out += ' ';
    out += vocab.id_to_token[id];
  }
  return out;
}

void save_vocab(const Vocab& vocab, const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["min_freq"] = vocab.min_freq;
  doc["tokens"] = std::vector<std::string>(vocab.id_to_token.begin() + kSpecials.size(),
                                           vocab.id_to_token.end());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocab file: " + path.string());
  out << doc.dump() << '\n';
}

Vocab load_vocab(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read vocab file: " + path.string());
  nlohmann::json doc = nlohmann::json::parse(in);
  if (!doc.is_object() || !doc.contains("min_freq") || !doc.contains("tokens") ||
      !doc["tokens"].is_array()) {
    throw std::runtime_error("vocab file must be {\"min_freq\": n, \"tokens\": [...]}");
  }
  return vocab_from_words(doc["tokens"].get<std::vector<std::string>>(),
                          doc["min_freq"].get<std::size_t>(), /*lowercase=*/false);
}

}  // namespace fse
