#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "fse/annotations.hpp"

namespace fse {

struct SerializerConfig {
  std::unordered_set<std::string> stopword_list;  // lowercase words
  std::unordered_set<std::string> sentence_punct = default_sentence_punct();
  std::set<EntityLabel> negative_labels = {EntityLabel::kObsDa};
  std::set<EntityLabel> uncertain_labels = {EntityLabel::kObsU};

  // Default configuration: built-in English function-word stopword list (the
  // same list shipped at data/stopwords.txt).
  static SerializerConfig defaults();
};

const std::vector<std::string>& default_stopwords();

// Loads a stopword file (one word per line, blank lines ignored, words are
// lowercased). Throws std::runtime_error when the file cannot be read.
std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path);

enum class FactualityIndicator { kNo, kMaybe };

std::string_view to_string(FactualityIndicator indicator);

struct FactualSubsequence {
  std::size_t sentence_index = 0;
  std::optional<FactualityIndicator> indicator;
  std::vector<std::string> entity_texts;  // ordered by start_ix
  std::string rendered;                   // indicator + entity texts, space-joined
};

struct FactualSerialization {
  std::string report_id;
  std::vector<FactualSubsequence> subsequences;
  std::string rendered;  // subsequences joined with " [SEP] "
};

// Drops annotation noise: entities whose span crosses a sentence boundary and
// single-token entities whose lowercased word is a stopword. Survivors pass
// through unchanged, in input (entity id) order.
std::vector<EntityAnnotation> filter_noise(const AnnotatedReport& report,
                                           const SerializerConfig& config);

// Collapses each group of transitively overlapping spans to one entity: most
// span tokens, then longest `tokens` byte length, then smallest start_ix, then
// smallest entity_id. Output is sorted by start_ix and overlap-free.
std::vector<EntityAnnotation> resolve_overlaps(std::vector<EntityAnnotation> entities);

struct SentenceGroup {
  std::size_t sentence_index = 0;
  std::vector<EntityAnnotation> entities;  // sorted by start_ix
};

// Buckets non-overlapping entities by the sentence containing start_ix.
// Groups follow sentence order; sentences without entities produce no group.
std::vector<SentenceGroup> group_into_subsequences(const std::vector<EntityAnnotation>& entities,
                                                   const AnnotatedReport& report);

// Renders one group: prefix "no" when any entity carries a negative label,
// else "maybe" when any carries an uncertain label, else no prefix.
FactualSubsequence apply_factuality_indicators(const SentenceGroup& group,
                                               const SerializerConfig& config);

// Full pipeline: filter_noise -> resolve_overlaps -> group_into_subsequences
// -> apply_factuality_indicators, then join rendered subsequences with
// " [SEP] ". Reports whose entities are all filtered serialize to "".
FactualSerialization serialize(const AnnotatedReport& report, const SerializerConfig& config);

// One JSON line: {"factual_serialization": ..., "num_subsequences": ...,
// "report_id": ...} (keys in lexicographic order, no trailing newline).
std::string serialization_to_jsonl_line(const FactualSerialization& serialization);

}  // namespace fse
