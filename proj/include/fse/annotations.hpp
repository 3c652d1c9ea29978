#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace fse {

// Entity/relation labels used by structured report annotations. Short alias
// spellings (O-DP, O-DA, O-U, A-DP) are accepted on input and canonicalized.
enum class EntityLabel { kObsDp, kObsDa, kObsU, kAnatDp };
enum class RelationLabel { kModify, kLocatedAt, kSuggestiveOf };

std::optional<EntityLabel> entity_label_from_string(std::string_view text);
std::string_view to_string(EntityLabel label);
std::optional<RelationLabel> relation_label_from_string(std::string_view text);
std::string_view to_string(RelationLabel label);

struct Relation {
  RelationLabel label;
  std::string target_entity_id;

  friend bool operator==(const Relation&, const Relation&) = default;
};

struct EntityAnnotation {
  std::string entity_id;
  std::string tokens;  // surface words, space-separated
  EntityLabel label = EntityLabel::kObsDp;
  std::int64_t start_ix = 0;  // word index into the report, inclusive
  std::int64_t end_ix = 0;    // word index into the report, inclusive
  std::vector<Relation> relations;

  // Number of words covered by the span. Valid annotations keep this equal to
  // the word count of `tokens`.
  std::int64_t span_token_count() const { return end_ix - start_ix + 1; }

  friend bool operator==(const EntityAnnotation&, const EntityAnnotation&) = default;
};

// Half-open word-index range [begin, end) of one sentence.
struct SentenceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const SentenceSpan&, const SentenceSpan&) = default;
};

struct AnnotatedReport {
  std::string report_id;
  std::string text;
  std::vector<std::string> word_tokens;           // whitespace split of text
  std::vector<SentenceSpan> sentence_boundaries;  // partition of [0, word_tokens.size())
  std::map<std::string, EntityAnnotation> entities;

  // Sentence index containing the given word, or nullopt when out of range.
  std::optional<std::size_t> sentence_of(std::size_t token_ix) const;

  friend bool operator==(const AnnotatedReport&, const AnnotatedReport&) = default;
};

struct Violation {
  std::string report_id;
  std::string entity_id;  // empty for report-level violations
  std::string message;
};

// Raised when the input is not syntactically valid JSON.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : std::runtime_error(what), byte_offset_(byte_offset) {}

  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

// Raised when well-formed JSON violates the annotation schema or invariants.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Sentence-ending punctuation word tokens: a word equal to one of these closes
// the current sentence.
const std::unordered_set<std::string>& default_sentence_punct();

std::vector<std::string> split_whitespace(std::string_view text);

// Splits [0, tokens.size()) into sentences. A punctuation token ends its
// sentence (inclusive); a trailing run without punctuation forms the final
// sentence. The result partitions the token range with no gaps or overlaps.
std::vector<SentenceSpan> compute_sentence_boundaries(
    const std::vector<std::string>& tokens,
    const std::unordered_set<std::string>& sentence_punct = default_sentence_punct());

// Total check of one report; returns every violation found (empty == valid):
// entity span ordering, span length vs. token count, span range, relation
// target resolution, and sentence-boundary partition.
std::vector<Violation> validate(const AnnotatedReport& report);

// Parses the full annotation map {report_id: {text, entities}}. Canonicalizes
// label aliases, computes word tokens and sentence boundaries, and validates
// every report. Throws ParseError for malformed JSON (with byte offset) and
// ValidationError for schema or invariant violations (naming the report and
// entity involved). Reports come back ordered by report_id.
std::vector<AnnotatedReport> parse_annotations(std::string_view raw_json);

// Parses one report body (the value part of the annotation map) for the given
// id. Same validation behavior as parse_annotations.
AnnotatedReport parse_single_report(const std::string& report_id,
                                    const std::string& report_object_json);

// Inverse of parse_annotations: emits the same JSON schema with canonical
// label spellings. parse_annotations(annotations_to_json(reports)) == reports.
std::string annotations_to_json(const std::vector<AnnotatedReport>& reports);

}  // namespace fse
