#include "fse/annotations.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <utility>

#include "json.hpp"

namespace fse {

namespace {

using nlohmann::json;

const std::unordered_set<std::string> kSentencePunct = {".", "!", "?"};

std::string describe_violations(const std::vector<Violation>& violations) {
  std::ostringstream out;
  out << "annotation validation failed:";
  for (const auto& v : violations) {
    out << " [report " << v.report_id;
    if (!v.entity_id.empty()) out << " entity " << v.entity_id;
    out << ": " << v.message << "]";
  }
  return out.str();
}

ValidationError schema_error(const std::string& report_id, const std::string& entity_id,
                             const std::string& message) {
  std::string what = "report " + report_id;
  if (!entity_id.empty()) what += " entity " + entity_id;
  what += ": " + message;
  return ValidationError(what);
}

std::int64_t require_integer(const json& value, const std::string& report_id,
                             const std::string& entity_id, const char* field) {
  if (!value.is_number_integer()) {
    throw schema_error(report_id, entity_id, std::string(field) + " must be an integer");
  }
  return value.get<std::int64_t>();
}

EntityAnnotation parse_entity(const std::string& report_id, const std::string& entity_id,
                              const json& body) {
  if (!body.is_object()) throw schema_error(report_id, entity_id, "entity must be an object");
  for (const char* field : {"tokens", "label", "start_ix", "end_ix", "relations"}) {
    if (!body.contains(field)) {
      throw schema_error(report_id, entity_id, std::string("missing \"") + field + "\"");
    }
  }
  if (!body["tokens"].is_string()) {
    throw schema_error(report_id, entity_id, "\"tokens\" must be a string");
  }
  if (!body["label"].is_string()) {
    throw schema_error(report_id, entity_id, "\"label\" must be a string");
  }

  EntityAnnotation entity;
  entity.entity_id = entity_id;
  entity.tokens = body["tokens"].get<std::string>();

  const auto label_text = body["label"].get<std::string>();
  const auto label = entity_label_from_string(label_text);
  if (!label) {
    throw schema_error(report_id, entity_id, "unknown entity label \"" + label_text + "\"");
  }
  entity.label = *label;

  entity.start_ix = require_integer(body["start_ix"], report_id, entity_id, "start_ix");
  entity.end_ix = require_integer(body["end_ix"], report_id, entity_id, "end_ix");

  const json& relations = body["relations"];
  if (!relations.is_array()) {
    throw schema_error(report_id, entity_id, "\"relations\" must be an array");
  }
  for (const json& item : relations) {
    if (!item.is_array() || item.size() != 2 || !item[0].is_string() || !item[1].is_string()) {
      throw schema_error(report_id, entity_id,
                         "each relation must be a [label, target_entity_id] string pair");
    }
    const auto relation_text = item[0].get<std::string>();
    const auto relation = relation_label_from_string(relation_text);
    if (!relation) {
      throw schema_error(report_id, entity_id,
                         "unknown relation label \"" + relation_text + "\"");
    }
    entity.relations.push_back({*relation, item[1].get<std::string>()});
  }
  return entity;
}

AnnotatedReport parse_report(const std::string& report_id, const json& body) {
  if (!body.is_object()) throw schema_error(report_id, "", "report must be an object");
  if (!body.contains("text") || !body["text"].is_string()) {
    throw schema_error(report_id, "", "missing string \"text\"");
  }
  if (!body.contains("entities") || !body["entities"].is_object()) {
    throw schema_error(report_id, "", "missing object \"entities\"");
  }

  AnnotatedReport report;
  report.report_id = report_id;
  report.text = body["text"].get<std::string>();
  report.word_tokens = split_whitespace(report.text);
  report.sentence_boundaries = compute_sentence_boundaries(report.word_tokens);
  for (const auto& [entity_id, entity_body] : body["entities"].items()) {
    report.entities.emplace(entity_id, parse_entity(report_id, entity_id, entity_body));
  }

  auto violations = validate(report);
  if (!violations.empty()) throw ValidationError(describe_violations(violations));
  return report;
}

json entity_to_json(const EntityAnnotation& entity) {
  json relations = json::array();
  for (const auto& relation : entity.relations) {
    relations.push_back({std::string(to_string(relation.label)), relation.target_entity_id});
  }
  return json{{"tokens", entity.tokens},
              {"label", std::string(to_string(entity.label))},
              {"start_ix", entity.start_ix},
              {"end_ix", entity.end_ix},
              {"relations", std::move(relations)}};
}

}  // namespace

std::optional<EntityLabel> entity_label_from_string(std::string_view text) {
  if (text == "OBS-DP" || text == "O-DP") return EntityLabel::kObsDp;
  if (text == "OBS-DA" || text == "O-DA") return EntityLabel::kObsDa;
  if (text == "OBS-U" || text == "O-U") return EntityLabel::kObsU;
  if (text == "ANAT-DP" || text == "A-DP") return EntityLabel::kAnatDp;
  return std::nullopt;
}

std::string_view to_string(EntityLabel label) {
  switch (label) {
    case EntityLabel::kObsDp: return "OBS-DP";
    case EntityLabel::kObsDa: return "OBS-DA";
    case EntityLabel::kObsU: return "OBS-U";
    case EntityLabel::kAnatDp: return "ANAT-DP";
  }
  return "OBS-DP";
}

std::optional<RelationLabel> relation_label_from_string(std::string_view text) {
  if (text == "modify") return RelationLabel::kModify;
  if (text == "located_at") return RelationLabel::kLocatedAt;
  if (text == "suggestive_of") return RelationLabel::kSuggestiveOf;
  return std::nullopt;
}

std::string_view to_string(RelationLabel label) {
  switch (label) {
    case RelationLabel::kModify: return "modify";
    case RelationLabel::kLocatedAt: return "located_at";
    case RelationLabel::kSuggestiveOf: return "suggestive_of";
  }
  return "modify";
}

const std::unordered_set<std::string>& default_sentence_punct() { return kSentencePunct; }

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t begin = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > begin) words.emplace_back(text.substr(begin, i - begin));
  }
  return words;
}

std::vector<SentenceSpan> compute_sentence_boundaries(
    const std::vector<std::string>& tokens, const std::unordered_set<std::string>& sentence_punct) {
  std::vector<SentenceSpan> spans;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (sentence_punct.contains(tokens[i])) {
      spans.push_back({begin, i + 1});
      begin = i + 1;
    }
  }
  if (begin < tokens.size()) spans.push_back({begin, tokens.size()});
  return spans;
}

std::optional<std::size_t> AnnotatedReport::sentence_of(std::size_t token_ix) const {
  for (std::size_t s = 0; s < sentence_boundaries.size(); ++s) {
    if (token_ix >= sentence_boundaries[s].begin && token_ix < sentence_boundaries[s].end) {
      return s;
    }
  }
  return std::nullopt;
}

std::vector<Violation> validate(const AnnotatedReport& report) {
  std::vector<Violation> violations;
  const auto token_count = static_cast<std::int64_t>(report.word_tokens.size());

  // Sentence boundaries must partition [0, word_tokens.size()).
  bool partitions = true;
  std::size_t cursor = 0;
  for (const auto& span : report.sentence_boundaries) {
    if (span.begin != cursor || span.end <= span.begin) {
      partitions = false;
      break;
    }
    cursor = span.end;
  }
  if (cursor != report.word_tokens.size()) partitions = false;
  if (!partitions) {
    violations.push_back(
        {report.report_id, "", "sentence boundaries do not partition the token range"});
  }

  for (const auto& [entity_id, entity] : report.entities) {
    if (entity.start_ix > entity.end_ix) {
      violations.push_back({report.report_id, entity_id,
                            "start_ix " + std::to_string(entity.start_ix) + " exceeds end_ix " +
                                std::to_string(entity.end_ix)});
    } else {
      const auto words = split_whitespace(entity.tokens);
      if (static_cast<std::int64_t>(words.size()) != entity.span_token_count()) {
        violations.push_back({report.report_id, entity_id,
                              "token count " + std::to_string(words.size()) +
                                  " does not match span length " +
                                  std::to_string(entity.span_token_count())});
      }
      if (entity.start_ix < 0 || entity.end_ix >= token_count) {
        violations.push_back({report.report_id, entity_id,
                              "span [" + std::to_string(entity.start_ix) + ", " +
                                  std::to_string(entity.end_ix) +
                                  "] falls outside the report's " +
                                  std::to_string(token_count) + " tokens"});
      }
    }
    for (const auto& relation : entity.relations) {
      if (!report.entities.contains(relation.target_entity_id)) {
        violations.push_back({report.report_id, entity_id,
                              "relation target \"" + relation.target_entity_id +
                                  "\" does not resolve"});
      }
    }
  }
  return violations;
}

std::vector<AnnotatedReport> parse_annotations(std::string_view raw_json) {
  json doc;
  try {
    doc = json::parse(raw_json);
  } catch (const json::parse_error& error) {
    throw ParseError(error.what(), error.byte);
  }
  if (!doc.is_object()) {
    throw ValidationError("top-level value must be an object keyed by report_id");
  }

  std::vector<AnnotatedReport> reports;
  reports.reserve(doc.size());
  for (const auto& [report_id, body] : doc.items()) {
    reports.push_back(parse_report(report_id, body));
  }
  return reports;
}

AnnotatedReport parse_single_report(const std::string& report_id,
                                    const std::string& report_object_json) {
  json body;
  try {
    body = json::parse(report_object_json);
  } catch (const json::parse_error& error) {
    throw ParseError(error.what(), error.byte);
  }
  return parse_report(report_id, body);
}

std::string annotations_to_json(const std::vector<AnnotatedReport>& reports) {
  json doc = json::object();
  for (const auto& report : reports) {
    json entities = json::object();
    for (const auto& [entity_id, entity] : report.entities) {
      entities[entity_id] = entity_to_json(entity);
    }
    doc[report.report_id] = json{{"text", report.text}, {"entities", std::move(entities)}};
  }
  return doc.dump();
}

}  // namespace fse
