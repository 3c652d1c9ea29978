#include "fse/serializer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace fse {

namespace {

std::string ascii_lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Standard English function-word list (mirrored at data/stopwords.txt).
const std::vector<std::string> kDefaultStopwords = {
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "you're", "you've",
    "you'll", "you'd", "your", "yours", "yourself", "yourselves", "he", "him", "his", "himself",
    "she", "she's", "her", "hers", "herself", "it", "it's", "its", "itself", "they", "them",
    "their", "theirs", "themselves", "what", "which", "who", "whom", "this", "that", "that'll",
    "these", "those", "am", "is", "are", "was", "were", "be", "been", "being", "have", "has",
    "had", "having", "do", "does", "did", "doing", "a", "an", "the", "and", "but", "if", "or",
    "because", "as", "until", "while", "of", "at", "by", "for", "with", "about", "against",
    "between", "into", "through", "during", "before", "after", "above", "below", "to", "from",
    "up", "down", "in", "out", "on", "off", "over", "under", "again", "further", "then", "once",
    "here", "there", "when", "where", "why", "how", "all", "any", "both", "each", "few", "more",
    "most", "other", "some", "such", "no", "nor", "not", "only", "own", "same", "so", "than",
    "too", "very", "s", "t", "can", "will", "just", "don", "don't", "should", "should've", "now",
    "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren", "aren't", "couldn", "couldn't", "didn",
    "didn't", "doesn", "doesn't", "hadn", "hadn't", "hasn", "hasn't", "haven", "haven't", "isn",
    "isn't", "ma", "mightn", "mightn't", "mustn", "mustn't", "needn", "needn't", "shan",
    "shan't", "shouldn", "shouldn't", "wasn", "wasn't", "weren", "weren't", "won", "won't",
    "wouldn", "wouldn't"};

// Preference order inside one overlap group: widest span first, then longest
// surface text, then earliest start, then smallest id.
bool more_informative(const EntityAnnotation& a, const EntityAnnotation& b) {
  if (a.span_token_count() != b.span_token_count()) {
    return a.span_token_count() > b.span_token_count();
  }
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() > b.tokens.size();
  if (a.start_ix != b.start_ix) return a.start_ix < b.start_ix;
  return a.entity_id < b.entity_id;
}

void check_label_sets(const SerializerConfig& config) {
  for (EntityLabel label : config.negative_labels) {
    if (config.uncertain_labels.contains(label)) {
      throw std::domain_error("serializer config: negative and uncertain label sets overlap");
    }
  }
}

}  // namespace

SerializerConfig SerializerConfig::defaults() {
  SerializerConfig config;
  config.stopword_list.insert(kDefaultStopwords.begin(), kDefaultStopwords.end());
  return config;
}

const std::vector<std::string>& default_stopwords() { return kDefaultStopwords; }

std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read stopword file: " + path.string());
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    for (const auto& word : split_whitespace(line)) words.insert(ascii_lower(word));
  }
  return words;
}

std::string_view to_string(FactualityIndicator indicator) {
  return indicator == FactualityIndicator::kNo ? "no" : "maybe";
}

std::vector<EntityAnnotation> filter_noise(const AnnotatedReport& report,
                                           const SerializerConfig& config) {
  std::vector<EntityAnnotation> kept;
  for (const auto& [entity_id, entity] : report.entities) {
    const auto first = report.sentence_of(static_cast<std::size_t>(entity.start_ix));
    const auto last = report.sentence_of(static_cast<std::size_t>(entity.end_ix));
    if (!first || !last || *first != *last) continue;  // crosses a sentence boundary
    if (entity.span_token_count() == 1 && config.stopword_list.contains(ascii_lower(entity.tokens))) {
      continue;
    }
    kept.push_back(entity);
  }
  return kept;
}

std::vector<EntityAnnotation> resolve_overlaps(std::vector<EntityAnnotation> entities) {
  std::sort(entities.begin(), entities.end(), [](const auto& a, const auto& b) {
    if (a.start_ix != b.start_ix) return a.start_ix < b.start_ix;
    if (a.end_ix != b.end_ix) return a.end_ix < b.end_ix;
    return a.entity_id < b.entity_id;
  });

  // One sweep: spans sorted by start overlap transitively while the next
  // start does not pass the group's furthest end.
  std::vector<EntityAnnotation> winners;
  std::size_t i = 0;
  while (i < entities.size()) {
    std::size_t best = i;
    std::int64_t group_end = entities[i].end_ix;
    std::size_t j = i + 1;
    while (j < entities.size() && entities[j].start_ix <= group_end) {
      group_end = std::max(group_end, entities[j].end_ix);
      if (more_informative(entities[j], entities[best])) best = j;
      ++j;
    }
    winners.push_back(entities[best]);
    i = j;
  }
  return winners;
}

std::vector<SentenceGroup> group_into_subsequences(const std::vector<EntityAnnotation>& entities,
                                                   const AnnotatedReport& report) {
  std::map<std::size_t, std::vector<EntityAnnotation>> buckets;
  for (const auto& entity : entities) {
    const auto sentence = report.sentence_of(static_cast<std::size_t>(entity.start_ix));
    if (!sentence) {
      throw std::domain_error("entity " + entity.entity_id + " starts outside every sentence");
    }
    buckets[*sentence].push_back(entity);
  }

  std::vector<SentenceGroup> groups;
  groups.reserve(buckets.size());
  for (auto& [sentence_index, bucket] : buckets) {
    std::sort(bucket.begin(), bucket.end(),
              [](const auto& a, const auto& b) { return a.start_ix < b.start_ix; });
    groups.push_back({sentence_index, std::move(bucket)});
  }
  return groups;
}

FactualSubsequence apply_factuality_indicators(const SentenceGroup& group,
                                               const SerializerConfig& config) {
  check_label_sets(config);

  FactualSubsequence out;
  out.sentence_index = group.sentence_index;

  bool any_negative = false;
  bool any_uncertain = false;
  for (const auto& entity : group.entities) {
    any_negative = any_negative || config.negative_labels.contains(entity.label);
    any_uncertain = any_uncertain || config.uncertain_labels.contains(entity.label);
    out.entity_texts.push_back(entity.tokens);
  }
  if (any_negative) {
    out.indicator = FactualityIndicator::kNo;  // "no" outranks "maybe"
  } else if (any_uncertain) {
    out.indicator = FactualityIndicator::kMaybe;
  }

  std::string rendered;
  if (out.indicator) rendered = std::string(to_string(*out.indicator));
  for (const auto& text : out.entity_texts) {
    if (!rendered.empty()) rendered += ' ';
    rendered += text;
  }
  out.rendered = std::move(rendered);
  return out;
}

FactualSerialization serialize(const AnnotatedReport& report, const SerializerConfig& config) {
  check_label_sets(config);

  FactualSerialization out;
  out.report_id = report.report_id;

  const auto survivors = resolve_overlaps(filter_noise(report, config));
  for (const auto& group : group_into_subsequences(survivors, report)) {
    out.subsequences.push_back(apply_factuality_indicators(group, config));
  }

  std::string rendered;
  for (const auto& subsequence : out.subsequences) {
    if (!rendered.empty()) rendered += " [SEP] ";
    rendered += subsequence.rendered;
  }
  out.rendered = std::move(rendered);
  return out;
}

std::string serialization_to_jsonl_line(const FactualSerialization& serialization) {
  return nlohmann::json{{"report_id", serialization.report_id},
                        {"factual_serialization", serialization.rendered},
                        {"num_subsequences", serialization.subsequences.size()}}
      .dump();
}

}  // namespace fse
