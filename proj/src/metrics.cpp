#include "fse/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>

namespace fse {

namespace {

constexpr double kPrecisionEpsilon = 1e-9;  // replaces zero k-gram precisions

std::string ascii_lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// k-gram multiset of a token sequence; grams are keyed by joining tokens with
// an unprintable separator.
std::map<std::string, std::size_t> count_kgrams(const std::vector<std::string>& tokens,
                                                std::size_t k) {
  std::map<std::string, std::size_t> counts;
  if (tokens.size() < k) return counts;
  for (std::size_t i = 0; i + k <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (std::size_t j = 1; j < k; ++j) {
      key += '\x1f';
      key += tokens[i + j];
    }
    counts[key] += 1;
  }
  return counts;
}

std::vector<std::vector<std::string>> prepared_references(const EvalPair& pair) {
  std::vector<std::vector<std::string>> references;
  references.reserve(pair.references.size());
  for (const auto& reference : pair.references) {
    references.push_back(truncate_reference(reference, pair.m_gt));
  }
  return references;
}

// Reference length closest to the candidate length; ties prefer the shorter.
std::size_t effective_reference_length(std::size_t candidate_length,
                                       const std::vector<std::vector<std::string>>& references) {
  std::size_t best = references.front().size();
  for (const auto& reference : references) {
    const auto distance = [&](std::size_t length) {
      return length > candidate_length ? length - candidate_length : candidate_length - length;
    };
    if (distance(reference.size()) < distance(best) ||
        (distance(reference.size()) == distance(best) && reference.size() < best)) {
      best = reference.size();
    }
  }
  return best;
}

struct BleuCounts {
  std::array<std::size_t, 4> matched{};  // clipped k-gram matches, k = 1..4
  std::array<std::size_t, 4> total{};    // candidate k-gram totals
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;  // effective (closest) length, pooled over pairs
};

BleuCounts accumulate_bleu(const EvalPair& pair, int n) {
  BleuCounts counts;
  const auto& candidate = pair.candidate;
  const auto references = prepared_references(pair);
  counts.candidate_length = candidate.size();
  counts.reference_length = effective_reference_length(candidate.size(), references);

  for (int k = 1; k <= n; ++k) {
    const auto candidate_grams = count_kgrams(candidate, static_cast<std::size_t>(k));
    std::map<std::string, std::size_t> reference_max;
    for (const auto& reference : references) {
      for (const auto& [gram, count] : count_kgrams(reference, static_cast<std::size_t>(k))) {
        reference_max[gram] = std::max(reference_max[gram], count);
      }
    }
    for (const auto& [gram, count] : candidate_grams) {
      counts.total[k - 1] += count;
      const auto found = reference_max.find(gram);
      if (found != reference_max.end()) {
        counts.matched[k - 1] += std::min(count, found->second);
      }
    }
  }
  return counts;
}

double bleu_from_counts(const BleuCounts& counts, int n) {
  if (counts.candidate_length == 0) return 0.0;

  double log_precision_sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    double precision = 0.0;
    if (counts.total[k - 1] > 0) {
      precision = static_cast<double>(counts.matched[k - 1]) /
                  static_cast<double>(counts.total[k - 1]);
    }
    if (precision == 0.0) precision = kPrecisionEpsilon;
    log_precision_sum += std::log(precision);
  }
  const double geometric_mean = std::exp(log_precision_sum / static_cast<double>(n));

  const double ratio = static_cast<double>(counts.reference_length) /
                       static_cast<double>(counts.candidate_length);
  const double brevity_penalty = std::min(1.0, std::exp(1.0 - ratio));
  return brevity_penalty * geometric_mean;
}

void check_bleu_order(int n) {
  if (n < 1 || n > 4) throw std::domain_error("bleu_n: n must lie in 1..4");
}

void check_references(const EvalPair& pair) {
  if (pair.references.empty()) throw std::domain_error("metrics: pair has no references");
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> previous(b.size() + 1, 0);
  std::vector<std::size_t> current(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      current[j] = a[i - 1] == b[j - 1] ? previous[j - 1] + 1
                                        : std::max(previous[j], current[j - 1]);
    }
    std::swap(previous, current);
  }
  return previous[b.size()];
}

double set_f1(std::size_t intersection, std::size_t size_a, std::size_t size_b) {
  if (size_a == 0 && size_b == 0) return 1.0;
  if (size_a + size_b == 0) return 0.0;
  return 2.0 * static_cast<double>(intersection) / static_cast<double>(size_a + size_b);
}

}  // namespace

const std::array<std::string_view, 14> kFindingCategories = {
    "No Finding",       "Enlarged Cardiomediastinum",
    "Cardiomegaly",     "Lung Opacity",
    "Lung Lesion",      "Edema",
    "Consolidation",    "Pneumonia",
    "Atelectasis",      "Pneumothorax",
    "Pleural Effusion", "Pleural Other",
    "Fracture",         "Support Devices"};

const std::array<std::size_t, 5> kCx5Indices = {8, 2, 6, 5, 10};

std::vector<std::string> tokenize_for_metrics(std::string_view text) {
  std::vector<std::string> tokens = split_whitespace(text);
  for (std::string& token : tokens) token = ascii_lower(token);
  return tokens;
}

std::vector<std::string> truncate_reference(const std::vector<std::string>& tokens,
                                            std::optional<std::size_t> m_gt) {
  if (!m_gt) return tokens;  // "complete"
  if (*m_gt == 0) throw std::domain_error("truncate_reference: m_gt must be >= 1");
  if (tokens.size() <= *m_gt) return tokens;
  return {tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(*m_gt)};
}

double bleu_n(const EvalPair& pair, int n) {
  check_bleu_order(n);
  check_references(pair);
  return bleu_from_counts(accumulate_bleu(pair, n), n);
}

double bleu_n_corpus(std::span<const EvalPair> pairs, int n) {
  check_bleu_order(n);
  if (pairs.empty()) throw std::domain_error("bleu_n_corpus: no pairs");
  BleuCounts pooled;
  for (const EvalPair& pair : pairs) {
    check_references(pair);
    const BleuCounts counts = accumulate_bleu(pair, n);
    for (int k = 0; k < n; ++k) {
      pooled.matched[k] += counts.matched[k];
      pooled.total[k] += counts.total[k];
    }
    pooled.candidate_length += counts.candidate_length;
    pooled.reference_length += counts.reference_length;
  }
  return bleu_from_counts(pooled, n);
}

double rouge_l(const EvalPair& pair) {
  check_references(pair);
  double best = 0.0;
  for (const auto& reference : prepared_references(pair)) {
    const std::size_t lcs = lcs_length(pair.candidate, reference);
    if (lcs == 0) continue;
    const double precision = static_cast<double>(lcs) / static_cast<double>(pair.candidate.size());
    const double recall = static_cast<double>(lcs) / static_cast<double>(reference.size());
    best = std::max(best, 2.0 * precision * recall / (precision + recall));
  }
  return best;
}

double micro_f1(std::span<const LabelVector> predictions, std::span<const LabelVector> golds,
                LabelSubset subset) {
  if (predictions.size() != golds.size()) {
    throw std::domain_error("micro_f1: prediction/gold counts differ");
  }

  std::vector<std::size_t> categories;
  if (subset == LabelSubset::kAll14) {
    for (std::size_t c = 0; c < kFindingCategories.size(); ++c) categories.push_back(c);
  } else {
    categories.assign(kCx5Indices.begin(), kCx5Indices.end());
  }

  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    for (std::size_t c : categories) {
      const bool predicted = predictions[i].labels[c] != 0;
      const bool actual = golds[i].labels[c] != 0;
      tp += predicted && actual;
      fp += predicted && !actual;
      fn += !predicted && actual;
    }
  }
  if (tp == 0 && fp == 0 && fn == 0) return 1.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

double radgraph_f1(const AnnotatedReport& generated, const AnnotatedReport& reference) {
  using EntityKey = std::pair<std::string, EntityLabel>;
  using RelationKey = std::tuple<std::string, RelationLabel, std::string>;

  const auto collect = [](const AnnotatedReport& report, std::set<EntityKey>& entities,
                          std::set<RelationKey>& relations) {
    for (const auto& [entity_id, entity] : report.entities) {
      entities.emplace(ascii_lower(entity.tokens), entity.label);
      for (const auto& relation : entity.relations) {
        const auto target = report.entities.find(relation.target_entity_id);
        if (target == report.entities.end()) continue;  // unresolved in unvalidated input
        relations.emplace(ascii_lower(entity.tokens), relation.label,
                          ascii_lower(target->second.tokens));
      }
    }
  };

  std::set<EntityKey> generated_entities, reference_entities;
  std::set<RelationKey> generated_relations, reference_relations;
  collect(generated, generated_entities, generated_relations);
  collect(reference, reference_entities, reference_relations);

  const auto intersection_size = [](const auto& a, const auto& b) {
    std::size_t count = 0;
    for (const auto& item : a) count += b.contains(item);
    return count;
  };

  const double entity_f1 =
      set_f1(intersection_size(generated_entities, reference_entities),
             generated_entities.size(), reference_entities.size());
  const double relation_f1 =
      set_f1(intersection_size(generated_relations, reference_relations),
             generated_relations.size(), reference_relations.size());
  return 0.5 * (entity_f1 + relation_f1);
}

}  // namespace fse
