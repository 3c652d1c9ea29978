#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fse/annotations.hpp"

namespace fse {

/// 14-way binary finding vector following the standard chest observation
/// category order (kFindingCategories); the 5-way subset kCx5Indices covers
/// atelectasis, cardiomegaly, consolidation, edema, and pleural effusion.
struct LabelVector {
  std::array<std::uint8_t, 14> labels{};

  friend bool operator==(const LabelVector&, const LabelVector&) = default;
};

extern const std::array<std::string_view, 14> kFindingCategories;
extern const std::array<std::size_t, 5> kCx5Indices;

enum class LabelSubset { kAll14, kCx5 };

/// One evaluation unit: a candidate token sequence scored against one or more
/// reference token sequences. When m_gt is set, every reference is truncated
/// to its first m_gt tokens before scoring; unset means complete references.
struct EvalPair {
  std::vector<std::string> candidate;
  std::vector<std::vector<std::string>> references;
  std::optional<std::size_t> m_gt;
};

/// Whitespace split plus ASCII lowercasing; the normalization applied to
/// report text before n-gram metrics.
std::vector<std::string> tokenize_for_metrics(std::string_view text);

/// First m_gt tokens of a reference (identity when m_gt is unset, i.e.
/// "complete"). m_gt, when set, must be >= 1.
std::vector<std::string> truncate_reference(const std::vector<std::string>& tokens,
                                            std::optional<std::size_t> m_gt);

/// BLEU-n (n in 1..4): geometric mean of clipped modified k-gram precisions
/// for k = 1..n times the brevity penalty min(1, e^(1 - r/c)), where r is the
/// reference length closest to the candidate length (ties prefer shorter).
/// Zero precisions are replaced with 1e-9; an empty candidate scores 0.
double bleu_n(const EvalPair& pair, int n);

/// Corpus-level BLEU-n: k-gram counts and lengths pooled over all pairs
/// before the same combination step.
double bleu_n_corpus(std::span<const EvalPair> pairs, int n);

/// ROUGE-L F-measure (beta = 1) of the longest common subsequence against the
/// best-scoring reference; 0 when the LCS is empty.
double rouge_l(const EvalPair& pair);

/// Micro-averaged F1 over the selected categories with TP/FP/FN pooled across
/// samples and categories; returns 1.0 when all three pools are empty.
/// Throws std::domain_error when the two lists differ in length.
double micro_f1(std::span<const LabelVector> predictions, std::span<const LabelVector> golds,
                LabelSubset subset);

/// Mean of entity-set F1 and relation-set F1 between two annotated reports.
/// Entities compare as (lowercased tokens, label) pairs, relations as
/// (lowercased source tokens, relation label, lowercased target tokens)
/// triples, both deduplicated. An empty-vs-empty set scores 1.0.
double radgraph_f1(const AnnotatedReport& generated, const AnnotatedReport& reference);

}  // namespace fse
