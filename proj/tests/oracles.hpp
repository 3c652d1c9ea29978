#pragma once

// Deliberately naive reference implementations used only by tests. Each one
// computes the same quantity as the library through a different route (no
// max-subtraction, no shared passes, closure instead of a sweep) so agreement
// is meaningful.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fse/annotations.hpp"
#include "fse/matrix.hpp"

namespace fse::oracle {

// --- overlap resolution ----------------------------------------------------
//
// Builds the full transitive closure of the "spans overlap" relation with
// repeated passes, then picks each cluster's winner by the preference chain.

struct Span {
  std::string entity_id;
  long long start_ix = 0;
  long long end_ix = 0;
  std::string text;  // space-joined tokens, used for the byte-length tiebreak
};

inline bool spans_overlap(const Span& a, const Span& b) {
  return a.start_ix <= b.end_ix && b.start_ix <= a.end_ix;
}

inline bool preferred(const Span& a, const Span& b) {
  const long long count_a = a.end_ix - a.start_ix + 1;
  const long long count_b = b.end_ix - b.start_ix + 1;
  if (count_a != count_b) return count_a > count_b;
  if (a.text.size() != b.text.size()) return a.text.size() > b.text.size();
  if (a.start_ix != b.start_ix) return a.start_ix < b.start_ix;
  return a.entity_id < b.entity_id;
}

inline std::set<std::string> resolve_overlaps_closure(const std::vector<Span>& spans) {
  const std::size_t n = spans.size();
  // cluster labels, merged to a fixpoint
  std::vector<std::size_t> cluster(n);
  for (std::size_t i = 0; i < n; ++i) cluster[i] = i;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (spans_overlap(spans[i], spans[j]) && cluster[i] != cluster[j]) {
          const std::size_t merged = std::min(cluster[i], cluster[j]);
          const std::size_t gone = std::max(cluster[i], cluster[j]);
          for (std::size_t k = 0; k < n; ++k) {
            if (cluster[k] == gone) cluster[k] = merged;
          }
          changed = true;
        }
      }
    }
  }

  std::map<std::size_t, std::size_t> winner;  // cluster -> span index
  for (std::size_t i = 0; i < n; ++i) {
    auto it = winner.find(cluster[i]);
    if (it == winner.end()) {
      winner[cluster[i]] = i;
    } else if (preferred(spans[i], spans[it->second])) {
      it->second = i;
    }
  }

  std::set<std::string> kept;
  for (const auto& [cluster_id, index] : winner) kept.insert(spans[index].entity_id);
  return kept;
}

// --- dense math ------------------------------------------------------------

inline double naive_cosine(std::span<const double> u, std::span<const double> v) {
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uv += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  return uv / (std::sqrt(uu) * std::sqrt(vv));
}

// Symmetric contrastive loss straight from the definition: plain exp sums,
// no max subtraction, no shared row/column machinery.
inline double naive_instance_loss(const DenseMatrix& x, const DenseMatrix& t, double tau) {
  const std::size_t b = x.rows();
  DenseMatrix s(b, b);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) s(i, j) = naive_cosine(x.row(i), t.row(j));
  }
  double row_direction = 0.0, col_direction = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    double row_denom = 0.0, col_denom = 0.0;
    for (std::size_t j = 0; j < b; ++j) {
      row_denom += std::exp(s(i, j) / tau);
      col_denom += std::exp(s(j, i) / tau);
    }
    row_direction += -std::log(std::exp(s(i, i) / tau) / row_denom);
    col_direction += -std::log(std::exp(s(i, i) / tau) / col_denom);
  }
  row_direction /= static_cast<double>(b);
  col_direction /= static_cast<double>(b);
  return 0.5 * (row_direction + col_direction);
}

// Scaled dot-product attention written as bare loops.
inline DenseMatrix naive_attention(const DenseMatrix& q, const DenseMatrix& k,
                                   const DenseMatrix& v) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  DenseMatrix out(q.rows(), v.cols());
  for (std::size_t i = 0; i < q.rows(); ++i) {
    std::vector<double> scores(k.rows());
    double denom = 0.0;
    for (std::size_t j = 0; j < k.rows(); ++j) {
      double dot_ij = 0.0;
      for (std::size_t c = 0; c < q.cols(); ++c) dot_ij += q(i, c) * k(j, c);
      scores[j] = std::exp(dot_ij * scale);
      denom += scores[j];
    }
    for (std::size_t j = 0; j < k.rows(); ++j) {
      for (std::size_t c = 0; c < v.cols(); ++c) {
        out(i, c) += scores[j] / denom * v(j, c);
      }
    }
  }
  return out;
}

// Token-level contrastive loss from the definition.
inline double naive_token_loss(const DenseMatrix& t_loc, const DenseMatrix& x_loc, double tau) {
  const std::size_t n = t_loc.rows();
  const DenseMatrix attended = naive_attention(t_loc, x_loc, x_loc);
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m(i, j) = naive_cosine(t_loc.row(i), attended.row(j));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row_denom = 0.0, col_denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row_denom += std::exp(m(i, j) / tau);
      col_denom += std::exp(m(j, i) / tau);
    }
    total += -std::log(std::exp(m(i, i) / tau) / row_denom);
    total += -std::log(std::exp(m(i, i) / tau) / col_denom);
  }
  return total / (2.0 * static_cast<double>(n));
}

// Masked negative log-likelihood from the definition.
inline double naive_nll(const std::vector<DenseMatrix>& logprobs,
                        const std::vector<std::vector<std::size_t>>& targets,
                        const std::vector<std::vector<double>>& masks) {
  double total = 0.0;
  for (std::size_t i = 0; i < logprobs.size(); ++i) {
    for (std::size_t t = 0; t < targets[i].size(); ++t) {
      total += masks[i][t] * logprobs[i](t, targets[i][t]);
    }
  }
  return -total / static_cast<double>(logprobs.size());
}

// --- retrieval -------------------------------------------------------------

struct ScoredId {
  std::string record_id;
  double similarity = 0.0;
};

// Full scan + full sort over every training-split record.
inline std::vector<ScoredId> naive_retrieve(
    const std::vector<std::pair<std::string, std::vector<double>>>& train_records,
    const std::vector<double>& probe, std::size_t k,
    const std::optional<std::string>& exclude_id) {
  double probe_norm = 0.0;
  for (double value : probe) probe_norm += value * value;
  probe_norm = std::sqrt(probe_norm);

  std::vector<ScoredId> scored;
  for (const auto& [record_id, vector] : train_records) {
    if (exclude_id && record_id == *exclude_id) continue;
    double norm = 0.0, dot_pv = 0.0;
    for (std::size_t i = 0; i < vector.size(); ++i) {
      norm += vector[i] * vector[i];
      dot_pv += vector[i] * probe[i];
    }
    norm = std::sqrt(norm);
    double sim = dot_pv / (norm * probe_norm);
    sim = std::clamp(sim, -1.0, 1.0);
    scored.push_back({record_id, sim});
  }
  std::stable_sort(scored.begin(), scored.end(), [](const ScoredId& a, const ScoredId& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.record_id < b.record_id;
  });
  if (scored.size() > k) scored.resize(k);
  return scored;
}

// --- metrics ---------------------------------------------------------------

// Longest common subsequence by the classic full table.
inline std::size_t naive_lcs(const std::vector<std::string>& a,
                             const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> table(a.size() + 1,
                                              std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      table[i][j] = (a[i - 1] == b[j - 1]) ? table[i - 1][j - 1] + 1
                                           : std::max(table[i - 1][j], table[i][j - 1]);
    }
  }
  return table[a.size()][b.size()];
}

}  // namespace fse::oracle
