#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace fse {

enum class Split { kTrain, kVal, kTest };

std::optional<Split> split_from_string(std::string_view text);
std::string_view to_string(Split split);

struct EmbeddingRecord {
  std::string record_id;
  std::vector<double> vector;  // stored L2-normalized
  Split split = Split::kTrain;
};

struct RetrievalResult {
  std::string record_id;
  double similarity = 0.0;  // cosine, in [-1, 1]
  std::size_t rank = 0;     // 1-based
};

// Raised when an index file is not readable as the binary index format.
class IndexFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exact cosine-similarity index over a flat set of normalized embeddings.
// Immutable once built; queries scan every train-split candidate.
class EmbeddingIndex {
 public:
  // Validates uniform dimension (>= 1), unique non-empty record ids, and no
  // zero vectors, then stores L2-normalized copies. Throws
  // std::invalid_argument naming the offending record.
  static EmbeddingIndex build(std::vector<EmbeddingRecord> records);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return records_.size(); }
  const std::vector<EmbeddingRecord>& records() const { return records_; }
  std::optional<std::size_t> position_of(const std::string& record_id) const;

  // Top-k train-split records by cosine similarity to the probe, excluding
  // exclude_id when given. Results are sorted by similarity descending with
  // ties broken by record_id ascending, and carry 1-based ranks. Returns all
  // candidates when fewer than k exist. Throws std::domain_error for k == 0,
  // a zero probe, or a probe dimension mismatch.
  std::vector<RetrievalResult> query(std::span<const double> probe, std::size_t k,
                                     const std::optional<std::string>& exclude_id = {}) const;

  // Binary format: magic "FSEIDX1\0", u32-le dim, u32-le count, then per
  // record u16-le id byte length, id bytes, u8 split (0 train / 1 val /
  // 2 test), dim f32-le components.
  void save(const std::filesystem::path& path) const;

  // Validates the magic, split tags, and exact payload size, then rebuilds
  // (components round-trip through f32; vectors are re-normalized). Throws
  // IndexFormatError for malformed files.
  static EmbeddingIndex load(const std::filesystem::path& path);

 private:
  EmbeddingIndex() = default;

  std::size_t dim_ = 0;
  std::vector<EmbeddingRecord> records_;
  std::unordered_map<std::string, std::size_t> id_to_pos_;
};

// Reads embedding records from JSON lines of
// {"record_id": ..., "split": "train"|"val"|"test", "vector": [...]}.
std::vector<EmbeddingRecord> read_embeddings_jsonl(std::string_view content);

}  // namespace fse
