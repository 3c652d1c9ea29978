#include "fse/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "fse/matrix.hpp"
#include "json.hpp"

namespace fse {

namespace {

constexpr char kMagic[8] = {'F', 'S', 'E', 'I', 'D', 'X', '1', '\0'};
constexpr std::size_t kMaxIdBytes = 65535;

void append_u16le(std::string& out, std::uint16_t value) {
  out.push_back(static_cast<char>(value & 0xff));
  out.push_back(static_cast<char>((value >> 8) & 0xff));
}

void append_u32le(std::string& out, std::uint32_t value) {
  for (int shift = 0; shift < 32; shift += 8) {
    out.push_back(static_cast<char>((value >> shift) & 0xff));
  }
}

void append_f32le(std::string& out, float value) {
  append_u32le(out, std::bit_cast<std::uint32_t>(value));
}

// Cursor over the raw file bytes; every read checks for truncation.
class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t count) {
    if (bytes_.size() - pos_ < count) throw IndexFormatError("index file: truncated");
    std::string_view out = bytes_.substr(pos_, count);
    pos_ += count;
    return out;
  }

  std::uint16_t take_u16le() {
    const auto b = take(2);
    return static_cast<std::uint16_t>(static_cast<unsigned char>(b[0]) |
                                      (static_cast<unsigned char>(b[1]) << 8));
  }

  std::uint32_t take_u32le() {
    const auto b = take(4);
    std::uint32_t value = 0;
    for (int i = 0; i < 4; ++i) {
      value |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    }
    return value;
  }

  float take_f32le() { return std::bit_cast<float>(take_u32le()); }

  bool exhausted() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::optional<Split> split_from_string(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  return std::nullopt;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

EmbeddingIndex EmbeddingIndex::build(std::vector<EmbeddingRecord> records) {
  EmbeddingIndex index;
  if (records.empty()) throw std::invalid_argument("index build: no records");

  index.dim_ = records.front().vector.size();
  if (index.dim_ == 0) {
    throw std::invalid_argument("index build: record \"" + records.front().record_id +
                                "\" has an empty vector");
  }
  for (EmbeddingRecord& record : records) {
    if (record.record_id.empty()) throw std::invalid_argument("index build: empty record id");
    if (record.vector.size() != index.dim_) {
      throw std::invalid_argument("index build: record \"" + record.record_id +
                                  "\" has dimension " + std::to_string(record.vector.size()) +
                                  ", expected " + std::to_string(index.dim_));
    }
    const double norm = l2_norm(record.vector);
    if (norm == 0.0) {
      throw std::invalid_argument("index build: record \"" + record.record_id +
                                  "\" is a zero vector");
    }
    for (double& v : record.vector) v /= norm;
    if (!index.id_to_pos_.emplace(record.record_id, index.records_.size()).second) {
      throw std::invalid_argument("index build: duplicate record id \"" + record.record_id +
                                  "\"");
    }
    index.records_.push_back(std::move(record));
  }
  return index;
}

std::optional<std::size_t> EmbeddingIndex::position_of(const std::string& record_id) const {
  const auto found = id_to_pos_.find(record_id);
  if (found == id_to_pos_.end()) return std::nullopt;
  return found->second;
}

std::vector<RetrievalResult> EmbeddingIndex::query(
    std::span<const double> probe, std::size_t k,
    const std::optional<std::string>& exclude_id) const {
  if (k == 0) throw std::domain_error("query: k must be >= 1");
  if (probe.size() != dim_) throw std::domain_error("query: probe dimension mismatch");
  const double norm = l2_norm(probe);
  if (norm == 0.0) throw std::domain_error("query: zero probe vector");

  std::vector<double> unit(probe.begin(), probe.end());
  for (double& v : unit) v /= norm;

  std::vector<RetrievalResult> results;
  for (const EmbeddingRecord& record : records_) {
    if (record.split != Split::kTrain) continue;
    if (exclude_id && record.record_id == *exclude_id) continue;
    const double similarity = std::clamp(dot(unit, record.vector), -1.0, 1.0);
    results.push_back({record.record_id, similarity, 0});
  }

  std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.record_id < b.record_id;
  });
  if (results.size() > k) results.resize(k);
  for (std::size_t i = 0; i < results.size(); ++i) results[i].rank = i + 1;
  return results;
}

void EmbeddingIndex::save(const std::filesystem::path& path) const {
  std::string payload;
  payload.append(kMagic, sizeof(kMagic));
  append_u32le(payload, static_cast<std::uint32_t>(dim_));
  append_u32le(payload, static_cast<std::uint32_t>(records_.size()));
  for (const EmbeddingRecord& record : records_) {
    if (record.record_id.size() > kMaxIdBytes) {
      throw std::invalid_argument("index save: record id longer than 65535 bytes");
    }
    append_u16le(payload, static_cast<std::uint16_t>(record.record_id.size()));
    payload += record.record_id;
    payload.push_back(static_cast<char>(record.split));
    for (double v : record.vector) append_f32le(payload, static_cast<float>(v));
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write index file: " + path.string());
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
}

EmbeddingIndex EmbeddingIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IndexFormatError("cannot read index file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string bytes = buffer.str();

  ByteReader reader(bytes);
  if (reader.take(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
    throw IndexFormatError("index file: bad magic");
  }
  const std::uint32_t dim = reader.take_u32le();
  const std::uint32_t count = reader.take_u32le();
  if (dim == 0) throw IndexFormatError("index file: zero dimension");

  std::vector<EmbeddingRecord> records;
  records.reserve(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    EmbeddingRecord record;
    const std::uint16_t id_length = reader.take_u16le();
    record.record_id = std::string(reader.take(id_length));
    const auto tag = static_cast<unsigned char>(reader.take(1)[0]);
    if (tag > 2) throw IndexFormatError("index file: unknown split tag");
    record.split = static_cast<Split>(tag);
    record.vector.reserve(dim);
    for (std::uint32_t c = 0; c < dim; ++c) {
      record.vector.push_back(static_cast<double>(reader.take_f32le()));
    }
    records.push_back(std::move(record));
  }
  if (!reader.exhausted()) throw IndexFormatError("index file: trailing bytes");

  try {
    return build(std::move(records));  // re-validates and re-normalizes
  } catch (const std::invalid_argument& error) {
    throw IndexFormatError(std::string("index file: ") + error.what());
  }
}

std::vector<EmbeddingRecord> read_embeddings_jsonl(std::string_view content) {
  std::vector<EmbeddingRecord> records;
  std::size_t line_number = 0;
  std::size_t begin = 0;
  while (begin <= content.size()) {
    const std::size_t end = std::min(content.find('\n', begin), content.size());
    const std::string_view line = content.substr(begin, end - begin);
    begin = end + 1;
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& error) {
      throw std::runtime_error("embeddings line " + std::to_string(line_number) + ": " +
                               error.what());
    }
    if (!doc.is_object() || !doc.contains("record_id") || !doc["record_id"].is_string() ||
        !doc.contains("split") || !doc["split"].is_string() || !doc.contains("vector") ||
        !doc["vector"].is_array()) {
      throw std::runtime_error("embeddings line " + std::to_string(line_number) +
                               ": expected {\"record_id\", \"split\", \"vector\"}");
    }
    EmbeddingRecord record;
    record.record_id = doc["record_id"].get<std::string>();
    const auto split = split_from_string(doc["split"].get<std::string>());
    if (!split) {
      throw std::runtime_error("embeddings line " + std::to_string(line_number) +
                               ": unknown split \"" + doc["split"].get<std::string>() + "\"");
    }
    record.split = *split;
    for (const auto& value : doc["vector"]) {
      if (!value.is_number()) {
        throw std::runtime_error("embeddings line " + std::to_string(line_number) +
                                 ": vector components must be numbers");
      }
      record.vector.push_back(value.get<double>());
    }
    records.push_back(std::move(record));
  }
  return records;
}

}  // namespace fse
