// fse: factual-serialization toolkit command line.
//
// Subcommands: serialize, vocab, index, retrieve, eval, check-kernels.
// Exit codes: 0 success, 1 data error (message on stderr as {"error": ...}),
// 2 usage error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fse/annotations.hpp"
#include "fse/gradcheck.hpp"
#include "fse/kernels.hpp"
#include "fse/metrics.hpp"
#include "fse/retrieval.hpp"
#include "fse/serializer.hpp"
#include "fse/textproc.hpp"

namespace {

using nlohmann::json;

constexpr double kGradCheckThreshold = 1e-4;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  out << content;
}

// Iterates non-blank lines of a JSON-lines payload.
std::vector<json> parse_jsonl(const std::string& content, const char* what) {
  std::vector<json> records;
  std::istringstream in(content);
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(json::parse(line));
    } catch (const json::parse_error& error) {
      throw std::runtime_error(std::string(what) + " line " + std::to_string(line_number) +
                               ": " + error.what());
    }
  }
  return records;
}

fse::SerializerConfig make_serializer_config(const std::string& stopwords_flag) {
  // Priority: --stopwords flag, then FSE_STOPWORDS, then the built-in list.
  std::string path = stopwords_flag;
  if (path.empty()) {
    if (const char* env = std::getenv("FSE_STOPWORDS")) path = env;
  }
  fse::SerializerConfig config = fse::SerializerConfig::defaults();
  if (!path.empty()) config.stopword_list = fse::load_stopwords(path);
  return config;
}

int run_serialize(const std::string& input, const std::string& output,
                  const std::string& stopwords_flag) {
  const fse::SerializerConfig config = make_serializer_config(stopwords_flag);
  const auto reports = fse::parse_annotations(read_file(input));
  std::string lines;
  for (const auto& report : reports) {
    lines += fse::serialization_to_jsonl_line(fse::serialize(report, config));
    lines += '\n';
  }
  write_file(output, lines);
  return 0;
}

int run_vocab(const std::string& input, const std::string& output, std::size_t min_freq,
              bool lowercase) {
  std::vector<std::string> corpus;
  for (const json& record : parse_jsonl(read_file(input), "serializations")) {
    if (!record.is_object() || !record.contains("factual_serialization") ||
        !record["factual_serialization"].is_string()) {
      throw std::runtime_error("serializations: expected {\"factual_serialization\": ...}");
    }
    corpus.push_back(record["factual_serialization"].get<std::string>());
  }
  fse::save_vocab(fse::build_vocab(corpus, min_freq, lowercase), output);
  return 0;
}

int run_index(const std::string& input, const std::string& output) {
  const auto records = fse::read_embeddings_jsonl(read_file(input));
  fse::EmbeddingIndex::build(records).save(output);
  return 0;
}

int run_retrieve(const std::string& index_path, const std::string& probe_path, std::size_t k,
                 bool exclude_self, const std::string& output) {
  const fse::EmbeddingIndex index = fse::EmbeddingIndex::load(index_path);

  std::string lines;
  for (const json& record : parse_jsonl(read_file(probe_path), "probes")) {
    if (!record.is_object() || !record.contains("record_id") ||
        !record["record_id"].is_string() || !record.contains("vector") ||
        !record["vector"].is_array()) {
      throw std::runtime_error("probes: expected {\"record_id\", \"vector\"}");
    }
    const auto probe_id = record["record_id"].get<std::string>();
    const auto vector = record["vector"].get<std::vector<double>>();
    std::optional<std::string> exclude;
    if (exclude_self) exclude = probe_id;

    json results = json::array();
    for (const auto& result : index.query(vector, k, exclude)) {
      results.push_back({{"rank", result.rank},
                         {"record_id", result.record_id},
                         {"similarity", result.similarity}});
    }
    lines += json{{"probe_id", probe_id}, {"results", std::move(results)}}.dump();
    lines += '\n';
  }

  if (output.empty()) {
    std::cout << lines;
  } else {
    write_file(output, lines);
  }
  return 0;
}

struct EvalRecord {
  std::string text;
  std::optional<fse::LabelVector> labels;
  std::optional<fse::AnnotatedReport> report;  // present when "entities" given
};

std::map<std::string, EvalRecord> read_eval_records(const std::string& path, const char* what) {
  std::map<std::string, EvalRecord> records;
  for (const json& doc : parse_jsonl(read_file(path), what)) {
    if (!doc.is_object() || !doc.contains("report_id") || !doc["report_id"].is_string() ||
        !doc.contains("text") || !doc["text"].is_string()) {
      throw std::runtime_error(std::string(what) + ": expected {\"report_id\", \"text\", ...}");
    }
    const auto report_id = doc["report_id"].get<std::string>();
    EvalRecord record;
    record.text = doc["text"].get<std::string>();
    if (doc.contains("labels")) {
      if (!doc["labels"].is_array() || doc["labels"].size() != 14) {
        throw std::runtime_error(std::string(what) + " " + report_id +
                                 ": \"labels\" must hold 14 flags");
      }
      fse::LabelVector labels;
      for (std::size_t c = 0; c < 14; ++c) {
        const auto flag = doc["labels"][c];
        if (!flag.is_number_integer() || (flag.get<int>() != 0 && flag.get<int>() != 1)) {
          throw std::runtime_error(std::string(what) + " " + report_id +
                                   ": label flags must be 0 or 1");
        }
        labels.labels[c] = static_cast<std::uint8_t>(flag.get<int>());
      }
      record.labels = labels;
    }
    if (doc.contains("entities")) {
      const json body = {{"text", record.text}, {"entities", doc["entities"]}};
      record.report = fse::parse_single_report(report_id, body.dump());
    }
    if (!records.emplace(report_id, std::move(record)).second) {
      throw std::runtime_error(std::string(what) + ": duplicate report_id \"" + report_id +
                               "\"");
    }
  }
  return records;
}

int run_eval(const std::string& candidates_path, const std::string& references_path,
             const std::string& metrics_flag, const std::string& mgt_flag) {
  std::optional<std::size_t> m_gt;
  if (mgt_flag != "complete") {
    std::size_t consumed = 0;
    const unsigned long value = std::stoul(mgt_flag, &consumed);
    if (consumed != mgt_flag.size() || value == 0) {
      throw std::runtime_error("--mgt must be a positive token count or \"complete\"");
    }
    m_gt = value;
  }

  std::vector<std::string> requested;
  {
    std::istringstream in(metrics_flag);
    std::string name;
    while (std::getline(in, name, ',')) {
      if (!name.empty()) requested.push_back(name);
    }
  }
  if (requested.empty()) throw std::runtime_error("--metrics must name at least one metric");

  const auto candidates = read_eval_records(candidates_path, "candidates");
  const auto references = read_eval_records(references_path, "references");
  if (candidates.empty()) throw std::runtime_error("candidates: no records");
  for (const auto& [report_id, record] : candidates) {
    if (!references.contains(report_id)) {
      throw std::runtime_error("references: missing report_id \"" + report_id + "\"");
    }
  }
  for (const auto& [report_id, record] : references) {
    if (!candidates.contains(report_id)) {
      throw std::runtime_error("candidates: missing report_id \"" + report_id + "\"");
    }
  }

  // Text metrics see whitespace-split, lowercased tokens; reference-side
  // truncation applies through m_gt.
  std::vector<fse::EvalPair> pairs;
  std::vector<fse::LabelVector> predicted_labels, gold_labels;
  std::vector<std::pair<const fse::AnnotatedReport*, const fse::AnnotatedReport*>> graphs;
  for (const auto& [report_id, candidate] : candidates) {
    const EvalRecord& reference = references.at(report_id);
    fse::EvalPair pair;
    pair.candidate = fse::tokenize_for_metrics(candidate.text);
    pair.references.push_back(fse::tokenize_for_metrics(reference.text));
    pair.m_gt = m_gt;
    pairs.push_back(std::move(pair));
    if (candidate.labels && reference.labels) {
      predicted_labels.push_back(*candidate.labels);
      gold_labels.push_back(*reference.labels);
    }
    if (candidate.report && reference.report) {
      graphs.emplace_back(&*candidate.report, &*reference.report);
    }
  }

  json scores = json::object();
  for (const std::string& name : requested) {
    if (name == "bleu1" || name == "bleu2" || name == "bleu3" || name == "bleu4") {
      scores[name] = fse::bleu_n_corpus(pairs, name[4] - '0');
    } else if (name == "rougeL") {
      double total = 0.0;
      for (const auto& pair : pairs) total += fse::rouge_l(pair);
      scores[name] = total / static_cast<double>(pairs.size());
    } else if (name == "microF1" || name == "microF1cx5") {
      if (predicted_labels.size() != pairs.size()) {
        throw std::runtime_error(name + ": every record needs a \"labels\" array");
      }
      scores[name] = fse::micro_f1(predicted_labels, gold_labels,
                                   name == "microF1" ? fse::LabelSubset::kAll14
                                                     : fse::LabelSubset::kCx5);
    } else if (name == "radgraphF1") {
      if (graphs.size() != pairs.size()) {
        throw std::runtime_error("radgraphF1: every record needs an \"entities\" object");
      }
      double total = 0.0;
      for (const auto& [generated, reference] : graphs) {
        total += fse::radgraph_f1(*generated, *reference);
      }
      scores[name] = total / static_cast<double>(graphs.size());
    } else {
      throw std::runtime_error("unknown metric \"" + name + "\"");
    }
  }

  json report;
  if (m_gt) {
    report["m_gt"] = *m_gt;
  } else {
    report["m_gt"] = "complete";
  }
  report["num_pairs"] = pairs.size();
  report["scores"] = std::move(scores);
  std::cout << report.dump() << '\n';
  return 0;
}

int run_check_kernels(std::uint64_t seed, double eps, int points, double tau1, double tau2) {
  const auto reports = fse::run_gradient_checks(seed, eps, points, tau1, tau2);

  bool all_pass = true;
  std::printf("%-24s %-12s %-10s %-14s %s\n", "operation", "point_seed", "eps", "max_rel_err",
              "status");
  for (const auto& report : reports) {
    const bool pass = report.max_rel_err <= kGradCheckThreshold;
    all_pass = all_pass && pass;
    std::printf("%-24s %-12llu %-10.1e %-14.3e %s\n", report.operation.c_str(),
                static_cast<unsigned long long>(report.point_seed), report.eps,
                report.max_rel_err, pass ? "pass" : "FAIL");
  }
  std::printf("%zu/%zu checks within %.1e\n",
              static_cast<std::size_t>(
                  std::count_if(reports.begin(), reports.end(),
                                [](const auto& r) { return r.max_rel_err <= kGradCheckThreshold; })),
              reports.size(), kGradCheckThreshold);
  if (!all_pass) throw std::runtime_error("gradient checks exceeded the tolerance");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"factual serialization, retrieval, and evaluation toolkit"};
  app.require_subcommand(1);

  std::string input, output, stopwords;
  std::string index_path, probe_path;
  std::string candidates_path, references_path;
  std::string metrics = "bleu1,bleu2,bleu3,bleu4,rougeL";
  std::string mgt = "complete";
  std::size_t min_freq = 3;
  std::size_t k = 5;
  bool lowercase = false;
  bool exclude_self = false;
  std::uint64_t seed = 42;
  double eps = 1e-6;
  int points = 20;
  double tau1 = 0.07;
  double tau2 = 0.07;

  CLI::App* serialize = app.add_subcommand(
      "serialize", "annotation JSON -> factual serialization JSON lines");
  serialize->add_option("--input", input, "annotation JSON file")->required();
  serialize->add_option("--output", output, "output JSONL path")->required();
  serialize->add_option("--stopwords", stopwords,
                        "stopword file (overrides FSE_STOPWORDS and the built-in list)");

  CLI::App* vocab = app.add_subcommand(
      "vocab", "serialization JSON lines -> word vocabulary JSON");
  vocab->add_option("--input", input, "serialization JSONL file")->required();
  vocab->add_option("--output", output, "output vocab JSON path")->required();
  vocab->add_option("--min-freq", min_freq, "minimum word frequency (default 3)");
  vocab->add_flag("--lowercase", lowercase, "lowercase corpus words");

  CLI::App* index = app.add_subcommand("index", "embedding JSON lines -> binary index");
  index->add_option("--input", input, "embedding JSONL file")->required();
  index->add_option("--output", output, "output index path")->required();

  CLI::App* retrieve = app.add_subcommand(
      "retrieve", "top-k training-split neighbors for each probe");
  retrieve->add_option("--index", index_path, "binary index path")->required();
  retrieve->add_option("--probe", probe_path, "probe JSONL file")->required();
  retrieve->add_option("--k", k, "neighbors per probe (default 5)");
  retrieve->add_flag("--exclude-self", exclude_self, "drop the probe's own record id");
  retrieve->add_option("--output", output, "output JSONL path (default: stdout)");

  CLI::App* eval = app.add_subcommand("eval", "score candidate reports against references");
  eval->add_option("--candidates", candidates_path, "candidate JSONL file")->required();
  eval->add_option("--references", references_path, "reference JSONL file")->required();
  eval->add_option("--metrics", metrics,
                   "comma list: bleu1..bleu4, rougeL, microF1, microF1cx5, radgraphF1");
  eval->add_option("--mgt", mgt, "reference truncation: token count or \"complete\"");

  CLI::App* check = app.add_subcommand("check-kernels", "finite-difference gradient checks");
  check->add_option("--seed", seed, "base seed (default 42)");
  check->add_option("--eps", eps, "finite-difference step (default 1e-6)");
  check->add_option("--points", points, "random points per operation (default 20)");
  check->add_option("--tau1", tau1, "instance-loss temperature (default 0.07)");
  check->add_option("--tau2", tau2, "token-loss temperature (default 0.07)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& error) {
    const int code = app.exit(error);
    return code == 0 ? 0 : 2;  // --help exits cleanly; anything else is usage
  }

  try {
    if (serialize->parsed()) return run_serialize(input, output, stopwords);
    if (vocab->parsed()) return run_vocab(input, output, min_freq, lowercase);
    if (index->parsed()) return run_index(input, output);
    if (retrieve->parsed()) return run_retrieve(index_path, probe_path, k, exclude_self, output);
    if (eval->parsed()) return run_eval(candidates_path, references_path, metrics, mgt);
    if (check->parsed()) return run_check_kernels(seed, eps, points, tau1, tau2);
  } catch (const std::exception& error) {
    std::cerr << nlohmann::json{{"error", error.what()}}.dump() << '\n';
    return 1;
  }
  return 2;
}
