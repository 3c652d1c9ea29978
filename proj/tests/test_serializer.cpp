#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"

#include "fse/annotations.hpp"
#include "fse/rng.hpp"
#include "fse/serializer.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace fse;

namespace {

EntityAnnotation make_entity(std::string id, std::string tokens, EntityLabel label,
                             std::int64_t start, std::int64_t end) {
  EntityAnnotation entity;
  entity.entity_id = std::move(id);
  entity.tokens = std::move(tokens);
  entity.label = label;
  entity.start_ix = start;
  entity.end_ix = end;
  return entity;
}

AnnotatedReport make_report(std::string id, std::string text) {
  AnnotatedReport report;
  report.report_id = std::move(id);
  report.text = std::move(text);
  report.word_tokens = split_whitespace(report.text);
  report.sentence_boundaries = compute_sentence_boundaries(report.word_tokens);
  return report;
}

std::set<std::string> ids_of(const std::vector<EntityAnnotation>& entities) {
  std::set<std::string> ids;
  for (const auto& entity : entities) ids.insert(entity.entity_id);
  return ids;
}

}  // namespace

TEST_SUITE_BEGIN("serializer");

TEST_CASE("corpus serializes to the expected lines byte for byte") {
  const auto reports =
      parse_annotations(testing::read_file(testing::fixture_dir() / "corpus.json"));
  const auto config = SerializerConfig::defaults();

  std::string produced;
  for (const auto& report : reports) {
    produced += serialization_to_jsonl_line(serialize(report, config));
    produced += '\n';
  }
  const std::string expected = testing::read_file(testing::golden_dir() / "corpus_facts.jsonl");
  CHECK(produced == expected);
}

TEST_CASE("noise filter drops cross-sentence and single stopword entities") {
  const auto reports =
      parse_annotations(testing::read_file(testing::fixture_dir() / "corpus.json"));
  const auto config = SerializerConfig::defaults();

  SUBCASE("cross-sentence span") {
    const auto& report = reports[1];  // catheter report: entity 2 spans the period
    REQUIRE(report.report_id == "mimic-002");
    const auto kept = filter_noise(report, config);
    CHECK(ids_of(kept) == std::set<std::string>{"1", "3", "4"});
  }

  SUBCASE("single-token stopword, case-insensitively") {
    const auto& report = reports[2];  // "These are stable . Lungs are clear ."
    REQUIRE(report.report_id == "mimic-003");
    const auto kept = filter_noise(report, config);
    CHECK(ids_of(kept) == std::set<std::string>{"2", "3", "4"});
  }

  SUBCASE("multi-token entities keep stopwords") {
    auto report = make_report("stop-2", "Tube remains in place .");
    report.entities.emplace("1",
                            make_entity("1", "in place", EntityLabel::kObsDp, 2, 3));
    REQUIRE(validate(report).empty());
    CHECK(filter_noise(report, config).size() == 1);  // "in" is a stopword; span is 2 tokens
  }

  SUBCASE("survivors pass through unchanged in id order") {
    const auto kept = filter_noise(reports[0], config);  // heart-size report, nothing filtered
    REQUIRE(kept.size() == 3);
    CHECK(kept[0].entity_id == "1");
    CHECK(kept[1].entity_id == "2");
    CHECK(kept[2].entity_id == "3");
    CHECK(kept[0] == reports[0].entities.at("1"));
  }
}

TEST_CASE("overlap resolution prefers informative spans") {
  SUBCASE("more span tokens win") {
    std::vector<EntityAnnotation> entities = {
        make_entity("1", "1.9 × 1.0 cm", EntityLabel::kObsDp, 3, 6),
        make_entity("2", "1.0 cm", EntityLabel::kObsDp, 5, 6),
    };
    const auto winners = resolve_overlaps(entities);
    REQUIRE(winners.size() == 1);
    CHECK(winners[0].entity_id == "1");
  }

  SUBCASE("equal token counts fall back to byte length") {
    std::vector<EntityAnnotation> entities = {
        make_entity("1", "Left basilar", EntityLabel::kAnatDp, 0, 1),
        make_entity("2", "basilar opacity", EntityLabel::kObsU, 1, 2),
    };
    const auto winners = resolve_overlaps(entities);
    REQUIRE(winners.size() == 1);
    CHECK(winners[0].entity_id == "2");  // 15 bytes beats 12
  }

  SUBCASE("equal lengths fall back to the earlier start") {
    std::vector<EntityAnnotation> entities = {
        make_entity("2", "bb cc", EntityLabel::kObsDp, 1, 2),
        make_entity("1", "aa bb", EntityLabel::kObsDp, 0, 1),
    };
    const auto winners = resolve_overlaps(entities);
    REQUIRE(winners.size() == 1);
    CHECK(winners[0].entity_id == "1");
  }

  SUBCASE("identical spans fall back to the smaller entity id") {
    std::vector<EntityAnnotation> entities = {
        make_entity("2", "aa bb", EntityLabel::kObsDp, 0, 1),
        make_entity("1", "aa bb", EntityLabel::kObsU, 0, 1),
    };
    const auto winners = resolve_overlaps(entities);
    REQUIRE(winners.size() == 1);
    CHECK(winners[0].entity_id == "1");
  }

  SUBCASE("chains collapse transitively even when the ends never touch") {
    std::vector<EntityAnnotation> entities = {
        make_entity("A", "a b", EntityLabel::kObsDp, 0, 1),
        make_entity("B", "b c", EntityLabel::kObsDp, 1, 2),
        make_entity("C", "c d", EntityLabel::kObsDp, 2, 3),
    };
    const auto winners = resolve_overlaps(entities);
    REQUIRE(winners.size() == 1);
    CHECK(winners[0].entity_id == "A");  // equal counts/lengths, smallest start
  }

  SUBCASE("disjoint spans all survive, sorted by start") {
    std::vector<EntityAnnotation> entities = {
        make_entity("2", "c", EntityLabel::kObsDp, 5, 5),
        make_entity("1", "a b", EntityLabel::kObsDp, 0, 1),
        make_entity("3", "d", EntityLabel::kObsDp, 3, 3),
    };
    const auto winners = resolve_overlaps(entities);
    REQUIRE(winners.size() == 3);
    CHECK(winners[0].entity_id == "1");
    CHECK(winners[1].entity_id == "3");
    CHECK(winners[2].entity_id == "2");
  }

  SUBCASE("empty input") {
    CHECK(resolve_overlaps({}).empty());
  }
}

TEST_CASE("overlap resolution matches a transitive-closure oracle on random spans") {
  Rng rng(555001);
  const std::vector<std::string> word_pool = {"a", "bb", "ccc", "dddd"};
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t count = 1 + rng.below(10);
    std::vector<EntityAnnotation> entities;
    std::vector<oracle::Span> spans;
    for (std::size_t e = 0; e < count; ++e) {
      const std::int64_t start = static_cast<std::int64_t>(rng.below(30));
      const std::int64_t len = 1 + static_cast<std::int64_t>(rng.below(4));
      std::string tokens;
      for (std::int64_t t = 0; t < len; ++t) {
        if (t) tokens += ' ';
        tokens += word_pool[rng.below(word_pool.size())];
      }
      const std::string id = "e" + std::to_string(e);
      entities.push_back(make_entity(id, tokens, EntityLabel::kObsDp, start, start + len - 1));
      spans.push_back({id, start, start + len - 1, tokens});
    }

    const auto winners = resolve_overlaps(entities);
    CHECK(ids_of(winners) == oracle::resolve_overlaps_closure(spans));

    // Output invariants: sorted by start, pairwise non-overlapping.
    for (std::size_t i = 1; i < winners.size(); ++i) {
      CHECK(winners[i - 1].start_ix <= winners[i].start_ix);
      CHECK(winners[i - 1].end_ix < winners[i].start_ix);
    }
  }
}

TEST_CASE("grouping buckets by the sentence containing the span start") {
  auto report = make_report("g1", "a b . c d . e f .");
  const auto e1 = make_entity("1", "b", EntityLabel::kObsDp, 1, 1);
  const auto e2 = make_entity("2", "c", EntityLabel::kObsDp, 3, 3);
  const auto e3 = make_entity("3", "d", EntityLabel::kObsDp, 4, 4);
  const auto e4 = make_entity("4", "f", EntityLabel::kObsDp, 7, 7);

  SUBCASE("groups follow sentence order with inner start order") {
    const auto groups = group_into_subsequences({e4, e3, e1, e2}, report);
    REQUIRE(groups.size() == 3);
    CHECK(groups[0].sentence_index == 0);
    CHECK(groups[1].sentence_index == 1);
    CHECK(groups[2].sentence_index == 2);
    REQUIRE(groups[1].entities.size() == 2);
    CHECK(groups[1].entities[0].entity_id == "2");
    CHECK(groups[1].entities[1].entity_id == "3");
  }

  SUBCASE("input order never changes the result") {
    const auto forward = group_into_subsequences({e1, e2, e3, e4}, report);
    const auto shuffled = group_into_subsequences({e3, e1, e4, e2}, report);
    REQUIRE(forward.size() == shuffled.size());
    for (std::size_t g = 0; g < forward.size(); ++g) {
      CHECK(forward[g].sentence_index == shuffled[g].sentence_index);
      CHECK(forward[g].entities == shuffled[g].entities);
    }
  }

  SUBCASE("entity-free sentences produce no group") {
    const auto groups = group_into_subsequences({e1, e4}, report);
    REQUIRE(groups.size() == 2);
    CHECK(groups[0].sentence_index == 0);
    CHECK(groups[1].sentence_index == 2);
  }

  SUBCASE("a start outside every sentence is a hard error") {
    const auto stray = make_entity("9", "zz", EntityLabel::kObsDp, 40, 41);
    CHECK_THROWS_AS(group_into_subsequences({stray}, report), std::domain_error);
  }
}

TEST_CASE("factuality indicators rank no over maybe") {
  const auto config = SerializerConfig::defaults();
  SentenceGroup group;
  group.sentence_index = 2;

  SUBCASE("definite entities carry no indicator") {
    group.entities = {make_entity("1", "heart", EntityLabel::kAnatDp, 0, 0),
                      make_entity("2", "normal", EntityLabel::kObsDp, 2, 2)};
    const auto sub = apply_factuality_indicators(group, config);
    CHECK_FALSE(sub.indicator.has_value());
    CHECK(sub.rendered == "heart normal");
    CHECK(sub.sentence_index == 2);
    CHECK(sub.entity_texts == std::vector<std::string>{"heart", "normal"});
  }

  SUBCASE("an absent finding prefixes no") {
    group.entities = {make_entity("1", "effusion", EntityLabel::kObsDa, 0, 0)};
    const auto sub = apply_factuality_indicators(group, config);
    CHECK(sub.indicator == FactualityIndicator::kNo);
    CHECK(sub.rendered == "no effusion");
  }

  SUBCASE("an uncertain finding prefixes maybe") {
    group.entities = {make_entity("1", "edema", EntityLabel::kObsU, 0, 0)};
    const auto sub = apply_factuality_indicators(group, config);
    CHECK(sub.indicator == FactualityIndicator::kMaybe);
    CHECK(sub.rendered == "maybe edema");
  }

  SUBCASE("absent outranks uncertain in the same sentence") {
    group.entities = {make_entity("1", "consolidation", EntityLabel::kObsDa, 0, 0),
                      make_entity("2", "effusion", EntityLabel::kObsU, 2, 2)};
    const auto sub = apply_factuality_indicators(group, config);
    CHECK(sub.indicator == FactualityIndicator::kNo);
    CHECK(sub.rendered == "no consolidation effusion");
  }

  SUBCASE("empty group renders empty") {
    const auto sub = apply_factuality_indicators(group, config);
    CHECK_FALSE(sub.indicator.has_value());
    CHECK(sub.rendered.empty());
  }
}

TEST_CASE("overlapping negative and uncertain label sets are rejected") {
  SerializerConfig config = SerializerConfig::defaults();
  config.uncertain_labels.insert(EntityLabel::kObsDa);  // now in both sets
  const auto report = make_report("x1", "a .");
  CHECK_THROWS_AS(serialize(report, config), std::domain_error);
  CHECK_THROWS_AS(apply_factuality_indicators(SentenceGroup{}, config), std::domain_error);
}

TEST_CASE("serialize composes the full pipeline") {
  const auto reports =
      parse_annotations(testing::read_file(testing::fixture_dir() / "corpus.json"));
  const auto config = SerializerConfig::defaults();

  SUBCASE("entity-free report renders empty") {
    const auto& report = reports[7];
    REQUIRE(report.report_id == "mimic-008");
    const auto serialization = serialize(report, config);
    CHECK(serialization.rendered.empty());
    CHECK(serialization.subsequences.empty());
    CHECK(serialization_to_jsonl_line(serialization) ==
          R"({"factual_serialization":"","num_subsequences":0,"report_id":"mimic-008"})");
  }

  SUBCASE("subsequences carry sentence indexes and indicators") {
    const auto& report = reports[11];
    REQUIRE(report.report_id == "mimic-012");
    const auto serialization = serialize(report, config);
    REQUIRE(serialization.subsequences.size() == 3);
    CHECK(serialization.subsequences[0].sentence_index == 0);
    CHECK(serialization.subsequences[0].indicator == FactualityIndicator::kMaybe);
    CHECK(serialization.subsequences[1].indicator == FactualityIndicator::kNo);
    CHECK_FALSE(serialization.subsequences[2].indicator.has_value());
    CHECK(serialization.rendered ==
          "maybe small right effusion [SEP] no pneumothorax [SEP] improved aeration");
  }

  SUBCASE("separator joins exactly the rendered subsequences") {
    const auto& report = reports[8];
    REQUIRE(report.report_id == "mimic-009");
    const auto serialization = serialize(report, config);
    std::string joined;
    for (const auto& sub : serialization.subsequences) {
      if (!joined.empty()) joined += " [SEP] ";
      joined += sub.rendered;
    }
    CHECK(serialization.rendered == joined);
  }
}

TEST_CASE("stopword file, built-in list, and overrides agree") {
  const auto config = SerializerConfig::defaults();

  SUBCASE("shipped file matches the built-in list") {
    const auto from_file = load_stopwords(testing::data_dir() / "stopwords.txt");
    std::set<std::string> built_in(default_stopwords().begin(), default_stopwords().end());
    CHECK(std::set<std::string>(from_file.begin(), from_file.end()) == built_in);
    CHECK(from_file.size() == 179);
  }

  SUBCASE("built-in list covers the classic function words") {
    CHECK(config.stopword_list.contains("these"));
    CHECK(config.stopword_list.contains("the"));
    CHECK(config.stopword_list.contains("no"));
    CHECK_FALSE(config.stopword_list.contains("effusion"));
    CHECK_FALSE(config.stopword_list.contains("mild"));
  }

  SUBCASE("custom list changes the filter") {
    auto report = make_report("c1", "Opacity persists .");
    report.entities.emplace("1", make_entity("1", "Opacity", EntityLabel::kObsDp, 0, 0));
    REQUIRE(validate(report).empty());

    CHECK_FALSE(serialize(report, config).rendered.empty());

    SerializerConfig custom = config;
    custom.stopword_list.insert("opacity");
    CHECK(serialize(report, custom).rendered.empty());
  }

  SUBCASE("missing stopword file raises") {
    CHECK_THROWS_AS(load_stopwords(testing::data_dir() / "does_not_exist.txt"),
                    std::runtime_error);
  }
}

TEST_SUITE_END();
