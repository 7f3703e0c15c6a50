#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lmrank/soft_voting.hpp"
#include "test_helpers.hpp"

using namespace lmrank;
using lmtest::make_set;
using lmtest::random_set;

namespace {

// Rows shaped (s, t) with s*s + t*t within 1e-4 of one, stored without
// re-normalization, so a query along the first axis sees similarity s
// bit-exactly.
lmtest::Row planar(const std::string& id, float s, const std::string& label,
                   float sign = 1.0f) {
    float t = sign * std::sqrt(std::max(0.0f, 1.0f - s * s));
    return {id, {s, t, 0.0f, 0.0f}, label};
}

const std::vector<float> kAxisQuery{1.0f, 0.0f, 0.0f, 0.0f};

}  // namespace

TEST_CASE("vote sums per-label similarities over the top k and divides by k") {
    auto train = make_set(4,
                          {planar("t0", 0.9f, "LA"), planar("t1", 0.8f, "LB"),
                           planar("t2", 0.7f, "LA", -1.0f), planar("t3", 0.1f, "LC")},
                          /*normalize=*/false);
    const LabelTable table = make_label_table(train);
    auto pred = vote(kAxisQuery, train, table, 3);
    // Top-3 neighbors: 0.9 (LA), 0.8 (LB), 0.7 (LA).
    CHECK(table.label(pred.label) == "LA");
    const double expected =
        (static_cast<double>(0.9f) + static_cast<double>(0.7f)) / 3.0;
    CHECK(pred.score == expected);
}

TEST_CASE("score divides by the requested k even with fewer train rows") {
    auto train = make_set(4, {planar("t0", 1.0f, "LA"), planar("t1", 0.6f, "LA")},
                          /*normalize=*/false);
    const LabelTable table = make_label_table(train);
    auto pred = vote(kAxisQuery, train, table, 5);
    CHECK(table.label(pred.label) == "LA");
    CHECK(pred.score == (1.0 + static_cast<double>(0.6f)) / 5.0);
}

TEST_CASE("equal vote sums go to the lower label ordinal") {
    auto train = make_set(4, {planar("t0", 0.5f, "LZ"), planar("t1", 0.5f, "LM", -1.0f)},
                          /*normalize=*/false);
    const LabelTable table = make_label_table(train);
    auto pred = vote(kAxisQuery, train, table, 2);
    // Both labels sum to 0.5; LM sorts before LZ.
    CHECK(table.label(pred.label) == "LM");
    CHECK(pred.score == static_cast<double>(0.5f) / 2.0);
}

TEST_CASE("a label with no neighbors beats all-negative vote sums") {
    auto train = make_set(4, {planar("t0", -0.6f, "LB"), planar("t1", -0.8f, "LC")},
                          /*normalize=*/false);
    const LabelTable table({"LA", "LB", "LC"});
    auto pred = vote(kAxisQuery, train, table, 2);
    CHECK(table.label(pred.label) == "LA");
    CHECK(pred.score == 0.0);
}

TEST_CASE("zero vote sum ties against an absent label by ordinal") {
    auto train = make_set(4, {{"t0", {0.0f, 1.0f, 0.0f, 0.0f}, "LB"}},
                          /*normalize=*/false);
    // Absent LA has the lower ordinal, so it takes the 0-0 tie.
    auto low = vote(kAxisQuery, train, LabelTable({"LA", "LB"}), 1);
    CHECK(LabelTable({"LA", "LB"}).label(low.label) == "LA");
    CHECK(low.score == 0.0);
    // Present LB keeps the tie against an absent higher ordinal.
    auto high = vote(kAxisQuery, train, LabelTable({"LB", "LZ"}), 1);
    CHECK(LabelTable({"LB", "LZ"}).label(high.label) == "LB");
}

TEST_CASE("vote validates its inputs") {
    auto train = make_set(4, {planar("t0", 0.9f, "LA")}, false);
    const LabelTable table = make_label_table(train);
    CHECK_THROWS_AS(vote(kAxisQuery, train, table, 0), std::runtime_error);
    std::vector<float> narrow{1.0f, 0.0f};
    CHECK_THROWS_AS(vote(narrow, train, table, 3), std::runtime_error);
    auto unlabeled = make_set(4, {{"u", {1, 0, 0, 0}}});
    CHECK_THROWS_AS(vote(kAxisQuery, unlabeled, table, 3), std::runtime_error);
    auto empty = EmbeddingSet::from_rows(4, {}, {}, true);
    CHECK_THROWS_AS(vote(kAxisQuery, empty, table, 3), std::runtime_error);
}

TEST_CASE("predict_index agrees with per-row vote and keeps index order") {
    std::vector<lmtest::Row> rows;
    auto src = random_set(30, 6, 77);
    for (std::size_t i = 0; i < 30; ++i) {
        rows.push_back({"t" + std::to_string(i),
                        {src.row(i).begin(), src.row(i).end()},
                        "L" + std::to_string(i % 5)});
    }
    auto train = make_set(6, rows, false);
    const LabelTable table = make_label_table(train);
    auto index = random_set(12, 6, 78, "x");

    auto preds = predict_index(index, train, table, 3);
    REQUIRE(preds.size() == 12);
    CHECK(preds.ids() == index.ids());
    for (std::size_t i = 0; i < index.count(); ++i) {
        auto one = vote(index.row(i), train, table, 3);
        const auto& got = preds.at(index.ids()[i]);
        CHECK(got.label == one.label);
        CHECK(got.score == one.score);
        CHECK(preds.provenance_of(index.ids()[i]) == Provenance::voted);
    }
}

TEST_CASE("predict_index is worker-count invariant") {
    std::vector<lmtest::Row> rows;
    auto src = random_set(25, 5, 88);
    for (std::size_t i = 0; i < 25; ++i) {
        rows.push_back({"t" + std::to_string(i),
                        {src.row(i).begin(), src.row(i).end()},
                        "L" + std::to_string(i % 4)});
    }
    auto train = make_set(5, rows, false);
    const LabelTable table = make_label_table(train);
    auto index = random_set(17, 5, 89, "x");
    auto base = predictions_tsv(predict_index(index, train, table, 3, 1), table);
    for (int threads : {2, 4, 8}) {
        CHECK(predictions_tsv(predict_index(index, train, table, 3, threads), table) == base);
    }
}

TEST_CASE("mark_known pins train members to their true label at score one") {
    PredictionTable table;
    table.set("a", {1, 0.4}, Provenance::voted);
    table.set("b", {0, 0.9}, Provenance::voted);
    const LabelTable ordinals({"LA", "LB"});
    std::unordered_map<std::string, std::string> labels{{"a", "LA"}, {"ghost", "LB"}};

    auto out = mark_known(std::move(table), {"a", "ghost"}, labels, ordinals);
    CHECK(out.at("a").label == 0);
    CHECK(out.at("a").score == 1.0);
    CHECK(out.provenance_of("a") == Provenance::known_label);
    // Untouched entry keeps its vote.
    CHECK(out.at("b").label == 0);
    CHECK(out.at("b").score == 0.9);
    CHECK(out.provenance_of("b") == Provenance::voted);
    // "ghost" was absent from the table: skipped, id list unchanged.
    CHECK(out.size() == 2);
    CHECK_FALSE(out.contains("ghost"));
}

TEST_CASE("mark_known requires a label for every present member") {
    PredictionTable table;
    table.set("a", {0, 0.4}, Provenance::voted);
    const LabelTable ordinals({"LA"});
    CHECK_THROWS_WITH_AS(mark_known(std::move(table), {"a"}, {}, ordinals),
                         doctest::Contains("no label"), std::runtime_error);
}

TEST_CASE("prediction table basics") {
    PredictionTable table;
    table.set("a", {0, 0.5}, Provenance::voted);
    table.set("b", {1, 0.25}, Provenance::voted);
    table.set("a", {1, 1.0}, Provenance::known_label);  // overwrite keeps order
    CHECK(table.ids() == std::vector<std::string>{"a", "b"});
    CHECK(table.at("a").score == 1.0);
    CHECK_THROWS_AS(table.at("zzz"), std::runtime_error);
    CHECK_THROWS_AS(table.provenance_of("zzz"), std::runtime_error);
}

TEST_CASE("predictions tsv round-trips exactly") {
    const LabelTable labels({"LA", "LB"});
    PredictionTable table;
    table.set("x", {0, 0.5}, Provenance::voted);
    table.set("y", {1, 1.0}, Provenance::known_label);
    table.set("z", {1, 1.0 / 3.0}, Provenance::voted);
    auto tsv = predictions_tsv(table, labels);
    CHECK(tsv.substr(0, 15) == "x\tLA\t0.5\tvoted\n");
    CHECK(tsv.find("y\tLB\t1\tknown-label\n") != std::string::npos);

    auto back = parse_predictions_tsv(tsv, labels);
    CHECK(back.ids() == table.ids());
    for (const auto& id : table.ids()) {
        CHECK(back.at(id).label == table.at(id).label);
        CHECK(back.at(id).score == table.at(id).score);
        CHECK(back.provenance_of(id) == table.provenance_of(id));
    }
}

TEST_CASE("prediction tsv parser rejects malformed rows") {
    const LabelTable labels({"LA"});
    CHECK_THROWS_AS(parse_predictions_tsv("x\tLA\t0.5\n", labels), std::runtime_error);
    CHECK_THROWS_AS(parse_predictions_tsv("x\tLA\t0.5\tmystery\n", labels), std::runtime_error);
    CHECK_THROWS_AS(parse_predictions_tsv("x\tNOPE\t0.5\tvoted\n", labels), std::runtime_error);
    CHECK_THROWS_AS(parse_predictions_tsv("x\tLA\tnotanumber\tvoted\n", labels),
                    std::runtime_error);
}
