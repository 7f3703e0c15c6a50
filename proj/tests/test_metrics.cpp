#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "lmrank/metrics.hpp"
#include "lmrank/rng.hpp"
#include "test_helpers.hpp"

using namespace lmrank;

namespace {

RankedList list_of(std::vector<std::string> items, std::size_t capacity = 100) {
    return RankedList{"q", std::move(items), capacity};
}

// Independent AP oracle, written from the definition: running precision at
// each relevant hit, normalized by min(|relevant|, k).
double naive_ap(const std::vector<std::string>& items,
                const std::unordered_set<std::string>& relevant, std::size_t k) {
    double sum = 0.0;
    std::size_t hits = 0;
    const std::size_t upto = std::min(items.size(), k);
    for (std::size_t i = 0; i < upto; ++i) {
        if (relevant.count(items[i]) == 0) continue;
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
    return sum / static_cast<double>(std::min(relevant.size(), k));
}

// Seeded random list over ids r0..r{nr-1} (relevant) and x0.. (filler).
std::vector<std::string> random_items(Rng& rng, std::size_t n_rel, std::size_t n_fill,
                                      std::size_t take) {
    std::vector<std::string> all;
    for (std::size_t i = 0; i < n_rel; ++i) all.push_back("r" + std::to_string(i));
    for (std::size_t i = 0; i < n_fill; ++i) all.push_back("x" + std::to_string(i));
    for (std::size_t i = all.size(); i > 1; --i) {
        std::swap(all[i - 1], all[rng.bounded(i)]);
    }
    all.resize(std::min(take, all.size()));
    return all;
}

}  // namespace

TEST_CASE("AP hand example: R N R with two relevant") {
    auto ap = ap_at_k(list_of({"r1", "n1", "r2"}), {"r1", "r2"}, 100);
    CHECK(ap == doctest::Approx(5.0 / 6.0).epsilon(1e-9));
}

TEST_CASE("perfect list scores one") {
    CHECK(ap_at_k(list_of({"a", "b", "c"}), {"a", "b", "c"}, 100) == 1.0);
}

TEST_CASE("no relevant retrieved scores zero") {
    CHECK(ap_at_k(list_of({"n1", "n2"}), {"r1"}, 100) == 0.0);
}

TEST_CASE("AP validates inputs") {
    CHECK_THROWS_AS(ap_at_k(list_of({"a"}), {}, 100), std::runtime_error);
    CHECK_THROWS_AS(ap_at_k(list_of({"a"}), {"a"}, 0), std::runtime_error);
    RankedList dup{"q", {"a", "a"}, 100};
    CHECK_THROWS_AS(ap_at_k(dup, {"a"}, 100), std::runtime_error);
}

TEST_CASE("AP denominator caps at k") {
    // 5 relevant, k=2, both top slots hit: (1/2)(1 + 1) = 1.
    CHECK(ap_at_k(list_of({"r1", "r2"}), {"r1", "r2", "r3", "r4", "r5"}, 2) == 1.0);
}

TEST_CASE("AP matches the naive oracle on random lists") {
    Rng rng(404);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n_rel = 1 + rng.bounded(6);
        const std::size_t n_fill = rng.bounded(30);
        const std::size_t take = 1 + rng.bounded(n_rel + n_fill);
        auto items = random_items(rng, n_rel, n_fill, take);
        std::unordered_set<std::string> relevant;
        for (std::size_t i = 0; i < n_rel; ++i) relevant.insert("r" + std::to_string(i));
        const std::size_t k = 1 + rng.bounded(20);
        RankedList list{"q", items, std::max(items.size(), std::size_t{1})};
        CHECK(ap_at_k(list, relevant, k) == doctest::Approx(naive_ap(items, relevant, k)).epsilon(1e-12));
    }
}

TEST_CASE("promoting a relevant item never lowers AP") {
    Rng rng(505);
    for (int trial = 0; trial < 100; ++trial) {
        auto items = random_items(rng, 4, 12, 16);
        std::unordered_set<std::string> relevant{"r0", "r1", "r2", "r3"};
        // Find a relevant item directly after a non-relevant one and swap.
        for (std::size_t i = 1; i < items.size(); ++i) {
            if (relevant.count(items[i]) && !relevant.count(items[i - 1])) {
                RankedList before{"q", items, 100};
                auto swapped = items;
                std::swap(swapped[i], swapped[i - 1]);
                RankedList after{"q", swapped, 100};
                CHECK(ap_at_k(after, relevant, 10) >= ap_at_k(before, relevant, 10));
                break;
            }
        }
    }
}

TEST_CASE("AP ignores order below rank k") {
    std::unordered_set<std::string> relevant{"r0", "r1"};
    std::vector<std::string> head{"r0", "x0", "x1"};
    auto a = head;
    a.insert(a.end(), {"r1", "x2"});
    auto b = head;
    b.insert(b.end(), {"x2", "r1"});
    CHECK(ap_at_k({"q", a, 100}, relevant, 3) == ap_at_k({"q", b, 100}, relevant, 3));
}

TEST_CASE("evaluate hand example: single query R N R") {
    std::vector<RankedList> lists{{"q", {"r1", "n1", "r2"}, 100}};
    GroundTruth gt{{"q", {"r1", "r2"}}};
    auto report = evaluate(lists, gt);
    CHECK(report.map_at_100 == doctest::Approx(5.0 / 6.0).epsilon(1e-9));
    CHECK(report.p_at_10 == doctest::Approx(0.2).epsilon(1e-9));
    CHECK(report.mean_pos == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(report.evaluated == 1);
    CHECK(report.skipped == 0);
    REQUIRE(report.per_query.size() == 1);
    CHECK(report.per_query[0].first_pos == 1);
}

TEST_CASE("evaluate all-miss query") {
    std::vector<std::string> items;
    for (int i = 0; i < 100; ++i) items.push_back("x" + std::to_string(i));
    std::vector<RankedList> lists{{"q", items, 100}};
    GroundTruth gt{{"q", {"r1"}}};
    auto report = evaluate(lists, gt);
    CHECK(report.map_at_100 == 0.0);
    CHECK(report.p_at_10 == 0.0);
    CHECK(report.mean_pos == doctest::Approx(101.0).epsilon(1e-12));
}

TEST_CASE("empty relevant sets drop out of every mean") {
    std::vector<RankedList> lists{{"good", {"r1"}, 100}, {"noisy", {"x1"}, 100}};
    GroundTruth gt{{"good", {"r1"}}, {"noisy", {}}};
    auto report = evaluate(lists, gt);
    CHECK(report.evaluated == 1);
    CHECK(report.skipped == 1);
    CHECK(report.map_at_100 == 1.0);
    CHECK(report.per_query.size() == 1);
    CHECK(report.per_query[0].query_id == "good");
}

TEST_CASE("evaluate validates queries") {
    std::vector<RankedList> dup{{"q", {"a"}, 100}, {"q", {"b"}, 100}};
    GroundTruth gt{{"q", {"a"}}};
    CHECK_THROWS_WITH_AS(evaluate(dup, gt), doctest::Contains("duplicate"), std::runtime_error);

    std::vector<RankedList> missing{{"other", {"a"}, 100}};
    CHECK_THROWS_WITH_AS(evaluate(missing, gt), doctest::Contains("ground truth"),
                         std::runtime_error);

    std::vector<RankedList> only_empty{{"e", {"a"}, 100}};
    GroundTruth empties{{"e", {}}};
    CHECK_THROWS_WITH_AS(evaluate(only_empty, empties), doctest::Contains("no query has"),
                         std::runtime_error);
}

TEST_CASE("MeanPos is 101 exactly when AP is zero") {
    Rng rng(606);
    for (int trial = 0; trial < 60; ++trial) {
        auto items = random_items(rng, 2, 20, 12);
        GroundTruth gt{{"q", {"r0", "r1"}}};
        auto report = evaluate({{"q", items, 100}}, gt);
        const auto& qm = report.per_query.at(0);
        CHECK((qm.first_pos == 101) == (qm.ap_at_100 == 0.0));
    }
}

TEST_CASE("P@10 counts misses beyond a short list") {
    // 3-item list, 2 relevant in top 10 → 0.2 despite only 3 candidates.
    std::vector<RankedList> lists{{"q", {"r1", "r2", "x"}, 100}};
    GroundTruth gt{{"q", {"r1", "r2", "r3"}}};
    auto report = evaluate(lists, gt);
    CHECK(report.p_at_10 == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("ground truth csv round-trips") {
    GroundTruth gt{{"q1", {"a", "b"}}, {"q2", {}}};
    auto csv = ground_truth_csv(gt);
    CHECK(csv.substr(0, 22) == "query_id,relevant_ids\n");
    auto back = parse_ground_truth_csv(csv);
    CHECK(back.size() == 2);
    CHECK(back.at("q1") == std::unordered_set<std::string>{"a", "b"});
    CHECK(back.at("q2").empty());

    CHECK_THROWS_AS(parse_ground_truth_csv("bad,header\n"), std::runtime_error);
    CHECK_THROWS_AS(parse_ground_truth_csv("query_id,relevant_ids\nq,a\nq,b\n"),
                    std::runtime_error);
}

TEST_CASE("report tsv lists the three metrics and the counts") {
    std::vector<RankedList> lists{{"q", {"r1"}, 100}};
    GroundTruth gt{{"q", {"r1"}}};
    auto report = evaluate(lists, gt);
    auto tsv = report_tsv(report);
    CHECK(tsv.find("mAP@100\t1\n") != std::string::npos);
    CHECK(tsv.find("P@10\t0.1\n") != std::string::npos);
    CHECK(tsv.find("MeanPos\t1\n") != std::string::npos);
    CHECK(tsv.find("evaluated\t1\n") != std::string::npos);
    CHECK(tsv.find("skipped\t0\n") != std::string::npos);
    auto summary = report_summary(report);
    CHECK(summary.find("mAP@100") != std::string::npos);
}
