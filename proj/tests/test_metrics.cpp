// Confusion matrices and macro-averaged precision/recall.
#include <doctest.h>

#include <stdexcept>
#include <string>
#include <vector>

#include "svcfp/metrics.hpp"

using namespace svcfp;

namespace {

std::vector<std::string> repeat(std::initializer_list<std::pair<const char*, int>> runs) {
    std::vector<std::string> out;
    for (auto& [label, n] : runs) {
        out.insert(out.end(), n, label);
    }
    return out;
}

} // namespace

TEST_CASE("confusion counts land in true-row, predicted-column cells") {
    // a: 8 right, 2 called b; b: 4 called a, 6 right.
    auto truth = repeat({{"a", 10}, {"b", 10}});
    auto pred = repeat({{"a", 8}, {"b", 2}, {"a", 4}, {"b", 6}});
    ConfusionMatrix cm = confusion(truth, pred);

    REQUIRE(cm.labels == std::vector<std::string>{"a", "b"});
    CHECK(cm.at("a", "a") == 8);
    CHECK(cm.at("a", "b") == 2);
    CHECK(cm.at("b", "a") == 4);
    CHECK(cm.at("b", "b") == 6);

    MacroMetrics m = macro_precision_recall(cm);
    CHECK(m.precision == doctest::Approx((8.0 / 12.0 + 6.0 / 8.0) / 2.0));
    CHECK(m.recall == doctest::Approx((0.8 + 0.6) / 2.0));
    REQUIRE(m.classes == std::vector<std::string>{"a", "b"});
    CHECK(m.per_class_precision[0] == doctest::Approx(8.0 / 12.0));
    CHECK(m.per_class_recall[1] == doctest::Approx(0.6));
}

TEST_CASE("labels sort alphabetically with UNKNOWN pinned last") {
    auto truth = repeat({{"zebra", 1}, {"UNKNOWN", 1}, {"ant", 1}});
    auto pred = repeat({{"zebra", 1}, {"UNKNOWN", 1}, {"ant", 1}});
    ConfusionMatrix cm = confusion(truth, pred);
    CHECK(cm.labels == std::vector<std::string>{"ant", "zebra", "UNKNOWN"});
}

TEST_CASE("labels only ever predicted still get a column") {
    auto truth = repeat({{"a", 3}});
    auto pred = repeat({{"a", 2}, {"b", 1}});
    ConfusionMatrix cm = confusion(truth, pred);
    REQUIRE(cm.labels == std::vector<std::string>{"a", "b"});
    CHECK(cm.at("a", "b") == 1);

    // Macro averages run over true classes only: just "a" here.
    MacroMetrics m = macro_precision_recall(cm);
    REQUIRE(m.classes == std::vector<std::string>{"a"});
    CHECK(m.precision == doctest::Approx(1.0));
    CHECK(m.recall == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("a class never predicted scores zero precision, not a hole") {
    // b exists in truth but every b window was called a.
    auto truth = repeat({{"a", 2}, {"b", 2}});
    auto pred = repeat({{"a", 2}, {"a", 2}});
    MacroMetrics m = macro_precision_recall(confusion(truth, pred));
    CHECK(m.precision == doctest::Approx((2.0 / 4.0 + 0.0) / 2.0));
    CHECK(m.recall == doctest::Approx(0.5));
}

TEST_CASE("row normalization divides by row sums and keeps zero rows") {
    auto truth = repeat({{"a", 4}, {"b", 1}});
    auto pred = repeat({{"a", 3}, {"b", 1}, {"b", 1}});
    ConfusionMatrix cm = confusion(truth, pred);
    auto norm = cm.row_normalized();
    CHECK(norm[0][0] == doctest::Approx(0.75));
    CHECK(norm[0][1] == doctest::Approx(0.25));
    CHECK(norm[1][1] == doctest::Approx(1.0));

    // A label with no true rows (prediction-only) normalizes to zeros.
    auto truth2 = repeat({{"a", 2}});
    auto pred2 = repeat({{"a", 1}, {"c", 1}});
    auto norm2 = confusion(truth2, pred2).row_normalized();
    CHECK(norm2[1][0] == 0.0);
    CHECK(norm2[1][1] == 0.0);
}

TEST_CASE("mismatched label spans are rejected") {
    std::vector<std::string> truth{"a"};
    std::vector<std::string> pred{"a", "b"};
    CHECK_THROWS_AS(confusion(truth, pred), std::invalid_argument);
}

TEST_CASE("asking for an absent label is an error, not a zero") {
    auto truth = repeat({{"a", 1}});
    auto pred = repeat({{"a", 1}});
    ConfusionMatrix cm = confusion(truth, pred);
    CHECK(cm.at("a", "a") == 1);
    CHECK_THROWS_AS(cm.at("a", "nope"), std::out_of_range);
    CHECK_THROWS_AS(cm.at("nope", "a"), std::out_of_range);
}
