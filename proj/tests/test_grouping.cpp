#include <doctest.h>

#include <random>
#include <set>

#include "hts/errors.hpp"
#include "hts/grouping.hpp"
#include "test_support.hpp"

using namespace hts;

namespace {

AttributeSchema two_by_two() { return AttributeSchema({{"g1", {"A", "B"}}, {"g2", {"X", "Y"}}}); }

SeriesKey key(const AttributeSchema& schema, std::map<std::string, std::string> by_name) {
    return SeriesKey::from_names(schema, by_name);
}

std::set<std::string> labels(const GroupStructure& g) {
    std::set<std::string> out;
    for (const auto& n : g.nodes) out.insert(n.label(g.schema));
    return out;
}

}  // namespace

TEST_CASE("2x2 grouped structure has nine nodes") {
    const auto schema = two_by_two();
    const auto g = build_structure(schema, {{"g1"}, {"g2"}, {"g1", "g2"}}, test::all_bottoms(schema));
    REQUIRE(g.nodes.size() == 9);
    CHECK(g.bottom.size() == 4);
    CHECK(g.nodes.front().is_root());
    CHECK(labels(g) == std::set<std::string>{"total", "g1=A", "g1=B", "g2=X", "g2=Y", "g1=A/g2=X", "g1=A/g2=Y",
                                             "g1=B/g2=X", "g1=B/g2=Y"});
    for (std::size_t i = 0; i < g.bottom.size(); ++i) CHECK(g.nodes[g.bottom_offset() + i] == g.bottom[i]);
}

TEST_CASE("two-child hierarchy") {
    const AttributeSchema schema({{"brand", {"1", "2"}}});
    const auto g = build_structure(schema, {{"brand"}}, test::all_bottoms(schema));
    CHECK(g.nodes.size() == 3);
    const auto S = build_summing_matrix(g);
    Eigen::MatrixXd expected(3, 2);
    expected << 1, 1, 1, 0, 0, 1;
    CHECK(S.entries == expected);
}

TEST_CASE("unobserved combinations are not materialised") {
    const auto schema = two_by_two();
    auto bottoms = test::all_bottoms(schema);
    std::erase(bottoms, key(schema, {{"g1", "B"}, {"g2", "Y"}}));
    const auto g = build_structure(schema, {{"g1"}, {"g2"}}, bottoms);
    CHECK(g.nodes.size() == 8);
    CHECK_FALSE(g.find(key(schema, {{"g1", "B"}, {"g2", "Y"}})));
    CHECK(g.find(key(schema, {{"g2", "Y"}})));
}

TEST_CASE("summing matrix rows cover exactly the matching bottoms") {
    const auto schema = two_by_two();
    const auto g = build_structure(schema, {{"g1"}, {"g2"}}, test::all_bottoms(schema));
    const auto S = build_summing_matrix(g);
    REQUIRE(S.entries.rows() == 9);
    REQUIRE(S.entries.cols() == 4);

    const auto a = S.row_index.at(key(schema, {{"g1", "A"}}));
    for (const auto& [bottom, col] : S.col_index) {
        const bool expected = bottom.bindings().at(0) == "A";
        CHECK(S.entries(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(col)) == (expected ? 1.0 : 0.0));
    }
    // Independent oracle: a node covers a bottom iff every binding agrees.
    for (const auto& [node, row] : S.row_index)
        for (const auto& [bottom, col] : S.col_index) {
            bool match = true;
            for (const auto& [attr, value] : node.bindings()) match = match && bottom.bindings().at(attr) == value;
            CHECK(S.entries(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) == (match ? 1.0 : 0.0));
        }
    CHECK(S.entries.bottomRows(4) == Eigen::MatrixXd::Identity(4, 4));
}

TEST_CASE("node count equals the product formula on random schemas") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> attrs_d(1, 4), values_d(2, 4);
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<Attribute> attrs;
        const int na = attrs_d(rng);
        for (int a = 0; a < na; ++a) {
            Attribute at{"a" + std::to_string(a), {}};
            for (int v = 0, nv = values_d(rng); v < nv; ++v) at.values.push_back("v" + std::to_string(v));
            attrs.push_back(at);
        }
        const AttributeSchema schema(attrs);
        std::vector<std::vector<std::string>> levels;
        std::size_t expected = 1;
        for (int a = 0; a < na; ++a) {
            levels.push_back({attrs[static_cast<std::size_t>(a)].name});
            expected += attrs[static_cast<std::size_t>(a)].values.size();
        }
        if (na > 1) {
            std::size_t prod = 1;
            std::vector<std::string> all;
            for (const auto& at : attrs) {
                prod *= at.values.size();
                all.push_back(at.name);
            }
            levels.push_back(all);
            expected += prod;
        }
        const auto g = build_structure(schema, levels, test::all_bottoms(schema));
        CHECK(g.nodes.size() == expected);
    }
}

TEST_CASE("key order does not create duplicate nodes") {
    const auto schema = two_by_two();
    const auto g1 = build_structure(schema, {{"g1", "g2"}}, test::all_bottoms(schema));
    const auto g2 = build_structure(schema, {{"g2", "g1"}}, test::all_bottoms(schema));
    CHECK(g1.nodes == g2.nodes);
    CHECK(g1.nodes.size() == 5);
    CHECK(key(schema, {{"g1", "A"}, {"g2", "X"}}) == key(schema, {{"g2", "X"}, {"g1", "A"}}));
}

TEST_CASE("aggregate_records single record and summing") {
    const auto schema = two_by_two();
    const auto g = build_structure(schema, {{"g1"}, {"g2"}}, test::all_bottoms(schema));
    const auto S = build_summing_matrix(g);
    const auto ax = key(schema, {{"g1", "A"}, {"g2", "X"}});
    auto series = aggregate_records({{2, ax, 5.0}}, g, S, 4, 1);
    const std::vector<double> expected{0, 0, 5, 0};
    for (const auto& k : {SeriesKey{}, key(schema, {{"g1", "A"}}), key(schema, {{"g2", "X"}}), ax})
        CHECK(series[*g.find(k)].data() == expected);
    CHECK(series[*g.find(key(schema, {{"g1", "B"}}))].data() == std::vector<double>(4, 0.0));

    series = aggregate_records({{1, ax, 2.0}, {1, ax, 3.5}}, g, S, 4, 1);
    CHECK(series[*g.find(ax)][1] == 5.5);
}

TEST_CASE("aggregate_records matches brute-force filtering") {
    const AttributeSchema schema({{"c", {"r", "g", "b"}}, {"s", {"S", "M"}}, {"t", {"u", "v"}}});
    const auto g = build_structure(schema, {{"c"}, {"s"}, {"t"}, {"c", "s"}}, test::all_bottoms(schema));
    const auto S = build_summing_matrix(g);
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<std::size_t> pick(0, g.bottom.size() - 1);
    std::uniform_int_distribution<int> week(0, 19), qty(0, 50);
    std::vector<Record> records;
    for (int i = 0; i < 200; ++i) records.push_back({week(rng), g.bottom[pick(rng)], static_cast<double>(qty(rng))});

    const auto series = aggregate_records(records, g, S, 20, 4);
    for (std::size_t n = 0; n < g.nodes.size(); ++n) {
        std::vector<double> brute(20, 0.0);
        for (const auto& r : records) {
            bool match = true;
            for (const auto& [attr, value] : g.nodes[n].bindings()) match = match && r.key.bindings().at(attr) == value;
            if (match) brute[static_cast<std::size_t>(r.week)] += r.quantity;
        }
        CHECK(series[n].data() == brute);
        CHECK(series[n].period() == 4);
    }
}

TEST_CASE("schema and key errors") {
    using Attrs = std::vector<Attribute>;
    CHECK(test::error_code([] { AttributeSchema(Attrs{Attribute{"a", {}}}); }) == "InvalidSchema");
    CHECK(test::error_code([] { AttributeSchema(Attrs{Attribute{"a", {"x"}}, Attribute{"a", {"y"}}}); }) == "InvalidSchema");
    CHECK(test::error_code([] { AttributeSchema(Attrs{Attribute{"a", {"x", "x"}}}); }) == "InvalidSchema");

    const auto schema = two_by_two();
    CHECK(test::error_code([&] { (void)schema.index_of("nope"); }) == "UnknownAttribute");
    CHECK(test::error_code([&] { (void)key(schema, {{"g1", "Z"}}); }) == "KeyOutsideSchema");
    CHECK(test::error_code([&] { (void)build_structure(schema, {{"g3"}}, test::all_bottoms(schema)); }) == "UnknownAttribute");
    CHECK(test::error_code([&] { (void)build_structure(schema, {{"g1"}}, {}); }) == "EmptyBottom");
    CHECK(test::error_code([&] { (void)build_structure(schema, {{"g1"}}, {key(schema, {{"g1", "A"}})}); }) ==
          "KeyOutsideSchema");

    const auto g = build_structure(schema, {{"g1"}}, test::all_bottoms(schema));
    const auto S = build_summing_matrix(g);
    const auto ax = key(schema, {{"g1", "A"}, {"g2", "X"}});
    CHECK(test::error_code([&] { (void)aggregate_records({{4, ax, 1.0}}, g, S, 4, 1); }) == "WeekOutsideCalendar");
    CHECK(test::error_code([&] { (void)aggregate_records({{0, ax, NAN}}, g, S, 4, 1); }) == "NonFiniteQuantity");
}

TEST_CASE("labels round-trip and keep canonical order") {
    const auto schema = two_by_two();
    const auto g = build_structure(schema, {{"g2"}, {"g1"}}, test::all_bottoms(schema));
    std::vector<SeriesKey> reparsed;
    for (const auto& n : g.nodes) reparsed.push_back(SeriesKey::parse_label(schema, n.label(schema)));
    CHECK(reparsed == g.nodes);
    CHECK(SeriesKey{}.label(schema) == "total");
    CHECK(key(schema, {{"g2", "Y"}, {"g1", "B"}}).label(schema) == "g1=B/g2=Y");

    std::vector<SeriesKey> bottoms;
    for (const auto& n : reparsed)
        if (n.level() == 2) bottoms.push_back(n);
    const auto rebuilt = build_structure(schema, {{"g2"}, {"g1"}}, bottoms);
    CHECK(rebuilt.nodes == g.nodes);
}
