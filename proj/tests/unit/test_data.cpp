#include <doctest.h>

#include <random>
#include <sstream>

#include "lcirt/data.hpp"
#include "lcirt/error.hpp"

using namespace lcirt;

TEST_CASE("aggregate keeps first-occurrence order and counts") {
    const auto raw = RawResponses::from_rows({{0, 1}, {1, 1}, {0, 1}, {2, 0}, {1, 1}, {0, 1}});
    const auto data = aggregate(raw);
    REQUIRE(data.patterns() == 3);
    CHECK(data.code(0, 0) == 0);
    CHECK(data.code(0, 1) == 1);
    CHECK(data.code(1, 0) == 1);
    CHECK(data.code(2, 0) == 2);
    CHECK(data.freq == std::vector<double>{3, 2, 1});
    CHECK(data.labels == std::vector<std::size_t>{0, 1, 0, 2, 1, 0});
    CHECK(data.cats == std::vector<int>{3, 2});
    CHECK(data.units() == doctest::Approx(6.0));
    CHECK_FALSE(data.has_missing());
}

TEST_CASE("single row and all-identical rows") {
    const auto one = aggregate(RawResponses::from_rows({{1, 0, 2}}));
    CHECK(one.patterns() == 1);
    CHECK(one.freq == std::vector<double>{1});

    const auto same = aggregate(RawResponses::from_rows({{1, 1}, {1, 1}, {1, 1}, {1, 1}}));
    CHECK(same.patterns() == 1);
    CHECK(same.freq == std::vector<double>{4});
}

TEST_CASE("missing cells are part of the pattern") {
    const auto raw = RawResponses::from_rows({{0, 999}, {0, 1}, {0, 999}, {999, 1}});
    const auto data = aggregate(raw);
    REQUIRE(data.patterns() == 3);
    CHECK_FALSE(data.observed(0, 1));
    CHECK(data.code(0, 1) == -1);
    CHECK(data.observed(1, 1));
    CHECK(data.freq == std::vector<double>{2, 1, 1});
    CHECK(data.has_missing());
    CHECK(data.cats == std::vector<int>{1, 2});
}

TEST_CASE("expand inverts aggregate") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> cell(0, 3);
    std::bernoulli_distribution miss(0.1);
    for (int rep = 0; rep < 20; ++rep) {
        RawResponses raw(50, 5);
        for (std::size_t i = 0; i < 50; ++i)
            for (std::size_t j = 0; j < 5; ++j) {
                if (miss(rng))
                    raw.set_missing(i, j);
                else
                    raw.set(i, j, cell(rng) % 2);
            }
        const auto data = aggregate(raw, std::vector<int>(5, 2));
        CHECK(expand(data) == raw);
        double total = 0;
        for (double f : data.freq) total += f;
        CHECK(total == doctest::Approx(50.0));
    }
}

TEST_CASE("category counts are validated") {
    const auto raw = RawResponses::from_rows({{0, 3}, {1, 0}});
    CHECK(infer_categories(raw) == std::vector<int>{2, 4});
    CHECK_THROWS_AS(aggregate(raw, std::vector<int>{2, 3}), ValidationError);
    CHECK_THROWS_AS(aggregate(raw, std::vector<int>{2}), ValidationError);
    CHECK_THROWS_AS(aggregate(RawResponses::from_rows({{0, -1}})), ValidationError);
    CHECK_THROWS_AS(aggregate(RawResponses::from_rows({{0, 999}, {1, 999}})), ValidationError);
}

TEST_CASE("out-of-range code names row and column") {
    const auto raw = RawResponses::from_rows({{0, 1}, {1, 7}});
    try {
        aggregate(raw, std::vector<int>{2, 2});
        FAIL("expected a ValidationError");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("row 2") != std::string::npos);
        CHECK(msg.find("column 2") != std::string::npos);
    }
}

TEST_CASE("CSV parsing") {
    SUBCASE("header, blanks and NA") {
        std::istringstream in("a,b,c\n0,1,2\n1,,0\n\n2,NA,999\n");
        const auto raw = parse_csv(in);
        REQUIRE(raw.units() == 3);
        REQUIRE(raw.items() == 3);
        CHECK(raw.code(0, 2) == 2);
        CHECK(raw.missing(1, 1));
        CHECK(raw.missing(2, 1));
        CHECK(raw.missing(2, 2));
        CHECK_FALSE(raw.missing(2, 0));
    }
    SUBCASE("no header") {
        std::istringstream in("0,1\n1,0\n");
        CHECK(parse_csv(in).units() == 2);
    }
    SUBCASE("custom missing code") {
        std::istringstream in("0,-9\n1,0\n");
        const auto raw = parse_csv(in, -9);
        CHECK(raw.missing(0, 1));
    }
    SUBCASE("ragged rows") {
        std::istringstream in("0,1\n1\n");
        CHECK_THROWS_AS(parse_csv(in), ValidationError);
    }
    SUBCASE("non-integer cell") {
        std::istringstream in("0,1\n1,x\n");
        CHECK_THROWS_AS(parse_csv(in), ValidationError);
    }
    SUBCASE("empty input") {
        std::istringstream in("X1,X2\n");
        CHECK_THROWS_AS(parse_csv(in), ValidationError);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(read_csv("/nonexistent/file.csv"), IoError); }
}

TEST_CASE("to_csv round trip") {
    RawResponses raw(3, 2);
    raw.set(0, 0, 1);
    raw.set(0, 1, 0);
    raw.set_missing(1, 0);
    raw.set(1, 1, 2);
    raw.set(2, 0, 0);
    raw.set(2, 1, 1);
    std::istringstream in(to_csv(raw));
    CHECK(parse_csv(in) == raw);
}

TEST_CASE("duplicate rows collapse with 0-based labels") {
    const auto data = aggregate(RawResponses::from_rows({{0, 1}, {0, 1}, {1, 1}}));
    CHECK(data.codes == std::vector<int>{0, 1, 1, 1});
    CHECK(data.freq == std::vector<double>{2, 1});
    CHECK(data.labels == std::vector<std::size_t>{0, 0, 1});
}

TEST_CASE("unobserved middle category still counts") {
    CHECK(infer_categories(RawResponses::from_rows({{0}, {2}, {0}})) == std::vector<int>{3});
    CHECK(infer_categories(RawResponses::from_rows({{0}, {1}})) == std::vector<int>{2});
    CHECK(infer_categories(RawResponses::from_rows({{0}, {1}, {2}, {3}})) == std::vector<int>{4});
}
