#include <doctest.h>

#include <sstream>

#include "qpk/config.hpp"

using namespace qpk;

TEST_SUITE("config") {

TEST_CASE("sections, comments and quoting") {
    const auto kv = KeyValueConfig::parse_string(
        "# leading comment\n"
        "top = 1\n"
        "[a]\n"
        "x = 2.5   # trailing\n"
        "name = \"with # hash\"\n"
        "flag = true\n"
        "\n"
        "[b]\n"
        "x = -3\n");
    CHECK(kv.get_double("top", 0) == 1.0);
    CHECK(kv.get_double("a.x", 0) == 2.5);
    CHECK(kv.get_string("a.name", "") == "with # hash");
    CHECK(kv.get_bool("a.flag", false));
    CHECK(kv.get_int("b.x", 0) == -3);
    CHECK(kv.get_double("b.missing", 7.0) == 7.0);
    CHECK_FALSE(kv.get("nope").has_value());
}

TEST_CASE("type errors and malformed lines") {
    const auto kv = KeyValueConfig::parse_string("[a]\nx = abc\ny = 1.5\n");
    CHECK_THROWS(kv.get_double("a.x", 0));
    CHECK_THROWS(kv.get_int("a.y", 0));
    CHECK_THROWS(kv.get_bool("a.x", false));
    CHECK_THROWS(KeyValueConfig::parse_string("[a\nx = 1\n"));
    CHECK_THROWS(KeyValueConfig::parse_string("just words\n"));
    CHECK_THROWS(KeyValueConfig::parse_string("x = 1\nx = 2\n"));
}

TEST_CASE("band lists") {
    const auto kv = KeyValueConfig::parse_string("bands = \"2.5-5, 5-10/2,10-20\"\nbad = \"5\"\n");
    const auto b = kv.get_bands("bands", {});
    REQUIRE(b.size() == 3);
    CHECK(b[0] == dsp::BandpassSpec{2.5, 5.0, 4});
    CHECK(b[1] == dsp::BandpassSpec{5.0, 10.0, 2});
    CHECK_THROWS(kv.get_bands("bad", {}));
}

TEST_CASE("unknown keys are reported") {
    auto kv = KeyValueConfig::parse_string("[a]\nx = 1\ntypo = 2\n");
    (void)kv.get_double("a.x", 0);
    CHECK_THROWS_WITH(kv.reject_unknown(), doctest::Contains("a.typo"));
    kv.set("a.typo", "3");
    (void)kv.get_double("a.typo", 0);
    CHECK_NOTHROW(kv.reject_unknown());
}

}
