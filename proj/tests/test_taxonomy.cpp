#include "doctest.h"
#include "hsc/error.hpp"
#include "hsc/taxonomy.hpp"

using namespace hsc;

namespace {

ErrorKind kind_of(const std::string& doc) {
    try {
        load_taxonomy(doc);
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error for " << doc);
    return ErrorKind::ConfigError;
}

}  // namespace

TEST_CASE("fisheries taxonomy has 6 groups and 31 species") {
    const auto t = fisheries_taxonomy();
    CHECK(t.group_count() == 6);
    CHECK(t.species_count() == 31);
    const std::size_t expected[] = {2, 2, 11, 9, 5, 2};
    for (std::size_t g = 0; g < 6; ++g) CHECK(t.group_size(g) == expected[g]);
    CHECK(t.group_name(4) == "Rockfishes");
    CHECK(t.group_of(t.species_index("SRB Rockfish")) == 4);
}

TEST_CASE("loading a document") {
    const auto t = load_taxonomy(R"({"groups":[{"name":"X","species":["x1","x2"]},{"name":"Y","species":["y1"]}]})");
    CHECK(t.group_count() == 2);
    CHECK(t.species_count() == 3);
    CHECK(t.species_index("x1") == 0);
    CHECK(t.species_index("x2") == 1);
    CHECK(t.species_index("y1") == 2);
    CHECK(t.to_global(1, 0) == 2);
    CHECK(t.to_local(1) == LocalSpecies{0, 1});

    const auto minimal = load_taxonomy(R"({"groups":[{"name":"A","species":["a"]}]})");
    CHECK(minimal.group_count() == 1);
    CHECK(minimal.species_count() == 1);
}

TEST_CASE("loading is deterministic and round-trips through to_json") {
    const auto t = fisheries_taxonomy();
    const auto again = load_taxonomy(t.to_json());
    CHECK(again == t);
    CHECK(again.hash() == t.hash());
    CHECK(load_taxonomy(t.to_json()).to_json() == t.to_json());
}

TEST_CASE("invalid documents") {
    CHECK(kind_of(R"({"groups":[]})") == ErrorKind::EmptyTaxonomy);
    CHECK(kind_of(R"({"groups":[{"name":"A","species":[]}]})") == ErrorKind::EmptyTaxonomy);
    CHECK(kind_of(R"({"groups":[{"name":"A","species":["a"]},{"name":"A","species":["b"]}]})") ==
          ErrorKind::DuplicateName);
    CHECK(kind_of(R"({"groups":[{"name":"A","species":["a"]},{"name":"B","species":["a"]}]})") ==
          ErrorKind::DuplicateName);
    CHECK(kind_of("{not json") == ErrorKind::MalformedDocument);
    CHECK(kind_of(R"({"groups":[{"name":"A"}]})") == ErrorKind::MalformedDocument);
    CHECK(kind_of(R"({"groups":[{"name":"A","species":[1]}]})") == ErrorKind::MalformedDocument);
}

TEST_CASE("global/local round trip is a bijection") {
    const auto t = fisheries_taxonomy();
    std::vector<int> seen(t.species_count(), 0);
    // Exhaustive enumeration over every (group, local) pair.
    for (std::size_t g = 0; g < t.group_count(); ++g) {
        for (std::size_t i = 0; i < t.group_size(g); ++i) {
            const std::size_t s = t.to_global(g, i);
            REQUIRE(s < t.species_count());
            ++seen[s];
            CHECK(t.to_local(s) == LocalSpecies{g, i});
        }
    }
    for (int count : seen) CHECK(count == 1);
    for (std::size_t s = 0; s < t.species_count(); ++s) {
        const auto [g, i] = t.to_local(s);
        CHECK(t.to_global(g, i) == s);
    }
}

TEST_CASE("out-of-range indices") {
    const auto t = fisheries_taxonomy();
    CHECK_THROWS_AS(t.to_global(6, 0), Error);
    CHECK_THROWS_AS(t.to_global(0, 2), Error);
    CHECK_THROWS_AS(t.to_local(31), Error);
    CHECK_THROWS_AS(t.species_index("Kraken"), Error);
}
