#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "chanest/scenario.hpp"

using namespace chanest;

TEST_CASE("scenario keys round-trip for all classes") {
    std::set<std::string> keys;
    for (const auto& sc : all_scenario_classes()) {
        const std::string k = scenario_key(sc);
        keys.insert(k);
        REQUIRE(parse_scenario_key(k) == sc);
    }
    REQUIRE(keys.size() == kNumScenarioClasses);
    REQUIRE(kNumScenarioClasses == 12);
}

TEST_CASE("scenario_index is a bijection onto [0, 12)") {
    std::set<int> idx;
    for (const auto& sc : all_scenario_classes()) {
        const int i = scenario_index(sc);
        REQUIRE(i >= 0);
        REQUIRE(i < kNumScenarioClasses);
        idx.insert(i);
    }
    REQUIRE(idx.size() == kNumScenarioClasses);
}

TEST_CASE("band and mobility map to physical parameters") {
    REQUIRE(carrier_ghz(CarrierBand::LOW) == Catch::Approx(2.6));
    REQUIRE(carrier_ghz(CarrierBand::HIGH) == Catch::Approx(28.0));
    REQUIRE(speed_kmh(Mobility::STATIC) == Catch::Approx(0.0));
    REQUIRE(speed_kmh(Mobility::URBAN) == Catch::Approx(30.0));
    REQUIRE(speed_kmh(Mobility::HIGHWAY) == Catch::Approx(120.0));
}

TEST_CASE("parse rejects malformed keys") {
    REQUIRE_THROWS(parse_scenario_key("los"));
    REQUIRE_THROWS(parse_scenario_key("los-mid-urban"));
    REQUIRE_THROWS(parse_scenario_key(""));
}
