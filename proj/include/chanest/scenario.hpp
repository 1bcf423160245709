#pragma once

#include <array>
#include <stdexcept>
#include <string>

namespace chanest {

enum class Environment { LOS, NLOS };
enum class CarrierBand { LOW, HIGH };      // 2.6 GHz / 28 GHz
enum class Mobility { STATIC, URBAN, HIGHWAY };  // 0 / 30 / 120 km/h

// One point of the 12-class scenario grid. Serializes to the stable key
// "<env>-<band>-<mobility>", e.g. "nlos-high-urban".
struct ScenarioClass {
    Environment environment = Environment::LOS;
    CarrierBand carrier_band = CarrierBand::LOW;
    Mobility mobility = Mobility::STATIC;

    bool operator==(const ScenarioClass&) const = default;
    auto operator<=>(const ScenarioClass&) const = default;
};

inline constexpr int kNumScenarioClasses = 12;

inline const char* to_string(Environment e) { return e == Environment::LOS ? "los" : "nlos"; }
inline const char* to_string(CarrierBand b) { return b == CarrierBand::LOW ? "low" : "high"; }
inline const char* to_string(Mobility m) {
    switch (m) {
        case Mobility::STATIC: return "static";
        case Mobility::URBAN: return "urban";
        default: return "highway";
    }
}

inline double carrier_ghz(CarrierBand b) { return b == CarrierBand::LOW ? 2.6 : 28.0; }
inline double speed_kmh(Mobility m) {
    switch (m) {
        case Mobility::STATIC: return 0.0;
        case Mobility::URBAN: return 30.0;
        default: return 120.0;
    }
}

inline std::string scenario_key(const ScenarioClass& sc) {
    return std::string(to_string(sc.environment)) + "-" + to_string(sc.carrier_band) + "-" +
           to_string(sc.mobility);
}

inline ScenarioClass parse_scenario_key(const std::string& key) {
    auto p1 = key.find('-');
    auto p2 = key.find('-', p1 == std::string::npos ? p1 : p1 + 1);
    if (p1 == std::string::npos || p2 == std::string::npos)
        throw std::invalid_argument("bad scenario key: " + key);
    std::string env = key.substr(0, p1), band = key.substr(p1 + 1, p2 - p1 - 1),
                mob = key.substr(p2 + 1);
    ScenarioClass sc;
    if (env == "los") sc.environment = Environment::LOS;
    else if (env == "nlos") sc.environment = Environment::NLOS;
    else throw std::invalid_argument("bad environment: " + env);
    if (band == "low") sc.carrier_band = CarrierBand::LOW;
    else if (band == "high") sc.carrier_band = CarrierBand::HIGH;
    else throw std::invalid_argument("bad carrier band: " + band);
    if (mob == "static") sc.mobility = Mobility::STATIC;
    else if (mob == "urban") sc.mobility = Mobility::URBAN;
    else if (mob == "highway") sc.mobility = Mobility::HIGHWAY;
    else throw std::invalid_argument("bad mobility: " + mob);
    return sc;
}

// Canonical enumeration order used for deterministic splits and manifests.
inline std::array<ScenarioClass, kNumScenarioClasses> all_scenario_classes() {
    std::array<ScenarioClass, kNumScenarioClasses> out;
    int i = 0;
    for (Environment e : {Environment::LOS, Environment::NLOS})
        for (CarrierBand b : {CarrierBand::LOW, CarrierBand::HIGH})
            for (Mobility m : {Mobility::STATIC, Mobility::URBAN, Mobility::HIGHWAY})
                out[i++] = {e, b, m};
    return out;
}

inline int scenario_index(const ScenarioClass& sc) {
    int e = sc.environment == Environment::LOS ? 0 : 1;
    int b = sc.carrier_band == CarrierBand::LOW ? 0 : 1;
    int m = sc.mobility == Mobility::STATIC ? 0 : (sc.mobility == Mobility::URBAN ? 1 : 2);
    return e * 6 + b * 3 + m;
}

}  // namespace chanest
