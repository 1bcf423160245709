#pragma once

#include <chrono>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "chanest/rng.hpp"
#include "chanest/scenario.hpp"

namespace chanest {

struct ExpertDescriptor {
    std::string id;
    std::set<ScenarioClass> coverage;
    std::string checkpoint_path;
};

class ExpertRegistry {
public:
    void add(ExpertDescriptor d) {
        if (d.coverage.empty())
            throw std::invalid_argument("registry: expert '" + d.id + "' has empty coverage");
        for (const auto& e : experts_)
            if (e.id == d.id) throw std::invalid_argument("registry: duplicate id '" + d.id + "'");
        experts_.push_back(std::move(d));
    }
    const std::vector<ExpertDescriptor>& experts() const { return experts_; }
    bool empty() const { return experts_.empty(); }
    const ExpertDescriptor* find(const std::string& id) const {
        for (const auto& e : experts_)
            if (e.id == id) return &e;
        return nullptr;
    }

    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& e : experts_) {
            nlohmann::json j;
            j["id"] = e.id;
            j["checkpoint"] = e.checkpoint_path;
            for (const auto& sc : e.coverage) j["coverage"].push_back(scenario_key(sc));
            arr.push_back(j);
        }
        return arr;
    }
    static ExpertRegistry from_json(const nlohmann::json& arr) {
        ExpertRegistry r;
        for (const auto& j : arr) {
            ExpertDescriptor d;
            d.id = j.at("id").get<std::string>();
            d.checkpoint_path = j.value("checkpoint", "");
            for (const auto& k : j.at("coverage"))
                d.coverage.insert(parse_scenario_key(k.get<std::string>()));
            r.add(std::move(d));
        }
        return r;
    }
    void save(const std::string& path) const {
        std::ofstream f(path);
        if (!f) throw std::runtime_error("cannot write registry " + path);
        f << to_json().dump(2) << '\n';
    }
    static ExpertRegistry load(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("cannot read registry " + path);
        return from_json(nlohmann::json::parse(f));
    }

private:
    std::vector<ExpertDescriptor> experts_;
};

// Default desk-scale registry: four experts split by environment and band,
// each covering all mobility classes.
inline ExpertRegistry make_default_registry(const std::string& checkpoint_dir = "") {
    ExpertRegistry r;
    for (Environment env : {Environment::LOS, Environment::NLOS})
        for (CarrierBand band : {CarrierBand::LOW, CarrierBand::HIGH}) {
            ExpertDescriptor d;
            d.id = std::string(env == Environment::LOS ? "los" : "nlos") +
                   (band == CarrierBand::LOW ? "-low" : "-high");
            for (Mobility m : {Mobility::STATIC, Mobility::URBAN, Mobility::HIGHWAY})
                d.coverage.insert({env, band, m});
            if (!checkpoint_dir.empty()) d.checkpoint_path = checkpoint_dir + "/" + d.id + ".est";
            r.add(std::move(d));
        }
    return r;
}

enum class UserEnvironment { LOS, NLOS, UNKNOWN };

inline const char* to_string(UserEnvironment e) {
    switch (e) {
        case UserEnvironment::LOS: return "LOS";
        case UserEnvironment::NLOS: return "NLOS";
        default: return "UNKNOWN";
    }
}

struct UserState {
    UserEnvironment environment = UserEnvironment::UNKNOWN;
    double carrier_ghz = 2.6;  // > 0
    double speed_kmh = 0.0;    // >= 0
};

enum class GateSource { RULE, LLM, FALLBACK, RANDOM };

inline const char* to_string(GateSource s) {
    switch (s) {
        case GateSource::RULE: return "RULE";
        case GateSource::LLM: return "LLM";
        case GateSource::FALLBACK: return "FALLBACK";
        default: return "RANDOM";
    }
}

struct GateDecision {
    std::string expert_id;
    GateSource source = GateSource::RULE;
    std::string rationale;
    double latency_ms = 0.0;
};

namespace detail {

inline CarrierBand band_of(double carrier_ghz) {
    return carrier_ghz >= 6.0 ? CarrierBand::HIGH : CarrierBand::LOW;
}

inline Mobility nearest_mobility(double speed_kmh) {
    Mobility best = Mobility::STATIC;
    double best_d = std::abs(speed_kmh - chanest::speed_kmh(Mobility::STATIC));
    for (Mobility m : {Mobility::URBAN, Mobility::HIGHWAY}) {
        const double d = std::abs(speed_kmh - chanest::speed_kmh(m));
        if (d < best_d) {
            best_d = d;
            best = m;
        }
    }
    return best;
}

}  // namespace detail

// Deterministic scoring: 4 x environment match + 2 x band match + 1 x
// mobility match; UNKNOWN environment credits every expert at half the
// environment weight. Ties break to the lexicographically smallest id.
inline GateDecision rule_gate(const UserState& state, const ExpertRegistry& registry) {
    if (registry.empty()) throw std::invalid_argument("rule_gate: empty registry");
    if (state.carrier_ghz <= 0.0) throw std::invalid_argument("rule_gate: carrier_ghz must be > 0");
    const CarrierBand band = detail::band_of(state.carrier_ghz);
    const Mobility mob = detail::nearest_mobility(state.speed_kmh);
    const ExpertDescriptor* best = nullptr;
    double best_score = -1.0;
    for (const auto& e : registry.experts()) {
        bool env_m = false, band_m = false, mob_m = false;
        for (const auto& sc : e.coverage) {
            if (state.environment != UserEnvironment::UNKNOWN &&
                sc.environment == (state.environment == UserEnvironment::LOS ? Environment::LOS
                                                                             : Environment::NLOS))
                env_m = true;
            if (sc.carrier_band == band) band_m = true;
            if (sc.mobility == mob) mob_m = true;
        }
        double score = (state.environment == UserEnvironment::UNKNOWN ? 2.0 : 4.0 * env_m) +
                       2.0 * band_m + 1.0 * mob_m;
        if (score > best_score || (score == best_score && best && e.id < best->id)) {
            best_score = score;
            best = &e;
        }
    }
    std::ostringstream why;
    why << "rule score " << best_score << " for state env=" << to_string(state.environment)
        << " carrier=" << state.carrier_ghz << "GHz speed=" << state.speed_kmh << "km/h";
    return {best->id, GateSource::RULE, why.str(), 0.0};
}

inline std::string build_prompt(const UserState& state, const ExpertRegistry& registry) {
    std::ostringstream p;
    p << "You route wireless channel estimation requests to expert models.\n"
      << "Available experts:\n";
    for (const auto& e : registry.experts()) {
        p << "- " << e.id << " (covers:";
        for (const auto& sc : e.coverage) p << ' ' << scenario_key(sc);
        p << ")\n";
    }
    p << "User state: environment=" << to_string(state.environment)
      << ", carrier=" << state.carrier_ghz << " GHz, speed=" << state.speed_kmh << " km/h\n"
      << "Answer with exactly one line of the form `expert: <id>`.\n";
    return p.str();
}

enum class ParseError { UNKNOWN_ID, MALFORMED };

// Accepts the first line of the form `expert: <id>` (case-insensitive tag,
// surrounding whitespace ignored). A well-formed line with an unregistered
// id is UNKNOWN_ID; no such line at all is MALFORMED.
inline std::variant<std::string, ParseError> parse_reply(const std::string& text,
                                                         const ExpertRegistry& registry) {
    std::istringstream in(text);
    std::string line;
    auto lower = [](std::string s) {
        for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return s;
    };
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (lower(t.substr(0, 7)) != "expert:") continue;
        std::string id = trim(t.substr(7));
        if (id.empty() || id.find_first_of(" \t") != std::string::npos) continue;
        id = lower(id);
        if (registry.find(id)) return id;
        return ParseError::UNKNOWN_ID;
    }
    return ParseError::MALFORMED;
}

// Text-completion client contract: {prompt, max_tokens, temperature: 0} in,
// {text} out; failures are reported, never thrown.
struct CompletionResult {
    bool ok = false;
    std::string text;
    std::string error;
};

class CompletionClient {
public:
    virtual ~CompletionClient() = default;
    virtual CompletionResult complete(const std::string& prompt, int max_tokens,
                                      int timeout_ms) = 0;
};

// Deterministic stand-in for the external LLM: extracts the state line and
// the advertised expert ids from the prompt and routes by token match. Used
// whenever no endpoint is configured.
class MockCompletionClient : public CompletionClient {
public:
    CompletionResult complete(const std::string& prompt, int, int) override {
        std::istringstream in(prompt);
        std::string line, state_line;
        std::vector<std::string> ids;
        while (std::getline(in, line)) {
            if (line.rfind("- ", 0) == 0) {
                const auto sp = line.find(' ', 2);
                ids.push_back(line.substr(2, sp - 2));
            } else if (line.rfind("User state:", 0) == 0) {
                state_line = line;
            }
        }
        if (ids.empty() || state_line.empty()) return {false, "", "unrecognized prompt"};
        const bool nlos = state_line.find("environment=NLOS") != std::string::npos;
        const bool unknown = state_line.find("environment=UNKNOWN") != std::string::npos;
        double ghz = 2.6;
        const auto cp = state_line.find("carrier=");
        if (cp != std::string::npos) ghz = std::atof(state_line.c_str() + cp + 8);
        const bool high = ghz >= 6.0;
        std::string want_env = unknown ? "" : (nlos ? "nlos" : "los");
        std::string want_band = high ? "high" : "low";
        const std::string* best = nullptr;
        int best_score = -1;
        for (const auto& id : ids) {
            int sc = 0;
            if (!want_env.empty() && id.rfind(want_env + "-", 0) == 0) sc += 2;
            if (id.find(want_band) != std::string::npos) sc += 1;
            if (sc > best_score) {
                best_score = sc;
                best = &id;
            }
        }
        return {true, "expert: " + *best + "\n", ""};
    }
};

// Scripted mock for tests: replays a fixed list of canned results.
class ScriptedCompletionClient : public CompletionClient {
public:
    explicit ScriptedCompletionClient(std::vector<CompletionResult> script)
        : script_(std::move(script)) {}
    CompletionResult complete(const std::string&, int, int) override {
        if (next_ >= script_.size()) return {false, "", "script exhausted"};
        return script_[next_++];
    }

private:
    std::vector<CompletionResult> script_;
    std::size_t next_ = 0;
};

// build_prompt -> client -> parse_reply; every client failure (transport
// error, timeout, malformed or unregistered reply) falls back to rule_gate.
inline GateDecision llm_gate(const UserState& state, const ExpertRegistry& registry,
                             CompletionClient& client, int timeout_ms = 2000) {
    if (registry.empty()) throw std::invalid_argument("llm_gate: empty registry");
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&t0] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    };
    const std::string prompt = build_prompt(state, registry);
    CompletionResult r = client.complete(prompt, 16, timeout_ms);
    if (r.ok) {
        auto parsed = parse_reply(r.text, registry);
        if (std::holds_alternative<std::string>(parsed))
            return {std::get<std::string>(parsed), GateSource::LLM, r.text, elapsed()};
        GateDecision d = rule_gate(state, registry);
        d.source = GateSource::FALLBACK;
        d.rationale = std::get<ParseError>(parsed) == ParseError::UNKNOWN_ID
                          ? "unknown id in reply: " + r.text
                          : "malformed reply: " + r.text;
        d.latency_ms = elapsed();
        return d;
    }
    GateDecision d = rule_gate(state, registry);
    d.source = GateSource::FALLBACK;
    d.rationale = r.error.empty() ? "client error" : r.error;
    d.latency_ms = elapsed();
    return d;
}

inline GateDecision random_gate(const UserState& state, const ExpertRegistry& registry,
                                std::uint64_t seed) {
    if (registry.empty()) throw std::invalid_argument("random_gate: empty registry");
    (void)state;
    Rng rng(derive_seed(seed, "random-gate"));
    const auto& es = registry.experts();
    const auto& e = es[rng.uniform_index(es.size())];
    return {e.id, GateSource::RANDOM, "uniform random selection", 0.0};
}

}  // namespace chanest
