#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dsa/error.hpp"
#include "dsa/random.hpp"

namespace dsa {

/// Per-channel two-state transition matrix. Entry p_xy is the probability of
/// moving from state x to state y (0 = vacant, 1 = occupied).
struct TransitionMatrix {
    double p00 = 1.0;
    double p01 = 0.0;
    double p10 = 0.0;
    double p11 = 1.0;

    static TransitionMatrix from_stay(double stay_vacant, double stay_occupied) {
        return {stay_vacant, 1.0 - stay_vacant, 1.0 - stay_occupied, stay_occupied};
    }

    /// Probability that a channel currently in `from` is in `to` next slot.
    double prob(int from, int to) const {
        if (from == 0) return to == 0 ? p00 : p01;
        return to == 0 ? p10 : p11;
    }

    /// Stationary probability of the vacant state. Uniform when the chain
    /// never changes state (p01 = p10 = 0).
    double stationary_vacant() const {
        const double moving = p01 + p10;
        return moving > 0.0 ? p10 / moving : 0.5;
    }

    void validate() const {
        for (double p : {p00, p01, p10, p11}) {
            if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("transition", "entries must lie in [0, 1]");
        }
        if (std::abs(p00 + p01 - 1.0) > 1e-12 || std::abs(p10 + p11 - 1.0) > 1e-12) {
            throw ConfigError("transition", "rows must sum to 1");
        }
    }

    bool operator==(const TransitionMatrix&) const = default;
};

struct Dependent {
    int parent = 0;
    int rho = 1;  ///< +1 copies the parent, -1 mirrors it
    bool operator==(const Dependent&) const = default;
};

/// Correlation structure. Channel indices are 0-based here; the scenario file
/// uses 1-based indices.
struct Topology {
    std::vector<int> independents;
    std::map<int, Dependent> dependents;  ///< child -> (parent, rho)

    std::size_t independent_count() const { return independents.size(); }

    void validate(int n_channels) const {
        std::set<int> seen;
        for (int k : independents) {
            if (k < 0 || k >= n_channels) throw ConfigError("independents", "channel index out of range");
            if (!seen.insert(k).second) throw ConfigError("independents", "duplicate channel index");
        }
        if (independents.empty()) throw ConfigError("independents", "at least one independent channel required");
        const std::set<int> roots(independents.begin(), independents.end());
        for (const auto& [child, dep] : dependents) {
            if (child < 0 || child >= n_channels) throw ConfigError("dependents", "channel index out of range");
            if (!seen.insert(child).second) throw ConfigError("dependents", "channel listed twice");
            if (!roots.contains(dep.parent)) {
                throw ConfigError("dependents", "parent of channel " + std::to_string(child + 1) +
                                                    " is not an independent channel");
            }
            if (dep.rho != 1 && dep.rho != -1) throw ConfigError("dependents", "rho must be +1 or -1");
        }
        if (static_cast<int>(seen.size()) != n_channels) {
            throw ConfigError("dependents", "independents and dependents must cover every channel");
        }
    }

    bool operator==(const Topology&) const = default;
};

/// Picks `count` independent channels uniformly at random and attaches every
/// other channel to a uniformly chosen independent parent with correlation `rho`.
inline Topology random_topology(int n_channels, int count, int rho, std::uint64_t seed) {
    if (count < 1 || count > n_channels) throw ConfigError("independents", "count must be in [1, n_channels]");
    if (rho != 1 && rho != -1) throw ConfigError("rho", "must be +1 or -1");
    Rng rng(seed);
    std::vector<int> channels(static_cast<std::size_t>(n_channels));
    std::iota(channels.begin(), channels.end(), 0);
    for (int i = 0; i < count; ++i) {
        const auto j = static_cast<std::size_t>(i) + rng.below(static_cast<std::size_t>(n_channels - i));
        std::swap(channels[static_cast<std::size_t>(i)], channels[j]);
    }
    Topology topo;
    topo.independents.assign(channels.begin(), channels.begin() + count);
    std::sort(topo.independents.begin(), topo.independents.end());
    std::vector<int> rest(channels.begin() + count, channels.end());
    std::sort(rest.begin(), rest.end());
    for (int child : rest) {
        const int parent = topo.independents[rng.below(topo.independents.size())];
        topo.dependents[child] = Dependent{parent, rho};
    }
    return topo;
}

struct ScenarioConfig {
    int n_channels = 0;   ///< N
    int segment_len = 0;  ///< C, the aggregation capacity
    int demand = 0;       ///< d, vacant channels needed for a successful transmission
    TransitionMatrix transition;
    Topology topology;
    std::uint64_t env_seed = 0;
    std::uint64_t topology_seed = 0;

    int segment_count() const { return n_channels - segment_len + 1; }
    int action_count() const { return n_channels - segment_len + 2; }

    void validate() const {
        if (n_channels < 2) throw ConfigError("n_channels", "must be at least 2");
        if (segment_len < 1 || segment_len >= n_channels) {
            throw ConfigError("segment_len", "must satisfy 1 <= segment_len < n_channels");
        }
        if (demand < 1 || demand > segment_len) throw ConfigError("demand", "must satisfy 1 <= demand <= segment_len");
        transition.validate();
        topology.validate(n_channels);
    }

    bool operator==(const ScenarioConfig&) const = default;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                                const std::string& what) {
    if (!j.is_object()) throw ConfigError(what, "expected an object");
    for (const auto& item : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; })) {
            throw ConfigError(item.key(), "unknown key in " + what);
        }
    }
}

template <class T>
T require(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw ConfigError(key, "missing required key");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(key, std::string("wrong type: ") + e.what());
    }
}

template <class T>
T optional(const nlohmann::json& j, const char* key, T fallback) {
    return j.contains(key) ? require<T>(j, key) : fallback;
}

}  // namespace detail

/// Parses a scenario document.
///
/// The topology is either explicit (`independents` is a list of 1-based
/// channel indices and `dependents` a list of `[child, parent, rho]`) or
/// generated (`independents` is a count and `rho` gives the shared correlation
/// sign; `topology_seed` drives the draw).
inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(j,
                                {"n_channels", "segment_len", "demand", "p00", "p11", "independents", "dependents",
                                 "rho", "env_seed", "topology_seed"},
                                "scenario");
    ScenarioConfig cfg;
    cfg.n_channels = detail::require<int>(j, "n_channels");
    cfg.segment_len = detail::require<int>(j, "segment_len");
    cfg.demand = detail::require<int>(j, "demand");
    cfg.transition = TransitionMatrix::from_stay(detail::require<double>(j, "p00"), detail::require<double>(j, "p11"));
    cfg.env_seed = detail::require<std::uint64_t>(j, "env_seed");
    cfg.topology_seed = detail::optional<std::uint64_t>(j, "topology_seed", 0);

    if (!j.contains("independents")) throw ConfigError("independents", "missing required key");
    const auto& indep = j.at("independents");
    if (indep.is_number_integer()) {
        if (j.contains("dependents")) throw ConfigError("dependents", "not allowed with a generated topology");
        if (!j.contains("rho")) throw ConfigError("rho", "required with a generated topology");
        if (cfg.n_channels < 1) throw ConfigError("n_channels", "must be positive");
        cfg.topology = random_topology(cfg.n_channels, indep.get<int>(), detail::require<int>(j, "rho"),
                                       cfg.topology_seed);
    } else if (indep.is_array()) {
        if (j.contains("rho")) throw ConfigError("rho", "only valid with a generated topology");
        for (const auto& k : indep) {
            if (!k.is_number_integer()) throw ConfigError("independents", "expected integer channel indices");
            cfg.topology.independents.push_back(k.get<int>() - 1);
        }
        const auto deps = detail::optional<nlohmann::json>(j, "dependents", nlohmann::json::array());
        if (!deps.is_array()) throw ConfigError("dependents", "expected a list of [child, parent, rho]");
        for (const auto& d : deps) {
            if (!d.is_array() || d.size() != 3 || !d[0].is_number_integer() || !d[1].is_number_integer() ||
                !d[2].is_number_integer()) {
                throw ConfigError("dependents", "each entry must be [child, parent, rho]");
            }
            const int child = d[0].get<int>() - 1;
            if (cfg.topology.dependents.contains(child)) throw ConfigError("dependents", "channel listed twice");
            cfg.topology.dependents[child] = Dependent{d[1].get<int>() - 1, d[2].get<int>()};
        }
    } else {
        throw ConfigError("independents", "expected a list of channel indices or a count");
    }
    cfg.validate();
    return cfg;
}

/// Emits the explicit-topology form; parsing the result yields an equal config.
inline nlohmann::json scenario_to_json(const ScenarioConfig& cfg) {
    nlohmann::json j;
    j["n_channels"] = cfg.n_channels;
    j["segment_len"] = cfg.segment_len;
    j["demand"] = cfg.demand;
    j["p00"] = cfg.transition.p00;
    j["p11"] = cfg.transition.p11;
    auto indep = nlohmann::json::array();
    for (int k : cfg.topology.independents) indep.push_back(k + 1);
    j["independents"] = indep;
    auto deps = nlohmann::json::array();
    for (const auto& [child, dep] : cfg.topology.dependents) deps.push_back({child + 1, dep.parent + 1, dep.rho});
    j["dependents"] = deps;
    j["env_seed"] = cfg.env_seed;
    j["topology_seed"] = cfg.topology_seed;
    return j;
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open file");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path, std::string("malformed JSON: ") + e.what());
    }
}

inline ScenarioConfig load_scenario(const std::string& path) { return scenario_from_json(read_json_file(path)); }

/// Stable 64-bit fingerprint of a scenario, recorded in run manifests.
inline std::uint64_t scenario_hash(const ScenarioConfig& cfg) { return fnv1a(scenario_to_json(cfg).dump()); }

}  // namespace dsa
