#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "roving/distributions.hpp"
#include "roving/error.hpp"
#include "roving/model.hpp"

/// Ready-to-run networks: the four built-in examples and JSON configuration files.
namespace roving {

using Params = std::map<std::string, double>;

/// How path labels like "1>3>5" map to queue indices.
enum class PathSyntax {
    Queue,    ///< 1-based queue numbers
    Product,  ///< 1-based production stages; a repeated stage passes through its storage queue
};

struct Scenario {
    std::string name;
    ValidatedSpec spec;
    double rho = 0.9;
    std::vector<std::string> paths;  ///< default path labels
    PathSyntax syntax = PathSyntax::Queue;
    Params params;
    std::vector<int> queues;  ///< default queues whose waits are reported, 0-based
};

inline std::vector<int> parse_path(const std::string &label, int n, PathSyntax syntax = PathSyntax::Queue) {
    std::vector<int> steps;
    std::stringstream ss(label);
    std::string tok;
    while (std::getline(ss, tok, '>')) {
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(tok, &used);
        } catch (const std::exception &) {
            throw Error(Errc::ConfigError, "bad path label '" + label + "'");
        }
        if (used != tok.size()) throw Error(Errc::ConfigError, "bad path label '" + label + "'");
        steps.push_back(v - 1);
    }
    if (steps.empty()) throw Error(Errc::EmptyPath, "empty path label");
    std::vector<int> path;
    if (syntax == PathSyntax::Queue) {
        path = steps;
    } else {
        for (std::size_t m = 0; m < steps.size(); ++m) {
            if (m > 0) {
                if (steps[m] != steps[m - 1]) {
                    throw Error(Errc::ConfigError, "product path '" + label + "' may only repeat one stage");
                }
                path.push_back(2 * steps[m] + 1);
            }
            path.push_back(2 * steps[m]);
        }
    }
    for (int q : path) {
        if (q < 0 || q >= n) throw Error(Errc::ConfigError, "path label '" + label + "' is out of range");
    }
    return path;
}

inline std::vector<int> parse_path(const Scenario &s, const std::string &label) {
    return parse_path(label, s.spec.size(), s.syntax);
}

namespace detail {

inline double take(Params &given, const std::string &key, double fallback) {
    auto it = given.find(key);
    if (it == given.end()) return fallback;
    const double v = it->second;
    given.erase(it);
    return v;
}

inline void reject_unknown(const Params &left, int id) {
    if (!left.empty()) {
        throw Error(Errc::ConfigError,
                    "preset " + std::to_string(id) + " has no parameter '" + left.begin()->first + "'");
    }
}

}  // namespace detail

/// Production system with rework: five exhaustive production queues, each followed by a
/// zero-time storage queue that sends defects back. Relative loads are rework-inclusive.
inline Scenario example1(Params p = {}) {
    const double placement = detail::take(p, "placement", 0.0);
    const double defect = detail::take(p, "defect", 0.25);
    const double setup = detail::take(p, "setup", 5.0);
    detail::reject_unknown(p, 1);
    if (placement != 0.0 && placement != 1.0) throw Error(Errc::ConfigError, "placement must be 0 or 1");
    const double rel[5] = {0.1, 0.2, 0.2, 0.2, 0.3};
    NetworkSpec spec;
    spec.routing = Mat::Zero(10, 10);
    for (int q = 0; q < 5; ++q) {
        QueueSpec prod;
        prod.label = "prod" + std::to_string(q + 1);
        prod.arrival = dist::Exponential{1.0 / ((1.0 - defect) * rel[q])};
        prod.service = dist::Exponential{1.0};
        prod.switchover = dist::Deterministic{placement == 0.0 ? 0.0 : setup};
        prod.discipline = Discipline::Exhaustive;
        QueueSpec store;
        store.label = "store" + std::to_string(q + 1);
        store.service = dist::Deterministic{0.0};
        store.switchover = dist::Deterministic{placement == 0.0 ? setup : 0.0};
        store.discipline = Discipline::Exhaustive;
        spec.queues.push_back(prod);
        spec.queues.push_back(store);
        spec.routing(2 * q, 2 * q + 1) = defect;
        spec.routing(2 * q + 1, 2 * q) = 1.0;
    }
    return {"example1", validate_spec(std::move(spec)), 0.95, {"1", "1>1", "1>1>1", "5", "5>5", "5>5>5"},
            PathSyntax::Product, {{"placement", placement}, {"defect", defect}, {"setup", setup}}, {}};
}

/// Call processing: two exhaustive input queues feeding a third with deterministic services.
inline Scenario example2(Params p = {}) {
    detail::reject_unknown(p, 2);
    NetworkSpec spec;
    const double lam[3] = {0.1, 1.0, 0.0};
    const double b[3] = {1.0, 1.0, 5.0};
    const double r[3] = {0.0, 2.0, 2.0};
    for (int i = 0; i < 3; ++i) {
        QueueSpec q;
        q.label = "Q" + std::to_string(i + 1);
        if (lam[i] > 0.0) q.arrival = dist::Exponential{1.0 / lam[i]};
        q.service = dist::Deterministic{b[i]};
        q.switchover = dist::Deterministic{r[i]};
        q.discipline = Discipline::Exhaustive;
        spec.queues.push_back(q);
    }
    spec.routing = Mat::Zero(3, 3);
    spec.routing(0, 2) = 1.0;
    spec.routing(1, 2) = 1.0;
    return {"example2", validate_spec(std::move(spec)), 0.9, {"1>3", "2>3"}, PathSyntax::Queue, {}, {}};
}

/// Token ring with one file server: ten gated stations send every request to station 11.
inline Scenario example3(Params p = {}) {
    const double server_scv = detail::take(p, "server_scv", 1.0);
    const double arrival_scv = detail::take(p, "arrival_scv", 4.0);
    detail::reject_unknown(p, 3);
    NetworkSpec spec;
    spec.routing = Mat::Zero(11, 11);
    for (int i = 0; i < 11; ++i) {
        QueueSpec q;
        q.label = i < 10 ? "station" + std::to_string(i + 1) : "server";
        if (i < 10) {
            q.arrival = dist::fit_by_mean_scv(1.0, arrival_scv);
            q.service = dist::Deterministic{0.1};
            spec.routing(i, 10) = 1.0;
        } else {
            q.service = dist::fit_by_mean_scv(1.0, server_scv);
        }
        q.switchover = dist::Exponential{0.01};
        q.discipline = Discipline::Gated;
        spec.queues.push_back(q);
    }
    std::vector<std::string> paths;
    for (int i = 1; i <= 10; ++i) paths.push_back(std::to_string(i) + ">11");
    return {"example3", validate_spec(std::move(spec)), 0.95, paths, PathSyntax::Queue,
            {{"server_scv", server_scv}, {"arrival_scv", arrival_scv}}, {}};
}

/// Two product lines (queues 1,3,5 and 2,4,6) with a joint packaging queue 7; a failed
/// step sends the item back to the start of its line.
inline NetworkSpec example4_network(double p) {
    if (!(p >= 0.0 && p < 1.0)) throw Error(Errc::ConfigError, "rework probability must lie in [0,1)");
    NetworkSpec spec;
    const double lam[7] = {0.12, 0.04, 0, 0, 0, 0, 0};
    for (int i = 0; i < 7; ++i) {
        QueueSpec q;
        q.label = i == 6 ? "packaging" : "stage" + std::to_string(i + 1);
        if (lam[i] > 0.0) q.arrival = dist::Erlang{4, 1.0 / lam[i]};
        q.service = dist::Erlang{2, i == 6 ? 2.0 : 1.0};
        q.switchover = dist::Deterministic{5.0};
        q.discipline = Discipline::Exhaustive;
        spec.queues.push_back(q);
    }
    spec.routing = Mat::Zero(7, 7);
    const int chain[2][4] = {{0, 2, 4, 6}, {1, 3, 5, 6}};
    for (const auto &line : chain) {
        for (int s = 0; s < 3; ++s) {
            spec.routing(line[s], line[s + 1]) += 1.0 - p;
            spec.routing(line[s], line[0]) += p;
        }
    }
    return spec;
}

inline Scenario example4(Params p = {}) {
    const double rework = detail::take(p, "p", 0.01);
    detail::reject_unknown(p, 4);
    auto vs = validate_spec(example4_network(rework));
    const double load = nominal_load(vs);
    return {"example4", std::move(vs), load, {"1>3>5>7", "2>4>6>7"}, PathSyntax::Queue, {{"p", rework}}, {0}};
}

/// Largest rework probability for which Example 4 is stable.
inline double example4_stability_boundary() {
    double lo = 0.0;
    double hi = 0.5;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (nominal_load(validate_spec(example4_network(mid))) < 1.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline Scenario example_preset(int id, Params p = {}) {
    switch (id) {
        case 1: return example1(std::move(p));
        case 2: return example2(std::move(p));
        case 3: return example3(std::move(p));
        case 4: return example4(std::move(p));
        default: throw Error(Errc::UnknownPreset, "no preset " + std::to_string(id) + " (choose 1-4)");
    }
}

/// JSON layout: {"queues":[{"arrival":D?,"service":D,"discipline":"gated"|"exhaustive"}],
/// "switchover":[D...], "routing":[[...]], "load":rho, "paths":["1>2"]}.
inline Scenario scenario_from_json(const nlohmann::json &j, const std::string &name = "config") {
    try {
        if (!j.is_object()) throw Error(Errc::ConfigError, "configuration must be a JSON object");
        if (!j.contains("queues") || !j.at("queues").is_array() || j.at("queues").empty()) {
            throw Error(Errc::ConfigError, "'queues' must be a nonempty array");
        }
        const auto &qs = j.at("queues");
        const int n = static_cast<int>(qs.size());
        if (!j.contains("switchover") || !j.at("switchover").is_array() ||
            static_cast<int>(j.at("switchover").size()) != n) {
            throw Error(Errc::ConfigError, "'switchover' must list one distribution per queue");
        }
        NetworkSpec spec;
        for (int i = 0; i < n; ++i) {
            const auto &q = qs.at(static_cast<std::size_t>(i));
            QueueSpec s;
            if (q.contains("arrival") && !q.at("arrival").is_null()) s.arrival = dist::from_json(q.at("arrival"));
            if (!q.contains("service")) throw Error(Errc::ConfigError, "queue " + std::to_string(i + 1) + " needs 'service'");
            s.service = dist::from_json(q.at("service"));
            s.switchover = dist::from_json(j.at("switchover").at(static_cast<std::size_t>(i)));
            const auto disc = q.value("discipline", std::string("gated"));
            if (disc == "gated") {
                s.discipline = Discipline::Gated;
            } else if (disc == "exhaustive") {
                s.discipline = Discipline::Exhaustive;
            } else {
                throw Error(Errc::ConfigError, "unknown discipline '" + disc + "'");
            }
            s.label = q.value("label", "Q" + std::to_string(i + 1));
            spec.queues.push_back(std::move(s));
        }
        spec.routing = Mat::Zero(n, n);
        if (j.contains("routing")) {
            const auto &r = j.at("routing");
            if (!r.is_array() || static_cast<int>(r.size()) != n) {
                throw Error(Errc::ConfigError, "'routing' must be an n x n matrix");
            }
            for (int a = 0; a < n; ++a) {
                const auto &row = r.at(static_cast<std::size_t>(a));
                if (!row.is_array() || static_cast<int>(row.size()) != n) {
                    throw Error(Errc::ConfigError, "'routing' must be an n x n matrix");
                }
                for (int b = 0; b < n; ++b) spec.routing(a, b) = row.at(static_cast<std::size_t>(b)).get<double>();
            }
        }
        Scenario s{name, validate_spec(std::move(spec)), j.value("load", 0.9), {}, PathSyntax::Queue, {}, {}};
        if (j.contains("paths")) s.paths = j.at("paths").get<std::vector<std::string>>();
        for (const auto &label : s.paths) parse_path(s, label);
        if (s.paths.empty()) {
            for (int i = 0; i < n; ++i) s.queues.push_back(i);
        }
        return s;
    } catch (const nlohmann::json::exception &e) {
        throw Error(Errc::ConfigError, std::string("malformed configuration: ") + e.what());
    }
}

inline Scenario load_scenario(const std::string &file) {
    std::ifstream in(file);
    if (!in) throw Error(Errc::ConfigError, "cannot open '" + file + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception &e) {
        throw Error(Errc::ConfigError, "'" + file + "' is not valid JSON: " + e.what());
    }
    return scenario_from_json(j, file);
}

}  // namespace roving
