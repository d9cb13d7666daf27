#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>

#include <json.hpp>

#include "roving/error.hpp"
#include "roving/random.hpp"

/// Parametric laws for interarrival, service and switch-over times.
namespace roving::dist {

struct Deterministic {
    double value = 0.0;
};

struct Exponential {
    double mean = 1.0;
};

/// Sum of `k` exponential phases with total mean `mean`.
struct Erlang {
    int k = 1;
    double mean = 1.0;
};

/// Two-phase hyperexponential with balanced means p1/mu1 = p2/mu2.
struct HyperExpBalanced {
    double mean = 1.0;
    double scv = 2.0;
};

/// Erlang(k-1, rate) with probability p, Erlang(k, rate) otherwise.
struct MixedErlang {
    int k = 2;
    double p = 0.0;
    double rate = 1.0;
};

struct Gamma {
    double shape = 1.0;
    double rate = 1.0;
};

struct Uniform {
    double lo = 0.0;
    double hi = 1.0;
};

using Distribution =
    std::variant<Deterministic, Exponential, Erlang, HyperExpBalanced, MixedErlang, Gamma, Uniform>;

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
    double second_moment = 0.0;
    double scv = 0.0;  ///< defined as 0 when the mean is 0
};

namespace detail {

inline Moments from_mean_var(double mean, double var) {
    Moments m;
    m.mean = mean;
    m.variance = var;
    m.second_moment = var + mean * mean;
    m.scv = mean > 0.0 ? var / (mean * mean) : 0.0;
    return m;
}

inline double erlang_second(double k, double rate) {
    return k * (k + 1.0) / (rate * rate);
}

/// Branch probabilities (p1, p2) of the balanced two-phase fit.
inline std::pair<double, double> balanced_h2_weights(double scv) {
    const double p1 = 0.5 * (1.0 + std::sqrt((scv - 1.0) / (scv + 1.0)));
    return {p1, 1.0 - p1};
}

inline double sample_erlang(int k, double rate, Rng &rng) {
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += sample_exponential(1.0 / rate, rng);
    return s;
}

template <class>
inline constexpr bool always_false_v = false;

}  // namespace detail

/// Throws `NegativeParameter` / `InvalidSpec` when the parameters are outside the law's domain.
inline void validate(const Distribution &d) {
    std::visit(
        [](const auto &x) {
            using T = std::decay_t<decltype(x)>;
            auto need = [](bool ok, Errc code, const char *msg) {
                if (!ok) throw Error(code, msg);
            };
            if constexpr (std::is_same_v<T, Deterministic>) {
                need(std::isfinite(x.value) && x.value >= 0.0, Errc::NegativeParameter,
                     "deterministic value must be finite and >= 0");
            } else if constexpr (std::is_same_v<T, Exponential>) {
                need(std::isfinite(x.mean) && x.mean > 0.0, Errc::NegativeParameter,
                     "exponential mean must be > 0");
            } else if constexpr (std::is_same_v<T, Erlang>) {
                need(x.k >= 1, Errc::InvalidSpec, "erlang k must be >= 1");
                need(std::isfinite(x.mean) && x.mean > 0.0, Errc::NegativeParameter,
                     "erlang mean must be > 0");
            } else if constexpr (std::is_same_v<T, HyperExpBalanced>) {
                need(std::isfinite(x.mean) && x.mean > 0.0, Errc::NegativeParameter,
                     "hyperexponential mean must be > 0");
                need(x.scv > 1.0, Errc::InvalidSpec, "balanced hyperexponential requires scv > 1");
            } else if constexpr (std::is_same_v<T, MixedErlang>) {
                need(x.k >= 1, Errc::InvalidSpec, "mixed erlang k must be >= 1");
                need(x.p >= 0.0 && x.p <= 1.0, Errc::InvalidSpec, "mixed erlang p must be in [0,1]");
                need(std::isfinite(x.rate) && x.rate > 0.0, Errc::NegativeParameter,
                     "mixed erlang rate must be > 0");
            } else if constexpr (std::is_same_v<T, Gamma>) {
                need(x.shape > 0.0 && x.rate > 0.0, Errc::NegativeParameter,
                     "gamma shape and rate must be > 0");
            } else if constexpr (std::is_same_v<T, Uniform>) {
                need(x.lo >= 0.0 && x.hi >= x.lo, Errc::NegativeParameter,
                     "uniform requires 0 <= lo <= hi");
            } else {
                static_assert(detail::always_false_v<T>);
            }
        },
        d);
}

inline Moments moments(const Distribution &d) {
    return std::visit(
        [](const auto &x) -> Moments {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Deterministic>) {
                return detail::from_mean_var(x.value, 0.0);
            } else if constexpr (std::is_same_v<T, Exponential>) {
                return detail::from_mean_var(x.mean, x.mean * x.mean);
            } else if constexpr (std::is_same_v<T, Erlang>) {
                return detail::from_mean_var(x.mean, x.mean * x.mean / x.k);
            } else if constexpr (std::is_same_v<T, HyperExpBalanced>) {
                return detail::from_mean_var(x.mean, x.scv * x.mean * x.mean);
            } else if constexpr (std::is_same_v<T, MixedErlang>) {
                const double k = x.k;
                const double mean = (x.p * (k - 1.0) + (1.0 - x.p) * k) / x.rate;
                const double second = x.p * detail::erlang_second(k - 1.0, x.rate) +
                                      (1.0 - x.p) * detail::erlang_second(k, x.rate);
                return detail::from_mean_var(mean, second - mean * mean);
            } else if constexpr (std::is_same_v<T, Gamma>) {
                return detail::from_mean_var(x.shape / x.rate, x.shape / (x.rate * x.rate));
            } else if constexpr (std::is_same_v<T, Uniform>) {
                const double w = x.hi - x.lo;
                return detail::from_mean_var(0.5 * (x.lo + x.hi), w * w / 12.0);
            } else {
                static_assert(detail::always_false_v<T>);
            }
        },
        d);
}

inline double mean(const Distribution &d) { return moments(d).mean; }

/// Two-moment fit: deterministic, exponential, E_{k-1,k} mixture or balanced H2.
inline Distribution fit_by_mean_scv(double mean, double scv) {
    if (!(mean >= 0.0) || !(scv >= 0.0) || !std::isfinite(mean) || !std::isfinite(scv)) {
        throw Error(Errc::NegativeInput, "fit_by_mean_scv requires finite mean >= 0 and scv >= 0");
    }
    if (mean == 0.0 || scv == 0.0) return Deterministic{mean};
    if (scv == 1.0) return Exponential{mean};
    if (scv > 1.0) return HyperExpBalanced{mean, scv};
    int k = static_cast<int>(std::ceil(1.0 / scv - 1e-12));
    k = std::max(k, 2);
    const double kd = k;
    const double disc = std::max(0.0, kd * (1.0 + scv) - kd * kd * scv);
    const double p = std::clamp((kd * scv - std::sqrt(disc)) / (1.0 + scv), 0.0, 1.0);
    return MixedErlang{k, p, (kd - p) / mean};
}

/// Same law with time multiplied by `factor` (> 0).
inline Distribution scaled(const Distribution &d, double factor) {
    return std::visit(
        [factor](const auto &x) -> Distribution {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Deterministic>) {
                return Deterministic{x.value * factor};
            } else if constexpr (std::is_same_v<T, Exponential>) {
                return Exponential{x.mean * factor};
            } else if constexpr (std::is_same_v<T, Erlang>) {
                return Erlang{x.k, x.mean * factor};
            } else if constexpr (std::is_same_v<T, HyperExpBalanced>) {
                return HyperExpBalanced{x.mean * factor, x.scv};
            } else if constexpr (std::is_same_v<T, MixedErlang>) {
                return MixedErlang{x.k, x.p, x.rate / factor};
            } else if constexpr (std::is_same_v<T, Gamma>) {
                return Gamma{x.shape, x.rate / factor};
            } else if constexpr (std::is_same_v<T, Uniform>) {
                return Uniform{x.lo * factor, x.hi * factor};
            } else {
                static_assert(detail::always_false_v<T>);
            }
        },
        d);
}

inline bool is_exponential(const Distribution &d) {
    return std::holds_alternative<Exponential>(d) ||
           (std::holds_alternative<Erlang>(d) && std::get<Erlang>(d).k == 1) ||
           (std::holds_alternative<Gamma>(d) && std::get<Gamma>(d).shape == 1.0);
}

inline double sample(const Distribution &d, Rng &rng) {
    return std::visit(
        [&rng](const auto &x) -> double {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Deterministic>) {
                return x.value;
            } else if constexpr (std::is_same_v<T, Exponential>) {
                return sample_exponential(x.mean, rng);
            } else if constexpr (std::is_same_v<T, Erlang>) {
                return detail::sample_erlang(x.k, x.k / x.mean, rng);
            } else if constexpr (std::is_same_v<T, HyperExpBalanced>) {
                const auto [p1, p2] = detail::balanced_h2_weights(x.scv);
                const bool first = uniform01(rng) < p1;
                // branch mean p_j/mu_j = mean/2  =>  1/mu_j = mean / (2 p_j)
                return sample_exponential(x.mean / (2.0 * (first ? p1 : p2)), rng);
            } else if constexpr (std::is_same_v<T, MixedErlang>) {
                const int phases = uniform01(rng) < x.p ? x.k - 1 : x.k;
                return detail::sample_erlang(phases, x.rate, rng);
            } else if constexpr (std::is_same_v<T, Gamma>) {
                return sample_gamma(x.shape, x.rate, rng);
            } else if constexpr (std::is_same_v<T, Uniform>) {
                return x.lo + (x.hi - x.lo) * uniform01(rng);
            } else {
                static_assert(detail::always_false_v<T>);
            }
        },
        d);
}

// JSON encoding: {"type":"erlang","k":2,"mean":1.0}; {"type":"fit","mean":m,"scv":c} resolves on load.

inline nlohmann::json to_json(const Distribution &d) {
    return std::visit(
        [](const auto &x) -> nlohmann::json {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Deterministic>) {
                return {{"type", "deterministic"}, {"value", x.value}};
            } else if constexpr (std::is_same_v<T, Exponential>) {
                return {{"type", "exponential"}, {"mean", x.mean}};
            } else if constexpr (std::is_same_v<T, Erlang>) {
                return {{"type", "erlang"}, {"k", x.k}, {"mean", x.mean}};
            } else if constexpr (std::is_same_v<T, HyperExpBalanced>) {
                return {{"type", "hyperexp"}, {"mean", x.mean}, {"scv", x.scv}};
            } else if constexpr (std::is_same_v<T, MixedErlang>) {
                return {{"type", "mixed_erlang"}, {"k", x.k}, {"p", x.p}, {"rate", x.rate}};
            } else if constexpr (std::is_same_v<T, Gamma>) {
                return {{"type", "gamma"}, {"shape", x.shape}, {"rate", x.rate}};
            } else if constexpr (std::is_same_v<T, Uniform>) {
                return {{"type", "uniform"}, {"lo", x.lo}, {"hi", x.hi}};
            } else {
                static_assert(detail::always_false_v<T>);
            }
        },
        d);
}

inline Distribution from_json(const nlohmann::json &j) {
    auto num = [&j](const char *key) -> double {
        if (!j.contains(key) || !j.at(key).is_number()) {
            throw Error(Errc::ConfigError, std::string("distribution is missing numeric field '") + key + "'");
        }
        return j.at(key).get<double>();
    };
    if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
        throw Error(Errc::ConfigError, "distribution must be an object with a string 'type'");
    }
    const auto type = j.at("type").get<std::string>();
    Distribution d;
    if (type == "deterministic" || type == "constant") {
        d = Deterministic{num("value")};
    } else if (type == "exponential" || type == "exp") {
        d = Exponential{num("mean")};
    } else if (type == "erlang") {
        d = Erlang{static_cast<int>(num("k")), num("mean")};
    } else if (type == "hyperexp" || type == "hyperexponential") {
        d = HyperExpBalanced{num("mean"), num("scv")};
    } else if (type == "mixed_erlang") {
        d = MixedErlang{static_cast<int>(num("k")), num("p"), num("rate")};
    } else if (type == "gamma") {
        d = Gamma{num("shape"), num("rate")};
    } else if (type == "uniform") {
        d = Uniform{num("lo"), num("hi")};
    } else if (type == "fit") {
        d = fit_by_mean_scv(num("mean"), num("scv"));
    } else {
        throw Error(Errc::ConfigError, "unknown distribution type '" + type + "'");
    }
    validate(d);
    return d;
}

inline std::string describe(const Distribution &d) {
    const auto m = moments(d);
    std::ostringstream os;
    os << to_json(d).at("type").get<std::string>() << "(mean=" << m.mean << ", scv=" << m.scv << ")";
    return os.str();
}

}  // namespace roving::dist
