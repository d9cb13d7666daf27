#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "roving/roving.hpp"

using namespace roving;
using nlohmann::json;

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;
constexpr int kAssertFailed = 4;

struct Options {
    int preset = 0;
    std::string config;
    std::vector<std::string> sets;
    double rho = -1.0;
    std::vector<std::string> paths;
    std::vector<int> queues;
    std::size_t samples = 1'000'000;
    std::uint64_t seed = 20240601;
    std::string out;
    std::string format = "csv";
    bool hist = false;
    unsigned workers = default_workers();
    std::string self_feedback = "same";
    std::vector<double> tails = {20.0};
    int reps = 10;
    double horizon = 1e6;
    double warmup = -1.0;
    bool check = false;
    double tol = 0.05;
    std::string param = "rho";
    double from = 0.1;
    double to = 0.95;
    int steps = 10;
    bool branching = false;
};

Params parse_sets(const std::vector<std::string> &sets) {
    Params p;
    for (const auto &kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw Error(Errc::ConfigError, "--set expects key=value, got '" + kv + "'");
        try {
            std::size_t used = 0;
            const std::string value = kv.substr(eq + 1);
            p[kv.substr(0, eq)] = std::stod(value, &used);
            if (used != value.size()) throw std::invalid_argument(value);
        } catch (const std::exception &) {
            throw Error(Errc::ConfigError, "--set value in '" + kv + "' is not a number");
        }
    }
    return p;
}

Scenario make_scenario(const Options &o, Params extra = {}) {
    if (!o.config.empty()) {
        if (o.preset != 0) throw Error(Errc::ConfigError, "use either --preset or --config, not both");
        if (!o.sets.empty() || !extra.empty()) throw Error(Errc::ConfigError, "--set applies to presets only");
        return load_scenario(o.config);
    }
    if (o.preset == 0) throw Error(Errc::ConfigError, "need --preset or --config");
    auto params = parse_sets(o.sets);
    for (const auto &[k, v] : extra) params[k] = v;
    return example_preset(o.preset, params);
}

struct Target {
    std::string label;
    bool is_path = true;
    fluid::Path path;
    int queue = 0;
};

std::vector<Target> targets(const Options &o, const Scenario &s) {
    std::vector<Target> out;
    auto add_path = [&](const std::string &label) { out.push_back({"path:" + label, true, parse_path(s, label), 0}); };
    auto add_queue = [&](int q) {
        if (q < 0 || q >= s.spec.size()) throw Error(Errc::ConfigError, "queue " + std::to_string(q + 1) + " out of range");
        out.push_back({"wait:" + std::to_string(q + 1), false, {}, q});
    };
    if (o.paths.empty() && o.queues.empty()) {
        for (const auto &p : s.paths) add_path(p);
        for (int q : s.queues) add_queue(q);
    } else {
        for (const auto &p : o.paths) add_path(p);
        for (int q : o.queues) add_queue(q - 1);
    }
    if (out.empty()) throw Error(Errc::ConfigError, "nothing to report: give --path or --queue");
    return out;
}

lt::LtOptions lt_options(const Options &o) {
    lt::LtOptions opt;
    if (o.self_feedback == "full") opt.self_feedback = lt::SelfFeedbackWindow::FullCycle;
    return opt;
}

void warn(const Warnings &ws) {
    for (const auto &w : ws) std::cerr << "warning [" << to_string(w.code) << "]: " << w.message << '\n';
}

/// Rows of named cells rendered as CSV or as a JSON array of objects.
struct Table {
    using Cell = std::variant<std::string, double, long long>;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void write(std::ostream &os, const std::string &format) const {
        if (format == "json") {
            json arr = json::array();
            for (const auto &r : rows) {
                json obj;
                for (std::size_t c = 0; c < columns.size(); ++c) {
                    std::visit([&](const auto &v) { obj[columns[c]] = v; }, r[c]);
                }
                arr.push_back(std::move(obj));
            }
            os << arr.dump(2) << '\n';
            return;
        }
        for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c];
        os << '\n';
        os << std::setprecision(10);
        for (const auto &r : rows) {
            for (std::size_t c = 0; c < r.size(); ++c) {
                if (c) os << ',';
                std::visit([&](const auto &v) { os << v; }, r[c]);
            }
            os << '\n';
        }
    }
};

std::string file_safe(std::string s) {
    std::replace_if(s.begin(), s.end(), [](char c) { return c == ':' || c == '>' || c == '/'; }, '_');
    return s;
}

/// Writes to DIR/name when --out is given, otherwise to stdout.
void emit(const Options &o, const std::string &name, const std::function<void(std::ostream &)> &body) {
    if (o.out.empty()) {
        body(std::cout);
        return;
    }
    std::filesystem::create_directories(o.out);
    const auto file = std::filesystem::path(o.out) / name;
    std::ofstream os(file);
    if (!os) throw Error(Errc::ConfigError, "cannot write '" + file.string() + "'");
    body(os);
    std::cerr << "wrote " << file.string() << '\n';
}

void emit_histogram(const Options &o, const std::string &target, const std::vector<ht::HistogramBin> &bins) {
    emit(o, "hist_" + file_safe(target) + ".csv", [&](std::ostream &os) {
        if (o.out.empty()) os << "# " << target << '\n';
        os << "bin_center,density\n" << std::setprecision(10);
        for (const auto &b : bins) os << b.center() << ',' << b.density << '\n';
    });
}

std::vector<ht::HistogramBin> histogram_of(std::vector<double> xs, std::size_t bins = 200) {
    std::vector<ht::HistogramBin> h;
    if (xs.empty()) return h;
    std::sort(xs.begin(), xs.end());
    const double top = xs[static_cast<std::size_t>(0.999 * static_cast<double>(xs.size() - 1))];
    if (!(top > 0.0)) return h;
    const double width = top / static_cast<double>(bins);
    std::vector<std::size_t> count(bins, 0);
    std::size_t inside = 0;
    for (double x : xs) {
        if (x > top) break;
        count[std::min(static_cast<std::size_t>(x / width), bins - 1)]++;
        ++inside;
    }
    for (std::size_t b = 0; b < bins; ++b) {
        h.push_back({width * static_cast<double>(b), width * static_cast<double>(b + 1),
                     static_cast<double>(count[b]) / (static_cast<double>(inside) * width)});
    }
    return h;
}

double load_for(const Options &o, const Scenario &s) { return o.rho >= 0.0 ? o.rho : s.rho; }

int analyze(const Options &o) {
    const auto s = make_scenario(o);
    const auto t = derive_traffic(s.spec);
    const auto f = fluid::build_profile(t);
    warn(f.warnings);
    const double rho = load_for(o, s);
    const auto p = ht::ht_parameters(t, f);
    std::cerr << s.name << ": sigma2=" << p.sigma2 << " delta=" << p.delta << " alpha=" << p.alpha << " r=" << p.r
              << " rho=" << rho << '\n';

    approx::ApproxOptions ao;
    ao.lt = lt_options(o);
    const ht::McOptions mc{o.samples, o.seed, o.workers};

    Table table;
    table.columns = {"target", "ht_mean", "ht_mean_se", "ht_exact_mean", "ht_std", "ht_std_se", "ht_exact_std"};
    for (double x : o.tails) {
        std::ostringstream c;
        c << "P(>" << x << ')';
        table.columns.push_back(c.str());
        table.columns.push_back(c.str() + "_se");
    }
    for (const char *c : {"lt_mean", "rho", "approx_scaled", "approx_unscaled"}) table.columns.emplace_back(c);

    for (const auto &tg : targets(o, s)) {
        std::optional<ht::HtLaw> law;
        approx::ApproxResult a;
        if (tg.is_path) {
            warn(fluid::validate_path(f, tg.path));
            warn(lt::path_warnings(t, tg.path));
            law.emplace(ht::ht_law_path(t, f, tg.path, mc));
            a = approx::approx_mean_path_time(t, f, tg.path, rho, ao);
        } else {
            law.emplace(ht::ht_law_wait(t, f, tg.queue, mc));
            a = approx::approx_mean_wait(t, f, tg.queue, rho, ao);
        }
        const auto m = law->mean();
        const auto sd = law->stddev();
        std::vector<Table::Cell> row = {tg.label, m.value, m.se, law->exact_mean(), sd.value, sd.se, law->exact_stddev()};
        for (double x : o.tails) {
            const auto pr = law->tail(x);
            row.emplace_back(pr.value);
            row.emplace_back(pr.se);
        }
        for (double v : {a.lt, rho, a.scaled, a.unscaled}) row.emplace_back(v);
        table.rows.push_back(std::move(row));
        if (o.hist) emit_histogram(o, tg.label, law->histogram());
    }
    emit(o, "analyze." + o.format, [&](std::ostream &os) { table.write(os, o.format); });

    if (o.branching) {
        const auto b = mtbp::build_branching(s.spec, std::min(rho, 1.0));
        emit(o, "branching.json", [&](std::ostream &os) { os << mtbp::report(b).dump(2) << '\n'; });
    }
    return 0;
}

sim::SimConfig sim_config(const Options &o, const Scenario &s, const std::vector<Target> &tg) {
    sim::SimConfig c;
    c.rho = load_for(o, s);
    c.horizon = o.horizon;
    c.warmup = o.warmup;
    c.replications = o.reps;
    c.seed = o.seed;
    c.workers = o.workers;
    for (const auto &t : tg) {
        if (t.is_path) c.paths.push_back(t.path);
    }
    if (o.hist) c.raw_cap = 200'000;
    return c;
}

int simulate(const Options &o) {
    const auto s = make_scenario(o);
    const auto tg = targets(o, s);
    const auto c = sim_config(o, s, tg);
    const auto rep = sim::replicate(s.spec, c);
    if (o.format == "json") {
        emit(o, "simulate.json", [&](std::ostream &os) { os << sim::report_json(rep).dump(2) << '\n'; });
    } else {
        emit(o, "simulate.csv", [&](std::ostream &os) { sim::write_replications_csv(os, rep); });
    }
    if (o.hist) {
        std::size_t k = 0;
        for (const auto &t : tg) {
            std::vector<double> raw;
            for (const auto &run : rep.runs) {
                const auto &src = t.is_path ? run.raw_tracked[k] : run.queues[static_cast<std::size_t>(t.queue)].raw_wait;
                raw.insert(raw.end(), src.begin(), src.end());
            }
            for (double &x : raw) x *= 1.0 - c.rho;
            emit_histogram(o, "sim_" + t.label, histogram_of(std::move(raw)));
            if (t.is_path) ++k;
        }
    }
    return 0;
}

int compare(const Options &o) {
    const auto s = make_scenario(o);
    const auto tg = targets(o, s);
    auto c = sim_config(o, s, tg);
    c.raw_cap = 0;
    const auto t = derive_traffic(s.spec);
    const auto f = fluid::build_profile(t);
    warn(f.warnings);
    approx::ApproxOptions ao;
    ao.lt = lt_options(o);
    const auto rep = sim::replicate(s.spec, c);

    Table table;
    table.columns = {"target", "rho", "sim_scaled_mean", "sim_ci95", "approx_scaled", "rel_error", "lt", "ht"};
    bool ok = true;
    std::size_t k = 0;
    for (const auto &x : tg) {
        const auto &pooled = x.is_path ? rep.path[k++] : rep.wait[static_cast<std::size_t>(x.queue)];
        const auto a = x.is_path ? approx::approx_mean_path_time(t, f, x.path, c.rho, ao)
                                 : approx::approx_mean_wait(t, f, x.queue, c.rho, ao);
        const double rel = (a.scaled - pooled.scaled_mean) / pooled.scaled_mean;
        if (!(std::abs(rel) <= o.tol)) ok = false;
        table.rows.push_back({x.label, c.rho, pooled.scaled_mean, pooled.scaled_halfwidth, a.scaled, rel, a.lt, a.ht});
    }
    emit(o, "compare." + o.format, [&](std::ostream &os) { table.write(os, o.format); });
    if (o.check && !ok) {
        std::cerr << "relative error above " << o.tol << '\n';
        return kAssertFailed;
    }
    return 0;
}

int sweep(const Options &o) {
    if (o.steps < 1) throw Error(Errc::ConfigError, "--steps must be at least 1");
    approx::ApproxOptions ao;
    ao.lt = lt_options(o);
    Table table;
    table.columns = {"param", "value", "target", "rho", "lt", "ht", "approx_scaled", "approx_unscaled"};
    for (int k = 0; k < o.steps; ++k) {
        const double v = o.steps == 1 ? o.from : o.from + (o.to - o.from) * k / (o.steps - 1);
        Params extra;
        if (o.param != "rho") extra[o.param] = v;
        const auto s = make_scenario(o, extra);
        const double rho = o.param == "rho" ? v : load_for(o, s);
        const auto t = derive_traffic(s.spec);
        const auto f = fluid::build_profile(t);
        for (const auto &x : targets(o, s)) {
            const auto a = x.is_path ? approx::approx_mean_path_time(t, f, x.path, rho, ao)
                                     : approx::approx_mean_wait(t, f, x.queue, rho, ao);
            table.rows.push_back({o.param, v, x.label, rho, a.lt, a.ht, a.scaled, a.unscaled});
        }
    }
    emit(o, "sweep." + o.format, [&](std::ostream &os) { table.write(os, o.format); });
    return 0;
}

void add_common(CLI::App *sub, Options &o) {
    sub->add_option("--preset", o.preset, "built-in example 1-4");
    sub->add_option("--config", o.config, "JSON network file")->check(CLI::ExistingFile);
    sub->add_option("--set", o.sets, "preset parameter key=value (repeatable)");
    sub->add_option("--rho", o.rho, "load; defaults to the scenario's");
    sub->add_option("--path", o.paths, "path like 1>3 (repeatable)");
    sub->add_option("--queue", o.queues, "queue number, 1-based (repeatable)");
    sub->add_option("--seed", o.seed);
    sub->add_option("--out", o.out, "directory for output files; stdout when absent");
    sub->add_option("--format", o.format)->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--workers", o.workers)->check(CLI::PositiveNumber);
    sub->add_option("--self-feedback", o.self_feedback,
                    "light-traffic charge for exhaustive self-rework: same (visit) or full (cycle)")
        ->check(CLI::IsMember({"same", "full"}));
}

void add_sim(CLI::App *sub, Options &o) {
    sub->add_option("--reps", o.reps)->check(CLI::PositiveNumber);
    sub->add_option("--horizon", o.horizon, "time units per replication");
    sub->add_option("--warmup", o.warmup, "discarded time; default max(1e4, 100 mean cycles)");
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Heavy-traffic, light-traffic and simulated path times in polling networks"};
    app.require_subcommand(1);
    Options o;

    auto *an = app.add_subcommand("analyze", "heavy-traffic laws, light-traffic limits and the interpolation");
    add_common(an, o);
    an->add_option("--samples", o.samples, "Monte Carlo samples per law")->check(CLI::Range(2.0, 1e10));
    an->add_option("--tail", o.tails, "report P(X > x) (repeatable)");
    an->add_flag("--hist", o.hist, "emit density histograms");
    an->add_flag("--branching", o.branching, "emit the branching-process report (gated, Poisson)");

    auto *si = app.add_subcommand("simulate", "discrete-event simulation with replications");
    add_common(si, o);
    add_sim(si, o);
    si->add_flag("--hist", o.hist, "emit density histograms of scaled times");

    auto *co = app.add_subcommand("compare", "simulation against the approximation");
    add_common(co, o);
    add_sim(co, o);
    co->add_flag("--assert", o.check, "exit 4 when a relative error exceeds --tol");
    co->add_option("--tol", o.tol, "relative tolerance for --assert");

    auto *sw = app.add_subcommand("sweep", "approximation curve over rho or a preset parameter");
    add_common(sw, o);
    sw->add_option("--param", o.param, "rho or a preset parameter such as p");
    sw->add_option("--from", o.from);
    sw->add_option("--to", o.to);
    sw->add_option("--steps", o.steps, "number of points");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kConfigError;
    }

    try {
        if (an->parsed()) return analyze(o);
        if (si->parsed()) return simulate(o);
        if (co->parsed()) return compare(o);
        return sweep(o);
    } catch (const Error &e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
        return e.numerical() ? kNumericalError : kConfigError;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    }
}
