#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nmmb/cache.hpp"
#include "nmmb/errors.hpp"
#include "nmmb/metrics.hpp"
#include "nmmb/orbital.hpp"
#include "nmmb/plot.hpp"

namespace nmmb {

/// One of the two compared states: exchange statistics plus the list of
/// (well index, internal label) initial orbitals. An empty orbital list is
/// the many-particle vacuum.
struct StateDef {
    Statistics statistics = Statistics::boson;
    std::optional<bool> symmetrize;  ///< defaulted from the statistics when unset
    std::vector<std::pair<int, std::string>> orbitals;

    bool symmetrized() const {
        return symmetrize.value_or(statistics != Statistics::ordered);
    }
};

struct OutputOptions {
    std::vector<int> kp;                                ///< requested k-particle distance columns
    std::vector<std::pair<char, int>> correlations;     ///< ('a'|'b', well index)
    std::string csv = "scenario.csv";
    bool plot = false;
    std::vector<std::string> panels = {"p1", "metrics"};  ///< SVG panels when plotting
};

struct ScenarioConfig {
    PotentialSpec potential;
    double h = 0.25;
    double e_cut = 0.0;  ///< 0 means the default 4 * v0
    double t_max = 100000.0;
    int n_samples = 500;
    double eps_complete = 1e-8;
    std::size_t mode_cap = 4096;
    StateDef state_a, state_b;
    OutputOptions output;

    double effective_e_cut() const { return e_cut > 0.0 ? e_cut : 4.0 * potential.v0; }

    void validate() const {
        potential.validate();
        if (!(h > 0.0)) throw config_error("config: h must be > 0");
        if (!(effective_e_cut() > 0.0))
            throw config_error("config: e_cut must be set explicitly when v0 = 0");
        if (!(t_max > 0.0)) throw config_error("config: t_max must be > 0");
        if (n_samples < 2) throw config_error("config: n_samples must be >= 2");
        if (!(eps_complete > 0.0)) throw config_error("config: eps_complete must be > 0");
        for (const auto& st : {state_a, state_b}) {
            for (const auto& [n, label] : st.orbitals)
                if (n < 1) throw config_error("config: well indices must be >= 1");
            if (st.statistics == Statistics::ordered && st.symmetrized())
                throw config_error("config: ordered statistics cannot be symmetrized");
            if (st.statistics != Statistics::ordered && !st.symmetrized())
                throw config_error("config: boson/fermion states are symmetrized; "
                                   "use statistics = ordered for the unsymmetrized product");
        }
        const std::size_t na = state_a.orbitals.size(), nb = state_b.orbitals.size();
        for (int kp : output.kp) {
            if (kp < 1 || static_cast<std::size_t>(kp) > std::min(na, nb))
                throw config_error("config: kp = " + std::to_string(kp) +
                                   " needs both states to hold at least that many particles");
        }
        for (const auto& [which, n] : output.correlations) {
            if (which != 'a' && which != 'b') throw config_error("config: correlations must name state a or b");
            if (n < 1) throw config_error("config: correlation well indices must be >= 1");
        }
        for (const auto& p : output.panels)
            if (p != "p1" && p != "metrics")
                throw config_error("config: panels entries must be p1 or metrics");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& v, const std::string& key, int line) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw config_error("config line " + std::to_string(line) + ": key '" + key +
                           "' expects a number, got '" + v + "'");
    }
}

inline bool parse_bool(const std::string& v, const std::string& key, int line) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw config_error("config line " + std::to_string(line) + ": key '" + key +
                       "' expects true or false, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : v) {
        if (c == ',') {
            const auto t = trim(cur);
            if (!t.empty()) out.push_back(t);
            cur.clear();
        } else {
            cur += c;
        }
    }
    const auto t = trim(cur);
    if (!t.empty()) out.push_back(t);
    return out;
}

inline void parse_state_key(StateDef& st, const std::string& key, const std::string& value, int line) {
    if (key == "statistics") {
        if (value == "boson")
            st.statistics = Statistics::boson;
        else if (value == "fermion")
            st.statistics = Statistics::fermion;
        else if (value == "ordered")
            st.statistics = Statistics::ordered;
        else
            throw config_error("config line " + std::to_string(line) +
                               ": statistics must be boson, fermion or ordered");
    } else if (key == "symmetrize") {
        st.symmetrize = parse_bool(value, key, line);
    } else if (key == "orbitals") {
        st.orbitals.clear();
        for (const auto& item : split_list(value)) {
            const auto colon = item.find(':');
            const std::string ns = colon == std::string::npos ? item : trim(item.substr(0, colon));
            const std::string label = colon == std::string::npos ? "" : trim(item.substr(colon + 1));
            int n = 0;
            const auto res = std::from_chars(ns.data(), ns.data() + ns.size(), n);
            if (res.ec != std::errc{} || res.ptr != ns.data() + ns.size())
                throw config_error("config line " + std::to_string(line) +
                                   ": orbital entry '" + item + "' is not 'n' or 'n:label'");
            st.orbitals.emplace_back(n, label);
        }
    } else {
        throw config_error("config line " + std::to_string(line) + ": unknown key '" + key +
                           "' in a state section");
    }
}

} // namespace detail

/// Parse the plain-text configuration format. Sections [potential],
/// [numerics], [state.a], [state.b], [output]; '#' starts a comment; defaults
/// fill everything a document does not mention.
inline ScenarioConfig parse_config(const std::string& text) {
    ScenarioConfig cfg;
    cfg.state_a.orbitals = {{1, ""}};  // defaults: |1> against the vacuum
    cfg.state_b.orbitals = {};

    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string s = detail::trim(raw);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw config_error("config line " + std::to_string(line) + ": malformed section header");
            section = s.substr(1, s.size() - 2);
            if (section != "potential" && section != "numerics" && section != "state.a" &&
                section != "state.b" && section != "output")
                throw config_error("config line " + std::to_string(line) + ": unknown section [" +
                                   section + "]");
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw config_error("config line " + std::to_string(line) + ": expected 'key = value'");
        const std::string key = detail::trim(s.substr(0, eq));
        const std::string value = detail::trim(s.substr(eq + 1));
        if (section.empty())
            throw config_error("config line " + std::to_string(line) + ": key '" + key +
                               "' appears before any section");

        if (section == "potential") {
            if (key == "l")
                cfg.potential.l = detail::parse_number(value, key, line);
            else if (key == "b")
                cfg.potential.b = detail::parse_number(value, key, line);
            else if (key == "r")
                cfg.potential.r = detail::parse_number(value, key, line);
            else if (key == "v0")
                cfg.potential.v0 = detail::parse_number(value, key, line);
            else
                throw config_error("config line " + std::to_string(line) + ": unknown key '" + key +
                                   "' in [potential]");
        } else if (section == "numerics") {
            if (key == "h")
                cfg.h = detail::parse_number(value, key, line);
            else if (key == "e_cut")
                cfg.e_cut = detail::parse_number(value, key, line);
            else if (key == "t_max")
                cfg.t_max = detail::parse_number(value, key, line);
            else if (key == "n_samples")
                cfg.n_samples = static_cast<int>(detail::parse_number(value, key, line));
            else if (key == "eps_complete")
                cfg.eps_complete = detail::parse_number(value, key, line);
            else if (key == "mode_cap")
                cfg.mode_cap = static_cast<std::size_t>(detail::parse_number(value, key, line));
            else
                throw config_error("config line " + std::to_string(line) + ": unknown key '" + key +
                                   "' in [numerics]");
        } else if (section == "state.a") {
            detail::parse_state_key(cfg.state_a, key, value, line);
        } else if (section == "state.b") {
            detail::parse_state_key(cfg.state_b, key, value, line);
        } else {  // output
            if (key == "kp") {
                cfg.output.kp.clear();
                for (const auto& item : detail::split_list(value))
                    cfg.output.kp.push_back(static_cast<int>(detail::parse_number(item, key, line)));
            } else if (key == "correlations") {
                cfg.output.correlations.clear();
                for (const auto& item : detail::split_list(value)) {
                    const auto colon = item.find(':');
                    if (colon == std::string::npos || (item[0] != 'a' && item[0] != 'b'))
                        throw config_error("config line " + std::to_string(line) +
                                           ": correlations entries look like a:1 or b:2");
                    cfg.output.correlations.emplace_back(
                        item[0], static_cast<int>(detail::parse_number(item.substr(colon + 1), key, line)));
                }
            } else if (key == "csv") {
                cfg.output.csv = value;
            } else if (key == "plot") {
                cfg.output.plot = detail::parse_bool(value, key, line);
            } else if (key == "panels") {
                cfg.output.panels = detail::split_list(value);
            } else {
                throw config_error("config line " + std::to_string(line) + ": unknown key '" + key +
                                   "' in [output]");
            }
        }
    }
    cfg.validate();
    return cfg;
}

/// Built-in demonstration scenarios.
inline const std::map<std::string, std::string>& presets() {
    static const std::map<std::string, std::string> p = [] {
        std::map<std::string, std::string> m;
        const std::string common =
            "[potential]\n"
            "l = 50\n"
            "b = 2\n"
            "r = 4000\n"
            "v0 = 0.1\n"
            "[numerics]\n"
            "h = 0.25\n"
            "e_cut = 0.4\n"
            "t_max = 100000\n"
            "n_samples = 500\n"
            "eps_complete = 2e-3\n";
        m["fig1b"] = common +
                     "[state.a]\n"
                     "statistics = boson\n"
                     "orbitals = 1\n"
                     "[state.b]\n"
                     "orbitals =\n"
                     "[output]\n"
                     "correlations = a:1\n"
                     "panels = p1\n"
                     "csv = fig1b.csv\n";
        m["fig2ab"] = common +
                      "[state.a]\n"
                      "orbitals = 1\n"
                      "[state.b]\n"
                      "orbitals = 2\n"
                      "[output]\n"
                      "correlations = a:1, a:2, b:1, b:2\n"
                      "csv = fig2ab.csv\n";
        m["fig2cd"] = common +
                      "[state.a]\n"
                      "orbitals = 1:-\n"
                      "[state.b]\n"
                      "orbitals = 1:+\n"
                      "[output]\n"
                      "correlations = a:1, b:1\n"
                      "csv = fig2cd.csv\n";
        m["fig3a"] = common +
                     "[state.a]\n"
                     "statistics = fermion\n"
                     "orbitals = 1, 2, 3\n"
                     "[state.b]\n"
                     "orbitals =\n"
                     "[output]\n"
                     "correlations = a:1, a:2, a:3\n"
                     "csv = fig3a.csv\n";
        m["fig3b"] = common +
                     "[state.a]\n"
                     "orbitals = 1, 1, 1, 1\n"
                     "[state.b]\n"
                     "orbitals = 1, 1, 1, 1, 1\n"
                     "[output]\n"
                     "correlations = a:1, b:1\n"
                     "csv = fig3b.csv\n";
        m["fig3c"] = common +
                     "[state.a]\n"
                     "statistics = boson\n"
                     "symmetrize = true\n"
                     "orbitals = 1, 1, 1, 2, 2, 2\n"
                     "[state.b]\n"
                     "statistics = ordered\n"
                     "symmetrize = false\n"
                     "orbitals = 1, 1, 1, 2, 2, 2\n"
                     "[output]\n"
                     "kp = 1, 2, 3, 4, 5\n"
                     "correlations = a:1, a:2\n"
                     "csv = fig3c.csv\n";
        return m;
    }();
    return p;
}

/// One CSV row; the column set is fixed by the configuration.
struct TimeSeriesRow {
    double t = 0.0;
    std::vector<double> p1_a, p1_b;  ///< survival probability per tracked orbital
    std::vector<double> pk_a, pk_b;  ///< particle-number distributions
    double d_full = 0.0, p_low = 0.0, p_up = 0.0, d_one = 0.0;
    std::vector<double> d_kp;        ///< one per requested kp, in config order
    std::vector<double> corr;        ///< <n| rho_1p |n> per requested correlation
};

struct ScenarioResult {
    DistanceReport report;
    std::vector<std::string> header;
    std::vector<TimeSeriesRow> rows;
    std::string csv_text;
    std::filesystem::path csv_path;
    std::vector<std::filesystem::path> svg_paths;
    std::map<int, double> expand_defects;  ///< completeness defect per well index used
};

namespace detail {

inline std::string format_full(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

struct StateAtTime {
    EffectiveFrame frame;
    ReducedState reduced;
    std::vector<double> p1;
};

} // namespace detail

struct RunOptions {
    std::filesystem::path cache_dir = ".nmmb-cache";
    std::filesystem::path out_dir;  ///< empty: keep results in memory only
};

/// Render the requested panels of a finished run: the semilogarithmic
/// survival-probability panel and/or the linear metric-comparison panel, one
/// SVG file each.
inline std::vector<std::filesystem::path> emit_plot(const ScenarioConfig& cfg,
                                                    const ScenarioResult& result,
                                                    const std::filesystem::path& out_dir) {
    if (cfg.output.panels.empty()) throw domain_error("emit_plot: no panels selected");
    if (result.rows.empty()) throw domain_error("emit_plot: empty report");
    const std::string stem = std::filesystem::path(cfg.output.csv).stem().string();
    std::vector<std::filesystem::path> written;

    for (const auto& panel : cfg.output.panels) {
        if (panel == "p1") {
            std::vector<PlotSeries> p1s;
            for (std::size_t o = 0; o < cfg.state_a.orbitals.size(); ++o) {
                PlotSeries s;
                s.name = "P1_a" + std::to_string(o + 1);
                for (const auto& row : result.rows) {
                    s.x.push_back(row.t);
                    s.y.push_back(row.p1_a[o]);
                }
                p1s.push_back(std::move(s));
            }
            for (std::size_t o = 0; o < cfg.state_b.orbitals.size(); ++o) {
                PlotSeries s;
                s.name = "P1_b" + std::to_string(o + 1);
                for (const auto& row : result.rows) {
                    s.x.push_back(row.t);
                    s.y.push_back(row.p1_b[o]);
                }
                p1s.push_back(std::move(s));
            }
            if (p1s.empty()) continue;  // two vacua: nothing to draw
            const auto path = out_dir / (stem + "_p1.svg");
            write_svg(path,
                      render_svg("Survival probability", "t [\xE2\x84\x92\xC2\xB2]", "P1", p1s, true));
            written.push_back(path);
        } else {
            std::vector<PlotSeries> ms;
            auto add_series = [&](const std::string& name, const std::vector<double>& y) {
                PlotSeries s;
                s.name = name;
                s.x = result.report.times;
                s.y = y;
                ms.push_back(std::move(s));
            };
            add_series("D", result.report.d_full);
            add_series("P_lower", result.report.p_lower);
            add_series("P_upper", result.report.p_upper);
            add_series("D_1p", result.report.d_1p);
            for (const auto& [kp, series] : result.report.d_kp)
                add_series("D_kp" + std::to_string(kp), series);
            const auto path = out_dir / (stem + "_metrics.svg");
            write_svg(path, render_svg("Trace distance and estimators", "t [\xE2\x84\x92\xC2\xB2]",
                                       "distance", ms, false));
            written.push_back(path);
        }
    }
    return written;
}

/// Execute a full scenario: spectral basis (cached), orbital evolution on the
/// time grid, sector reduction of both states, all requested metrics, CSV and
/// optional SVG artifacts. Deterministic for a fixed configuration.
inline ScenarioResult run_scenario(const ScenarioConfig& cfg, const RunOptions& opts = {}) {
    cfg.validate();
    const double e_cut = cfg.effective_e_cut();

    // spectral basis, through the disk cache
    SpectralBasis basis;
    if (auto cached = cache::load_basis(opts.cache_dir, cfg.potential, cfg.h, e_cut)) {
        basis = std::move(*cached);
    } else {
        auto fem = std::make_shared<const FemSystem>(assemble_fem(cfg.potential, cfg.h));
        basis = solve_modes(fem, e_cut, {.mode_cap = cfg.mode_cap});
        cache::save_basis(basis, opts.cache_dir);
    }
    const FemSystem& fem = *basis.fem;

    // well modes needed by the states and the correlation columns
    int n_well = 0;
    for (const auto* st : {&cfg.state_a, &cfg.state_b})
        for (const auto& [n, label] : st->orbitals) n_well = std::max(n_well, n);
    for (const auto& [which, n] : cfg.output.correlations) n_well = std::max(n_well, n);
    std::vector<WellEigenstate> wells;
    if (n_well > 0) wells = isolated_well_modes(cfg.potential, cfg.h, n_well);

    // internal-label alphabet across both states
    std::vector<std::string> alphabet;
    for (const auto* st : {&cfg.state_a, &cfg.state_b})
        for (const auto& [n, label] : st->orbitals)
            if (std::find(alphabet.begin(), alphabet.end(), label) == alphabet.end())
                alphabet.push_back(label);
    std::sort(alphabet.begin(), alphabet.end());
    const std::size_t d_int = std::max<std::size_t>(1, alphabet.size());
    auto label_index = [&](const std::string& label) {
        return static_cast<int>(std::find(alphabet.begin(), alphabet.end(), label) - alphabet.begin());
    };

    // one spectral expansion per distinct well index
    ScenarioResult result;
    std::map<int, Orbital> expanded;
    for (const auto* st : {&cfg.state_a, &cfg.state_b}) {
        for (const auto& [n, label] : st->orbitals) {
            if (expanded.count(n)) continue;
            auto res = expand(wells[static_cast<std::size_t>(n - 1)], basis, cfg.eps_complete);
            result.expand_defects[n] = res.defect;
            expanded[n] = std::move(res.orbital);
        }
    }
    std::vector<int> distinct_wells;
    for (const auto& [n, orb] : expanded) distinct_wells.push_back(n);

    const DotFn dot_s = make_mass_dot(fem.mass_system);
    const DotFn dot_e = make_mass_dot(fem.mass_env);

    // header
    result.header.push_back("t");
    for (std::size_t i = 0; i < cfg.state_a.orbitals.size(); ++i)
        result.header.push_back("P1_a" + std::to_string(i + 1));
    for (std::size_t i = 0; i < cfg.state_b.orbitals.size(); ++i)
        result.header.push_back("P1_b" + std::to_string(i + 1));
    for (std::size_t k = 0; k <= cfg.state_a.orbitals.size(); ++k)
        result.header.push_back("Pk_a" + std::to_string(k));
    for (std::size_t k = 0; k <= cfg.state_b.orbitals.size(); ++k)
        result.header.push_back("Pk_b" + std::to_string(k));
    result.header.push_back("D");
    result.header.push_back("P_lower");
    result.header.push_back("P_upper");
    result.header.push_back("D_1p");
    for (int kp : cfg.output.kp) result.header.push_back("D_kp" + std::to_string(kp));
    for (const auto& [which, n] : cfg.output.correlations)
        result.header.push_back(std::string("corr_") + which + "_" + std::to_string(n));

    auto build_state = [&](const StateDef& def,
                           const std::map<int, std::pair<std::vector<cdouble>, std::vector<cdouble>>>&
                               splits_by_well) {
        detail::StateAtTime out;
        std::vector<std::vector<cdouble>> s_parts, e_parts;
        std::vector<int> labels;
        for (const auto& [n, label] : def.orbitals) {
            const auto& sp = splits_by_well.at(n);
            s_parts.push_back(sp.first);
            e_parts.push_back(sp.second);
            labels.push_back(label_index(label));
            out.p1.push_back(std::clamp(std::real(tridiag_inner(fem.mass_system, sp.first, sp.first)),
                                        0.0, 1.0));
        }
        out.frame = build_frame_from_parts(s_parts, e_parts, labels, d_int, dot_s, dot_e);
        out.reduced = reduce_system(assemble_state(out.frame, def.statistics));
        return out;
    };

    // well modes as complex nodal vectors for correlation projections
    std::map<int, std::vector<cdouble>> well_nodal;
    for (const auto& [which, n] : cfg.output.correlations) {
        if (well_nodal.count(n)) continue;
        const auto& w = wells[static_cast<std::size_t>(n - 1)].coefficients;
        well_nodal[n] = std::vector<cdouble>(w.begin(), w.end());
    }

    for (int i = 0; i < cfg.n_samples; ++i) {
        const double t = cfg.t_max * static_cast<double>(i) / static_cast<double>(cfg.n_samples - 1);

        // split parts of every distinct well orbital at this time; t = 0 takes
        // the exact initial states (zero environment part by construction)
        std::map<int, std::pair<std::vector<cdouble>, std::vector<cdouble>>> splits_by_well;
        if (i == 0) {
            for (int n : distinct_wells) {
                const auto& w = wells[static_cast<std::size_t>(n - 1)].coefficients;
                std::vector<cdouble> s(w.begin(), w.end());
                std::vector<cdouble> e(w.size(), cdouble{});
                splits_by_well[n] = {std::move(s), std::move(e)};
            }
        } else {
            std::vector<Orbital> at_t;
            for (int n : distinct_wells) at_t.push_back(evolve(expanded[n], t));
            auto psis = reconstruct_many(at_t, basis);
            for (std::size_t j = 0; j < distinct_wells.size(); ++j) {
                auto sp = split_nodal(fem, psis[j]);
                splits_by_well[distinct_wells[j]] = {std::move(sp.s_part), std::move(sp.e_part)};
            }
        }

        auto sa = build_state(cfg.state_a, splits_by_well);
        auto sb = build_state(cfg.state_b, splits_by_well);
        const auto al = align_frames(sa.frame, sb.frame, dot_s);

        TimeSeriesRow row;
        row.t = t;
        row.p1_a = sa.p1;
        row.p1_b = sb.p1;
        row.pk_a = number_distribution(sa.reduced);
        row.pk_b = number_distribution(sb.reduced);
        row.d_full = blockwise_distance(sa.reduced, sb.reduced, al);
        row.p_low = p_lower(sa.reduced, sb.reduced);
        row.p_up = p_upper(sa.reduced, sb.reduced);
        const auto ra = rspdm(sa.reduced);
        const auto rb = rspdm(sb.reduced);
        row.d_one = d_1p(ra, rb, al);
        for (int kp : cfg.output.kp)
            row.d_kp.push_back(
                d_kp(reduce_k_particles(sa.reduced, kp), reduce_k_particles(sb.reduced, kp), al));

        for (const auto& [which, n] : cfg.output.correlations) {
            const auto& st = (which == 'a') ? sa : sb;
            const auto& one = (which == 'a') ? ra : rb;
            // coordinates of the well mode in the state's system frame
            std::vector<cdouble> coords(st.frame.m_s);
            for (std::size_t j = 0; j < st.frame.m_s; ++j)
                coords[j] = dot_s(st.frame.s_modes[j], well_nodal.at(n));
            double val = 0.0;
            for (std::size_t c = 0; c < d_int; ++c)
                for (std::size_t j = 0; j < st.frame.m_s; ++j)
                    for (std::size_t j2 = 0; j2 < st.frame.m_s; ++j2)
                        val += std::real(std::conj(coords[j]) *
                                         one.one_particle_block(j * d_int + c, j2 * d_int + c) *
                                         coords[j2]);
            row.corr.push_back(val);
        }

        result.report.times.push_back(t);
        result.report.d_full.push_back(row.d_full);
        result.report.p_lower.push_back(row.p_low);
        result.report.p_upper.push_back(row.p_up);
        result.report.d_1p.push_back(row.d_one);
        for (std::size_t ki = 0; ki < cfg.output.kp.size(); ++ki)
            result.report.d_kp[cfg.output.kp[ki]].push_back(row.d_kp[ki]);
        result.rows.push_back(std::move(row));
    }

    auto scan = witness_scan(result.report);
    result.report.witnesses = scan.pairs;
    result.report.max_increase = scan.max_increase;

    // CSV: full-precision decimals, comma separated, LF endings
    std::string csv;
    for (std::size_t c = 0; c < result.header.size(); ++c) {
        if (c) csv += ',';
        csv += result.header[c];
    }
    csv += '\n';
    for (const auto& row : result.rows) {
        std::vector<double> vals;
        vals.push_back(row.t);
        vals.insert(vals.end(), row.p1_a.begin(), row.p1_a.end());
        vals.insert(vals.end(), row.p1_b.begin(), row.p1_b.end());
        vals.insert(vals.end(), row.pk_a.begin(), row.pk_a.end());
        vals.insert(vals.end(), row.pk_b.begin(), row.pk_b.end());
        vals.push_back(row.d_full);
        vals.push_back(row.p_low);
        vals.push_back(row.p_up);
        vals.push_back(row.d_one);
        vals.insert(vals.end(), row.d_kp.begin(), row.d_kp.end());
        vals.insert(vals.end(), row.corr.begin(), row.corr.end());
        for (std::size_t c = 0; c < vals.size(); ++c) {
            if (c) csv += ',';
            csv += detail::format_full(vals[c]);
        }
        csv += '\n';
    }
    result.csv_text = std::move(csv);

    if (!opts.out_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(opts.out_dir, ec);
        result.csv_path = opts.out_dir / cfg.output.csv;
        std::ofstream out(result.csv_path, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("run_scenario: cannot write " + result.csv_path.string());
        out.write(result.csv_text.data(), static_cast<std::streamsize>(result.csv_text.size()));

        if (cfg.output.plot) result.svg_paths = emit_plot(cfg, result, opts.out_dir);
    }
    return result;
}

} // namespace nmmb
