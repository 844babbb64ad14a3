// nmmb: trace-distance non-Markovianity measures for few-body tunneling in an
// asymmetric double well. Subcommands: run, cache clear, presets list.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "nmmb/scenario.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw nmmb::io_error("cannot read config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* witness_kind(nmmb::DistanceReport::Witness::Kind k) {
    return k == nmmb::DistanceReport::Witness::Kind::bounds ? "bounds" : "mixed";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"many-body non-Markovianity in an asymmetric double well"};
    app.require_subcommand(1);

    std::string cache_dir = ".nmmb-cache";
    app.add_option("--cache-dir", cache_dir, "spectral-basis cache directory");

    // run
    auto* run = app.add_subcommand("run", "run a scenario from a preset or a config file");
    run->fallthrough();  // app-level options may follow the subcommand
    run->set_help_flag("--help", "print help");  // frees -h for the mesh override
    std::string preset, config_path, out_dir = "out";
    double h_override = 0, emax_override = 0, tmax_override = 0;
    int samples_override = 0;
    bool plot = false;
    std::string kp_override;
    run->add_option("--preset", preset, "built-in scenario name (see: presets list)");
    run->add_option("--config", config_path, "path to a scenario config file");
    run->add_option("--h", h_override, "mesh spacing override");
    run->add_option("--emax", emax_override, "energy cutoff override");
    run->add_option("--tmax", tmax_override, "time-grid end override");
    run->add_option("--samples", samples_override, "time-grid sample count override");
    run->add_option("--out", out_dir, "output directory");
    run->add_flag("--plot", plot, "also emit SVG panels");
    run->add_option("--kp", kp_override, "comma list of k-particle distance orders");

    // cache clear
    auto* cache_cmd = app.add_subcommand("cache", "cache maintenance");
    cache_cmd->fallthrough();
    auto* cache_clear = cache_cmd->add_subcommand("clear", "delete cached spectral bases");
    cache_clear->fallthrough();

    // presets list
    auto* presets_cmd = app.add_subcommand("presets", "preset inspection");
    auto* presets_list = presets_cmd->add_subcommand("list", "list built-in scenario presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*presets_cmd) {
            if (*presets_list) {
                for (const auto& [name, text] : nmmb::presets()) {
                    auto cfg = nmmb::parse_config(text);
                    std::printf("%-8s %zu vs %zu particles (%s vs %s)\n", name.c_str(),
                                cfg.state_a.orbitals.size(), cfg.state_b.orbitals.size(),
                                nmmb::to_string(cfg.state_a.statistics),
                                nmmb::to_string(cfg.state_b.statistics));
                }
            }
            return 0;
        }
        if (*cache_cmd) {
            if (*cache_clear) {
                const auto removed = nmmb::cache::clear(cache_dir);
                std::printf("removed %zu cached basis file(s) from %s\n", removed, cache_dir.c_str());
            }
            return 0;
        }

        if (preset.empty() == config_path.empty())
            throw nmmb::config_error("run: give exactly one of --preset or --config");

        std::string text;
        if (!preset.empty()) {
            const auto& map = nmmb::presets();
            auto it = map.find(preset);
            if (it == map.end()) throw nmmb::config_error("run: unknown preset '" + preset + "'");
            text = it->second;
        } else {
            text = read_file(config_path);
        }

        auto cfg = nmmb::parse_config(text);
        if (h_override > 0) cfg.h = h_override;
        if (emax_override > 0) cfg.e_cut = emax_override;
        if (tmax_override > 0) cfg.t_max = tmax_override;
        if (samples_override > 0) cfg.n_samples = samples_override;
        if (plot) cfg.output.plot = true;
        if (!kp_override.empty()) {
            cfg.output.kp.clear();
            for (const auto& item : nmmb::detail::split_list(kp_override))
                cfg.output.kp.push_back(std::stoi(item));
        }
        cfg.validate();

        nmmb::RunOptions opts;
        opts.cache_dir = cache_dir;
        opts.out_dir = out_dir;
        auto result = nmmb::run_scenario(cfg, opts);

        std::printf("wrote %s (%zu rows)\n", result.csv_path.string().c_str(), result.rows.size());
        for (const auto& p : result.svg_paths) std::printf("wrote %s\n", p.string().c_str());
        for (const auto& [n, defect] : result.expand_defects)
            std::printf("orbital |%d>: completeness defect %.3e\n", n, defect);
        std::printf("max increase of D: %.6g\n", result.report.max_increase);
        if (result.report.witnesses.empty()) {
            std::printf("no non-Markovianity witnesses detected\n");
        } else {
            for (const auto& w : result.report.witnesses)
                std::printf("witness (%s): t0 = %.6g, t1 = %.6g\n", witness_kind(w.kind), w.t0, w.t1);
        }
        return 0;
    } catch (const nmmb::config_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const nmmb::resource_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const nmmb::cutoff_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const nmmb::internal_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
