#include "doctest.h"

#include <cstdlib>
#include <sys/wait.h>
#include <filesystem>
#include <string>

#include "nmmb/scenario.hpp"

using namespace nmmb;
namespace fs = std::filesystem;

namespace {

const std::string small_config = R"(# e_cut spans the whole discrete spectrum of this small geometry
[potential]
l = 10
b = 1
r = 40
v0 = 0.5

[numerics]
h = 0.25
e_cut = 400
t_max = 3000
n_samples = 40
eps_complete = 1e-8
mode_cap = 8192

[state.a]
orbitals = 1

[state.b]
orbitals = 2

[output]
kp = 1
correlations = a:1, b:2
csv = smoke.csv
)";

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& stem) {
        path = fs::temp_directory_path() / ("nmmb-test-" + stem + "-" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

/// Minimal XML well-formedness check: balanced, properly nested tags.
bool xml_well_formed(const std::string& text) {
    std::vector<std::string> stack;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '<') {
            ++i;
            continue;
        }
        const auto end = text.find('>', i);
        if (end == std::string::npos) return false;
        std::string tag = text.substr(i + 1, end - i - 1);
        i = end + 1;
        if (tag.empty()) return false;
        if (tag.front() == '?' || tag.front() == '!') continue;
        const bool closing = tag.front() == '/';
        const bool self_closing = tag.back() == '/';
        if (closing) tag = tag.substr(1);
        if (self_closing) tag.pop_back();
        const auto sp = tag.find_first_of(" \t\n");
        const std::string name = sp == std::string::npos ? tag : tag.substr(0, sp);
        if (name.empty()) return false;
        if (closing) {
            if (stack.empty() || stack.back() != name) return false;
            stack.pop_back();
        } else if (!self_closing) {
            stack.push_back(name);
        }
    }
    return stack.empty();
}

}  // namespace

TEST_CASE("parse_config: minimal document gets the documented defaults") {
    auto cfg = parse_config("[potential]\nl = 50\nb = 2\nr = 4000\nv0 = 0.1\n");
    CHECK(cfg.h == 0.25);
    CHECK(cfg.effective_e_cut() == doctest::Approx(0.4));
    CHECK(cfg.t_max == 100000.0);
    CHECK(cfg.n_samples == 500);
    CHECK(cfg.state_a.orbitals.size() == 1);
    CHECK(cfg.state_b.orbitals.empty());
}

TEST_CASE("parse_config: validation and parse errors") {
    CHECK_THROWS_AS(parse_config("[potential]\nv0 = -1\n"), config_error);
    CHECK_THROWS_AS(parse_config("[potential]\nwidth = 3\n"), config_error);  // unknown key
    CHECK_THROWS_AS(parse_config("[misc]\nx = 1\n"), config_error);           // unknown section
    CHECK_THROWS_AS(parse_config("x = 1\n"), config_error);                   // key before section
    CHECK_THROWS_AS(parse_config("[numerics]\nn_samples = 1\n"), config_error);
    CHECK_THROWS_AS(parse_config("[state.a]\norbitals = 0\n"), config_error);  // well index >= 1
    CHECK_THROWS_AS(parse_config("[state.a]\nstatistics = ordered\nsymmetrize = true\n"), config_error);
    CHECK_THROWS_AS(parse_config("[output]\nkp = 2\n"), config_error);  // defaults hold 1 vs 0 particles

    // the error names the key and the line
    try {
        parse_config("[potential]\nl = 50\nbogus = 1\n");
        FAIL("expected config_error");
    } catch (const config_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("bogus") != std::string::npos);
        CHECK(msg.find("line 3") != std::string::npos);
    }
}

TEST_CASE("parse_config: fig3c preset pairs a symmetrized with an ordered state") {
    auto cfg = parse_config(presets().at("fig3c"));
    CHECK(cfg.state_a.statistics == Statistics::boson);
    CHECK(cfg.state_a.symmetrized());
    CHECK(cfg.state_b.statistics == Statistics::ordered);
    CHECK(!cfg.state_b.symmetrized());
    CHECK(cfg.state_a.orbitals.size() == 6);
    CHECK(cfg.output.kp == std::vector<int>{1, 2, 3, 4, 5});
}

TEST_CASE("parse_config: every preset parses and validates") {
    for (const auto& [name, text] : presets()) {
        CAPTURE(name);
        CHECK_NOTHROW(parse_config(text));
    }
}

TEST_CASE("cache: save/load roundtrip is exact, key mismatch recomputes") {
    TempDir dir("cache");
    const PotentialSpec spec{10.0, 1.0, 40.0, 0.5};
    auto fem = std::make_shared<const FemSystem>(assemble_fem(spec, 0.25));
    auto basis = solve_modes(fem, 4.0);
    cache::save_basis(basis, dir.path);

    auto loaded = cache::load_basis(dir.path, spec, 0.25, 4.0);
    REQUIRE(loaded.has_value());
    CHECK(loaded->energies == basis.energies);  // bit-exact
    CHECK(loaded->modes == basis.modes);

    CHECK(!cache::load_basis(dir.path, spec, 0.125, 4.0).has_value());
    CHECK(!cache::load_basis(dir.path, spec, 0.25, 2.0).has_value());
    PotentialSpec other = spec;
    other.v0 = 0.6;
    CHECK(!cache::load_basis(dir.path, other, 0.25, 4.0).has_value());

    CHECK(cache::clear(dir.path) == 1);
    CHECK(!cache::load_basis(dir.path, spec, 0.25, 4.0).has_value());
}

TEST_CASE("run_scenario: small end-to-end run, invariants and determinism") {
    TempDir work("run");
    auto cfg = parse_config(small_config);

    RunOptions opts;
    opts.cache_dir = work.path / "cache";
    opts.out_dir = work.path / "out1";
    auto r1 = run_scenario(cfg, opts);  // cold cache

    REQUIRE(r1.rows.size() == 40);
    CHECK(r1.header.size() == 1 + 2 + 2 + 2 + 4 + 1 + 2);  // t, P1 x2, Pk x(2+2), metrics, kp1, corr x2

    // every row: probabilities in range, sandwich and contractivity
    for (const auto& row : r1.rows) {
        for (double p : row.p1_a) CHECK((p >= -1e-9 && p <= 1.0 + 1e-9));
        for (double p : row.pk_a) CHECK((p >= -1e-9 && p <= 1.0 + 1e-9));
        for (double p : row.pk_b) CHECK((p >= -1e-9 && p <= 1.0 + 1e-9));
        CHECK(row.p_low <= row.d_full + 1e-10);
        CHECK(row.d_full <= row.p_up + 1e-10);
        CHECK(row.d_one <= row.d_full + 1e-10);
        CHECK(row.d_kp[0] <= row.d_full + 1e-10);
    }

    // the t = 0 row: exactly confined orthogonal initial states
    const auto& r0 = r1.rows.front();
    CHECK(r0.p1_a[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r0.d_full == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(r0.p_low == doctest::Approx(0.0).epsilon(1e-12));

    // repeated runs produce byte-identical CSV (cold vs warm cache too)
    opts.out_dir = work.path / "out2";
    auto r2 = run_scenario(cfg, opts);
    opts.out_dir = work.path / "out3";
    auto r3 = run_scenario(cfg, opts);
    CHECK(r1.csv_text == r2.csv_text);
    CHECK(r2.csv_text == r3.csv_text);
    CHECK(r1.csv_text.find("\r") == std::string::npos);  // LF endings
}

TEST_CASE("run_scenario: emitted SVG panels are well-formed XML") {
    TempDir work("plot");
    auto cfg = parse_config(small_config);
    cfg.output.plot = true;
    cfg.n_samples = 16;

    RunOptions opts;
    opts.cache_dir = work.path / "cache";
    opts.out_dir = work.path / "out";
    auto res = run_scenario(cfg, opts);
    REQUIRE(res.svg_paths.size() == 2);
    for (const auto& p : res.svg_paths) {
        std::ifstream in(p);
        REQUIRE(in.good());
        std::stringstream ss;
        ss << in.rdbuf();
        const std::string svg = ss.str();
        CHECK(xml_well_formed(svg));
        CHECK(svg.find("polyline") != std::string::npos);
    }

    // a p1-only selection renders a single semilog panel
    cfg.output.panels = {"p1"};
    fs::create_directories(work.path / "single");
    auto paths = emit_plot(cfg, res, work.path / "single");
    REQUIRE(paths.size() == 1);
    CHECK(paths[0].filename().string().find("_p1") != std::string::npos);

    // an empty panel selection is an error
    cfg.output.panels.clear();
    CHECK_THROWS_AS(emit_plot(cfg, res, work.path / "single"), domain_error);
}

TEST_CASE("CLI: exit codes for success and configuration errors") {
    // the binary sits next to the test runner when invoked through ctest
    if (!fs::exists("./nmmb")) return;
    const int ok = std::system("./nmmb presets list > /dev/null 2>&1");
    CHECK(WEXITSTATUS(ok) == 0);
    const int bad_preset = std::system("./nmmb run --preset nosuch > /dev/null 2>&1");
    CHECK(WEXITSTATUS(bad_preset) == 2);
    const int bad_flag = std::system("./nmmb run --frobnicate > /dev/null 2>&1");
    CHECK(WEXITSTATUS(bad_flag) == 2);
}

TEST_CASE("render_svg: empty selection is an error; semilog panel requested") {
    CHECK_THROWS_AS(render_svg("t", "x", "y", {}, false), domain_error);
    PlotSeries s;
    s.name = "P1";
    for (int i = 0; i < 10; ++i) {
        s.x.push_back(i);
        s.y.push_back(std::exp(-i));
    }
    const auto svg = render_svg("decay", "t", "P1", {s}, true);
    CHECK(xml_well_formed(svg));
    CHECK(svg.find("1e") != std::string::npos);  // log-scale tick labels
}
