#include <catch_amalgamated.hpp>

#include "eitmag/cli.hpp"

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <map>
#include <sstream>

using namespace eitmag;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

Run run(std::initializer_list<std::string> args) {
    std::vector<std::string> storage{"eitmag"};
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& s : storage) argv.push_back(s.c_str());
    std::ostringstream out;
    std::ostringstream err;
    Run r;
    r.code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("eitmag_cli_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::map<std::string, std::string> key_values(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string k;
    std::string v;
    while (is >> k >> v) kv[k] = v;
    return kv;
}

}  // namespace

TEST_CASE("simulate writes a deterministic default stack", "[cli]") {
    const auto dir = temp_dir("simulate");
    const std::string a = (dir / "a.stk").string();
    const std::string b = (dir / "b.stk").string();
    const Run r = run({"simulate", "--out", a, "--threads", "4"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("simulated 200x200x101 stack (detunings 101, seed 1)") != std::string::npos);
    REQUIRE(run({"simulate", "--out", b}).code == 0);
    CHECK(slurp(a) == slurp(b));
    const ImageStack s = read_stack(std::filesystem::path(a));
    CHECK(s.frames.size() == 200u * 200u * 101u);

    const std::string c = (dir / "c.stk").string();
    REQUIRE(run({"simulate", "--out", c, "--seed", "2"}).code == 0);
    CHECK(slurp(a) != slurp(c));
}

TEST_CASE("simulate rejects bad configuration", "[cli][errors]") {
    const auto dir = temp_dir("simulate_bad");
    const std::string out = (dir / "x.stk").string();
    CHECK(run({"simulate", "--out", out, "--set", "sweep.step_Hz=30000"}).code == 2);
    CHECK(run({"simulate", "--out", out, "--set", "no.such_key=1"}).code == 2);
    CHECK(run({"simulate", "--out", out, "--config", (dir / "missing.conf").string()}).code == 2);
    CHECK(run({"simulate"}).code == 2);
    CHECK(run({}).code == 2);
    CHECK(run({"simulate", "--out", "/nonexistent/dir/x.stk"}).code == 3);
    CHECK_FALSE(std::filesystem::exists(out));
}

TEST_CASE("reconstruct produces maps and diagnostics", "[cli]") {
    const auto dir = temp_dir("reconstruct");
    const std::string stack = (dir / "clean.stk").string();
    REQUIRE(run({"simulate", "--out", stack, "--set", "noise.sigma_frame=0", "--threads", "4"}).code == 0);
    const std::string prefix = (dir / "clean").string();
    const Run r = run({"reconstruct", stack, "--out", prefix, "--threads", "4"});
    REQUIRE(r.code == 0);
    CHECK(std::filesystem::exists(prefix + ".csv"));
    CHECK(std::filesystem::exists(prefix + ".pgm"));
    const auto diag = key_values(slurp(prefix + ".diag.txt"));
    CHECK(diag.at("pixels") == "40000");
    CHECK(diag.at("peak_at_edge") == "0");
    const double lo = std::stod(diag.at("min_B_mG"));
    const double hi = std::stod(diag.at("max_B_mG"));
    CHECK(lo >= 43.58 - 2.2);
    CHECK(hi <= 43.58 + 2.2);
    CHECK(lo < 43.58);
    CHECK(hi > 43.58);

    const std::string pgm = slurp(prefix + ".pgm");
    CHECK(pgm.rfind("P5\n# scale_min=", 0) == 0);

    SECTION("compare against the analytic scene") {
        const std::string cmp = (dir / "cmp").string();
        const Run c = run({"compare", prefix + ".csv", "--out", cmp});
        REQUIRE(c.code == 0);
        const auto stats = key_values(slurp(cmp + ".stats.txt"));
        CHECK(stats.at("reference") == "bare");
        CHECK(std::stod(stats.at("rms_diff_mG")) <= 0.02);
        const std::string slice = slurp(cmp + ".slice.csv");
        CHECK(slice.rfind("x_m,B_measured_G,B_biot_savart_G,B_shielded_G\n", 0) == 0);
        const FieldMap m = read_field_csv(std::filesystem::path(prefix + ".csv"));
        int valid_in_row = 0;
        for (int ix = 0; ix < m.width; ++ix) valid_in_row += m.is_valid(ix, m.height / 2) ? 1 : 0;
        CHECK(std::count(slice.begin(), slice.end(), '\n') == valid_in_row + 1);
    }

    SECTION("compare a map with itself") {
        const std::string cmp = (dir / "self").string();
        REQUIRE(run({"compare", prefix + ".csv", prefix + ".csv", "--out", cmp}).code == 0);
        const auto stats = key_values(slurp(cmp + ".stats.txt"));
        CHECK(stats.at("reference") == "map");
        CHECK(std::stod(stats.at("max_abs_diff_mG")) == 0.0);
        CHECK(std::stod(stats.at("uncertainty_rms_mG")) == 0.0);
    }

    SECTION("compare maps of different size") {
        FieldMap small(3, 3, 10e-6);
        small.set(1, 1, 0.04);
        export_field_csv(small, dir / "small.csv");
        CHECK(run({"compare", prefix + ".csv", (dir / "small.csv").string(), "--out", (dir / "mm").string()}).code ==
              2);
    }
}

TEST_CASE("reconstruct reports malformed input", "[cli][errors]") {
    const auto dir = temp_dir("reconstruct_bad");
    const std::string stack = (dir / "s.stk").string();
    REQUIRE(run({"simulate", "--out", stack, "--set", "camera.width_px=20", "--set", "camera.height_px=20"}).code ==
            0);
    std::string bytes = slurp(stack);
    bytes.pop_back();
    {
        std::ofstream os(dir / "short.stk", std::ios::binary);
        os << bytes;
    }
    CHECK(run({"reconstruct", (dir / "short.stk").string(), "--out", (dir / "r").string()}).code == 4);
    CHECK(run({"reconstruct", (dir / "absent.stk").string(), "--out", (dir / "r").string()}).code == 4);
    CHECK(run({"compare", (dir / "absent.csv").string()}).code == 4);
}

TEST_CASE("zero contrast reconstructs with a full failure report", "[cli]") {
    const auto dir = temp_dir("zero_contrast");
    const std::string stack = (dir / "flat.stk").string();
    REQUIRE(run({"simulate", "--out", stack, "--set", "line.contrast=0", "--set", "noise.sigma_frame=0", "--set",
                 "camera.width_px=50", "--set", "camera.height_px=50"})
                .code == 0);
    const std::string prefix = (dir / "flat").string();
    const Run r = run({"reconstruct", stack, "--out", prefix});
    CHECK(r.code == 0);
    CHECK(r.err.find("100% peak failures") != std::string::npos);
    const auto diag = key_values(slurp(prefix + ".diag.txt"));
    CHECK(diag.at("peak_failure_fraction") == "1");
    CHECK(diag.at("valid") == "0");
}

TEST_CASE("sensitivity command", "[cli]") {
    const Run r = run({"sensitivity", "--snr", "100"});
    CHECK(r.code == 0);
    CHECK(r.out == "delta_B = 4.518e-06 G = 0.004518 mG\n");
    const Run half = run({"sensitivity", "--snr", "200"});
    CHECK(half.out == "delta_B = 2.259e-06 G = 0.002259 mG\n");
    CHECK(run({"sensitivity", "--snr", "100", "--n", "0"}).code == 2);
    CHECK(run({"sensitivity"}).code == 2);
}

TEST_CASE("gradtensor command", "[cli]") {
    const Run r = run({"gradtensor"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("-2.168") != std::string::npos);
    CHECK(r.out.find("maxwell check (residual <= 1e-6 x max entry): PASS") != std::string::npos);

    const Run uniform = run({"gradtensor", "--set", "scene.model=uniform", "--set", "scene.uniform_field_mG=40"});
    CHECK(uniform.code == 0);
    CHECK(uniform.out.find("PASS") != std::string::npos);

    CHECK(run({"gradtensor", "--point", "0,0,0"}).code == 2);
    CHECK(run({"gradtensor", "--point", "1,2"}).code == 2);
}

TEST_CASE("shipped defaults match print-defaults", "[cli]") {
    const Run r = run({"print-defaults"});
    REQUIRE(r.code == 0);
    CHECK(r.out == slurp(EITMAG_DEFAULTS_FILE));
    CHECK(r.out == format_config(RunConfig{}));
}
