#include <catch_amalgamated.hpp>

#include "eitmag/stackio.hpp"

#include <filesystem>
#include <sstream>

using namespace eitmag;
using Catch::Approx;

namespace {

ImageStack tiny_stack() {
    ImageStack s;
    s.camera.width = 2;
    s.camera.height = 2;
    s.detunings_Hz = {6.834e9 + 61e3};
    s.frames = {0, 1, 2, 4095};
    return s;
}

std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("eitmag_stackio_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("little-endian DN payload", "[stackio]") {
    const std::string bytes = serialize_stack(tiny_stack());
    REQUIRE(bytes.size() >= 8);
    CHECK(bytes.substr(0, 8) == "EITSTK01");
    const std::string payload = bytes.substr(bytes.size() - 8);
    const std::string expected{'\x00', '\x00', '\x01', '\x00', '\x02', '\x00', '\xFF', '\x0F'};
    CHECK(payload == expected);

    const std::uint32_t header_len = static_cast<unsigned char>(bytes[8]) | static_cast<unsigned char>(bytes[9]) << 8 |
                                     static_cast<unsigned char>(bytes[10]) << 16 |
                                     static_cast<unsigned char>(bytes[11]) << 24;
    CHECK(bytes.size() == 12 + header_len + 8);
    const auto header = nlohmann::json::parse(bytes.substr(12, header_len));
    CHECK(header["format_version"] == 1);
    CHECK(header["camera"]["width"] == 2);
    CHECK(header["camera"]["bit_depth"] == 12);
}

TEST_CASE("stack round trip", "[stackio]") {
    Scene scene;
    CameraConfig cam;
    cam.width = 30;
    cam.height = 20;
    const ImageStack s = simulate_stack(scene, SweepConfig{}, NoiseConfig{0.5, 77}, cam);
    const std::string bytes = serialize_stack(s);
    const ImageStack back = parse_stack(bytes);
    CHECK(back.frames == s.frames);
    CHECK(back.detunings_Hz == s.detunings_Hz);
    CHECK(back.camera.width == 30);
    CHECK(back.camera.pixel_pitch_m == s.camera.pixel_pitch_m);
    CHECK(back.metadata == s.metadata);
    CHECK(serialize_stack(back) == bytes);

    const auto header = stack_header(s);
    CHECK(header["seed"] == 77);
    CHECK(header["sweep"]["step_Hz"] == 200.0);

    const auto dir = temp_dir("roundtrip");
    const std::size_t written = write_stack(s, dir / "s.stk");
    CHECK(written == bytes.size());
    CHECK(std::filesystem::file_size(dir / "s.stk") == bytes.size());
    CHECK(read_stack(dir / "s.stk").frames == s.frames);
    CHECK_FALSE(std::filesystem::exists(dir / "s.stk.tmp"));

    std::stringstream ss;
    write_stack(s, ss);
    CHECK(read_stack(ss).frames == s.frames);
}

TEST_CASE("default stack payload size", "[stackio]") {
    const ImageStack s = simulate_stack(Scene{}, SweepConfig{}, NoiseConfig{}, CameraConfig{}, 4);
    const std::string bytes = serialize_stack(s);
    const std::uint32_t header_len = static_cast<unsigned char>(bytes[8]) | static_cast<unsigned char>(bytes[9]) << 8 |
                                     static_cast<unsigned char>(bytes[10]) << 16 |
                                     static_cast<unsigned char>(bytes[11]) << 24;
    CHECK(bytes.size() - 12 - header_len == 8080000);
}

TEST_CASE("corrupt stacks are rejected", "[stackio][errors]") {
    const std::string good = serialize_stack(tiny_stack());
    std::string bad_magic = good;
    bad_magic[3] = 'X';
    CHECK_THROWS_AS(parse_stack(bad_magic), FormatError);
    CHECK_THROWS_AS(parse_stack(good.substr(0, good.size() - 1)), FormatError);
    CHECK_THROWS_AS(parse_stack(good + "xx"), FormatError);
    CHECK_THROWS_AS(parse_stack(good.substr(0, 10)), FormatError);
    CHECK_THROWS_AS(parse_stack(""), FormatError);

    std::string too_bright = good;
    too_bright[too_bright.size() - 1] = '\x10';  // 4095 -> 4351 > 12-bit max
    CHECK_THROWS_AS(parse_stack(too_bright), FormatError);

    std::string broken_json = good;
    broken_json[12] = '#';
    CHECK_THROWS_AS(parse_stack(broken_json), FormatError);

    ImageStack mismatched = tiny_stack();
    mismatched.frames.pop_back();
    CHECK_THROWS_AS(serialize_stack(mismatched), FormatError);

    CHECK_THROWS_AS(read_stack(std::filesystem::path("/nonexistent/dir/x.stk")), IoError);
}

TEST_CASE("writing into a missing directory is an I/O error", "[stackio][errors]") {
    CHECK_THROWS_AS(write_stack(tiny_stack(), std::filesystem::path("/nonexistent/dir/x.stk")), IoError);
}

TEST_CASE("field CSV layout", "[stackio]") {
    FieldMap one(1, 1, 10e-6);
    one.set(0, 0, 0.0435);
    const std::string csv = field_csv(one);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
    CHECK(csv == "x_m,y_m,B_gauss,valid\n0,0,0.0435,1\n");

    FieldMap two(2, 1, 10e-6);
    two.set(1, 0, 0.04);
    CHECK(field_csv(two) == "x_m,y_m,B_gauss,valid\n-1e-05,0,,0\n0,0,0.04,1\n");
}

TEST_CASE("field CSV round trip", "[stackio]") {
    FieldMap m(7, 5, 10e-6);
    for (int iy = 0; iy < 5; ++iy) {
        for (int ix = 0; ix < 7; ++ix) {
            if ((ix + iy) % 3 != 0) m.set(ix, iy, 0.0435 + 1e-6 * ix - 3e-7 * iy);
        }
    }
    std::stringstream ss;
    export_field_csv(m, ss);
    const FieldMap back = read_field_csv(ss);
    CHECK(back.width == 7);
    CHECK(back.height == 5);
    CHECK(back.pixel_pitch_m == Approx(10e-6).epsilon(1e-9));
    CHECK(back.valid == m.valid);
    for (std::size_t i = 0; i < m.values_G.size(); ++i) {
        if (m.valid[i] != 0) CHECK(back.values_G[i] == m.values_G[i]);
    }

    std::istringstream junk("a,b\n1,2\n");
    CHECK_THROWS_AS(read_field_csv(junk), FormatError);
    std::istringstream short_row("x_m,y_m,B_gauss,valid\n0,0,1\n");
    CHECK_THROWS_AS(read_field_csv(short_row), FormatError);
}

TEST_CASE("16-bit PGM preview scaling", "[stackio]") {
    FieldMap m(2, 1, 10e-6);
    m.set(0, 0, 2.0);
    m.set(1, 0, 2.0);
    const std::string full = preview_pgm(m, 1.0, 2.0);
    const std::string header = "P5\n# scale_min=1 scale_max=2\n2 1\n65535\n";
    REQUIRE(full.substr(0, header.size()) == header);
    CHECK(full.substr(header.size()) == std::string{'\xFF', '\xFF', '\xFF', '\xFF'});

    const std::string low = preview_pgm(m, 2.0, 3.0);
    CHECK(low.substr(low.size() - 4) == std::string(4, '\0'));

    FieldMap mid(1, 1, 10e-6);
    mid.set(0, 0, 1.5);
    const std::string p = preview_pgm(mid, 1.0, 2.0);
    const int v = static_cast<unsigned char>(p[p.size() - 2]) << 8 | static_cast<unsigned char>(p[p.size() - 1]);
    CHECK(std::abs(v - 32768) <= 1);

    FieldMap masked(1, 1, 10e-6);
    const std::string q = preview_pgm(masked, 0.0, 1.0);
    CHECK(q.substr(q.size() - 2) == std::string(2, '\0'));

    CHECK_THROWS_AS(preview_pgm(m, 2.0, 2.0), DomainError);

    const std::string frame = preview_pgm(tiny_stack(), 0, 0.0, 4095.0);
    CHECK(frame.substr(frame.size() - 2) == std::string{'\xFF', '\xFF'});
    CHECK_THROWS_AS(preview_pgm(tiny_stack(), 1, 0.0, 4095.0), DomainError);
}
