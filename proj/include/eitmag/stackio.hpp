#pragma once

// File formats.
//
// Stack file (.eitstk), all integers little-endian:
//   "EITSTK01" | u32 header_length | header_length bytes of UTF-8 JSON | payload
// payload: u16 DN values, detuning-major, then row-major (y outer, x inner).
//
// Field-map CSV: header "x_m,y_m,B_gauss,valid", one row per pixel, y outer, numbers in
// shortest round-trip form.
// Masked pixels leave B empty and carry valid = 0.
//
// Preview: binary 16-bit PGM (P5) with the scale bounds recorded in a comment.

#include "eitmag/core.hpp"
#include "eitmag/recon.hpp"
#include "eitmag/stack_sim.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace eitmag {

inline constexpr std::string_view kStackMagic = "EITSTK01";
inline constexpr int kStackFormatVersion = 1;

namespace detail {

inline void put_u16le(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFFU));
    out.push_back(static_cast<char>((v >> 8) & 0xFFU));
}

inline void put_u32le(std::string& out, std::uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8) {
        out.push_back(static_cast<char>((v >> shift) & 0xFFU));
    }
}

inline std::uint32_t get_u32le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::size_t write_bytes(std::ostream& os, const std::string& bytes) {
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) {
        throw IoError("write failed");
    }
    return bytes.size();
}

/// Shortest text that parses back to exactly `v`.
inline std::string format_g(double v) {
    std::array<char, 64> buf{};
    const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), r.ptr);
}

}  // namespace detail

/// Writes `bytes` to `path` through a temporary file and a rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) {
            throw IoError("cannot open " + tmp.string() + " for writing");
        }
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        os.flush();
        if (!os) {
            std::error_code ignored;
            std::filesystem::remove(tmp, ignored);
            throw IoError("write failed: " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot rename into " + path.string());
    }
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline nlohmann::json stack_header(const ImageStack& stack) {
    const CameraConfig& c = stack.camera;
    nlohmann::json h;
    h["format_version"] = kStackFormatVersion;
    h["camera"] = {{"width", c.width},
                   {"height", c.height},
                   {"bit_depth", c.bit_depth},
                   {"pixel_pitch_m", c.pixel_pitch_m},
                   {"full_scale", c.full_scale},
                   {"frames_averaged", c.frames_averaged},
                   {"frame_rate_Hz", c.frame_rate_Hz}};
    h["detunings_Hz"] = stack.detunings_Hz;
    h["scene"] = stack.metadata;
    if (stack.metadata.contains("noise") && stack.metadata["noise"].contains("seed")) {
        h["seed"] = stack.metadata["noise"]["seed"];
    }
    if (stack.metadata.contains("sweep")) {
        h["sweep"] = stack.metadata["sweep"];
    }
    return h;
}

inline std::string serialize_stack(const ImageStack& stack) {
    stack.validate();
    const std::string header = stack_header(stack).dump();
    std::string out;
    out.reserve(kStackMagic.size() + 4 + header.size() + 2 * stack.frames.size());
    out.append(kStackMagic);
    detail::put_u32le(out, static_cast<std::uint32_t>(header.size()));
    out.append(header);
    for (std::uint16_t dn : stack.frames) {
        detail::put_u16le(out, dn);
    }
    return out;
}

inline std::size_t write_stack(const ImageStack& stack, std::ostream& os) {
    return detail::write_bytes(os, serialize_stack(stack));
}

inline std::size_t write_stack(const ImageStack& stack, const std::filesystem::path& path) {
    const std::string bytes = serialize_stack(stack);
    write_file_atomic(path, bytes);
    return bytes.size();
}

inline ImageStack parse_stack(std::string_view bytes) {
    const std::size_t prefix = kStackMagic.size() + 4;
    if (bytes.size() < prefix || bytes.substr(0, kStackMagic.size()) != kStackMagic) {
        throw FormatError("not a stack file (bad magic)");
    }
    const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::uint32_t header_length = detail::get_u32le(raw + kStackMagic.size());
    if (bytes.size() - prefix < header_length) {
        throw FormatError("truncated stack header");
    }

    nlohmann::json h;
    try {
        h = nlohmann::json::parse(bytes.substr(prefix, header_length));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("stack header is not valid JSON: ") + e.what());
    }

    ImageStack stack;
    try {
        if (h.at("format_version").get<int>() != kStackFormatVersion) {
            throw FormatError("unsupported stack format version");
        }
        const auto& c = h.at("camera");
        stack.camera.width = c.at("width").get<int>();
        stack.camera.height = c.at("height").get<int>();
        stack.camera.bit_depth = c.at("bit_depth").get<int>();
        stack.camera.pixel_pitch_m = c.at("pixel_pitch_m").get<double>();
        stack.camera.full_scale = c.at("full_scale").get<double>();
        stack.camera.frames_averaged = c.at("frames_averaged").get<int>();
        stack.camera.frame_rate_Hz = c.at("frame_rate_Hz").get<double>();
        stack.detunings_Hz = h.at("detunings_Hz").get<std::vector<double>>();
        stack.metadata = h.value("scene", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("stack header is incomplete: ") + e.what());
    }
    if (stack.camera.width < 1 || stack.camera.height < 1) {
        throw FormatError("stack dimensions must be positive");
    }

    const std::size_t count = stack.detunings_Hz.size() * stack.camera.pixel_count();
    const std::size_t payload = bytes.size() - prefix - header_length;
    if (payload != 2 * count) {
        throw FormatError("stack payload holds " + std::to_string(payload) + " bytes, expected " +
                          std::to_string(2 * count));
    }
    stack.frames.resize(count);
    const unsigned char* p = raw + prefix + header_length;
    for (std::size_t i = 0; i < count; ++i) {
        stack.frames[i] = static_cast<std::uint16_t>(p[2 * i] | (p[2 * i + 1] << 8));
    }
    stack.validate();
    return stack;
}

inline ImageStack read_stack(std::istream& is) {
    const std::string bytes{std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
    return parse_stack(bytes);
}

inline ImageStack read_stack(const std::filesystem::path& path) { return parse_stack(read_file(path)); }

// ---------------------------------------------------------------------------
// CSV

inline std::string field_csv(const FieldMap& map) {
    map.validate();
    std::string out = "x_m,y_m,B_gauss,valid\n";
    for (int iy = 0; iy < map.height; ++iy) {
        for (int ix = 0; ix < map.width; ++ix) {
            const Vec2 pos = map.position(ix, iy);
            out += detail::format_g(pos[0]);
            out += ',';
            out += detail::format_g(pos[1]);
            out += ',';
            if (map.is_valid(ix, iy)) {
                out += detail::format_g(map.at(ix, iy));
                out += ",1\n";
            } else {
                out += ",0\n";
            }
        }
    }
    return out;
}

inline std::size_t export_field_csv(const FieldMap& map, std::ostream& os) {
    return detail::write_bytes(os, field_csv(map));
}

inline std::size_t export_field_csv(const FieldMap& map, const std::filesystem::path& path) {
    const std::string bytes = field_csv(map);
    write_file_atomic(path, bytes);
    return bytes.size();
}

/// Parses a CSV written by export_field_csv. Width is the length of the first row
/// (constant y), the pitch is taken from the coordinate spacing.
inline FieldMap read_field_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "x_m,y_m,B_gauss,valid") {
        throw FormatError("field CSV header missing");
    }
    struct Row {
        double x, y, b;
        bool valid;
    };
    std::vector<Row> rows;
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        std::array<std::string, 4> cells;
        std::size_t col = 0;
        for (char ch : line) {
            if (ch == ',') {
                if (++col >= cells.size()) {
                    throw FormatError("field CSV row has too many columns");
                }
            } else {
                cells[col] += ch;
            }
        }
        if (col != 3) {
            throw FormatError("field CSV row must have 4 columns");
        }
        try {
            Row r{std::stod(cells[0]), std::stod(cells[1]), 0.0, cells[3] == "1"};
            if (!r.valid && cells[3] != "0") {
                throw FormatError("valid flag must be 0 or 1");
            }
            r.b = r.valid ? std::stod(cells[2]) : FieldMap::kMasked;
            rows.push_back(r);
        } catch (const std::logic_error&) {
            throw FormatError("unparseable number in field CSV: " + line);
        }
    }
    if (rows.empty()) {
        throw FormatError("field CSV has no rows");
    }
    std::size_t width = 1;
    while (width < rows.size() && rows[width].y == rows[0].y) {
        ++width;
    }
    if (rows.size() % width != 0) {
        throw FormatError("field CSV rows do not form a rectangle");
    }
    const std::size_t height = rows.size() / width;
    double pitch = 10.0e-6;
    if (width > 1) {
        pitch = rows[1].x - rows[0].x;
    } else if (height > 1) {
        pitch = rows[width].y - rows[0].y;
    }
    if (!(pitch > 0.0)) {
        throw FormatError("field CSV coordinates are not increasing");
    }
    FieldMap map(static_cast<int>(width), static_cast<int>(height), pitch);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].valid) {
            map.values_G[i] = rows[i].b;
            map.valid[i] = 1;
        }
    }
    map.validate();
    return map;
}

inline FieldMap read_field_csv(const std::filesystem::path& path) {
    std::istringstream is(read_file(path));
    return read_field_csv(is);
}

// ---------------------------------------------------------------------------
// PGM previews

namespace detail {

inline std::string pgm16(int width, int height, const std::vector<double>& values, const std::vector<std::uint8_t>& valid,
                         double lo, double hi) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
        throw DomainError("preview scale bounds must be finite with min < max");
    }
    std::string out = "P5\n# scale_min=" + format_g(lo) + " scale_max=" + format_g(hi) + "\n" +
                      std::to_string(width) + " " + std::to_string(height) + "\n65535\n";
    out.reserve(out.size() + 2 * values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint16_t v = 0;
        if (valid[i] != 0) {
            const double t = std::clamp((values[i] - lo) / (hi - lo), 0.0, 1.0);
            v = static_cast<std::uint16_t>(std::floor(t * 65535.0 + 0.5));
        }
        // PGM stores 16-bit samples most significant byte first.
        out.push_back(static_cast<char>(v >> 8));
        out.push_back(static_cast<char>(v & 0xFFU));
    }
    return out;
}

}  // namespace detail

inline std::string preview_pgm(const FieldMap& map, double lo_G, double hi_G) {
    return detail::pgm16(map.width, map.height, map.values_G, map.valid, lo_G, hi_G);
}

inline std::string preview_pgm(const ImageStack& stack, std::size_t frame, double lo_dn, double hi_dn) {
    if (frame >= stack.frame_count()) {
        throw DomainError("frame index out of range");
    }
    const std::size_t n = stack.camera.pixel_count();
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        values[i] = stack.frames[frame * n + i];
    }
    return detail::pgm16(stack.camera.width, stack.camera.height, values, std::vector<std::uint8_t>(n, 1), lo_dn,
                         hi_dn);
}

inline std::size_t export_preview_pgm(const FieldMap& map, std::ostream& os, double lo_G, double hi_G) {
    return detail::write_bytes(os, preview_pgm(map, lo_G, hi_G));
}

inline std::size_t export_preview_pgm(const ImageStack& stack, std::size_t frame, std::ostream& os, double lo_dn,
                                      double hi_dn) {
    return detail::write_bytes(os, preview_pgm(stack, frame, lo_dn, hi_dn));
}

}  // namespace eitmag
