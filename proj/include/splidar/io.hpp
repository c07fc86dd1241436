#pragma once

#include "splidar/cloud.hpp"
#include "splidar/config.hpp"
#include "splidar/cube.hpp"
#include "splidar/sensor.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace splidar {

// ---------------------------------------------------------------------------
// SPCB v1 sparse cube format, little-endian:
//   "SPCB" u32 version=1, u32 n_rows, u32 n_cols, u32 n_bins,
//   f64 bin_width_seconds, then per pixel row-major:
//   u32 n_events, n_events x (u32 bin, u32 count).
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    char b[4];
    b[0] = static_cast<char>(v & 0xFF);
    b[1] = static_cast<char>((v >> 8) & 0xFF);
    b[2] = static_cast<char>((v >> 16) & 0xFF);
    b[3] = static_cast<char>((v >> 24) & 0xFF);
    out.append(b, 4);
}

inline void put_f64(std::string& out, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((u >> (8 * k)) & 0xFF);
    out.append(b, 8);
}

class ByteReader {
public:
    ByteReader(const char* data, std::size_t size) : p_(data), end_(data + size) {}
    std::uint32_t u32(const char* what) {
        require(4, what);
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p_[k])) << (8 * k);
        p_ += 4;
        return v;
    }
    double f64(const char* what) {
        require(8, what);
        std::uint64_t u = 0;
        for (int k = 0; k < 8; ++k)
            u |= static_cast<std::uint64_t>(static_cast<unsigned char>(p_[k])) << (8 * k);
        p_ += 8;
        double v;
        std::memcpy(&v, &u, 8);
        return v;
    }
    void bytes(char* dst, std::size_t n, const char* what) {
        require(n, what);
        std::memcpy(dst, p_, n);
        p_ += n;
    }
    bool exhausted() const { return p_ == end_; }

private:
    void require(std::size_t n, const char* what) {
        if (static_cast<std::size_t>(end_ - p_) < n)
            throw FormatError(std::string("SPCB: truncated while reading ") + what);
    }
    const char* p_;
    const char* end_;
};

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open file for writing: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed: " + path);
}

}  // namespace detail

inline std::string encode_cube(const PhotonCube& cube) {
    std::string out;
    out.reserve(28 + cube.n_pixels() * 4 + cube.events.size() * 8);
    out.append("SPCB", 4);
    detail::put_u32(out, 1);
    detail::put_u32(out, static_cast<std::uint32_t>(cube.n_rows));
    detail::put_u32(out, static_cast<std::uint32_t>(cube.n_cols));
    detail::put_u32(out, static_cast<std::uint32_t>(cube.n_bins));
    detail::put_f64(out, cube.bin_width_s);
    for (std::size_t p = 0; p < cube.n_pixels(); ++p) {
        detail::put_u32(out, static_cast<std::uint32_t>(cube.offsets[p + 1] - cube.offsets[p]));
        for (std::uint64_t k = cube.offsets[p]; k < cube.offsets[p + 1]; ++k) {
            detail::put_u32(out, cube.events[k].bin);
            detail::put_u32(out, cube.events[k].count);
        }
    }
    return out;
}

inline PhotonCube decode_cube(const std::string& bytes) {
    detail::ByteReader r(bytes.data(), bytes.size());
    char magic[4];
    r.bytes(magic, 4, "magic");
    if (std::memcmp(magic, "SPCB", 4) != 0) throw FormatError("SPCB: bad magic");
    std::uint32_t version = r.u32("version");
    if (version != 1) throw FormatError("SPCB: unsupported version " + std::to_string(version));
    std::uint32_t rows = r.u32("n_rows");
    std::uint32_t cols = r.u32("n_cols");
    std::uint32_t bins = r.u32("n_bins");
    double bin_width = r.f64("bin_width");
    if (rows == 0 || cols == 0 || bins == 0) throw FormatError("SPCB: zero dimension");
    PhotonCube cube(static_cast<int>(rows), static_cast<int>(cols),
                    static_cast<int>(bins), bin_width);
    for (std::size_t p = 0; p < cube.n_pixels(); ++p) {
        std::uint32_t n = r.u32("event count");
        for (std::uint32_t k = 0; k < n; ++k) {
            Event e;
            e.bin = r.u32("event bin");
            e.count = r.u32("event value");
            cube.events.push_back(e);
        }
        cube.offsets[p + 1] = cube.events.size();
    }
    if (!r.exhausted()) throw FormatError("SPCB: trailing bytes");
    cube.recount();
    cube.validate();
    return cube;
}

inline void write_cube(const PhotonCube& cube, const std::string& path) {
    detail::write_file_bytes(path, encode_cube(cube));
}

inline PhotonCube read_cube(const std::string& path) {
    return decode_cube(detail::read_file_bytes(path));
}

// ---------------------------------------------------------------------------
// ASCII PLY, vertex element with float x, y, z, intensity. Point order is
// preserved. An optional "comment pixel_pitch <v>" records the fine pitch so
// evaluation can group points into pixel columns without a calibration file.
// ---------------------------------------------------------------------------

inline std::string encode_ply(const PointCloud& cloud, std::optional<double> pixel_pitch = {}) {
    std::ostringstream out;
    out << "ply\nformat ascii 1.0\n";
    char buf[160];
    if (pixel_pitch) {
        std::snprintf(buf, sizeof buf, "comment pixel_pitch %.17g\n", *pixel_pitch);
        out << buf;
    }
    out << "element vertex " << cloud.size() << "\n"
        << "property float x\nproperty float y\nproperty float z\n"
        << "property float intensity\nend_header\n";
    for (const Point& p : cloud) {
        std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g %.9g\n", p.position.x(),
                      p.position.y(), p.position.z(), p.intensity);
        out << buf;
    }
    return out.str();
}

inline void write_ply(const PointCloud& cloud, const std::string& path,
                      std::optional<double> pixel_pitch = {}) {
    detail::write_file_bytes(path, encode_ply(cloud, pixel_pitch));
}

struct PlyCloud {
    PointCloud cloud;
    std::optional<double> pixel_pitch;
};

inline PlyCloud decode_ply(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    auto next_line = [&](const char* what) {
        if (!std::getline(in, line))
            throw FormatError(std::string("PLY: truncated header before ") + what);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };
    if (next_line("magic") != "ply") throw FormatError("PLY: missing 'ply' magic");
    if (next_line("format") != "format ascii 1.0")
        throw FormatError("PLY: only 'format ascii 1.0' supported");

    PlyCloud out;
    std::size_t n_vertices = 0;
    std::vector<std::string> properties;
    bool in_vertex = false;
    for (;;) {
        next_line("end_header");
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "end_header") break;
        if (word == "comment") {
            std::string key;
            double v;
            if (ls >> key >> v && key == "pixel_pitch") out.pixel_pitch = v;
            continue;
        }
        if (word == "element") {
            std::string name;
            std::size_t count = 0;
            if (!(ls >> name >> count)) throw FormatError("PLY: malformed element line");
            if (name == "vertex") {
                n_vertices = count;
                in_vertex = true;
            } else {
                if (count != 0)
                    throw FormatError("PLY: unsupported non-empty element '" + name + "'");
                in_vertex = false;
            }
            continue;
        }
        if (word == "property") {
            if (!in_vertex) continue;
            std::string type, name;
            if (!(ls >> type >> name)) throw FormatError("PLY: malformed property line");
            if (type == "list") throw FormatError("PLY: list properties unsupported");
            properties.push_back(name);
            continue;
        }
        throw FormatError("PLY: unexpected header line: " + line);
    }

    int ix = -1, iy = -1, iz = -1, ir = -1;
    for (std::size_t k = 0; k < properties.size(); ++k) {
        if (properties[k] == "x") ix = static_cast<int>(k);
        if (properties[k] == "y") iy = static_cast<int>(k);
        if (properties[k] == "z") iz = static_cast<int>(k);
        if (properties[k] == "intensity") ir = static_cast<int>(k);
    }
    if (ix < 0 || iy < 0 || iz < 0)
        throw FormatError("PLY: vertex element must have x, y, z properties");

    out.cloud.points.reserve(n_vertices);
    for (std::size_t v = 0; v < n_vertices; ++v) {
        next_line("vertex row");
        std::istringstream ls(line);
        std::vector<double> vals(properties.size());
        for (std::size_t k = 0; k < properties.size(); ++k)
            if (!(ls >> vals[k]))
                throw FormatError("PLY: short vertex row " + std::to_string(v));
        Point p;
        p.position = Vec3(vals[ix], vals[iy], vals[iz]);
        p.intensity = ir >= 0 ? vals[ir] : 0.0;
        out.cloud.points.push_back(p);
    }
    return out;
}

inline PlyCloud read_ply(const std::string& path) {
    return decode_ply(detail::read_file_bytes(path));
}

// ---------------------------------------------------------------------------
// Calibration file: key=value text describing a SensorModel. The IRF sample
// grid is inline comma-separated; gain map is an optional whitespace text
// file; dead pixels are "i,j;i,j;..." pairs.
// ---------------------------------------------------------------------------

inline SensorModel sensor_from_config(const KeyValueFile& kv) {
    int rows = kv.get_int("rows", 0);
    int cols = kv.get_int("cols", 0);
    int bins = kv.get_int("bins", 0);
    if (rows <= 0 || cols <= 0 || bins <= 0)
        throw FormatError("calibration: rows/cols/bins required and positive");

    Irf irf = Irf::delta();
    if (kv.has("irf_samples")) {
        auto samples = KeyValueFile::to_double_list(kv.get_string("irf_samples", ""), "irf_samples");
        double tau_min = kv.get_double("irf_tau_min", 0.0);
        double dtau = kv.get_double("irf_dtau", 0.0);
        if (dtau <= 0.0) throw FormatError("calibration: irf_dtau required with irf_samples");
        try {
            irf = Irf(tau_min, dtau, std::move(samples));
            irf.validate();
        } catch (const std::invalid_argument& e) {
            throw FormatError(std::string("calibration: ") + e.what());
        }
    } else if (kv.has("irf_gaussian_sigma_bins")) {
        irf = Irf::gaussian(kv.get_double("irf_gaussian_sigma_bins", 1.5),
                            kv.get_double("irf_support_sigmas", 4.0));
    } else {
        throw FormatError("calibration: need irf_samples or irf_gaussian_sigma_bins");
    }

    SensorModel sensor(rows, cols, bins, std::move(irf),
                       kv.get_int("superres_factor", 1),
                       kv.get_double("pixel_pitch_m", 1.0),
                       kv.get_double("bin_resolution_m", 1.0));

    if (kv.has("gain_file")) {
        std::ifstream in(kv.get_string("gain_file", ""));
        if (!in) throw FormatError("calibration: cannot open gain_file");
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
                if (!(in >> sensor.gain(i, j)))
                    throw FormatError("calibration: gain_file too short");
    }
    if (kv.has("dead_pixels")) {
        std::istringstream in(kv.get_string("dead_pixels", ""));
        std::string pair;
        while (std::getline(in, pair, ';')) {
            pair = KeyValueFile::strip(pair);
            if (pair.empty()) continue;
            auto comma = pair.find(',');
            if (comma == std::string::npos)
                throw FormatError("calibration: dead_pixels entries must be i,j");
            int i = KeyValueFile::to_int(KeyValueFile::strip(pair.substr(0, comma)), "dead_pixels");
            int j = KeyValueFile::to_int(KeyValueFile::strip(pair.substr(comma + 1)), "dead_pixels");
            if (!sensor.dead.in_bounds(i, j))
                throw FormatError("calibration: dead pixel out of bounds");
            sensor.dead(i, j) = 1;
        }
    }
    return sensor;
}

inline SensorModel read_calibration(const std::string& path) {
    return sensor_from_config(KeyValueFile::parse_file(path));
}

inline std::string encode_calibration(const SensorModel& s) {
    std::ostringstream out;
    char buf[64];
    out << "rows = " << s.n_rows << "\ncols = " << s.n_cols << "\nbins = " << s.n_bins
        << "\nsuperres_factor = " << s.superres << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", s.pixel_pitch);
    out << "pixel_pitch_m = " << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", s.bin_resolution);
    out << "bin_resolution_m = " << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", s.irf_shared.tau_min());
    out << "irf_tau_min = " << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", s.irf_shared.dtau());
    out << "irf_dtau = " << buf << "\nirf_samples = ";
    const auto& samples = s.irf_shared.samples();
    for (std::size_t k = 0; k < samples.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", samples[k]);
        out << (k ? "," : "") << buf;
    }
    out << "\n";
    bool first = true;
    std::ostringstream deadlist;
    for (int i = 0; i < s.n_rows; ++i)
        for (int j = 0; j < s.n_cols; ++j)
            if (s.dead(i, j)) {
                deadlist << (first ? "" : ";") << i << "," << j;
                first = false;
            }
    if (!first) out << "dead_pixels = " << deadlist.str() << "\n";
    return out.str();
}

inline void write_calibration(const SensorModel& s, const std::string& path) {
    detail::write_file_bytes(path, encode_calibration(s));
}

}  // namespace splidar
