#include "rgdet/pointcloud.hpp"

#include "rgdet/binary_io.hpp"
#include "rgdet/error.hpp"
#include "rgdet/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace rgdet {

PointCloud::PointCloud(std::size_t c_raw, std::vector<RadarPoint> points) : c_raw_(c_raw) {
    points_.reserve(points.size());
    for (auto& p : points) push_back(std::move(p));
}

void PointCloud::push_back(RadarPoint p) {
    if (p.raw_features.size() != c_raw_) {
        throw data_error("ShapeMismatch", "point has " + std::to_string(p.raw_features.size()) +
                                              " channels, cloud expects " + std::to_string(c_raw_));
    }
    points_.push_back(std::move(p));
}

void BevRange::validate() const {
    if (!(x_max > x_min) || !(y_max > y_min) || h < 1 || w < 1) {
        throw usage_error("InvalidRange", "BEV range must satisfy x_max > x_min, y_max > y_min, h, w >= 1");
    }
}

BevRange vod_range() { return {0.0, 51.2, -25.6, 25.6, 320, 320}; }
BevRange tj4d_range() { return {0.0, 69.12, -39.68, 39.68, 496, 432}; }

PointCloud generate_scene(const SceneSpec& spec) {
    spec.range.validate();
    if (!(spec.z_max >= spec.z_min) || !(spec.cluster_sigma >= 0.0) || !std::isfinite(spec.cluster_sigma)) {
        throw usage_error("InvalidSpec", "z range or cluster sigma invalid");
    }
    if (spec.n_points > 0 && spec.n_clusters == 0) {
        throw usage_error("InvalidSpec", "n_clusters must be >= 1 when n_points > 0");
    }

    Rng rng(spec.seed);
    const auto& r = spec.range;
    std::vector<Vec3> centers(spec.n_clusters);
    for (auto& c : centers) {
        c[0] = rng.uniform(r.x_min, r.x_max);
        c[1] = rng.uniform(r.y_min, r.y_max);
        c[2] = rng.uniform(spec.z_min, spec.z_max);
    }

    PointCloud cloud(spec.c_raw);
    for (std::size_t i = 0; i < spec.n_points; ++i) {
        const auto k = std::min<std::size_t>(static_cast<std::size_t>(rng.uniform() * spec.n_clusters),
                                             spec.n_clusters - 1);
        const Vec3& c = centers[k];
        RadarPoint p;
        p.position[0] = std::clamp(c[0] + spec.cluster_sigma * rng.normal(), r.x_min, r.x_max);
        p.position[1] = std::clamp(c[1] + spec.cluster_sigma * rng.normal(), r.y_min, r.y_max);
        p.position[2] = std::clamp(c[2] + spec.cluster_sigma * rng.normal(), spec.z_min, spec.z_max);
        p.raw_features.resize(spec.c_raw);
        for (auto& f : p.raw_features) f = rng.normal();
        cloud.push_back(std::move(p));
    }
    return cloud;
}

namespace {

void append_double(std::string& out, double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    out.append(buf, res.ptr);
}

double parse_double(std::string_view tok, std::size_t line_no) {
    while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
    while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t' || tok.back() == '\r')) tok.remove_suffix(1);
    double v = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
        throw data_error("FormatError", "line " + std::to_string(line_no) + ": bad number '" +
                                            std::string(tok) + "'");
    }
    return v;
}

PointCloud read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw data_error("FormatError", "missing '# c_raw=<k>' header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    constexpr std::string_view prefix = "# c_raw=";
    if (line.rfind(prefix, 0) != 0) throw data_error("FormatError", "missing '# c_raw=<k>' header");
    std::size_t c_raw = 0;
    {
        const std::string_view rest(line.data() + prefix.size(), line.size() - prefix.size());
        const auto res = std::from_chars(rest.data(), rest.data() + rest.size(), c_raw);
        if (res.ec != std::errc{} || res.ptr != rest.data() + rest.size()) {
            throw data_error("FormatError", "bad c_raw in header");
        }
    }

    PointCloud cloud(c_raw);
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> vals;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            const auto end = comma == std::string::npos ? line.size() : comma;
            vals.push_back(parse_double(std::string_view(line).substr(start, end - start), line_no));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (vals.size() != 3 + c_raw) {
            throw data_error("FormatError", "line " + std::to_string(line_no) + ": expected " +
                                                std::to_string(3 + c_raw) + " columns, got " +
                                                std::to_string(vals.size()));
        }
        RadarPoint p;
        p.position = {vals[0], vals[1], vals[2]};
        p.raw_features.assign(vals.begin() + 3, vals.end());
        cloud.push_back(std::move(p));
    }
    return cloud;
}

PointCloud read_binary(std::istream& is) {
    const auto version = binio::get<std::uint32_t>(is);
    if (version != 1) throw data_error("FormatError", "unsupported RGPC version " + std::to_string(version));
    const auto n = binio::get<std::uint32_t>(is);
    const auto c_raw = binio::get<std::uint32_t>(is);
    PointCloud cloud(c_raw);
    for (std::uint32_t i = 0; i < n; ++i) {
        RadarPoint p;
        for (auto& v : p.position) v = binio::get<double>(is);
        p.raw_features.resize(c_raw);
        for (auto& v : p.raw_features) v = binio::get<double>(is);
        cloud.push_back(std::move(p));
    }
    if (is.peek() != std::char_traits<char>::eof()) throw data_error("FormatError", "trailing bytes after RGPC payload");
    return cloud;
}

} // namespace

void write_cloud_csv(const PointCloud& cloud, const std::filesystem::path& path) {
    std::string out = "# c_raw=" + std::to_string(cloud.c_raw()) + "\n";
    for (const auto& p : cloud.points()) {
        for (int k = 0; k < 3; ++k) {
            if (k) out += ',';
            append_double(out, p.position[k]);
        }
        for (double f : p.raw_features) {
            out += ',';
            append_double(out, f);
        }
        out += '\n';
    }
    std::ofstream os(path, std::ios::binary);
    if (!os || !os.write(out.data(), static_cast<std::streamsize>(out.size()))) {
        throw data_error("IoError", "cannot write " + path.string());
    }
}

void write_cloud_binary(const PointCloud& cloud, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw data_error("IoError", "cannot write " + path.string());
    binio::put_magic(os, "RGPC");
    binio::put<std::uint32_t>(os, 1);
    binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(cloud.size()));
    binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(cloud.c_raw()));
    for (const auto& p : cloud.points()) {
        for (double v : p.position) binio::put(os, v);
        for (double v : p.raw_features) binio::put(os, v);
    }
    if (!os) throw data_error("IoError", "cannot write " + path.string());
}

void write_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
    if (path.extension() == ".rgpc") {
        write_cloud_binary(cloud, path);
    } else {
        write_cloud_csv(cloud, path);
    }
}

PointCloud read_cloud(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw data_error("IoError", "cannot open " + path.string());
    if (binio::has_magic(is, "RGPC")) return read_binary(is);
    is.clear();
    is.seekg(0);
    return read_csv(is);
}

} // namespace rgdet
