#include "scarline/volume_io.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace scarline {
namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

struct Header {
    Index3 dims{0, 0, 0};
    Vec3 spacing{1, 1, 1};
    Vec3 origin{0, 0, 0};
    std::string dtype;
    std::string payload;
    std::map<int, std::string> labels;
    bool have_dims = false, have_dtype = false, have_payload = false;
};

Header parse_header(const std::string& hdr_path) {
    Header h;
    for (const auto& [key, value] : read_kv_file(hdr_path)) {
        if (key == "dims") {
            std::istringstream is(value);
            if (!(is >> h.dims[0] >> h.dims[1] >> h.dims[2]))
                throw std::runtime_error(hdr_path + ": malformed dims");
            h.have_dims = true;
        } else if (key == "spacing") {
            std::istringstream is(value);
            if (!(is >> h.spacing[0] >> h.spacing[1] >> h.spacing[2]))
                throw std::runtime_error(hdr_path + ": malformed spacing");
        } else if (key == "origin") {
            std::istringstream is(value);
            if (!(is >> h.origin[0] >> h.origin[1] >> h.origin[2]))
                throw std::runtime_error(hdr_path + ": malformed origin");
        } else if (key == "dtype") {
            h.dtype = value;
            h.have_dtype = true;
        } else if (key == "payload") {
            h.payload = value;
            h.have_payload = true;
        } else if (key.rfind("label.", 0) == 0) {
            int id = std::stoi(key.substr(6));
            h.labels[id] = value;
        } else {
            throw std::runtime_error(hdr_path + ": unknown header key '" + key + "'");
        }
    }
    if (!h.have_dims) throw std::runtime_error(hdr_path + ": missing dims");
    if (!h.have_dtype) throw std::runtime_error(hdr_path + ": missing dtype");
    if (!h.have_payload) throw std::runtime_error(hdr_path + ": missing payload");
    if (h.dtype != "f32" && h.dtype != "u16")
        throw std::runtime_error(hdr_path + ": unsupported dtype '" + h.dtype + "'");
    return h;
}

std::string payload_path(const std::string& hdr_path, const std::string& payload) {
    fs::path p(payload);
    if (p.is_absolute()) return p.string();
    return (fs::path(hdr_path).parent_path() / p).string();
}

std::vector<char> read_payload(const std::string& path, std::size_t expected_bytes) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open payload " + path);
    f.seekg(0, std::ios::end);
    std::size_t n = static_cast<std::size_t>(f.tellg());
    if (n != expected_bytes)
        throw std::runtime_error("payload " + path + " holds " + std::to_string(n) +
                                 " bytes, expected " + std::to_string(expected_bytes));
    f.seekg(0);
    std::vector<char> buf(n);
    f.read(buf.data(), static_cast<std::streamsize>(n));
    if (!f) throw std::runtime_error("short read on payload " + path);
    return buf;
}

void write_header(std::ostream& os, const Header& h) {
    char buf[256];
    os << "dims: " << h.dims[0] << " " << h.dims[1] << " " << h.dims[2] << "\n";
    std::snprintf(buf, sizeof buf, "spacing: %.17g %.17g %.17g\n", h.spacing[0], h.spacing[1], h.spacing[2]);
    os << buf;
    std::snprintf(buf, sizeof buf, "origin: %.17g %.17g %.17g\n", h.origin[0], h.origin[1], h.origin[2]);
    os << buf;
    os << "dtype: " << h.dtype << "\n";
    os << "payload: " << h.payload << "\n";
    for (const auto& [id, name] : h.labels)
        os << "label." << id << "=" << name << "\n";
}

std::string raw_name(const std::string& hdr_path) {
    fs::path p(hdr_path);
    p.replace_extension(".raw");
    return p.filename().string();
}

void write_files(const std::string& hdr_path, const Header& h, const void* bytes, std::size_t nbytes) {
    std::ofstream hf(hdr_path);
    if (!hf) throw std::runtime_error("cannot write " + hdr_path);
    write_header(hf, h);
    hf.flush();
    if (!hf) throw std::runtime_error("write failed on " + hdr_path);
    std::string rp = payload_path(hdr_path, h.payload);
    std::ofstream rf(rp, std::ios::binary);
    if (!rf) throw std::runtime_error("cannot write " + rp);
    rf.write(static_cast<const char*>(bytes), static_cast<std::streamsize>(nbytes));
    rf.flush();
    if (!rf) throw std::runtime_error("write failed on " + rp);
}

} // namespace

std::vector<std::pair<std::string, std::string>> read_kv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    while (std::getline(f, line)) {
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t sep = line.find_first_of(":=");
        if (sep == std::string::npos)
            throw std::runtime_error(path + ": line without separator: '" + line + "'");
        out.emplace_back(trim(line.substr(0, sep)), trim(line.substr(sep + 1)));
    }
    return out;
}

AnyVolume read_volume(const std::string& hdr_path) {
    Header h = parse_header(hdr_path);
    GridGeometry g{h.dims, h.spacing, h.origin};
    g.validate();
    std::size_t n = g.voxel_count();
    std::string rp = payload_path(hdr_path, h.payload);
    if (h.dtype == "f32") {
        std::vector<char> buf = read_payload(rp, n * sizeof(float));
        ScalarVolume v;
        v.geom = g;
        v.data.resize(n);
        std::memcpy(v.data.data(), buf.data(), buf.size());
        v.validate();
        return v;
    }
    std::vector<char> buf = read_payload(rp, n * sizeof(std::uint16_t));
    LabelVolume v;
    v.geom = g;
    v.data.resize(n);
    std::memcpy(v.data.data(), buf.data(), buf.size());
    v.label_table = h.labels;
    v.validate();
    return v;
}

ScalarVolume read_scalar_volume(const std::string& hdr_path) {
    AnyVolume v = read_volume(hdr_path);
    if (!std::holds_alternative<ScalarVolume>(v))
        throw std::runtime_error(hdr_path + ": expected a scalar (f32) volume");
    return std::get<ScalarVolume>(std::move(v));
}

LabelVolume read_label_volume(const std::string& hdr_path) {
    AnyVolume v = read_volume(hdr_path);
    if (!std::holds_alternative<LabelVolume>(v))
        throw std::runtime_error(hdr_path + ": expected a label (u16) volume");
    return std::get<LabelVolume>(std::move(v));
}

void write_volume(const std::string& hdr_path, const ScalarVolume& v) {
    v.validate();
    Header h;
    h.dims = v.geom.dims;
    h.spacing = v.geom.spacing;
    h.origin = v.geom.origin;
    h.dtype = "f32";
    h.payload = raw_name(hdr_path);
    write_files(hdr_path, h, v.data.data(), v.data.size() * sizeof(float));
}

void write_volume(const std::string& hdr_path, const LabelVolume& v) {
    v.validate();
    Header h;
    h.dims = v.geom.dims;
    h.spacing = v.geom.spacing;
    h.origin = v.geom.origin;
    h.dtype = "u16";
    h.payload = raw_name(hdr_path);
    h.labels = v.label_table;
    write_files(hdr_path, h, v.data.data(), v.data.size() * sizeof(std::uint16_t));
}

} // namespace scarline
