#include "scarline/phantom.hpp"

#include "scarline/volume_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace scarline {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// standard normal from two hashed uniforms; stable across platforms
double hashed_normal(std::uint64_t seed, std::uint64_t idx) {
    std::uint64_t a = splitmix64(seed ^ splitmix64(idx));
    std::uint64_t b = splitmix64(a);
    double u1 = (static_cast<double>(a >> 11) + 0.5) * 0x1.0p-53;
    double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

double wrap_angle(double t) {
    t = std::fmod(t, kTwoPi);
    if (t < 0) t += kTwoPi;
    return t;
}

bool in_arc(double theta, double t0, double t1) {
    if (t0 <= t1) return theta >= t0 && theta < t1;
    return theta >= t0 || theta < t1;
}

} // namespace

void PhantomSpec::validate() const {
    geom.validate();
    if (noise_sigma < 0) throw std::invalid_argument("noise sigma must be non-negative");
    for (const auto& s : shells) {
        if (!(s.radius_mm > 0)) throw std::invalid_argument("shell radius must be positive");
        if (!(s.thickness_mm > 0)) throw std::invalid_argument("shell wall thickness must be positive");
        if (s.interior_label <= 0) throw std::invalid_argument("shell interior label must be positive");
    }
    for (std::size_t i = 0; i < shells.size(); ++i) {
        for (std::size_t j = i + 1; j < shells.size(); ++j) {
            double d = norm(shells[i].center_mm - shells[j].center_mm);
            double minsep = shells[i].radius_mm + shells[i].thickness_mm +
                            shells[j].radius_mm + shells[j].thickness_mm;
            if (d < minsep)
                throw std::invalid_argument("shells " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
        }
    }
    for (const auto& a : arcs) {
        if (a.shell >= shells.size()) throw std::invalid_argument("scar arc references undefined shell");
        if (a.label <= 0) throw std::invalid_argument("scar arc label must be positive");
    }
}

Phantom make_phantom(const PhantomSpec& spec) {
    spec.validate();
    Phantom ph;
    ph.image = ScalarVolume::zeros(spec.geom);
    ph.labels = LabelVolume::zeros(spec.geom);

    for (const auto& s : spec.shells) {
        ph.labels.label_table[s.interior_label] = s.name;
        if (s.wall_label > 0 && !ph.labels.label_table.count(s.wall_label))
            ph.labels.label_table[s.wall_label] = s.name + "_wall";
    }
    for (const auto& a : spec.arcs)
        if (!ph.labels.label_table.count(a.label)) ph.labels.label_table[a.label] = "scar";

    const int nx = spec.geom.dims[0], ny = spec.geom.dims[1], nz = spec.geom.dims[2];
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                Vec3 p = spec.geom.voxel_center(i, j, k);
                float value = spec.background;
                int label = 0;
                for (std::size_t si = 0; si < spec.shells.size(); ++si) {
                    const ShellSpec& s = spec.shells[si];
                    double d = norm(p - s.center_mm);
                    if (d <= s.radius_mm) {
                        value = spec.background + s.interior_offset;
                        label = s.interior_label;
                        break;
                    }
                    if (d <= s.radius_mm + s.thickness_mm) {
                        value = spec.background + s.wall_offset;
                        label = s.wall_label;
                        for (const auto& a : spec.arcs) {
                            if (a.shell != si) continue;
                            double theta = wrap_angle(std::atan2(p[1] - s.center_mm[1], p[0] - s.center_mm[0]));
                            if (in_arc(theta, wrap_angle(a.theta0), wrap_angle(a.theta1))) {
                                value += a.boost;
                                label = a.label;
                            }
                        }
                        break;
                    }
                }
                std::size_t idx = spec.geom.linear(i, j, k);
                if (spec.noise_sigma > 0)
                    value += static_cast<float>(spec.noise_sigma * hashed_normal(spec.seed, idx));
                ph.image.data[idx] = value;
                ph.labels.data[idx] = static_cast<std::uint16_t>(label);
            }
        }
    }
    return ph;
}

PhantomSpec read_phantom_spec(const std::string& path) {
    PhantomSpec spec;
    auto need_index = [&](const std::string& key, std::size_t pos) {
        std::size_t dot = key.find('.', pos);
        if (dot == std::string::npos) throw std::runtime_error(path + ": malformed key " + key);
        std::size_t idx = std::stoul(key.substr(pos, dot - pos));
        return std::make_pair(idx, key.substr(dot + 1));
    };
    for (const auto& [key, value] : read_kv_file(path)) {
        std::istringstream is(value);
        if (key == "dims") is >> spec.geom.dims[0] >> spec.geom.dims[1] >> spec.geom.dims[2];
        else if (key == "spacing") is >> spec.geom.spacing[0] >> spec.geom.spacing[1] >> spec.geom.spacing[2];
        else if (key == "origin") is >> spec.geom.origin[0] >> spec.geom.origin[1] >> spec.geom.origin[2];
        else if (key == "background") is >> spec.background;
        else if (key == "noise_sigma") is >> spec.noise_sigma;
        else if (key == "seed") is >> spec.seed;
        else if (key.rfind("shell.", 0) == 0) {
            auto [idx, field] = need_index(key, 6);
            if (spec.shells.size() <= idx) spec.shells.resize(idx + 1);
            ShellSpec& s = spec.shells[idx];
            if (field == "center") is >> s.center_mm[0] >> s.center_mm[1] >> s.center_mm[2];
            else if (field == "radius") is >> s.radius_mm;
            else if (field == "thickness") is >> s.thickness_mm;
            else if (field == "label") is >> s.interior_label;
            else if (field == "wall_label") is >> s.wall_label;
            else if (field == "name") s.name = value;
            else if (field == "interior_offset") is >> s.interior_offset;
            else if (field == "wall_offset") is >> s.wall_offset;
            else throw std::runtime_error(path + ": unknown shell field " + field);
        } else if (key.rfind("arc.", 0) == 0) {
            auto [idx, field] = need_index(key, 4);
            if (spec.arcs.size() <= idx) spec.arcs.resize(idx + 1);
            ScarArc& a = spec.arcs[idx];
            if (field == "shell") is >> a.shell;
            else if (field == "theta0") is >> a.theta0;
            else if (field == "theta1") is >> a.theta1;
            else if (field == "boost") is >> a.boost;
            else if (field == "label") is >> a.label;
            else throw std::runtime_error(path + ": unknown arc field " + field);
        } else {
            throw std::runtime_error(path + ": unknown key " + key);
        }
        if (is.fail() && !key.ends_with(".name"))
            throw std::runtime_error(path + ": malformed value for " + key);
    }
    spec.validate();
    return spec;
}

void write_phantom_spec(const std::string& path, const PhantomSpec& spec) {
    spec.validate();
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    char buf[256];
    f << "dims: " << spec.geom.dims[0] << " " << spec.geom.dims[1] << " " << spec.geom.dims[2] << "\n";
    std::snprintf(buf, sizeof buf, "spacing: %.17g %.17g %.17g\n", spec.geom.spacing[0], spec.geom.spacing[1], spec.geom.spacing[2]);
    f << buf;
    std::snprintf(buf, sizeof buf, "origin: %.17g %.17g %.17g\n", spec.geom.origin[0], spec.geom.origin[1], spec.geom.origin[2]);
    f << buf;
    std::snprintf(buf, sizeof buf, "background: %.9g\nnoise_sigma: %.17g\n", spec.background, spec.noise_sigma);
    f << buf << "seed: " << spec.seed << "\n";
    for (std::size_t i = 0; i < spec.shells.size(); ++i) {
        const ShellSpec& s = spec.shells[i];
        std::string p = "shell." + std::to_string(i) + ".";
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g", s.center_mm[0], s.center_mm[1], s.center_mm[2]);
        f << p << "center: " << buf << "\n";
        std::snprintf(buf, sizeof buf, "%.17g", s.radius_mm);
        f << p << "radius: " << buf << "\n";
        std::snprintf(buf, sizeof buf, "%.17g", s.thickness_mm);
        f << p << "thickness: " << buf << "\n";
        f << p << "label: " << s.interior_label << "\n";
        f << p << "wall_label: " << s.wall_label << "\n";
        f << p << "name: " << s.name << "\n";
        std::snprintf(buf, sizeof buf, "%.9g", s.interior_offset);
        f << p << "interior_offset: " << buf << "\n";
        std::snprintf(buf, sizeof buf, "%.9g", s.wall_offset);
        f << p << "wall_offset: " << buf << "\n";
    }
    for (std::size_t i = 0; i < spec.arcs.size(); ++i) {
        const ScarArc& a = spec.arcs[i];
        std::string p = "arc." + std::to_string(i) + ".";
        f << p << "shell: " << a.shell << "\n";
        std::snprintf(buf, sizeof buf, "%.17g", a.theta0);
        f << p << "theta0: " << buf << "\n";
        std::snprintf(buf, sizeof buf, "%.17g", a.theta1);
        f << p << "theta1: " << buf << "\n";
        std::snprintf(buf, sizeof buf, "%.9g", a.boost);
        f << p << "boost: " << buf << "\n";
        f << p << "label: " << a.label << "\n";
    }
}

} // namespace scarline
