#include "scarline/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace scarline {
namespace {

double percentile(const std::vector<double>& sorted, double q) {
    double rank = q * (static_cast<double>(sorted.size()) - 1);
    std::size_t lo = static_cast<std::size_t>(rank);
    if (lo + 1 >= sorted.size()) return sorted.back();
    double t = rank - static_cast<double>(lo);
    return sorted[lo] + t * (sorted[lo + 1] - sorted[lo]);
}

double entropy16(const std::vector<double>& sorted) {
    double lo = sorted.front(), hi = sorted.back();
    if (hi <= lo) return 0.0;
    std::array<int, 16> hist{};
    for (double v : sorted) {
        int b = static_cast<int>((v - lo) / (hi - lo) * 16);
        hist[std::min(b, 15)] += 1;
    }
    double e = 0;
    for (int c : hist) {
        if (c == 0) continue;
        double pr = static_cast<double>(c) / static_cast<double>(sorted.size());
        e -= pr * std::log(pr);
    }
    return e;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

} // namespace

const std::array<std::string, kFeatureCount>& feature_names() {
    static const std::array<std::string, kFeatureCount> names = {
        "min",  "max", "mean",     "median",   "std",    "variance", "range",    "iqr",
        "p10",  "p25", "p75",      "p90",      "skewness", "kurtosis", "energy", "entropy16"};
    return names;
}

double FeatureVector::value(const std::string& name) const {
    const auto& names = feature_names();
    for (int i = 0; i < kFeatureCount; ++i)
        if (names[i] == name) return values[i];
    throw std::invalid_argument("unknown feature: " + name);
}

FeatureVector compute_features(std::span<const float> samples) {
    if (samples.empty()) throw std::invalid_argument("feature pool is empty");
    std::vector<double> v(samples.begin(), samples.end());
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();

    double mean = 0, energy = 0;
    for (double s : v) {
        mean += s;
        energy += s * s;
    }
    mean /= static_cast<double>(n);
    energy /= static_cast<double>(n);
    double m2 = 0, m3 = 0, m4 = 0;
    for (double s : v) {
        double d = s - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);

    FeatureVector f;
    f.pixel_count = static_cast<int>(n);
    f.degenerate = n < 2;
    double p25 = percentile(v, 0.25), p75 = percentile(v, 0.75);
    f.values = {v.front(),
                v.back(),
                mean,
                percentile(v, 0.5),
                std::sqrt(m2),
                m2,
                v.back() - v.front(),
                p75 - p25,
                percentile(v, 0.10),
                p25,
                p75,
                percentile(v, 0.90),
                m2 > 0 ? m3 / std::pow(m2, 1.5) : 0.0,
                m2 > 0 ? m4 / (m2 * m2) - 3.0 : 0.0,
                energy,
                entropy16(v)};
    return f;
}

std::vector<SuperpixelFeatures> superpixel_features(const SuperpixelVolume& sv,
                                                    const ScalarVolume& image,
                                                    const LabelVolume& wall_mask,
                                                    double min_overlap) {
    if (!same_geometry(sv.geom, image.geom) || !same_geometry(sv.geom, wall_mask.geom))
        throw std::invalid_argument("superpixels, image and wall mask must share geometry");
    if (!(min_overlap >= 0) || min_overlap > 1)
        throw std::invalid_argument("overlap threshold must be in [0, 1]");

    std::vector<SuperpixelFeatures> out;
    int w = sv.geom.dims[0], h = sv.geom.dims[1], nz = sv.geom.dims[2];
    for (int z = 0; z < nz; ++z) {
        const SuperpixelMap& m = sv.slices[z];
        std::vector<std::vector<float>> pool(m.clusters.size());
        std::vector<int> inside(m.clusters.size(), 0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                int c = m.label_at(x, y);
                pool[c].push_back(image.at(x, y, z));
                if (wall_mask.at(x, y, z) != 0) ++inside[c];
            }
        for (std::size_t c = 0; c < m.clusters.size(); ++c) {
            double overlap = static_cast<double>(inside[c]) / static_cast<double>(pool[c].size());
            if (overlap < min_overlap) continue;
            SuperpixelFeatures sf;
            sf.global_id = sv.global_id(z, static_cast<int>(c));
            sf.z = z;
            sf.wall_overlap = overlap;
            sf.features = compute_features(pool[c]);
            out.push_back(std::move(sf));
        }
    }
    return out;
}

void Dataset::validate() const {
    if (x.size() != y.size() || x.size() != patient.size() || x.size() != superpixel.size())
        throw std::invalid_argument("dataset row arrays disagree in length");
    for (const auto& row : x)
        if (row.size() != feature_names.size())
            throw std::invalid_argument("dataset row width does not match the column names");
}

Dataset Dataset::select(const std::vector<std::string>& names) const {
    std::vector<std::size_t> idx;
    for (const auto& name : names) {
        auto it = std::find(feature_names.begin(), feature_names.end(), name);
        if (it == feature_names.end()) throw std::invalid_argument("unknown column: " + name);
        idx.push_back(static_cast<std::size_t>(it - feature_names.begin()));
    }
    Dataset out;
    out.feature_names = names;
    out.y = y;
    out.patient = patient;
    out.superpixel = superpixel;
    out.x.reserve(x.size());
    for (const auto& row : x) {
        std::vector<double> r;
        r.reserve(idx.size());
        for (std::size_t i : idx) r.push_back(row[i]);
        out.x.push_back(std::move(r));
    }
    return out;
}

std::vector<double> Dataset::column(const std::string& name) const {
    auto it = std::find(feature_names.begin(), feature_names.end(), name);
    if (it == feature_names.end()) throw std::invalid_argument("unknown column: " + name);
    std::size_t j = static_cast<std::size_t>(it - feature_names.begin());
    std::vector<double> out;
    out.reserve(x.size());
    for (const auto& row : x) out.push_back(row[j]);
    return out;
}

void write_dataset_csv(const Dataset& d, const std::string& path) {
    d.validate();
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "patient,superpixel,label";
    for (const auto& name : d.feature_names) {
        if (name.find(',') != std::string::npos)
            throw std::invalid_argument("column name contains a comma: " + name);
        f << ',' << name;
    }
    f << '\n';
    for (std::size_t i = 0; i < d.rows(); ++i) {
        if (d.patient[i].find(',') != std::string::npos)
            throw std::invalid_argument("patient id contains a comma: " + d.patient[i]);
        f << d.patient[i] << ',' << d.superpixel[i] << ',' << d.y[i];
        for (double v : d.x[i]) f << ',' << format_double(v);
        f << '\n';
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

Dataset read_dataset_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("empty dataset file: " + path);
    auto header = split_csv(line);
    if (header.size() < 3 || header[0] != "patient" || header[1] != "superpixel" ||
        header[2] != "label")
        throw std::runtime_error("malformed dataset header in " + path);
    Dataset d;
    d.feature_names.assign(header.begin() + 3, header.end());
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        auto cell = split_csv(line);
        if (cell.size() != header.size())
            throw std::runtime_error("dataset row width mismatch in " + path);
        d.patient.push_back(cell[0]);
        d.superpixel.push_back(std::stoi(cell[1]));
        d.y.push_back(std::stoi(cell[2]));
        std::vector<double> row;
        row.reserve(d.feature_names.size());
        for (std::size_t i = 3; i < cell.size(); ++i) {
            // strtod instead of stod: stod raises out_of_range on subnormals
            char* end = nullptr;
            double v = std::strtod(cell[i].c_str(), &end);
            if (end == cell[i].c_str() || *end != '\0')
                throw std::runtime_error("bad numeric cell in " + path);
            row.push_back(v);
        }
        d.x.push_back(std::move(row));
    }
    d.validate();
    return d;
}

} // namespace scarline
