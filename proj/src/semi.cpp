#include "scarline/semi.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scarline {

namespace {

Vec3 principal_axis(const std::vector<Vec3>& pts, const Vec3& centroid) {
    double c[3][3] = {};
    for (const auto& p : pts) {
        Vec3 d = p - centroid;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) c[a][b] += d[a] * d[b];
    }
    Vec3 v{1.0, 1.0, 1.0};
    for (int it = 0; it < 64; ++it) {
        Vec3 n{c[0][0] * v[0] + c[0][1] * v[1] + c[0][2] * v[2],
               c[1][0] * v[0] + c[1][1] * v[1] + c[1][2] * v[2],
               c[2][0] * v[0] + c[2][1] * v[1] + c[2][2] * v[2]};
        double len = norm(n);
        if (len < 1e-12) break;
        v = (1.0 / len) * n;
    }
    double len = norm(v);
    return len > 0 ? (1.0 / len) * v : Vec3{1.0, 0.0, 0.0};
}

} // namespace

void SemiConfig::validate() const {
    if (n_bands < 1) throw std::invalid_argument("n_bands must be at least 1");
    if (bins < 2) throw std::invalid_argument("bins must be at least 2");
    if (parzen_width < 0 || parzen_width > 3)
        throw std::invalid_argument("parzen_width must be in [0, 3]");
    if (!(band_sigma_factor > 0)) throw std::invalid_argument("band_sigma_factor must be positive");
}

IntensityBinRange IntensityBinRange::of(const ScalarVolume& v) {
    IntensityBinRange r;
    intensity_range(v, r.lo, r.hi);
    return r;
}

double JointHistogram::total() const {
    double s = 0;
    for (double x : h) s += x;
    return s;
}

SpatialBands make_bands(const ScalarVolume& target, const SemiConfig& cfg) {
    cfg.validate();
    target.validate();
    SpatialBands bands;
    bands.n_bands = cfg.n_bands;
    bands.voxels = target.geom.voxel_count();
    bands.w.assign(std::size_t(cfg.n_bands) * bands.voxels, 0.0);
    if (cfg.n_bands == 1) {
        std::fill(bands.w.begin(), bands.w.end(), 1.0);
        return bands;
    }

    // principal axis of the foreground point cloud
    std::vector<Vec3> fg;
    const auto& g = target.geom;
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i)
                if (target.at(i, j, k) != 0.f) fg.push_back(g.voxel_center(i, j, k));
    if (fg.empty())
        for (int k = 0; k < g.dims[2]; ++k)
            for (int j = 0; j < g.dims[1]; ++j)
                for (int i = 0; i < g.dims[0]; ++i) fg.push_back(g.voxel_center(i, j, k));
    Vec3 centroid{0, 0, 0};
    for (const auto& p : fg) centroid = centroid + p;
    centroid = (1.0 / double(fg.size())) * centroid;
    Vec3 axis = principal_axis(fg, centroid);

    double tmin = 0, tmax = 0;
    bool first = true;
    for (const auto& p : fg) {
        double t = dot(p - centroid, axis);
        tmin = first ? t : std::min(tmin, t);
        tmax = first ? t : std::max(tmax, t);
        first = false;
    }
    if (tmax - tmin < 1e-9) { // degenerate extent: uniform split
        std::fill(bands.w.begin(), bands.w.end(), 1.0 / cfg.n_bands);
        return bands;
    }
    double step = (tmax - tmin) / cfg.n_bands;
    double sigma = cfg.band_sigma_factor * step;
    std::vector<double> center(cfg.n_bands);
    for (int s = 0; s < cfg.n_bands; ++s) center[s] = tmin + (s + 0.5) * step;

    std::size_t vx = 0;
    std::vector<double> gs(cfg.n_bands);
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i, ++vx) {
                double t = dot(g.voxel_center(i, j, k) - centroid, axis);
                double sum = 0;
                int nearest = 0;
                double best = 1e300;
                for (int s = 0; s < cfg.n_bands; ++s) {
                    double d = (t - center[s]) / sigma;
                    gs[s] = std::exp(-0.5 * d * d);
                    sum += gs[s];
                    if (std::fabs(t - center[s]) < best) {
                        best = std::fabs(t - center[s]);
                        nearest = s;
                    }
                }
                if (sum < 1e-300) {
                    bands.w[std::size_t(nearest) * bands.voxels + vx] = 1.0;
                } else {
                    for (int s = 0; s < cfg.n_bands; ++s)
                        bands.w[std::size_t(s) * bands.voxels + vx] = gs[s] / sum;
                }
            }
    return bands;
}

JointHistogram spatial_joint_histogram(const ScalarVolume& target, const ScalarVolume& warped,
                                       const SpatialBands& bands, int band,
                                       const SemiConfig& cfg, IntensityBinRange target_range,
                                       IntensityBinRange atlas_range) {
    cfg.validate();
    if (!same_geometry(target.geom, warped.geom))
        throw std::invalid_argument("histogram inputs must share geometry");
    if (band < 0 || band >= bands.n_bands) throw std::invalid_argument("band out of range");
    if (bands.voxels != target.geom.voxel_count())
        throw std::invalid_argument("band field does not match the volume");

    JointHistogram hist;
    hist.bins = cfg.bins;
    hist.h.assign(std::size_t(cfg.bins) * cfg.bins, 0.0);
    for (std::size_t x = 0; x < target.data.size(); ++x) {
        double wb = bands.at(band, x);
        if (wb == 0.0) continue;
        BinWeights wi = bin_weights(target.data[x], target_range, cfg.bins, cfg.parzen_width, false);
        BinWeights wj = bin_weights(warped.data[x], atlas_range, cfg.bins, cfg.parzen_width, false);
        for (int a = 0; a < wi.count; ++a) {
            double row = wi.w[a] * wb;
            double* cell = &hist.h[std::size_t(wi.first + a) * cfg.bins + wj.first];
            for (int b = 0; b < wj.count; ++b) cell[b] += row * wj.w[b];
        }
    }
    return hist;
}

std::vector<JointHistogram> spatial_joint_histograms(const ScalarVolume& target,
                                                     const ScalarVolume& warped,
                                                     const SpatialBands& bands,
                                                     const SemiConfig& cfg,
                                                     IntensityBinRange target_range,
                                                     IntensityBinRange atlas_range) {
    cfg.validate();
    if (!same_geometry(target.geom, warped.geom))
        throw std::invalid_argument("histogram inputs must share geometry");
    if (bands.voxels != target.geom.voxel_count())
        throw std::invalid_argument("band field does not match the volume");

    std::vector<JointHistogram> hs(bands.n_bands);
    for (auto& h : hs) {
        h.bins = cfg.bins;
        h.h.assign(std::size_t(cfg.bins) * cfg.bins, 0.0);
    }
    for (std::size_t x = 0; x < target.data.size(); ++x) {
        BinWeights wi = bin_weights(target.data[x], target_range, cfg.bins, cfg.parzen_width, false);
        BinWeights wj = bin_weights(warped.data[x], atlas_range, cfg.bins, cfg.parzen_width, false);
        for (int s = 0; s < bands.n_bands; ++s) {
            double wb = bands.at(s, x);
            if (wb == 0.0) continue;
            for (int a = 0; a < wi.count; ++a) {
                double row = wi.w[a] * wb;
                double* cell = &hs[s].h[std::size_t(wi.first + a) * cfg.bins + wj.first];
                for (int b = 0; b < wj.count; ++b) cell[b] += row * wj.w[b];
            }
        }
    }
    return hs;
}

double mutual_information_nats(const JointHistogram& h) {
    double mass = h.total();
    if (mass <= 0) return 0.0;
    std::vector<double> px(h.bins, 0.0), py(h.bins, 0.0);
    for (int i = 0; i < h.bins; ++i)
        for (int j = 0; j < h.bins; ++j) {
            px[i] += h.at(i, j);
            py[j] += h.at(i, j);
        }
    double mi = 0;
    for (int i = 0; i < h.bins; ++i)
        for (int j = 0; j < h.bins; ++j) {
            double p = h.at(i, j);
            if (p <= 0) continue;
            mi += (p / mass) * std::log(p * mass / (px[i] * py[j]));
        }
    return std::max(mi, 0.0);
}

double semi_score(const ScalarVolume& target, const ScalarVolume& warped,
                  const SpatialBands& bands, const SemiConfig& cfg,
                  IntensityBinRange target_range, IntensityBinRange atlas_range) {
    double score = 0;
    for (const auto& h :
         spatial_joint_histograms(target, warped, bands, cfg, target_range, atlas_range))
        score += mutual_information_nats(h);
    return score;
}

double semi_score(const ScalarVolume& target, const ScalarVolume& warped, const SemiConfig& cfg) {
    SpatialBands bands = make_bands(target, cfg);
    return semi_score(target, warped, bands, cfg, IntensityBinRange::of(target),
                      IntensityBinRange::of(warped));
}

SemiValueGrad semi_value_grad(const ScalarVolume& target, const ScalarVolume& warped,
                              const SpatialBands& bands, const SemiConfig& cfg,
                              IntensityBinRange target_range, IntensityBinRange atlas_range) {
    cfg.validate();
    if (!same_geometry(target.geom, warped.geom))
        throw std::invalid_argument("inputs must share geometry");

    SemiValueGrad out;
    out.dvalue.assign(target.data.size(), 0.0);

    // dMI/dH tables per band: (ln(P_ij / (P_i P_j)) - 1) / mass on filled cells
    const int bins = cfg.bins;
    std::vector<JointHistogram> hists =
        spatial_joint_histograms(target, warped, bands, cfg, target_range, atlas_range);
    std::vector<std::vector<double>> dtab(bands.n_bands);
    for (int s = 0; s < bands.n_bands; ++s) {
        const JointHistogram& h = hists[s];
        out.score += mutual_information_nats(h);
        double mass = h.total();
        dtab[s].assign(std::size_t(bins) * bins, 0.0);
        if (mass <= 0) continue;
        std::vector<double> px(bins, 0.0), py(bins, 0.0);
        for (int i = 0; i < bins; ++i)
            for (int j = 0; j < bins; ++j) {
                px[i] += h.at(i, j);
                py[j] += h.at(i, j);
            }
        for (int i = 0; i < bins; ++i)
            for (int j = 0; j < bins; ++j) {
                double p = h.at(i, j);
                if (p <= 0) continue;
                dtab[s][std::size_t(i) * bins + j] =
                    (std::log(p * mass / (px[i] * py[j])) - 1.0) / mass;
            }
    }

    double duv = du_dvalue(atlas_range, bins);
    if (duv == 0.0) return out;
    for (std::size_t x = 0; x < target.data.size(); ++x) {
        BinWeights wi = bin_weights(target.data[x], target_range, bins, cfg.parzen_width, false);
        BinWeights wj = bin_weights(warped.data[x], atlas_range, bins, cfg.parzen_width, true);
        double g = 0;
        for (int s = 0; s < bands.n_bands; ++s) {
            double wb = bands.at(s, x);
            if (wb == 0.0) continue;
            const double* tab = dtab[s].data();
            double acc = 0;
            for (int a = 0; a < wi.count; ++a) {
                const double* row = tab + std::size_t(wi.first + a) * bins + wj.first;
                double r = 0;
                for (int b = 0; b < wj.count; ++b) r += row[b] * wj.dw[b];
                acc += wi.w[a] * r;
            }
            g += wb * acc;
        }
        out.dvalue[x] = g * duv;
    }
    return out;
}

} // namespace scarline
