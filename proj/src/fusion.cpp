#include "scarline/fusion.hpp"

#include "scarline/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scarline {

namespace {

void check_atlases(const GridGeometry& target_geom, const std::vector<WarpedAtlas>& atlases) {
    if (atlases.empty()) throw std::invalid_argument("fusion needs at least one atlas");
    for (const auto& a : atlases) {
        a.intensity.validate();
        a.labels.validate();
        if (!(a.intensity.geom == target_geom) || !(a.labels.geom == target_geom))
            throw std::invalid_argument("warped atlas does not share the target geometry");
    }
}

std::vector<int> effective_label_set(const std::vector<WarpedAtlas>& atlases,
                                     const std::vector<int>& configured) {
    if (!configured.empty()) {
        std::vector<int> set = configured;
        std::sort(set.begin(), set.end());
        set.erase(std::unique(set.begin(), set.end()), set.end());
        for (const auto& a : atlases)
            for (std::uint16_t v : a.labels.data)
                if (!std::binary_search(set.begin(), set.end(), int(v)))
                    throw std::invalid_argument("atlas carries a label outside the configured set");
        return set;
    }
    std::vector<bool> seen(65536, false);
    for (const auto& a : atlases)
        for (std::uint16_t v : a.labels.data) seen[v] = true;
    std::vector<int> set;
    for (int l = 0; l < 65536; ++l)
        if (seen[l]) set.push_back(l);
    return set;
}

int nearest_bin(float value, IntensityBinRange range, int bins) {
    return bin_weights(value, range, bins, 0.0, false).first;
}

// patch-pair Parzen joint histogram with the atlas marginal kept alongside
struct PatchHistogram {
    int bins = 0;
    std::vector<double> joint; // target bin * bins + atlas bin
    std::vector<double> marg;  // atlas bin

    void reset(int b) {
        bins = b;
        joint.assign(std::size_t(b) * b, 0.0);
        marg.assign(b, 0.0);
    }

    void deposit(float tv, float av, const FusionConfig& cfg, IntensityBinRange tr,
                 IntensityBinRange ar, double sign) {
        BinWeights wi = bin_weights(tv, tr, bins, cfg.parzen_width, false);
        BinWeights wj = bin_weights(av, ar, bins, cfg.parzen_width, false);
        for (int p = 0; p < wi.count; ++p) {
            double* row = joint.data() + std::size_t(wi.first + p) * bins + wj.first;
            for (int q = 0; q < wj.count; ++q) row[q] += sign * wi.w[p] * wj.w[q];
        }
        for (int q = 0; q < wj.count; ++q) marg[wj.first + q] += sign * wj.w[q];
    }

    double conditional(float tv, float av, IntensityBinRange tr, IntensityBinRange ar) const {
        int ki = nearest_bin(tv, tr, bins);
        int kj = nearest_bin(av, ar, bins);
        double den = marg[kj];
        return den > 0 ? joint[std::size_t(ki) * bins + kj] / den : 0.0;
    }
};

double patch_msd(const ScalarVolume& target, const ScalarVolume& atlas, int i, int j, int k,
                 int radius) {
    const auto& d = target.geom.dims;
    int i0 = std::max(0, i - radius), i1 = std::min(d[0] - 1, i + radius);
    int j0 = std::max(0, j - radius), j1 = std::min(d[1] - 1, j + radius);
    int k0 = std::max(0, k - radius), k1 = std::min(d[2] - 1, k + radius);
    double acc = 0;
    std::size_t n = 0;
    for (int c = k0; c <= k1; ++c)
        for (int b = j0; b <= j1; ++b)
            for (int a = i0; a <= i1; ++a) {
                double e = double(target.at(a, b, c)) - double(atlas.at(a, b, c));
                acc += e * e;
                ++n;
            }
    return acc / double(n);
}

double volume_std(const ScalarVolume& v) {
    double mean = 0;
    for (float x : v.data) mean += x;
    mean /= double(v.data.size());
    double var = 0;
    for (float x : v.data) var += (x - mean) * (x - mean);
    return std::sqrt(var / double(v.data.size()));
}

std::vector<std::vector<double>> strategy_weights(const ScalarVolume& target,
                                                  const std::vector<WarpedAtlas>& atlases,
                                                  const FusionConfig& cfg) {
    const std::size_t n = target.data.size();
    std::vector<std::vector<double>> w(atlases.size(), std::vector<double>(n, 1.0));
    if (cfg.strategy == FusionStrategy::MajorityVote) return w;

    if (cfg.strategy == FusionStrategy::LocalWeighted) {
        double sigma = cfg.lwv_sigma > 0 ? cfg.lwv_sigma : volume_std(target);
        if (sigma <= 0) sigma = 1.0; // constant target: every weight 1
        const auto& d = target.geom.dims;
        for (std::size_t a = 0; a < atlases.size(); ++a) {
            std::size_t x = 0;
            for (int k = 0; k < d[2]; ++k)
                for (int j = 0; j < d[1]; ++j)
                    for (int i = 0; i < d[0]; ++i, ++x) {
                        double msd =
                            patch_msd(target, atlases[a].intensity, i, j, k, cfg.patch_radius);
                        w[a][x] = std::exp(-cfg.sharpness * msd / (2.0 * sigma * sigma));
                    }
        }
        return w;
    }

    // patch fusion is the single-scale degeneracy of the multi-scale path
    std::vector<double> scales =
        cfg.strategy == FusionStrategy::PatchFusion ? std::vector<double>{0.0} : cfg.scales;
    for (std::size_t si = 0; si < scales.size(); ++si) {
        ScalarVolume ts = scale_space(target, scales[si]);
        IntensityBinRange tr = IntensityBinRange::of(ts);
        for (std::size_t a = 0; a < atlases.size(); ++a) {
            ScalarVolume as = scale_space(atlases[a].intensity, scales[si]);
            std::vector<double> sim = similarity_map(ts, as, cfg, tr, IntensityBinRange::of(as));
            if (si == 0)
                w[a] = std::move(sim);
            else
                for (std::size_t x = 0; x < n; ++x) w[a][x] += sim[x];
        }
    }
    for (auto& wa : w)
        for (double& v : wa) v = std::pow(v, cfg.sharpness);
    return w;
}

} // namespace

std::string to_string(FusionStrategy s) {
    switch (s) {
    case FusionStrategy::MajorityVote: return "mv";
    case FusionStrategy::LocalWeighted: return "lwv";
    case FusionStrategy::PatchFusion: return "pf";
    case FusionStrategy::MultiScalePatch: return "msp";
    }
    throw std::invalid_argument("unknown fusion strategy");
}

FusionStrategy fusion_strategy_from_string(const std::string& name) {
    if (name == "mv") return FusionStrategy::MajorityVote;
    if (name == "lwv") return FusionStrategy::LocalWeighted;
    if (name == "pf") return FusionStrategy::PatchFusion;
    if (name == "msp") return FusionStrategy::MultiScalePatch;
    throw std::invalid_argument("unknown fusion strategy: " + name);
}

void FusionConfig::validate() const {
    if (patch_radius < 1) throw std::invalid_argument("patch_radius must be at least 1");
    if (scales.empty()) throw std::invalid_argument("scales must not be empty");
    for (double s : scales)
        if (!(s >= 0)) throw std::invalid_argument("scales must be non-negative");
    if (!(sharpness >= 0)) throw std::invalid_argument("sharpness must be non-negative");
    if (prob_bins < 2) throw std::invalid_argument("prob_bins must be at least 2");
    if (parzen_width < 0 || parzen_width > 3)
        throw std::invalid_argument("parzen_width must be in [0, 3]");
    for (int l : labels)
        if (l < 0 || l > 65535) throw std::invalid_argument("labels must fit in 16 bits");
}

ScalarVolume scale_space(const ScalarVolume& vol, double sigma) {
    vol.validate();
    if (!(sigma >= 0)) throw std::invalid_argument("sigma must be non-negative");
    if (sigma == 0.0) return vol;

    int radius = std::max(1, int(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0;
    for (int t = -radius; t <= radius; ++t)
        sum += kernel[t + radius] = std::exp(-0.5 * double(t) * double(t) / (sigma * sigma));
    for (double& k : kernel) k /= sum;

    // symmetric reflection: -1 -> 0, n -> n-1
    auto reflect = [](int x, int n) {
        while (x < 0 || x >= n) x = x < 0 ? -x - 1 : 2 * n - x - 1;
        return x;
    };

    const auto& d = vol.geom.dims;
    ScalarVolume a = vol, b = ScalarVolume::zeros(vol.geom);
    for (int axis = 0; axis < 3; ++axis) {
        for (int k = 0; k < d[2]; ++k)
            for (int j = 0; j < d[1]; ++j)
                for (int i = 0; i < d[0]; ++i) {
                    int idx[3] = {i, j, k};
                    double acc = 0;
                    for (int t = -radius; t <= radius; ++t) {
                        int s[3] = {idx[0], idx[1], idx[2]};
                        s[axis] = reflect(idx[axis] + t, d[axis]);
                        acc += kernel[t + radius] * a.at(s[0], s[1], s[2]);
                    }
                    b.at(i, j, k) = float(acc);
                }
        std::swap(a, b);
    }
    return a;
}

double local_similarity(const ScalarVolume& target_s, const ScalarVolume& atlas_s, int i, int j,
                        int k, const FusionConfig& cfg, IntensityBinRange target_range,
                        IntensityBinRange atlas_range) {
    cfg.validate();
    if (!(target_s.geom == atlas_s.geom))
        throw std::invalid_argument("similarity inputs must share one geometry");
    const auto& d = target_s.geom.dims;
    const int r = cfg.patch_radius;
    PatchHistogram h;
    h.reset(cfg.prob_bins);
    int i0 = std::max(0, i - r), i1 = std::min(d[0] - 1, i + r);
    int j0 = std::max(0, j - r), j1 = std::min(d[1] - 1, j + r);
    int k0 = std::max(0, k - r), k1 = std::min(d[2] - 1, k + r);
    for (int c = k0; c <= k1; ++c)
        for (int b = j0; b <= j1; ++b)
            for (int a = i0; a <= i1; ++a)
                h.deposit(target_s.at(a, b, c), atlas_s.at(a, b, c), cfg, target_range,
                          atlas_range, 1.0);
    return h.conditional(target_s.at(i, j, k), atlas_s.at(i, j, k), target_range, atlas_range);
}

std::vector<double> similarity_map(const ScalarVolume& target_s, const ScalarVolume& atlas_s,
                                   const FusionConfig& cfg, IntensityBinRange target_range,
                                   IntensityBinRange atlas_range) {
    cfg.validate();
    if (!(target_s.geom == atlas_s.geom))
        throw std::invalid_argument("similarity inputs must share one geometry");
    const auto& d = target_s.geom.dims;
    const int r = cfg.patch_radius;
    std::vector<double> out(target_s.data.size());

    PatchHistogram h;
    for (int k = 0; k < d[2]; ++k) {
        int k0 = std::max(0, k - r), k1 = std::min(d[2] - 1, k + r);
        for (int j = 0; j < d[1]; ++j) {
            int j0 = std::max(0, j - r), j1 = std::min(d[1] - 1, j + r);

            auto plane = [&](int ii, double sign) {
                for (int c = k0; c <= k1; ++c)
                    for (int b = j0; b <= j1; ++b)
                        h.deposit(target_s.at(ii, b, c), atlas_s.at(ii, b, c), cfg, target_range,
                                  atlas_range, sign);
            };

            h.reset(cfg.prob_bins);
            for (int ii = 0; ii <= std::min(d[0] - 1, r); ++ii) plane(ii, 1.0);
            std::size_t row = (std::size_t(k) * d[1] + j) * d[0];
            for (int i = 0; i < d[0]; ++i) {
                out[row + i] = h.conditional(target_s.at(i, j, k), atlas_s.at(i, j, k),
                                             target_range, atlas_range);
                if (i + 1 < d[0]) { // slide the window one step right
                    if (i + 1 + r <= d[0] - 1) plane(i + 1 + r, 1.0);
                    if (i - r >= 0) plane(i - r, -1.0);
                }
            }
        }
    }
    return out;
}

double msp_similarity(const std::vector<ScalarVolume>& target_scales,
                      const std::vector<ScalarVolume>& atlas_scales, int i, int j, int k,
                      const FusionConfig& cfg, const std::vector<IntensityBinRange>& target_ranges,
                      const std::vector<IntensityBinRange>& atlas_ranges) {
    if (target_scales.empty() || target_scales.size() != atlas_scales.size() ||
        target_scales.size() != target_ranges.size() ||
        target_scales.size() != atlas_ranges.size())
        throw std::invalid_argument("scale-space inputs must align");
    double s = 0;
    for (std::size_t n = 0; n < target_scales.size(); ++n)
        s += local_similarity(target_scales[n], atlas_scales[n], i, j, k, cfg, target_ranges[n],
                              atlas_ranges[n]);
    return s;
}

LabelVolume fuse_with_weights(const std::vector<WarpedAtlas>& atlases,
                              const std::vector<std::vector<double>>& weights,
                              const std::vector<int>& labels) {
    if (atlases.empty()) throw std::invalid_argument("fusion needs at least one atlas");
    check_atlases(atlases.front().intensity.geom, atlases);
    const std::size_t n = atlases.front().labels.data.size();
    if (weights.size() != atlases.size())
        throw std::invalid_argument("one weight field per atlas required");
    for (const auto& wa : weights) {
        if (wa.size() != n) throw std::invalid_argument("weight field size mismatch");
        for (double v : wa)
            if (!(v >= 0)) throw std::invalid_argument("vote weights must be non-negative");
    }

    std::vector<int> set = effective_label_set(atlases, labels);
    std::vector<int> index(65536, -1);
    for (std::size_t s = 0; s < set.size(); ++s) index[set[s]] = int(s);

    LabelVolume out = LabelVolume::zeros(atlases.front().labels.geom);
    std::vector<double> mass(set.size());
    for (std::size_t x = 0; x < n; ++x) {
        std::fill(mass.begin(), mass.end(), 0.0);
        for (std::size_t a = 0; a < atlases.size(); ++a)
            mass[index[atlases[a].labels.data[x]]] += weights[a][x];
        std::size_t best = 0;
        for (std::size_t s = 1; s < set.size(); ++s)
            if (mass[s] > mass[best]) best = s; // ties keep the lowest label id
        out.data[x] = std::uint16_t(set[best]);
    }
    return out;
}

LabelVolume fuse(const ScalarVolume& target, const std::vector<WarpedAtlas>& atlases,
                 const FusionConfig& cfg) {
    cfg.validate();
    target.validate();
    check_atlases(target.geom, atlases);
    return fuse_with_weights(atlases, strategy_weights(target, atlases, cfg), cfg.labels);
}

std::vector<FusionComparisonRow> compare_strategies(const ScalarVolume& target,
                                                    const LabelVolume& truth,
                                                    const std::vector<WarpedAtlas>& atlases,
                                                    const std::vector<FusionStrategy>& strategies,
                                                    const FusionConfig& cfg) {
    truth.validate();
    if (!(truth.geom == target.geom))
        throw std::invalid_argument("truth must share the target geometry");
    std::vector<int> set = effective_label_set(atlases, cfg.labels);

    std::vector<FusionComparisonRow> rows;
    for (FusionStrategy s : strategies) {
        FusionConfig c = cfg;
        c.strategy = s;
        LabelVolume fused = fuse(target, atlases, c);
        for (int l : set) {
            LabelVolume ma = LabelVolume::zeros(target.geom), mb = LabelVolume::zeros(target.geom);
            for (std::size_t x = 0; x < fused.data.size(); ++x) {
                ma.data[x] = fused.data[x] == l;
                mb.data[x] = truth.data[x] == l;
            }
            rows.push_back({to_string(s), l, overlap_metrics(ma, mb).dice});
        }
    }
    return rows;
}

} // namespace scarline
