#include "scarline/slic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace scarline {
namespace {

float pixel(const float* px, int w, int x, int y) {
    return px[static_cast<std::size_t>(y) * w + x];
}

// squared intensity gradient via central differences, edges clamped
double gradient_sq(const float* px, int w, int h, int x, int y) {
    int xm = std::max(0, x - 1), xp = std::min(w - 1, x + 1);
    int ym = std::max(0, y - 1), yp = std::min(h - 1, y + 1);
    double gx = pixel(px, w, xp, y) - pixel(px, w, xm, y);
    double gy = pixel(px, w, x, yp) - pixel(px, w, x, ym);
    return gx * gx + gy * gy;
}

struct Component {
    int cluster = 0;
    std::vector<int> pixels; // linear indices
};

} // namespace

void SlicParams::validate() const {
    if (grid_interval < 1) throw std::invalid_argument("grid interval must be at least 1");
    if (!(compactness > 0)) throw std::invalid_argument("compactness must be positive");
    if (iterations < 1) throw std::invalid_argument("iteration count must be at least 1");
    if (!(min_region_fraction > 0) || min_region_fraction > 1)
        throw std::invalid_argument("min region fraction must be in (0, 1]");
}

double slic_distance(double d_intensity, double dx, double dy, int S, double m) {
    double ds2 = dx * dx + dy * dy;
    return std::sqrt(d_intensity * d_intensity + ds2 / (static_cast<double>(S) * S) * m * m);
}

std::vector<SlicCluster> slic_init_centers(const float* px, int w, int h, const SlicParams& p) {
    p.validate();
    int S = p.grid_interval;
    int nx = std::max(1, static_cast<int>(std::lround(static_cast<double>(w) / S)));
    int ny = std::max(1, static_cast<int>(std::lround(static_cast<double>(h) / S)));
    double step_x = static_cast<double>(w) / nx;
    double step_y = static_cast<double>(h) / ny;
    std::vector<SlicCluster> centers;
    centers.reserve(static_cast<std::size_t>(nx) * ny);
    for (int gy = 0; gy < ny; ++gy) {
        for (int gx = 0; gx < nx; ++gx) {
            SlicCluster c;
            c.x = (gx + 0.5) * step_x - 0.5; // geometric center of the block
            c.y = (gy + 0.5) * step_y - 0.5;
            int ix = std::clamp(static_cast<int>(std::lround(c.x)), 0, w - 1);
            int iy = std::clamp(static_cast<int>(std::lround(c.y)), 0, h - 1);
            if (p.perturb_seeds) {
                double best = gradient_sq(px, w, h, ix, iy);
                int bx = ix, by = iy;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        int x = ix + dx, y = iy + dy;
                        if (x < 0 || y < 0 || x >= w || y >= h) continue;
                        double g = gradient_sq(px, w, h, x, y);
                        if (g < best) { best = g; bx = x; by = y; }
                    }
                }
                if (bx != ix || by != iy) { c.x = bx; c.y = by; ix = bx; iy = by; }
            }
            c.intensity = pixel(px, w, ix, iy);
            centers.push_back(c);
        }
    }
    return centers;
}

std::vector<int> slic_assign(const float* px, int w, int h,
                             const std::vector<SlicCluster>& centers, const SlicParams& p,
                             const std::vector<int>* current) {
    int S = p.grid_interval;
    std::size_t n = static_cast<std::size_t>(w) * h;
    std::vector<int> labels(n, -1);
    std::vector<double> best(n, std::numeric_limits<double>::infinity());

    if (current) {
        for (std::size_t i = 0; i < n; ++i) {
            int c = (*current)[i];
            if (c < 0) continue;
            int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
            best[i] = slic_distance(pixel(px, w, x, y) - centers[c].intensity,
                                    x - centers[c].x, y - centers[c].y, S, p.compactness);
            labels[i] = c;
        }
    }

    for (std::size_t c = 0; c < centers.size(); ++c) {
        int x0 = std::max(0, static_cast<int>(std::ceil(centers[c].x - S)));
        int x1 = std::min(w - 1, static_cast<int>(std::floor(centers[c].x + S)));
        int y0 = std::max(0, static_cast<int>(std::ceil(centers[c].y - S)));
        int y1 = std::min(h - 1, static_cast<int>(std::floor(centers[c].y + S)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                std::size_t i = static_cast<std::size_t>(y) * w + x;
                double d = slic_distance(pixel(px, w, x, y) - centers[c].intensity,
                                         x - centers[c].x, y - centers[c].y, S, p.compactness);
                if (d < best[i] || (d == best[i] && static_cast<int>(c) < labels[i])) {
                    best[i] = d;
                    labels[i] = static_cast<int>(c);
                }
            }
        }
    }

    // safety net: a pixel no window reached joins its nearest center outright
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] >= 0) continue;
        int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
        for (std::size_t c = 0; c < centers.size(); ++c) {
            double d = slic_distance(pixel(px, w, x, y) - centers[c].intensity,
                                     x - centers[c].x, y - centers[c].y, S, p.compactness);
            if (d < best[i]) { best[i] = d; labels[i] = static_cast<int>(c); }
        }
    }
    return labels;
}

namespace {

void update_centroids(const float* px, int w, int h, const std::vector<int>& labels,
                      std::vector<SlicCluster>& centers) {
    std::vector<double> sx(centers.size(), 0), sy(centers.size(), 0), si(centers.size(), 0);
    std::vector<int> cnt(centers.size(), 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int c = labels[static_cast<std::size_t>(y) * w + x];
            sx[c] += x;
            sy[c] += y;
            si[c] += pixel(px, w, x, y);
            ++cnt[c];
        }
    for (std::size_t c = 0; c < centers.size(); ++c) {
        if (cnt[c] == 0) continue; // empty clusters keep their previous seat
        centers[c].x = sx[c] / cnt[c];
        centers[c].y = sy[c] / cnt[c];
        centers[c].intensity = si[c] / cnt[c];
        centers[c].count = cnt[c];
    }
}

double sum_d(const float* px, int w, int h, const std::vector<int>& labels,
             const std::vector<SlicCluster>& centers, const SlicParams& p, bool squared) {
    double total = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int c = labels[static_cast<std::size_t>(y) * w + x];
            double d = slic_distance(pixel(px, w, x, y) - centers[c].intensity,
                                     x - centers[c].x, y - centers[c].y, p.grid_interval, p.compactness);
            total += squared ? d * d : d;
        }
    return total;
}

// split disconnected clusters, absorb undersized orphans, compact ids
void enforce_connectivity(const float* px, int w, int h, const SlicParams& p,
                          std::vector<int>& labels, std::vector<SlicCluster>& centers) {
    std::size_t n = static_cast<std::size_t>(w) * h;
    std::vector<int> comp(n, -1);
    std::vector<Component> comps;
    std::vector<int> stack;
    for (std::size_t seed = 0; seed < n; ++seed) {
        if (comp[seed] >= 0) continue;
        int id = static_cast<int>(comps.size());
        comps.push_back({labels[seed], {}});
        stack.assign(1, static_cast<int>(seed));
        comp[seed] = id;
        while (!stack.empty()) {
            int i = stack.back();
            stack.pop_back();
            comps[id].pixels.push_back(i);
            int x = i % w, y = i / w;
            const int nb[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
            for (const auto& d : nb) {
                int xx = x + d[0], yy = y + d[1];
                if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
                int j = yy * w + xx;
                if (comp[j] >= 0 || labels[j] != labels[i]) continue;
                comp[j] = id;
                stack.push_back(j);
            }
        }
    }

    // components at or above the size floor become regions of their own;
    // everything smaller is absorbed into an adjacent region
    std::size_t min_size =
        static_cast<std::size_t>(p.min_region_fraction * p.grid_interval * p.grid_interval);
    std::vector<char> keeper(comps.size(), 0);
    std::size_t biggest = 0;
    bool any = false;
    for (std::size_t ci = 0; ci < comps.size(); ++ci) {
        keeper[ci] = comps[ci].pixels.size() >= min_size;
        if (keeper[ci]) any = true;
        if (comps[ci].pixels.size() > comps[biggest].pixels.size()) biggest = ci;
    }
    if (!any) keeper[biggest] = 1; // a shattered slice still yields one region

    // component seeds come up in scan order, so region ids inherit that order
    std::vector<int> region(n, -1);
    std::vector<std::size_t> region_size;
    for (std::size_t ci = 0; ci < comps.size(); ++ci) {
        if (!keeper[ci]) continue;
        int rid = static_cast<int>(region_size.size());
        region_size.push_back(comps[ci].pixels.size());
        for (int i : comps[ci].pixels) region[i] = rid;
    }

    // grow regions over the leftovers; a pocket waits until a neighbour lands
    std::vector<int> pending;
    for (std::size_t ci = 0; ci < comps.size(); ++ci)
        if (!keeper[ci]) pending.push_back(static_cast<int>(ci));
    while (!pending.empty()) {
        std::vector<int> defer;
        for (int ci : pending) {
            int target = -1;
            std::size_t target_size = 0;
            for (int i : comps[ci].pixels) {
                int x = i % w, y = i / w;
                const int nb[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
                for (const auto& d : nb) {
                    int xx = x + d[0], yy = y + d[1];
                    if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
                    int r = region[yy * w + xx];
                    if (r < 0) continue;
                    if (target < 0 || region_size[r] > target_size ||
                        (region_size[r] == target_size && r < target)) {
                        target = r;
                        target_size = region_size[r];
                    }
                }
            }
            if (target < 0) {
                defer.push_back(ci);
                continue;
            }
            for (int i : comps[ci].pixels) region[i] = target;
            region_size[target] += comps[ci].pixels.size();
        }
        if (defer.size() == pending.size())
            throw std::logic_error("connectivity enforcement stalled");
        pending.swap(defer);
    }

    // compact ids by first appearance in scan order, rebuild clusters
    std::vector<int> remap(region_size.size(), -1);
    int k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (remap[region[i]] < 0) remap[region[i]] = k++;
        labels[i] = remap[region[i]];
    }
    centers.assign(static_cast<std::size_t>(k), SlicCluster{});
    std::vector<double> sx(k, 0), sy(k, 0), si(k, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int c = labels[static_cast<std::size_t>(y) * w + x];
            sx[c] += x;
            sy[c] += y;
            si[c] += pixel(px, w, x, y);
            ++centers[c].count;
        }
    for (int c = 0; c < k; ++c) {
        centers[c].x = sx[c] / centers[c].count;
        centers[c].y = sy[c] / centers[c].count;
        centers[c].intensity = si[c] / centers[c].count;
    }
}

} // namespace

SuperpixelMap slic_segment(const float* px, int w, int h, const SlicParams& p, SlicTrace* trace) {
    p.validate();
    if (w < 1 || h < 1) throw std::invalid_argument("slice must be non-empty");

    std::vector<SlicCluster> centers = slic_init_centers(px, w, h, p);
    std::vector<int> labels;
    for (int it = 0; it < p.iterations; ++it) {
        if (trace && !labels.empty())
            trace->pre_assign_sum_d.push_back(sum_d(px, w, h, labels, centers, p, false));
        std::vector<int> next = slic_assign(px, w, h, centers, p, labels.empty() ? nullptr : &labels);
        labels.swap(next);
        if (trace) {
            if (it == 0) trace->pre_assign_sum_d.push_back(sum_d(px, w, h, labels, centers, p, false));
            trace->post_assign_sum_d.push_back(sum_d(px, w, h, labels, centers, p, false));
            trace->energy_sq.push_back(sum_d(px, w, h, labels, centers, p, true));
        }
        update_centroids(px, w, h, labels, centers);
    }

    enforce_connectivity(px, w, h, p, labels, centers);

    SuperpixelMap map;
    map.width = w;
    map.height = h;
    map.labels = std::move(labels);
    map.clusters = std::move(centers);
    return map;
}

LabelVolume SuperpixelVolume::to_labels() const {
    LabelVolume out = LabelVolume::zeros(geom);
    for (int z = 0; z < geom.dims[2]; ++z) {
        const SuperpixelMap& m = slices[z];
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x) {
                int gid = global_id(z, m.label_at(x, y));
                if (gid > 65535) throw std::runtime_error("superpixel id exceeds the u16 label range");
                out.data[geom.linear(x, y, z)] = static_cast<std::uint16_t>(gid);
            }
    }
    return out;
}

SuperpixelVolume slic_volume(const ScalarVolume& v, const SlicParams& p) {
    v.validate();
    p.validate();
    SuperpixelVolume sv;
    sv.geom = v.geom;
    int w = v.geom.dims[0], h = v.geom.dims[1], nz = v.geom.dims[2];
    sv.slices.reserve(nz);
    sv.slice_offset.reserve(nz);
    int offset = 0;
    for (int z = 0; z < nz; ++z) {
        const float* plane = v.data.data() + v.geom.linear(0, 0, z);
        sv.slices.push_back(slic_segment(plane, w, h, p));
        sv.slice_offset.push_back(offset);
        offset += static_cast<int>(sv.slices.back().clusters.size());
    }
    sv.total_clusters = offset;
    return sv;
}

SuperpixelVolume superpixels_from_labels(const LabelVolume& ids, const ScalarVolume& image) {
    if (!same_geometry(ids.geom, image.geom))
        throw std::invalid_argument("superpixel ids and image must share geometry");
    SuperpixelVolume sv;
    sv.geom = ids.geom;
    int w = ids.geom.dims[0], h = ids.geom.dims[1], nz = ids.geom.dims[2];
    int offset = 0;
    for (int z = 0; z < nz; ++z) {
        // remap the ids present in this slice, ordered by first appearance
        std::vector<int> order;
        std::map<int, int> local;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                int gid = ids.at(x, y, z);
                if (!local.count(gid)) {
                    local[gid] = static_cast<int>(order.size());
                    order.push_back(gid);
                }
            }
        SuperpixelMap m;
        m.width = w;
        m.height = h;
        m.labels.resize(static_cast<std::size_t>(w) * h);
        m.clusters.assign(order.size(), SlicCluster{});
        std::vector<double> sx(order.size(), 0), sy(order.size(), 0), si(order.size(), 0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                int c = local[ids.at(x, y, z)];
                m.labels[static_cast<std::size_t>(y) * w + x] = c;
                sx[c] += x;
                sy[c] += y;
                si[c] += image.at(x, y, z);
                ++m.clusters[c].count;
            }
        for (std::size_t c = 0; c < order.size(); ++c) {
            m.clusters[c].x = sx[c] / m.clusters[c].count;
            m.clusters[c].y = sy[c] / m.clusters[c].count;
            m.clusters[c].intensity = si[c] / m.clusters[c].count;
        }
        sv.slices.push_back(std::move(m));
        sv.slice_offset.push_back(offset);
        offset += static_cast<int>(order.size());
    }
    sv.total_clusters = offset;
    return sv;
}

double adherence_dice(const SuperpixelMap& sp, const std::vector<std::uint8_t>& truth,
                      double overlap_ratio) {
    if (!(overlap_ratio > 0) || overlap_ratio > 1)
        throw std::invalid_argument("overlap ratio must be in (0, 1]");
    std::size_t n = static_cast<std::size_t>(sp.width) * sp.height;
    if (truth.size() != n) throw std::invalid_argument("truth bitmap size mismatch");
    std::size_t truth_n = 0;
    for (auto t : truth)
        if (t) ++truth_n;
    if (truth_n == 0) throw std::invalid_argument("truth region is empty");

    std::vector<int> inter(sp.clusters.size(), 0);
    for (std::size_t i = 0; i < n; ++i)
        if (truth[i]) ++inter[sp.labels[i]];
    std::vector<char> picked(sp.clusters.size(), 0);
    for (std::size_t c = 0; c < sp.clusters.size(); ++c)
        picked[c] = inter[c] >= overlap_ratio * sp.clusters[c].count ? 1 : 0;

    std::size_t union_n = 0, union_truth = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!picked[sp.labels[i]]) continue;
        ++union_n;
        if (truth[i]) ++union_truth;
    }
    return 2.0 * union_truth / static_cast<double>(union_n + truth_n);
}

} // namespace scarline
