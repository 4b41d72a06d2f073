#include "scarline/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace scarline {
namespace {

// Uniform bucket grid for nearest-point queries; expands search rings until
// the closest occupied ring cannot beat the best squared distance found.
class PointGrid {
public:
    explicit PointGrid(const std::vector<Vec3>& pts) : pts_(pts) {
        lo_ = hi_ = pts[0];
        for (const Vec3& p : pts)
            for (int c = 0; c < 3; ++c) {
                lo_[c] = std::min(lo_[c], p[c]);
                hi_[c] = std::max(hi_[c], p[c]);
            }
        double target = std::cbrt(static_cast<double>(pts.size()));
        for (int c = 0; c < 3; ++c) {
            double ext = hi_[c] - lo_[c];
            dims_[c] = std::max(1, std::min<int>(64, static_cast<int>(target)));
            cell_[c] = ext > 0 ? ext / dims_[c] : 1.0;
        }
        cells_.resize(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2]);
        for (std::size_t i = 0; i < pts.size(); ++i)
            cells_[cell_index(pts[i])].push_back(i);
    }

    double min_sq_dist(const Vec3& q) const {
        int ci[3];
        locate(q, ci);
        double best = std::numeric_limits<double>::infinity();
        int max_ring = dims_[0] + dims_[1] + dims_[2];
        for (int ring = 0; ring <= max_ring; ++ring) {
            if (best < std::numeric_limits<double>::infinity()) {
                // closest possible point in this ring
                double ring_gap = (ring - 1) * min_cell();
                if (ring >= 1 && ring_gap > 0 && ring_gap * ring_gap > best) break;
            }
            bool any = scan_ring(q, ci, ring, best);
            if (!any && best < std::numeric_limits<double>::infinity()) {
                // no cells left at this radius
                break;
            }
        }
        return best;
    }

private:
    double min_cell() const { return std::min({cell_[0], cell_[1], cell_[2]}); }

    void locate(const Vec3& q, int ci[3]) const {
        for (int c = 0; c < 3; ++c) {
            int i = static_cast<int>((q[c] - lo_[c]) / cell_[c]);
            ci[c] = std::clamp(i, 0, dims_[c] - 1);
        }
    }

    std::size_t cell_index(const Vec3& p) const {
        int ci[3];
        locate(p, ci);
        return (static_cast<std::size_t>(ci[2]) * dims_[1] + ci[1]) * dims_[0] + ci[0];
    }

    bool scan_ring(const Vec3& q, const int ci[3], int ring, double& best) const {
        bool any = false;
        int x0 = ci[0] - ring, x1 = ci[0] + ring;
        int y0 = ci[1] - ring, y1 = ci[1] + ring;
        int z0 = ci[2] - ring, z1 = ci[2] + ring;
        for (int z = z0; z <= z1; ++z) {
            if (z < 0 || z >= dims_[2]) continue;
            for (int y = y0; y <= y1; ++y) {
                if (y < 0 || y >= dims_[1]) continue;
                for (int x = x0; x <= x1; ++x) {
                    if (x < 0 || x >= dims_[0]) continue;
                    if (ring > 0 && x != x0 && x != x1 && y != y0 && y != y1 && z != z0 && z != z1)
                        continue; // interior of the ring, visited earlier
                    any = true;
                    for (std::size_t idx : cells_[(static_cast<std::size_t>(z) * dims_[1] + y) * dims_[0] + x]) {
                        const Vec3& p = pts_[idx];
                        double dx = q[0] - p[0], dy = q[1] - p[1], dz = q[2] - p[2];
                        double d2 = dx * dx + dy * dy + dz * dz;
                        best = std::min(best, d2);
                    }
                }
            }
        }
        return any;
    }

    const std::vector<Vec3>& pts_;
    Vec3 lo_{}, hi_{};
    int dims_[3]{1, 1, 1};
    double cell_[3]{1, 1, 1};
    std::vector<std::vector<std::size_t>> cells_;
};

void require_same_grid(const LabelVolume& a, const LabelVolume& b) {
    if (!same_geometry(a.geom, b.geom))
        throw std::invalid_argument("masks must share grid geometry");
}

} // namespace

OverlapReport overlap_metrics(const LabelVolume& auto_mask, const LabelVolume& manual_mask) {
    require_same_grid(auto_mask, manual_mask);
    OverlapReport r;
    std::size_t n = auto_mask.data.size();
    for (std::size_t i = 0; i < n; ++i) {
        bool m = auto_mask.data[i] != 0;
        bool a = manual_mask.data[i] != 0;
        if (m && a) ++r.tp;
        else if (m) ++r.fp;
        else if (a) ++r.fn;
        else ++r.tn;
    }
    std::size_t m_sz = r.tp + r.fp, a_sz = r.tp + r.fn, uni = r.tp + r.fp + r.fn;
    r.both_empty = (m_sz == 0 && a_sz == 0);
    if (r.both_empty) {
        r.dice = r.jaccard = r.precision = 1.0;
    } else {
        r.dice = (m_sz + a_sz) ? 2.0 * r.tp / static_cast<double>(m_sz + a_sz) : 1.0;
        r.jaccard = uni ? static_cast<double>(r.tp) / uni : 1.0;
        r.precision = a_sz ? static_cast<double>(r.tp) / a_sz : 0.0;
    }
    std::size_t t = n;
    if (t == a_sz)
        r.npv = (t == uni) ? 1.0 : 0.0;
    else
        r.npv = static_cast<double>(t - uni) / static_cast<double>(t - a_sz);
    return r;
}

std::vector<Vec3> surface_points(const LabelVolume& mask) {
    const GridGeometry& g = mask.geom;
    std::vector<Vec3> out;
    static const int nb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i) {
                if (mask.at(i, j, k) == 0) continue;
                bool boundary = false;
                for (const auto& d : nb) {
                    int ni = i + d[0], nj = j + d[1], nk = k + d[2];
                    if (!g.contains(ni, nj, nk) || mask.at(ni, nj, nk) == 0) {
                        boundary = true;
                        break;
                    }
                }
                if (boundary) out.push_back(g.voxel_center(i, j, k));
            }
    return out;
}

namespace {

double directed_sum_and_max(const std::vector<Vec3>& from, const PointGrid& to, double& max_d) {
    double sum = 0;
    max_d = 0;
    for (const Vec3& p : from) {
        double d = std::sqrt(to.min_sq_dist(p));
        sum += d;
        max_d = std::max(max_d, d);
    }
    return sum;
}

} // namespace

double hausdorff_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("hausdorff distance needs non-empty point sets");
    PointGrid ga(a), gb(b);
    double max_ab = 0, max_ba = 0;
    directed_sum_and_max(a, gb, max_ab);
    directed_sum_and_max(b, ga, max_ba);
    return std::max(max_ab, max_ba);
}

double average_surface_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("surface distance needs non-empty point sets");
    PointGrid ga(a), gb(b);
    double m;
    double mean_ab = directed_sum_and_max(a, gb, m) / a.size();
    double mean_ba = directed_sum_and_max(b, ga, m) / b.size();
    return 0.5 * (mean_ab + mean_ba);
}

double fibrosis_extent_percent(const LabelVolume& scar, const LabelVolume& wall) {
    require_same_grid(scar, wall);
    std::size_t wall_n = 0, scar_in_wall = 0;
    for (std::size_t i = 0; i < wall.data.size(); ++i) {
        if (wall.data[i] == 0) continue;
        ++wall_n;
        if (scar.data[i] != 0) ++scar_in_wall;
    }
    if (wall_n == 0) throw std::invalid_argument("fibrosis extent needs a non-empty wall mask");
    double vox = wall.geom.spacing[0] * wall.geom.spacing[1] * wall.geom.spacing[2];
    return 100.0 * (scar_in_wall * vox) / (wall_n * vox);
}

BlandAltman bland_altman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("paired measurements must have equal length");
    if (a.size() < 2) throw std::invalid_argument("agreement limits need at least two pairs");
    BlandAltman r;
    std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) {
        double diff = a[i] - b[i];
        r.points.emplace_back(0.5 * (a[i] + b[i]), diff);
        r.bias += diff;
    }
    r.bias /= static_cast<double>(n);
    double ss = 0;
    for (const auto& [mean, diff] : r.points) {
        (void)mean;
        ss += (diff - r.bias) * (diff - r.bias);
    }
    r.sd = std::sqrt(ss / static_cast<double>(n - 1));
    r.lo = r.bias - 1.96 * r.sd;
    r.hi = r.bias + 1.96 * r.sd;
    return r;
}

} // namespace scarline
