#include "scarline/morphology.hpp"

#include <limits>

namespace scarline {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1D lower envelope of parabolas rooted at (i*step, f[i]), sampled on the
// same grid. Exact squared-distance propagation along one axis. Sources with
// infinite f are skipped; the caller guarantees at least one finite entry.
void edt_1d(const double* f, double* d, int n, double step, int* v, double* z) {
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == kInf) continue;
        double qs = q * step;
        while (k >= 0) {
            double ps = v[k] * step;
            double s = (f[q] + qs * qs - (f[v[k]] + ps * ps)) / (2 * qs - 2 * ps);
            if (s <= z[k]) {
                --k;
            } else {
                ++k;
                v[k] = q;
                z[k] = s;
                z[k + 1] = kInf;
                break;
            }
        }
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -kInf;
            z[1] = kInf;
        }
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        double qs = q * step;
        while (z[k + 1] < qs) ++k;
        double diff = qs - v[k] * step;
        d[q] = diff * diff + f[v[k]];
    }
}

void edt_pass(std::vector<double>& field, const GridGeometry& g, int axis) {
    int n = g.dims[axis];
    double step = g.spacing[axis];
    std::vector<double> f(n), d(n);
    std::vector<int> v(n);
    std::vector<double> z(n + 1);

    int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    auto run_line = [&](std::size_t base, std::size_t stride) {
        bool any = false;
        for (int q = 0; q < n; ++q) {
            f[q] = field[base + q * stride];
            if (f[q] != kInf) any = true;
        }
        if (!any) return;
        edt_1d(f.data(), d.data(), n, step, v.data(), z.data());
        for (int q = 0; q < n; ++q) field[base + q * stride] = d[q];
    };

    if (axis == 0) {
        for (int k = 0; k < nz; ++k)
            for (int j = 0; j < ny; ++j)
                run_line(g.linear(0, j, k), 1);
    } else if (axis == 1) {
        for (int k = 0; k < nz; ++k)
            for (int i = 0; i < nx; ++i)
                run_line(g.linear(i, 0, k), static_cast<std::size_t>(nx));
    } else {
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                run_line(g.linear(i, j, 0), static_cast<std::size_t>(nx) * ny);
    }
}

void check_label(const LabelVolume& mask, int label) {
    if (label <= 0) throw std::invalid_argument("label id must be positive");
    if (!mask.has_label(label))
        throw std::invalid_argument("label id " + std::to_string(label) + " unknown to this volume");
}

} // namespace

std::vector<double> squared_distance_field(const LabelVolume& mask, int label) {
    mask.geom.validate();
    std::vector<double> field(mask.geom.voxel_count());
    for (std::size_t i = 0; i < field.size(); ++i)
        field[i] = (mask.data[i] == label) ? 0.0 : kInf;
    for (int axis = 0; axis < 3; ++axis)
        edt_pass(field, mask.geom, axis);
    return field;
}

LabelVolume dilate_mm(const LabelVolume& mask, int label, double radius_mm) {
    check_label(mask, label);
    if (radius_mm < 0) throw std::invalid_argument("dilation radius must be non-negative");
    LabelVolume out = LabelVolume::zeros(mask.geom);
    std::vector<double> d2 = squared_distance_field(mask, label);
    double r2 = radius_mm * radius_mm;
    for (std::size_t i = 0; i < d2.size(); ++i)
        if (d2[i] <= r2) out.data[i] = static_cast<std::uint16_t>(label);
    if (mask.label_table.count(label)) out.label_table[label] = mask.label_table.at(label);
    return out;
}

LabelVolume erode_mm(const LabelVolume& mask, int label, double radius_mm) {
    check_label(mask, label);
    if (radius_mm < 0) throw std::invalid_argument("erosion radius must be non-negative");

    // distance to the complement of the labelled set
    LabelVolume inv = LabelVolume::zeros(mask.geom);
    for (std::size_t i = 0; i < mask.data.size(); ++i)
        inv.data[i] = (mask.data[i] == label) ? 0 : 1;
    LabelVolume out = LabelVolume::zeros(mask.geom);
    if (inv.count(1) == 0) {
        // label fills the grid: erosion keeps everything at any radius
        for (auto& v : out.data) v = static_cast<std::uint16_t>(label);
    } else {
        std::vector<double> d2 = squared_distance_field(inv, 1);
        double r2 = radius_mm * radius_mm;
        for (std::size_t i = 0; i < d2.size(); ++i)
            if (mask.data[i] == label && d2[i] > r2) out.data[i] = static_cast<std::uint16_t>(label);
    }
    if (mask.label_table.count(label)) out.label_table[label] = mask.label_table.at(label);
    return out;
}

} // namespace scarline
