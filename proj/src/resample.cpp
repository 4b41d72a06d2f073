#include "scarline/resample.hpp"

#include <cmath>

namespace scarline {

TrilinearSample sample_trilinear(const ScalarVolume& v, const Vec3& u) {
    TrilinearSample s;
    const Index3& d = v.geom.dims;
    for (int c = 0; c < 3; ++c)
        if (u[c] < 0.0 || u[c] > d[c] - 1.0) return s;
    int i0[3];
    double f[3];
    for (int c = 0; c < 3; ++c) {
        double fl = std::floor(u[c]);
        int i = static_cast<int>(fl);
        if (i > d[c] - 2) i = d[c] - 2; // exact upper edge
        if (i < 0) i = 0;              // single-voxel axis
        i0[c] = i;
        f[c] = u[c] - i;
    }
    auto at = [&](int a, int b, int cc) -> double {
        int ia = std::min(i0[0] + a, d[0] - 1);
        int ib = std::min(i0[1] + b, d[1] - 1);
        int ic = std::min(i0[2] + cc, d[2] - 1);
        return v.data[v.geom.linear(ia, ib, ic)];
    };
    double c000 = at(0, 0, 0), c100 = at(1, 0, 0), c010 = at(0, 1, 0), c110 = at(1, 1, 0);
    double c001 = at(0, 0, 1), c101 = at(1, 0, 1), c011 = at(0, 1, 1), c111 = at(1, 1, 1);
    double fx = f[0], fy = f[1], fz = f[2];

    double c00 = c000 + (c100 - c000) * fx;
    double c10 = c010 + (c110 - c010) * fx;
    double c01 = c001 + (c101 - c001) * fx;
    double c11 = c011 + (c111 - c011) * fx;
    double c0 = c00 + (c10 - c00) * fy;
    double c1 = c01 + (c11 - c01) * fy;
    s.value = c0 + (c1 - c0) * fz;

    double gx00 = c100 - c000, gx10 = c110 - c010, gx01 = c101 - c001, gx11 = c111 - c011;
    double gx0 = gx00 + (gx10 - gx00) * fy;
    double gx1 = gx01 + (gx11 - gx01) * fy;
    s.grad[0] = gx0 + (gx1 - gx0) * fz;
    double gy0 = c10 - c00, gy1 = c11 - c01;
    s.grad[1] = gy0 + (gy1 - gy0) * fz;
    s.grad[2] = c1 - c0;
    s.inside = true;
    return s;
}

ScalarVolume resample(const ScalarVolume& src, const TransformChain& chain,
                      const GridGeometry& target, float fill) {
    src.geom.validate();
    target.validate();
    chain.validate();
    ScalarVolume out = ScalarVolume::zeros(target);
    for (int k = 0; k < target.dims[2]; ++k) {
        for (int j = 0; j < target.dims[1]; ++j) {
            for (int i = 0; i < target.dims[0]; ++i) {
                Vec3 q = chain.apply(target.voxel_center(i, j, k));
                TrilinearSample s = sample_trilinear(src, src.geom.continuous_index(q));
                out.data[target.linear(i, j, k)] = s.inside ? static_cast<float>(s.value) : fill;
            }
        }
    }
    return out;
}

LabelVolume resample_labels(const LabelVolume& src, const TransformChain& chain,
                            const GridGeometry& target) {
    src.geom.validate();
    target.validate();
    chain.validate();
    LabelVolume out = LabelVolume::zeros(target);
    out.label_table = src.label_table;
    const Index3& d = src.geom.dims;
    for (int k = 0; k < target.dims[2]; ++k) {
        for (int j = 0; j < target.dims[1]; ++j) {
            for (int i = 0; i < target.dims[0]; ++i) {
                Vec3 q = chain.apply(target.voxel_center(i, j, k));
                Vec3 u = src.geom.continuous_index(q);
                // round half away from the index origin (either sign)
                auto rnd = [](double x) {
                    return static_cast<int>(x >= 0 ? std::floor(x + 0.5) : std::ceil(x - 0.5));
                };
                int ia = rnd(u[0]), ib = rnd(u[1]), ic = rnd(u[2]);
                if (ia < 0 || ib < 0 || ic < 0 || ia >= d[0] || ib >= d[1] || ic >= d[2]) continue;
                out.data[target.linear(i, j, k)] = src.data[src.geom.linear(ia, ib, ic)];
            }
        }
    }
    return out;
}

ScalarVolume downsample2(const ScalarVolume& v) {
    GridGeometry g;
    for (int c = 0; c < 3; ++c) {
        g.dims[c] = std::max(1, (v.geom.dims[c] + 1) / 2);
        g.spacing[c] = v.geom.spacing[c] * 2;
        g.origin[c] = v.geom.origin[c] + 0.5 * v.geom.spacing[c];
    }
    ScalarVolume out = ScalarVolume::zeros(g);
    for (int k = 0; k < g.dims[2]; ++k) {
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int i = 0; i < g.dims[0]; ++i) {
                double sum = 0;
                int n = 0;
                for (int dk = 0; dk < 2; ++dk) {
                    int sk = 2 * k + dk;
                    if (sk >= v.geom.dims[2]) continue;
                    for (int dj = 0; dj < 2; ++dj) {
                        int sj = 2 * j + dj;
                        if (sj >= v.geom.dims[1]) continue;
                        for (int di = 0; di < 2; ++di) {
                            int si = 2 * i + di;
                            if (si >= v.geom.dims[0]) continue;
                            sum += v.data[v.geom.linear(si, sj, sk)];
                            ++n;
                        }
                    }
                }
                out.data[g.linear(i, j, k)] = static_cast<float>(sum / n);
            }
        }
    }
    return out;
}

} // namespace scarline
