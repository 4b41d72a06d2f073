#pragma once

#include "scarline/volume.hpp"

#include <algorithm>
#include <cmath>

namespace scarline {

/// Intensity window mapped onto the bin axis. Kept explicit so histogram
/// builders can freeze it while one of the images changes underneath.
struct IntensityBinRange {
    float lo = 0, hi = 1;
    static IntensityBinRange of(const ScalarVolume& v);
};

/// Cubic B-spline kernel and its derivative.
inline double bspline3(double x) {
    double a = std::fabs(x);
    if (a < 1.0) return (4.0 - 6.0 * a * a + 3.0 * a * a * a) / 6.0;
    if (a < 2.0) {
        double t = 2.0 - a;
        return t * t * t / 6.0;
    }
    return 0.0;
}

inline double bspline3_d(double x) {
    double a = std::fabs(x);
    double s = x < 0 ? -1.0 : 1.0;
    if (a < 1.0) return s * (-2.0 * a + 1.5 * a * a);
    if (a < 2.0) {
        double t = 2.0 - a;
        return s * (-0.5 * t * t);
    }
    return 0.0;
}

/// Kernel weights of one sample over the bin axis, renormalized so every
/// sample deposits exactly unit mass; width -> 0 degenerates to nearest-bin
/// counting. dw holds the post-normalization derivative per unit u.
struct BinWeights {
    int first = 0;
    int count = 0;
    double w[16];
    double dw[16];
};

inline BinWeights bin_weights(float value, IntensityBinRange range, int bins, double width,
                              bool need_deriv) {
    BinWeights out;
    double u = 0.0;
    if (range.hi > range.lo) {
        u = (double(value) - double(range.lo)) * double(bins - 1) /
            (double(range.hi) - double(range.lo));
        u = std::clamp(u, 0.0, double(bins - 1));
    }
    if (width <= 1e-6) { // nearest-bin degenerate window
        out.first = int(std::lround(u));
        out.count = 1;
        out.w[0] = 1.0;
        out.dw[0] = 0.0;
        return out;
    }
    int lo = std::max(0, int(std::ceil(u - 2.0 * width)));
    int hi = std::min(bins - 1, int(std::floor(u + 2.0 * width)));
    if (lo > hi) {
        out.first = int(std::lround(u));
        out.count = 1;
        out.w[0] = 1.0;
        out.dw[0] = 0.0;
        return out;
    }
    out.first = lo;
    out.count = hi - lo + 1;
    double sum = 0, dsum = 0;
    for (int k = lo; k <= hi; ++k) {
        double t = (u - k) / width;
        double b = bspline3(t);
        double db = need_deriv ? bspline3_d(t) / width : 0.0;
        out.w[k - lo] = b;
        out.dw[k - lo] = db;
        sum += b;
        dsum += db;
    }
    if (sum <= 0) {
        out.first = int(std::lround(u));
        out.count = 1;
        out.w[0] = 1.0;
        out.dw[0] = 0.0;
        return out;
    }
    for (int k = 0; k < out.count; ++k) {
        double b = out.w[k] / sum;
        if (need_deriv) out.dw[k] = (out.dw[k] - b * dsum) / sum;
        out.w[k] = b;
    }
    return out;
}

/// Jacobian of the bin coordinate with respect to the intensity value.
inline double du_dvalue(IntensityBinRange range, int bins) {
    if (range.hi <= range.lo) return 0.0;
    return double(bins - 1) / (double(range.hi) - double(range.lo));
}

} // namespace scarline
