#include "scarline/transform.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace scarline {
namespace {

// cubic B-spline basis on t in [0,1)
inline void bspline_weights(double t, double w[4]) {
    double t2 = t * t, t3 = t2 * t;
    w[0] = (1 - 3 * t + 3 * t2 - t3) / 6.0;
    w[1] = (4 - 6 * t2 + 3 * t3) / 6.0;
    w[2] = (1 + 3 * t + 3 * t2 - 3 * t3) / 6.0;
    w[3] = t3 / 6.0;
}

} // namespace

AffineTransform AffineTransform::inverse() const {
    double d = det();
    if (std::abs(d) < 1e-9) throw std::invalid_argument("affine transform is degenerate (|det| < 1e-9)");
    const auto& a = m;
    AffineTransform r;
    r.m[0] = (a[4] * a[8] - a[5] * a[7]) / d;
    r.m[1] = (a[2] * a[7] - a[1] * a[8]) / d;
    r.m[2] = (a[1] * a[5] - a[2] * a[4]) / d;
    r.m[3] = (a[5] * a[6] - a[3] * a[8]) / d;
    r.m[4] = (a[0] * a[8] - a[2] * a[6]) / d;
    r.m[5] = (a[2] * a[3] - a[0] * a[5]) / d;
    r.m[6] = (a[3] * a[7] - a[4] * a[6]) / d;
    r.m[7] = (a[1] * a[6] - a[0] * a[7]) / d;
    r.m[8] = (a[0] * a[4] - a[1] * a[3]) / d;
    Vec3 mt = {r.m[0] * t[0] + r.m[1] * t[1] + r.m[2] * t[2],
               r.m[3] * t[0] + r.m[4] * t[1] + r.m[5] * t[2],
               r.m[6] * t[0] + r.m[7] * t[1] + r.m[8] * t[2]};
    r.t = {-mt[0], -mt[1], -mt[2]};
    return r;
}

AffineTransform AffineTransform::translation(const Vec3& t) {
    AffineTransform a;
    a.t = t;
    return a;
}

AffineTransform AffineTransform::rigid(const Vec3& axis, double angle_rad, const Vec3& center, const Vec3& shift) {
    double n = norm(axis);
    if (n < 1e-12) throw std::invalid_argument("rotation axis must be non-zero");
    Vec3 u = (1.0 / n) * axis;
    double c = std::cos(angle_rad), s = std::sin(angle_rad), omc = 1 - c;
    AffineTransform a;
    a.m = {c + u[0] * u[0] * omc,        u[0] * u[1] * omc - u[2] * s, u[0] * u[2] * omc + u[1] * s,
           u[1] * u[0] * omc + u[2] * s, c + u[1] * u[1] * omc,        u[1] * u[2] * omc - u[0] * s,
           u[2] * u[0] * omc - u[1] * s, u[2] * u[1] * omc + u[0] * s, c + u[2] * u[2] * omc};
    Vec3 rc = a.apply(center); // rotation applied to center (t still zero)
    a.t = {center[0] - rc[0] + shift[0], center[1] - rc[1] + shift[1], center[2] - rc[2] + shift[2]};
    return a;
}

AffineTransform compose(const AffineTransform& outer, const AffineTransform& inner) {
    AffineTransform r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            r.m[3 * i + j] = outer.m[3 * i] * inner.m[j] + outer.m[3 * i + 1] * inner.m[3 + j] +
                             outer.m[3 * i + 2] * inner.m[6 + j];
    r.t = outer.apply(inner.t);
    return r;
}

Vec3 FfdTransform::displacement(const Vec3& p) const {
    Vec3 u = {(p[0] - grid_origin[0]) / grid_spacing[0],
              (p[1] - grid_origin[1]) / grid_spacing[1],
              (p[2] - grid_origin[2]) / grid_spacing[2]};
    int base[3];
    double w[3][4];
    for (int c = 0; c < 3; ++c) {
        double fl = std::floor(u[c]);
        base[c] = static_cast<int>(fl) - 1;
        bspline_weights(u[c] - fl, w[c]);
    }
    Vec3 d{0, 0, 0};
    for (int kk = 0; kk < 4; ++kk) {
        int gk = base[2] + kk;
        if (gk < 0 || gk >= grid[2]) continue;
        for (int jj = 0; jj < 4; ++jj) {
            int gj = base[1] + jj;
            if (gj < 0 || gj >= grid[1]) continue;
            double wjk = w[1][jj] * w[2][kk];
            std::size_t row = (static_cast<std::size_t>(gk) * grid[1] + gj) * grid[0];
            for (int ii = 0; ii < 4; ++ii) {
                int gi = base[0] + ii;
                if (gi < 0 || gi >= grid[0]) continue;
                double ww = w[0][ii] * wjk;
                const Vec3& c = disp[row + gi];
                d[0] += ww * c[0];
                d[1] += ww * c[1];
                d[2] += ww * c[2];
            }
        }
    }
    return d;
}

FfdTransform::Support FfdTransform::support(const Vec3& p) const {
    Vec3 u = {(p[0] - grid_origin[0]) / grid_spacing[0],
              (p[1] - grid_origin[1]) / grid_spacing[1],
              (p[2] - grid_origin[2]) / grid_spacing[2]};
    int base[3];
    double w[3][4];
    for (int c = 0; c < 3; ++c) {
        double fl = std::floor(u[c]);
        base[c] = static_cast<int>(fl) - 1;
        bspline_weights(u[c] - fl, w[c]);
    }
    Support s;
    for (int kk = 0; kk < 4; ++kk) {
        int gk = base[2] + kk;
        if (gk < 0 || gk >= grid[2]) continue;
        for (int jj = 0; jj < 4; ++jj) {
            int gj = base[1] + jj;
            if (gj < 0 || gj >= grid[1]) continue;
            double wjk = w[1][jj] * w[2][kk];
            std::size_t row = (static_cast<std::size_t>(gk) * grid[1] + gj) * grid[0];
            for (int ii = 0; ii < 4; ++ii) {
                int gi = base[0] + ii;
                if (gi < 0 || gi >= grid[0]) continue;
                s.index[s.count] = static_cast<int>(row + gi);
                s.weight[s.count] = w[0][ii] * wjk;
                ++s.count;
            }
        }
    }
    return s;
}

FfdTransform FfdTransform::covering(const Vec3& lo, const Vec3& hi, double spacing_mm) {
    if (!(spacing_mm > 0)) throw std::invalid_argument("control spacing must be positive");
    FfdTransform f;
    f.grid_spacing = {spacing_mm, spacing_mm, spacing_mm};
    for (int c = 0; c < 3; ++c) {
        if (hi[c] < lo[c]) throw std::invalid_argument("invalid domain for control lattice");
        // one margin control point before lo and enough after hi so every
        // point of the domain has full 4-point support
        f.grid_origin[c] = lo[c] - spacing_mm;
        int n = static_cast<int>(std::ceil((hi[c] - lo[c]) / spacing_mm)) + 4;
        f.grid[c] = n;
    }
    f.disp.assign(f.control_count(), Vec3{0, 0, 0});
    return f;
}

void FfdTransform::validate() const {
    if (grid[0] < 4 || grid[1] < 4 || grid[2] < 4)
        throw std::invalid_argument("control lattice needs at least 4 points per axis");
    if (!(grid_spacing[0] > 0 && grid_spacing[1] > 0 && grid_spacing[2] > 0))
        throw std::invalid_argument("control spacing must be positive");
    if (disp.size() != control_count())
        throw std::invalid_argument("control displacement count does not match lattice");
    for (const Vec3& d : disp)
        for (double x : d)
            if (!std::isfinite(x)) throw std::invalid_argument("non-finite control displacement");
}

std::array<double, 9> TransformChain::blended_matrix(const Vec3& p) const {
    if (locals.empty()) return global.m;
    double wmax = 0;
    std::array<double, 9> acc{};
    double b2 = 2.0 * blend_radius_mm * blend_radius_mm;
    std::vector<double> wl(locals.size());
    for (std::size_t k = 0; k < locals.size(); ++k) {
        double d = norm(p - locals[k].center) - locals[k].radius;
        double w = d <= 0 ? 1.0 : std::exp(-d * d / b2);
        wl[k] = w;
        wmax = std::max(wmax, w);
    }
    double wg = 1.0 - wmax;
    double sum = wg;
    for (double w : wl) sum += w;
    for (int i = 0; i < 9; ++i) acc[i] = wg * global.m[i];
    for (std::size_t k = 0; k < locals.size(); ++k)
        for (int i = 0; i < 9; ++i) acc[i] += wl[k] * locals[k].affine.m[i];
    for (int i = 0; i < 9; ++i) acc[i] /= sum;
    return acc;
}

Vec3 TransformChain::apply(const Vec3& p) const {
    Vec3 q = p;
    if (ffd) q = p + ffd->displacement(p);
    if (locals.empty()) return global.apply(q);

    double b2 = 2.0 * blend_radius_mm * blend_radius_mm;
    double wmax = 0;
    std::vector<double> wl(locals.size());
    for (std::size_t k = 0; k < locals.size(); ++k) {
        double d = norm(p - locals[k].center) - locals[k].radius;
        double w = d <= 0 ? 1.0 : std::exp(-d * d / b2);
        wl[k] = w;
        wmax = std::max(wmax, w);
    }
    double wg = 1.0 - wmax;
    double sum = wg;
    for (double w : wl) sum += w;
    Vec3 out = wg * global.apply(q);
    for (std::size_t k = 0; k < locals.size(); ++k)
        out = out + wl[k] * locals[k].affine.apply(q);
    return (1.0 / sum) * out;
}

void TransformChain::validate() const {
    if (std::abs(global.det()) < 1e-9)
        throw std::invalid_argument("global affine is degenerate (|det| < 1e-9)");
    for (const auto& l : locals) {
        if (std::abs(l.affine.det()) < 1e-9)
            throw std::invalid_argument("local affine is degenerate (|det| < 1e-9)");
        if (l.radius < 0) throw std::invalid_argument("local region radius must be non-negative");
    }
    if (!(blend_radius_mm > 0)) throw std::invalid_argument("blend radius must be positive");
    if (ffd) ffd->validate();
}

TransformChain TransformChain::from_affine(const AffineTransform& a) {
    TransformChain c;
    c.global = a;
    return c;
}

void write_transform(const std::string& path, const TransformChain& chain) {
    chain.validate();
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    char buf[512];
    f << "scarline-transform 1\n";
    auto put_affine = [&](const AffineTransform& a) {
        for (int i = 0; i < 9; ++i) {
            std::snprintf(buf, sizeof buf, "%.17g ", a.m[i]);
            f << buf;
        }
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g", a.t[0], a.t[1], a.t[2]);
        f << buf;
    };
    f << "global: ";
    put_affine(chain.global);
    f << "\n";
    std::snprintf(buf, sizeof buf, "blend_radius: %.17g\n", chain.blend_radius_mm);
    f << buf;
    for (const auto& l : chain.locals) {
        std::snprintf(buf, sizeof buf, "local: %d %.17g %.17g %.17g %.17g ", l.label,
                      l.center[0], l.center[1], l.center[2], l.radius);
        f << buf;
        put_affine(l.affine);
        f << "\n";
    }
    if (chain.ffd) {
        const FfdTransform& d = *chain.ffd;
        std::snprintf(buf, sizeof buf, "ffd: %d %d %d %.17g %.17g %.17g %.17g %.17g %.17g\n",
                      d.grid[0], d.grid[1], d.grid[2],
                      d.grid_origin[0], d.grid_origin[1], d.grid_origin[2],
                      d.grid_spacing[0], d.grid_spacing[1], d.grid_spacing[2]);
        f << buf;
        for (const Vec3& c : d.disp) {
            std::snprintf(buf, sizeof buf, "d: %.17g %.17g %.17g\n", c[0], c[1], c[2]);
            f << buf;
        }
    }
    f.flush();
    if (!f) throw std::runtime_error("write failed on " + path);
}

TransformChain read_transform(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line != "scarline-transform 1")
        throw std::runtime_error(path + ": not a transform file");
    TransformChain chain;
    bool have_global = false;
    std::size_t want_disp = 0;
    auto get_affine = [&](std::istringstream& is) {
        AffineTransform a;
        for (int i = 0; i < 9; ++i) is >> a.m[i];
        is >> a.t[0] >> a.t[1] >> a.t[2];
        if (is.fail()) throw std::runtime_error(path + ": malformed affine");
        return a;
    };
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::size_t sep = line.find(':');
        if (sep == std::string::npos) throw std::runtime_error(path + ": malformed line " + line);
        std::string key = line.substr(0, sep);
        std::istringstream is(line.substr(sep + 1));
        if (key == "global") {
            chain.global = get_affine(is);
            have_global = true;
        } else if (key == "blend_radius") {
            is >> chain.blend_radius_mm;
        } else if (key == "local") {
            LocalAffine l;
            is >> l.label >> l.center[0] >> l.center[1] >> l.center[2] >> l.radius;
            if (is.fail()) throw std::runtime_error(path + ": malformed local line");
            l.affine = get_affine(is);
            chain.locals.push_back(l);
        } else if (key == "ffd") {
            FfdTransform d;
            is >> d.grid[0] >> d.grid[1] >> d.grid[2]
               >> d.grid_origin[0] >> d.grid_origin[1] >> d.grid_origin[2]
               >> d.grid_spacing[0] >> d.grid_spacing[1] >> d.grid_spacing[2];
            if (is.fail()) throw std::runtime_error(path + ": malformed ffd line");
            chain.ffd = d;
            want_disp = chain.ffd->control_count();
            chain.ffd->disp.reserve(want_disp);
        } else if (key == "d") {
            if (!chain.ffd) throw std::runtime_error(path + ": displacement before ffd header");
            Vec3 c;
            is >> c[0] >> c[1] >> c[2];
            if (is.fail()) throw std::runtime_error(path + ": malformed displacement line");
            chain.ffd->disp.push_back(c);
        } else {
            throw std::runtime_error(path + ": unknown key " + key);
        }
    }
    if (!have_global) throw std::runtime_error(path + ": missing global affine");
    if (chain.ffd && chain.ffd->disp.size() != want_disp)
        throw std::runtime_error(path + ": displacement count mismatch");
    chain.validate();
    return chain;
}

} // namespace scarline
