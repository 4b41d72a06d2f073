#include "scarline/registration.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace scarline {

namespace {

constexpr double kMinDet = 1e-6;

/// One pyramid level's frozen objective. Intensity ranges come from the
/// full-resolution originals so the score stays smooth while the atlas warps.
struct Objective {
    const ScalarVolume* target = nullptr;
    const ScalarVolume* atlas = nullptr;
    SpatialBands bands;
    SemiConfig cfg;
    IntensityBinRange tr, ar;

    double score(const TransformChain& chain) const {
        ScalarVolume warped = resample(*atlas, chain, target->geom, ar.lo);
        return semi_score(*target, warped, bands, cfg, tr, ar);
    }

    /// Warped volume plus d value / d source-space position per voxel
    /// (zero where the sample leaves the atlas and the fill value applies).
    void warp_with_grad(const TransformChain& chain, ScalarVolume& warped,
                        std::vector<Vec3>& grad) const {
        const GridGeometry& g = target->geom;
        warped = ScalarVolume::zeros(g);
        grad.assign(g.voxel_count(), Vec3{0, 0, 0});
        const Vec3& sp = atlas->geom.spacing;
        std::size_t x = 0;
        for (int k = 0; k < g.dims[2]; ++k)
            for (int j = 0; j < g.dims[1]; ++j)
                for (int i = 0; i < g.dims[0]; ++i, ++x) {
                    Vec3 q = chain.apply(g.voxel_center(i, j, k));
                    TrilinearSample s = sample_trilinear(*atlas, atlas->geom.continuous_index(q));
                    if (s.inside) {
                        warped.data[x] = float(s.value);
                        grad[x] = {s.grad[0] / sp[0], s.grad[1] / sp[1], s.grad[2] / sp[2]};
                    } else {
                        warped.data[x] = ar.lo;
                    }
                }
    }
};

Objective make_objective(const ScalarVolume& target, const ScalarVolume& atlas,
                         const SemiConfig& cfg, IntensityBinRange tr, IntensityBinRange ar) {
    Objective obj;
    obj.target = &target;
    obj.atlas = &atlas;
    obj.bands = make_bands(target, cfg);
    obj.cfg = cfg;
    obj.tr = tr;
    obj.ar = ar;
    return obj;
}

/// Score and its gradient with respect to the 12 affine parameters:
/// dS/dM_ab = sum_x dS/dv_x * grad_a(x) * p_b,  dS/dt_a = sum_x dS/dv_x * grad_a(x).
double affine_gradient(const Objective& obj, const AffineTransform& T, double g[12]) {
    ScalarVolume warped;
    std::vector<Vec3> grad;
    obj.warp_with_grad(TransformChain::from_affine(T), warped, grad);
    SemiValueGrad svg = semi_value_grad(*obj.target, warped, obj.bands, obj.cfg, obj.tr, obj.ar);
    std::fill(g, g + 12, 0.0);
    const GridGeometry& geo = obj.target->geom;
    std::size_t x = 0;
    for (int k = 0; k < geo.dims[2]; ++k)
        for (int j = 0; j < geo.dims[1]; ++j)
            for (int i = 0; i < geo.dims[0]; ++i, ++x) {
                double dv = svg.dvalue[x];
                if (dv == 0.0) continue;
                Vec3 p = geo.voxel_center(i, j, k);
                const Vec3& gr = grad[x];
                for (int a = 0; a < 3; ++a) {
                    double ga = dv * gr[a];
                    g[3 * a + 0] += ga * p[0];
                    g[3 * a + 1] += ga * p[1];
                    g[3 * a + 2] += ga * p[2];
                    g[9 + a] += ga;
                }
            }
    return svg.score;
}

/// Score and gradient over the control displacements of chain.ffd via
/// d pos / d control = basis weight * blended linear part.
double ffd_gradient(const Objective& obj, const TransformChain& chain, std::vector<Vec3>& grad_c) {
    const FfdTransform& ffd = *chain.ffd;
    const GridGeometry& g = obj.target->geom;
    ScalarVolume warped;
    std::vector<Vec3> grad_v;
    obj.warp_with_grad(chain, warped, grad_v);
    SemiValueGrad svg = semi_value_grad(*obj.target, warped, obj.bands, obj.cfg, obj.tr, obj.ar);

    grad_c.assign(ffd.control_count(), Vec3{0, 0, 0});
    std::size_t x = 0;
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i, ++x) {
                double dv = svg.dvalue[x];
                if (dv == 0.0) continue;
                Vec3 p = g.voxel_center(i, j, k);
                std::array<double, 9> m = chain.blended_matrix(p);
                const Vec3& gr = grad_v[x];
                Vec3 v{gr[0] * m[0] + gr[1] * m[3] + gr[2] * m[6],
                       gr[0] * m[1] + gr[1] * m[4] + gr[2] * m[7],
                       gr[0] * m[2] + gr[1] * m[5] + gr[2] * m[8]};
                v = dv * v;
                FfdTransform::Support sup = ffd.support(p);
                for (int c = 0; c < sup.count; ++c)
                    grad_c[sup.index[c]] = grad_c[sup.index[c]] + sup.weight[c] * v;
            }
    return svg.score;
}

struct AscentStats {
    double score = 0;
    int iterations = 0;
};

/// Ascends in a volume-centered parameterization pos = M(p-c) + c + u so
/// matrix and translation gradients stay decoupled; the raw transform is
/// reconstructed as t = u + c - M c.
AscentStats ascend_affine(const Objective& obj, AffineTransform& T, const OptimizerSettings& opt) {
    double scale[12];
    for (int i = 0; i < 9; ++i) scale[i] = opt.step_linear;
    for (int i = 9; i < 12; ++i) scale[i] = opt.step_translation_mm;

    const GridGeometry& geo = obj.target->geom;
    Vec3 c = geo.origin + 0.5 * geo.extent();

    auto to_raw = [&](const double th[12]) {
        AffineTransform a;
        for (int i = 0; i < 9; ++i) a.m[i] = th[i];
        Vec3 mc = {th[0] * c[0] + th[1] * c[1] + th[2] * c[2],
                   th[3] * c[0] + th[4] * c[1] + th[5] * c[2],
                   th[6] * c[0] + th[7] * c[1] + th[8] * c[2]};
        for (int i = 0; i < 3; ++i) a.t[i] = th[9 + i] + c[i] - mc[i];
        return a;
    };

    double th[12];
    for (int i = 0; i < 9; ++i) th[i] = T.m[i];
    Vec3 tc = T.apply(c);
    for (int i = 0; i < 3; ++i) th[9 + i] = tc[i] - c[i];

    AscentStats stats;
    double f = 0;
    bool have_f = false;
    // Polak-Ribiere conjugate directions in the step-scaled space; plain
    // steepest ascent zigzags badly on the curved ridges this objective has
    double e_prev[12] = {}, d_prev[12] = {};
    bool have_prev = false;
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        double g[12];
        f = affine_gradient(obj, T, g);
        have_f = true;
        // raw matrix gradient -> centered: subtract the translation part
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) g[3 * a + b] -= c[b] * g[9 + a];
        double e[12];
        for (int i = 0; i < 12; ++i) e[i] = scale[i] * g[i];

        double beta = 0;
        if (have_prev) {
            double num = 0, den = 0;
            for (int i = 0; i < 12; ++i) {
                num += e[i] * (e[i] - e_prev[i]);
                den += e_prev[i] * e_prev[i];
            }
            if (den > 0) beta = std::max(0.0, num / den);
        }
        double dun[12], n2 = 0, de = 0;
        for (int i = 0; i < 12; ++i) {
            dun[i] = e[i] + beta * d_prev[i];
            de += dun[i] * e[i];
        }
        bool conjugate = beta > 0 && de > 0;
        if (de <= 0) // not an ascent direction: restart on the gradient
            for (int i = 0; i < 12; ++i) dun[i] = e[i];
        for (int i = 0; i < 12; ++i) n2 += dun[i] * dun[i];
        double n = std::sqrt(n2);
        if (n < 1e-14) break;
        double dir[12];
        for (int i = 0; i < 12; ++i) dir[i] = dun[i] / n;
        // directional derivative along the unit direction
        double dd = 0;
        for (int i = 0; i < 12; ++i) dd += dir[i] * e[i];

        auto try_step = [&](double lam, AffineTransform& cand, double& fc) {
            double thc[12];
            for (int i = 0; i < 12; ++i) thc[i] = th[i] + lam * scale[i] * dir[i];
            cand = to_raw(thc);
            if (std::fabs(cand.det()) < kMinDet) return false;
            fc = obj.score(TransformChain::from_affine(cand));
            return fc >= f + opt.armijo * lam * dd;
        };

        double accepted = -1, fnew = 0;
        AffineTransform cand;
        for (double lam = 1.0; lam >= opt.min_step_scale; lam *= 0.5) {
            if (try_step(lam, cand, fnew)) {
                accepted = lam;
                break;
            }
        }
        if (accepted == 1.0) { // expand while longer steps keep paying off
            AffineTransform cand2;
            double f2 = 0;
            for (double lam = 2.0; lam <= 8.0; lam *= 2.0) {
                if (!try_step(lam, cand2, f2) || f2 <= fnew) break;
                cand = cand2;
                fnew = f2;
                accepted = lam;
            }
        }
        if (accepted < 0) {
            if (conjugate) { // stale conjugate direction: retry from the gradient
                have_prev = false;
                continue;
            }
            break;
        }
        T = cand;
        for (int i = 0; i < 12; ++i)
            th[i] += accepted * scale[i] * dir[i];
        for (int i = 0; i < 12; ++i) {
            e_prev[i] = e[i];
            d_prev[i] = dun[i];
        }
        have_prev = true;
        ++stats.iterations;
        double gain = fnew - f;
        f = fnew;
        if (gain < opt.min_gain) break;
    }
    stats.score = have_f ? f : obj.score(TransformChain::from_affine(T));
    return stats;
}

int usable_levels(const GridGeometry& g, int requested) {
    int levels = 1;
    int d = std::min({g.dims[0], g.dims[1], g.dims[2]});
    while (levels < requested && d >= 16) {
        d = (d + 1) / 2;
        ++levels;
    }
    return levels;
}

} // namespace

void OptimizerSettings::validate() const {
    if (pyramid_levels < 1) throw std::invalid_argument("pyramid_levels must be at least 1");
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be at least 1");
    if (!(step_translation_mm > 0) || !(step_linear > 0) || !(step_control_mm > 0))
        throw std::invalid_argument("step sizes must be positive");
    if (!(armijo > 0) || armijo >= 1) throw std::invalid_argument("armijo must be in (0, 1)");
    if (!(min_step_scale > 0) || min_step_scale > 1)
        throw std::invalid_argument("min_step_scale must be in (0, 1]");
    if (!(min_gain >= 0)) throw std::invalid_argument("min_gain must be non-negative");
}

AffineResult register_affine(const ScalarVolume& target, const ScalarVolume& atlas,
                             const AffineTransform& init, const SemiConfig& cfg,
                             const OptimizerSettings& opt) {
    cfg.validate();
    opt.validate();
    target.validate();
    atlas.validate();
    if (std::fabs(init.det()) < kMinDet)
        throw std::invalid_argument("initial affine is degenerate");

    IntensityBinRange tr = IntensityBinRange::of(target);
    IntensityBinRange ar = IntensityBinRange::of(atlas);

    int levels = usable_levels(target.geom, opt.pyramid_levels);
    std::vector<ScalarVolume> tp{target}, ap{atlas};
    for (int l = 1; l < levels; ++l) {
        tp.push_back(downsample2(tp.back()));
        ap.push_back(downsample2(ap.back()));
    }

    AffineResult out;
    out.transform = init;
    for (int l = levels - 1; l >= 0; --l) {
        Objective obj = make_objective(tp[l], ap[l], cfg, tr, ar);
        AscentStats st = ascend_affine(obj, out.transform, opt);
        out.iterations += st.iterations;
        out.score = st.score;
        if (!std::isfinite(out.score))
            throw std::runtime_error("registration diverged to a non-finite score");
    }

    // coarse levels optimize a different objective; never hand back anything
    // that scores below the initialization at full resolution
    Objective full = make_objective(tp[0], ap[0], cfg, tr, ar);
    double f_init = full.score(TransformChain::from_affine(init));
    if (out.score < f_init) {
        out.transform = init;
        out.score = f_init;
    }
    return out;
}

FfdResult register_ffd(const ScalarVolume& target, const ScalarVolume& atlas,
                       const TransformChain& init, const SemiConfig& cfg,
                       double grid_spacing_mm, const OptimizerSettings& opt) {
    cfg.validate();
    opt.validate();
    target.validate();
    atlas.validate();
    init.validate();
    double min_sp = std::min({target.geom.spacing[0], target.geom.spacing[1],
                              target.geom.spacing[2]});
    if (grid_spacing_mm < 2.0 * min_sp)
        throw std::invalid_argument("FFD grid spacing must cover at least two voxels");

    IntensityBinRange tr = IntensityBinRange::of(target);
    IntensityBinRange ar = IntensityBinRange::of(atlas);

    const GridGeometry& g = target.geom;
    Vec3 lo = g.origin;
    Vec3 hi = g.origin + g.extent();
    TransformChain chain = init;
    chain.ffd = FfdTransform::covering(lo, hi, grid_spacing_mm);
    FfdTransform& ffd = *chain.ffd;
    const std::size_t nc = ffd.control_count();

    Objective obj = make_objective(target, atlas, cfg, tr, ar);
    double f = obj.score(chain);

    FfdResult out;
    std::vector<Vec3> grad_c(nc);
    std::vector<Vec3> e_prev(nc, Vec3{0, 0, 0}), d_prev(nc, Vec3{0, 0, 0}), dun(nc);
    bool have_prev = false;
    const double step = opt.step_control_mm;
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        f = ffd_gradient(obj, chain, grad_c);

        // conjugate direction in the step-scaled space (uniform scale here)
        double beta = 0;
        if (have_prev) {
            double num = 0, den = 0;
            for (std::size_t c = 0; c < nc; ++c) {
                num += dot(grad_c[c], grad_c[c] - e_prev[c]);
                den += dot(e_prev[c], e_prev[c]);
            }
            if (den > 0) beta = std::max(0.0, num / den);
        }
        double de = 0;
        for (std::size_t c = 0; c < nc; ++c) {
            dun[c] = grad_c[c] + beta * d_prev[c];
            de += dot(dun[c], grad_c[c]);
        }
        bool conjugate = beta > 0 && de > 0;
        if (de <= 0) { // not an ascent direction: restart on the gradient
            de = 0;
            for (std::size_t c = 0; c < nc; ++c) {
                dun[c] = grad_c[c];
                de += dot(dun[c], dun[c]);
            }
        }
        double n2 = 0;
        for (std::size_t c = 0; c < nc; ++c) n2 += dot(dun[c], dun[c]);
        double nu = std::sqrt(n2);
        if (step * nu < 1e-14) break;
        // first-order gain of a lam=1 step along the unit direction
        double dd = step * de / nu;

        std::vector<Vec3> base = ffd.disp;
        auto try_step = [&](double lam, double& fc) {
            double s = lam * step / nu;
            for (std::size_t c = 0; c < nc; ++c) ffd.disp[c] = base[c] + s * dun[c];
            fc = obj.score(chain);
            return fc >= f + opt.armijo * lam * dd;
        };
        double accepted = -1, fnew = 0;
        for (double lam = 1.0; lam >= opt.min_step_scale; lam *= 0.5) {
            if (try_step(lam, fnew)) {
                accepted = lam;
                break;
            }
        }
        if (accepted == 1.0) {
            std::vector<Vec3> best = ffd.disp;
            double f2 = 0;
            for (double lam = 2.0; lam <= 8.0; lam *= 2.0) {
                if (!try_step(lam, f2) || f2 <= fnew) break;
                best = ffd.disp;
                fnew = f2;
                accepted = lam;
            }
            ffd.disp = best;
        } else if (accepted > 0) {
            // re-apply the accepted displacement (later trials overwrote it)
            double s = accepted * step / nu;
            for (std::size_t c = 0; c < nc; ++c) ffd.disp[c] = base[c] + s * dun[c];
        }
        if (accepted < 0) {
            ffd.disp = base;
            if (conjugate) { // stale conjugate direction: retry from the gradient
                have_prev = false;
                continue;
            }
            break;
        }
        for (std::size_t c = 0; c < nc; ++c) {
            e_prev[c] = grad_c[c];
            d_prev[c] = dun[c];
        }
        have_prev = true;
        ++out.iterations;
        double gain = fnew - f;
        f = fnew;
        if (!std::isfinite(f)) throw std::runtime_error("registration diverged to a non-finite score");
        if (gain < opt.min_gain) break;
    }
    out.ffd = ffd;
    out.score = f;
    return out;
}

double affine_objective_gradient(const ScalarVolume& target, const ScalarVolume& atlas,
                                 const AffineTransform& T, const SemiConfig& cfg,
                                 std::array<double, 12>& grad) {
    Objective obj = make_objective(target, atlas, cfg, IntensityBinRange::of(target),
                                   IntensityBinRange::of(atlas));
    return affine_gradient(obj, T, grad.data());
}

double ffd_objective_gradient(const ScalarVolume& target, const ScalarVolume& atlas,
                              const TransformChain& chain, const SemiConfig& cfg,
                              std::vector<Vec3>& grad) {
    if (!chain.ffd) throw std::invalid_argument("chain has no FFD to differentiate");
    Objective obj = make_objective(target, atlas, cfg, IntensityBinRange::of(target),
                                   IntensityBinRange::of(atlas));
    return ffd_gradient(obj, chain, grad);
}

RegistrationResult register_hierarchical(const ScalarVolume& target, const ScalarVolume& atlas,
                                         const LabelVolume& atlas_labels, const SemiConfig& cfg,
                                         const OptimizerSettings& opt,
                                         const HierarchicalSettings& hs) {
    cfg.validate();
    opt.validate();
    if (!same_geometry(atlas.geom, atlas_labels.geom))
        throw std::invalid_argument("atlas image and labels must share geometry");

    IntensityBinRange tr = IntensityBinRange::of(target);
    IntensityBinRange ar = IntensityBinRange::of(atlas);
    Objective full = make_objective(target, atlas, cfg, tr, ar);

    RegistrationResult out;
    out.chain.blend_radius_mm = hs.blend_radius_mm;
    double s = full.score(out.chain);
    out.stages.push_back({"init", s});

    if (hs.global) {
        AffineResult ar0 = register_affine(target, atlas, out.chain.global, cfg, opt);
        out.chain.global = ar0.transform;
        s = std::max(s, ar0.score);
        out.stages.push_back({"global", s});
    }

    if (hs.local) {
        LabelVolume warped_labels = resample_labels(atlas_labels, out.chain, target.geom);
        std::set<int> ids(warped_labels.data.begin(), warped_labels.data.end());
        ids.erase(0);
        OptimizerSettings lopt = opt;
        lopt.pyramid_levels = 1;
        const GridGeometry& g = target.geom;
        for (int label : ids) {
            // ball around the substructure as mapped into target space
            Vec3 c{0, 0, 0};
            std::size_t count = 0;
            Index3 blo = g.dims, bhi{0, 0, 0};
            for (int k = 0; k < g.dims[2]; ++k)
                for (int j = 0; j < g.dims[1]; ++j)
                    for (int i = 0; i < g.dims[0]; ++i)
                        if (warped_labels.at(i, j, k) == label) {
                            c = c + g.voxel_center(i, j, k);
                            ++count;
                            blo = {std::min(blo[0], i), std::min(blo[1], j), std::min(blo[2], k)};
                            bhi = {std::max(bhi[0], i), std::max(bhi[1], j), std::max(bhi[2], k)};
                        }
            if (count < std::size_t(hs.min_label_voxels)) continue;
            c = (1.0 / double(count)) * c;
            double radius = 0;
            for (int k = blo[2]; k <= bhi[2]; ++k)
                for (int j = blo[1]; j <= bhi[1]; ++j)
                    for (int i = blo[0]; i <= bhi[0]; ++i)
                        if (warped_labels.at(i, j, k) == label)
                            radius = std::max(radius, norm(g.voxel_center(i, j, k) - c));

            // refine on a crop around the region, then keep the local affine
            // only when the full-volume score does not drop
            GridGeometry sub;
            for (int a = 0; a < 3; ++a) {
                int margin = int(std::ceil(hs.blend_radius_mm / g.spacing[a])) + 2;
                int lo_i = std::max(0, blo[a] - margin);
                int hi_i = std::min(g.dims[a] - 1, bhi[a] + margin);
                sub.dims[a] = hi_i - lo_i + 1;
                sub.spacing[a] = g.spacing[a];
                sub.origin[a] = g.origin[a] + lo_i * g.spacing[a];
            }
            ScalarVolume crop = ScalarVolume::zeros(sub);
            Vec3 ci0 = g.continuous_index(sub.origin);
            for (int k = 0; k < sub.dims[2]; ++k)
                for (int j = 0; j < sub.dims[1]; ++j)
                    for (int i = 0; i < sub.dims[0]; ++i)
                        crop.at(i, j, k) = target.at(i + int(std::lround(ci0[0])),
                                                     j + int(std::lround(ci0[1])),
                                                     k + int(std::lround(ci0[2])));
            AffineResult lr = register_affine(crop, atlas, out.chain.global, cfg, lopt);

            TransformChain cand = out.chain;
            cand.locals.push_back({label, c, radius, lr.transform});
            double sc = full.score(cand);
            if (sc > s) {
                out.chain = cand;
                s = sc;
            }
        }
        out.stages.push_back({"local", s});
    }

    if (hs.ffd) {
        FfdResult fr = register_ffd(target, atlas, out.chain, cfg, hs.ffd_spacing_mm, opt);
        TransformChain cand = out.chain;
        cand.ffd = fr.ffd;
        double sc = full.score(cand);
        if (sc >= s) {
            out.chain = cand;
            s = sc;
        }
        out.stages.push_back({"ffd", s});
    }

    out.score = s;
    return out;
}

} // namespace scarline
