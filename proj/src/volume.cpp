#include "scarline/volume.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace scarline {

void ScalarVolume::validate() const {
    geom.validate();
    if (data.size() != geom.voxel_count())
        throw std::invalid_argument("scalar volume payload size does not match dims");
    for (float v : data)
        if (!std::isfinite(v))
            throw std::invalid_argument("scalar volume contains non-finite intensity");
}

ScalarVolume ScalarVolume::zeros(const GridGeometry& g) {
    g.validate();
    ScalarVolume v;
    v.geom = g;
    v.data.assign(g.voxel_count(), 0.0f);
    return v;
}

void LabelVolume::validate() const {
    geom.validate();
    if (data.size() != geom.voxel_count())
        throw std::invalid_argument("label volume payload size does not match dims");
    if (!label_table.empty()) {
        std::set<int> present(data.begin(), data.end());
        for (int id : present)
            if (id != 0 && !label_table.count(id))
                throw std::invalid_argument("label id " + std::to_string(id) + " missing from label table");
    }
}

std::size_t LabelVolume::count(int label) const {
    return static_cast<std::size_t>(std::count(data.begin(), data.end(), static_cast<std::uint16_t>(label)));
}

bool LabelVolume::has_label(int label) const {
    if (label_table.count(label)) return true;
    return count(label) > 0;
}

LabelVolume LabelVolume::zeros(const GridGeometry& g) {
    g.validate();
    LabelVolume v;
    v.geom = g;
    v.data.assign(g.voxel_count(), 0);
    return v;
}

bool same_geometry(const GridGeometry& a, const GridGeometry& b, double tol) {
    if (a.dims != b.dims) return false;
    for (int c = 0; c < 3; ++c) {
        if (std::abs(a.spacing[c] - b.spacing[c]) > tol) return false;
        if (std::abs(a.origin[c] - b.origin[c]) > tol) return false;
    }
    return true;
}

LabelVolume mask_of(const LabelVolume& labels, const std::vector<int>& ids, int out_label) {
    LabelVolume out = LabelVolume::zeros(labels.geom);
    for (std::size_t i = 0; i < labels.data.size(); ++i) {
        for (int id : ids) {
            if (labels.data[i] == id) {
                out.data[i] = static_cast<std::uint16_t>(out_label);
                break;
            }
        }
    }
    out.label_table[out_label] = "mask";
    return out;
}

void intensity_range(const ScalarVolume& v, float& lo, float& hi) {
    lo = hi = v.data.empty() ? 0.0f : v.data[0];
    for (float x : v.data) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
}

} // namespace scarline
