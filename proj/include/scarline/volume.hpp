#pragma once

#include "scarline/types.hpp"

#include <cstdint>
#include <map>
#include <vector>

namespace scarline {

/// Single-channel volumetric image, voxels stored x-fastest.
struct ScalarVolume {
    GridGeometry geom;
    std::vector<float> data;

    float at(int i, int j, int k) const { return data[geom.linear(i, j, k)]; }
    float& at(int i, int j, int k) { return data[geom.linear(i, j, k)]; }

    void validate() const;

    static ScalarVolume zeros(const GridGeometry& g);
};

/// Integer label map sharing the ScalarVolume grid conventions.
/// label_table maps label id to a human-readable name; when the table is
/// non-empty every id occurring in the data must be covered (0 = background).
struct LabelVolume {
    GridGeometry geom;
    std::vector<std::uint16_t> data;
    std::map<int, std::string> label_table;

    std::uint16_t at(int i, int j, int k) const { return data[geom.linear(i, j, k)]; }
    std::uint16_t& at(int i, int j, int k) { return data[geom.linear(i, j, k)]; }

    void validate() const;

    std::size_t count(int label) const;
    bool has_label(int label) const;

    static LabelVolume zeros(const GridGeometry& g);
};

bool same_geometry(const GridGeometry& a, const GridGeometry& b, double tol = 1e-9);

/// Binary mask of the voxels carrying any of the given ids (result label 1).
LabelVolume mask_of(const LabelVolume& labels, const std::vector<int>& ids, int out_label = 1);

void intensity_range(const ScalarVolume& v, float& lo, float& hi);

} // namespace scarline
