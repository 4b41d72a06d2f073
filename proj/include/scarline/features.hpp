#pragma once

#include "scarline/slic.hpp"
#include "scarline/volume.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace scarline {

inline constexpr int kFeatureCount = 16;

/// Canonical feature order; every vector and dataset column follows it.
const std::array<std::string, kFeatureCount>& feature_names();

struct FeatureVector {
    std::array<double, kFeatureCount> values{};
    int pixel_count = 0;
    bool degenerate = false; // fewer than two samples

    double value(const std::string& name) const;
};

/// First-order intensity statistics of a sample pool. Percentiles interpolate
/// linearly at rank q*(n-1); std and variance are population moments;
/// skewness and kurtosis are the standardized third and fourth moments
/// (kurtosis as excess over the normal), zero when the spread is zero;
/// energy is the mean squared intensity; entropy uses 16 equal-width bins
/// across [min, max] in nats. Throws on an empty pool.
FeatureVector compute_features(std::span<const float> samples);

struct SuperpixelFeatures {
    int global_id = 0;
    int z = 0;
    double wall_overlap = 0; // member fraction inside the wall mask
    FeatureVector features;
};

/// Feature vectors for every superpixel that keeps at least `min_overlap`
/// of its pixels inside the wall mask (non-zero voxels). Statistics are
/// computed over all member pixels of the superpixel.
std::vector<SuperpixelFeatures> superpixel_features(const SuperpixelVolume& sv,
                                                    const ScalarVolume& image,
                                                    const LabelVolume& wall_mask,
                                                    double min_overlap = 0.2);

/// Row-major sample table used by selection, training and validation.
struct Dataset {
    std::vector<std::string> feature_names; // column names, d entries
    std::vector<std::vector<double>> x;     // n rows of width d
    std::vector<int> y;                     // class per row (-1 when unlabeled)
    std::vector<std::string> patient;       // grouping key per row
    std::vector<int> superpixel;            // source superpixel id, -1 if n/a

    std::size_t rows() const { return x.size(); }
    std::size_t cols() const { return feature_names.size(); }
    void validate() const;

    /// Copy keeping only the named columns, in the order given.
    Dataset select(const std::vector<std::string>& names) const;
    std::vector<double> column(const std::string& name) const;
};

/// CSV layout: patient,superpixel,label,<feature columns>. Values are
/// written with full precision so a round trip is bit exact. Field text
/// must not contain commas.
void write_dataset_csv(const Dataset& d, const std::string& path);
Dataset read_dataset_csv(const std::string& path);

} // namespace scarline
