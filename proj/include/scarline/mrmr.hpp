#pragma once

#include "scarline/features.hpp"

#include <string>
#include <vector>

namespace scarline {

/// Equal-frequency binning: cut points sit at the sorted sample quantiles,
/// duplicates collapse, values map to the count of cut points at or below
/// them. Order-preserving, so any strictly increasing transform of `v`
/// produces the same codes.
std::vector<int> discretize_equal_frequency(const std::vector<double>& v, int bins = 8);

/// Mutual information of two discrete series, in nats.
double mutual_information(const std::vector<int>& a, const std::vector<int>& b);

struct MrmrPick {
    std::string name;
    double relevance = 0;  // MI with the class
    double redundancy = 0; // mean MI with the features picked before it
    double score = 0;      // relevance / max(redundancy, 1e-12); plain relevance for the first pick
};

/// Greedy quotient-form ranking: the first pick maximizes relevance, each
/// later pick maximizes relevance over mean redundancy with the picks so
/// far. Exact score ties fall to the lexicographically smaller name, so the
/// ranking is deterministic and any prefix equals the shorter ranking.
std::vector<MrmrPick> mrmr_rank(const Dataset& d, int k, int bins = 8);

/// Convenience: the first k column names from mrmr_rank.
std::vector<std::string> mrmr_select(const Dataset& d, int k, int bins = 8);

} // namespace scarline
