#include "scarline/mrmr.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace scarline {

std::vector<int> discretize_equal_frequency(const std::vector<double>& v, int bins) {
    if (bins < 2) throw std::invalid_argument("need at least two bins");
    if (v.empty()) throw std::invalid_argument("cannot discretize an empty series");
    std::vector<double> sorted(v);
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> cuts;
    for (int j = 1; j < bins; ++j) {
        std::size_t pos = sorted.size() * static_cast<std::size_t>(j) / static_cast<std::size_t>(bins);
        if (pos == 0 || pos >= sorted.size()) continue;
        cuts.push_back(sorted[pos]);
    }
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::vector<int> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), v[i]) - cuts.begin());
    return out;
}

double mutual_information(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("series lengths differ");
    if (a.empty()) throw std::invalid_argument("series are empty");
    std::map<int, double> pa, pb;
    std::map<std::pair<int, int>, double> pab;
    double n = static_cast<double>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        pa[a[i]] += 1;
        pb[b[i]] += 1;
        pab[{a[i], b[i]}] += 1;
    }
    double mi = 0;
    for (const auto& [key, cnt] : pab) {
        double pj = cnt / n;
        mi += pj * std::log(pj * n * n / (pa[key.first] * pb[key.second]));
    }
    return std::max(mi, 0.0); // guard the tiny negative round-off
}

std::vector<MrmrPick> mrmr_rank(const Dataset& d, int k, int bins) {
    d.validate();
    if (k < 1 || k > static_cast<int>(d.cols()))
        throw std::invalid_argument("selection size out of range");
    if (d.rows() < 2) throw std::invalid_argument("need at least two rows");

    std::size_t m = d.cols();
    std::vector<std::vector<int>> code(m);
    for (std::size_t j = 0; j < m; ++j) code[j] = discretize_equal_frequency(d.column(d.feature_names[j]), bins);

    std::vector<double> rel(m);
    for (std::size_t j = 0; j < m; ++j) rel[j] = mutual_information(code[j], d.y);

    // pairwise MI filled lazily; only pairs against picked features are needed
    std::vector<std::vector<double>> pair_mi(m, std::vector<double>(m, -1));
    auto mi_between = [&](std::size_t a, std::size_t b) {
        if (pair_mi[a][b] < 0) pair_mi[a][b] = pair_mi[b][a] = mutual_information(code[a], code[b]);
        return pair_mi[a][b];
    };

    std::vector<MrmrPick> out;
    std::vector<char> taken(m, 0);
    std::vector<std::size_t> picked;
    for (int round = 0; round < k; ++round) {
        std::size_t best = m;
        double best_score = 0, best_red = 0;
        for (std::size_t j = 0; j < m; ++j) {
            if (taken[j]) continue;
            double red = 0;
            for (std::size_t s : picked) red += mi_between(j, s);
            if (!picked.empty()) red /= static_cast<double>(picked.size());
            double score = picked.empty() ? rel[j] : rel[j] / std::max(red, 1e-12);
            bool wins = best == m || score > best_score ||
                        (score == best_score && d.feature_names[j] < d.feature_names[best]);
            if (wins) {
                best = j;
                best_score = score;
                best_red = red;
            }
        }
        taken[best] = 1;
        picked.push_back(best);
        out.push_back({d.feature_names[best], rel[best], best_red, best_score});
    }
    return out;
}

std::vector<std::string> mrmr_select(const Dataset& d, int k, int bins) {
    std::vector<std::string> names;
    for (const auto& p : mrmr_rank(d, k, bins)) names.push_back(p.name);
    return names;
}

} // namespace scarline
