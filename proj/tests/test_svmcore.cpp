#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "scarline/svm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <random>
#include <set>
#include <vector>

using namespace scarline;

namespace {

Dataset make_dataset(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                     const std::vector<std::string>& patient = {}) {
    Dataset d;
    d.feature_names.resize(x.front().size());
    for (std::size_t j = 0; j < d.feature_names.size(); ++j)
        d.feature_names[j] = "f" + std::to_string(j);
    d.x = x;
    d.y = y;
    d.patient = patient.empty() ? std::vector<std::string>(x.size(), "p0") : patient;
    d.superpixel.assign(x.size(), -1);
    return d;
}

// two overlapping Gaussian blobs
Dataset blob_dataset(int n_per_class, unsigned seed, double sep = 2.0) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    std::vector<std::string> pat;
    for (int cls = 0; cls < 2; ++cls)
        for (int i = 0; i < n_per_class; ++i) {
            double cx = cls ? sep : -sep;
            x.push_back({cx + g(rng), g(rng)});
            y.push_back(cls);
            pat.push_back("p" + std::to_string(i % 4));
        }
    return make_dataset(x, y, pat);
}

double u_statistic(const std::vector<double>& s, const std::vector<int>& t) {
    double u = 0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (t[i] != 1 || t[j] != 0) continue;
            ++pairs;
            if (s[i] > s[j])
                u += 1.0;
            else if (s[i] == s[j])
                u += 0.5;
        }
    return u / double(pairs);
}

} // namespace

TEST_CASE("two points put the boundary on their perpendicular bisector") {
    Dataset d = make_dataset({{0.0, 0.0}, {2.0, 0.0}}, {0, 1});
    SvmModel m = svm_train(d, 1e3, 0.5);
    CHECK(m.converged);
    CHECK(m.sv.size() == 2);
    CHECK(std::abs(svm_predict(m, {1.0, 0.0}).decision) < 1e-6);
    CHECK(svm_predict(m, {2.0, 0.0}).label == 1);
    CHECK(svm_predict(m, {0.0, 0.0}).label == 0);
    CHECK(svm_predict(m, {1.9, 5.0}).label == 1);
}

TEST_CASE("xor splits perfectly under the rbf kernel") {
    Dataset d = make_dataset({{0, 0}, {0, 1}, {1, 0}, {1, 1}}, {0, 1, 1, 0});
    SvmModel m = svm_train(d, 100.0, 1.0);
    CHECK(m.converged);
    auto pred = svm_predict(m, d);
    for (std::size_t i = 0; i < d.rows(); ++i) CHECK(pred[i].label == d.y[i]);
}

TEST_CASE("kkt conditions hold at every returned model") {
    const double tol = 1e-3, slack = 1e-6;
    for (auto [rho, gamma] : std::vector<std::pair<double, double>>{
             {1.0, 0.5}, {std::exp2(8.5), std::exp2(2.5)}, {16.0, 0.1}}) {
        Dataset d = blob_dataset(30, 42, 1.5);
        SvmModel m = svm_train(d, rho, gamma, tol);
        INFO("rho ", rho, " gamma ", gamma);
        CHECK(m.converged);

        double balance = 0;
        for (double c : m.coef) balance += c;
        CHECK(std::abs(balance) < 1e-6);

        std::vector<double> margin = svm_margins(m, d);
        std::set<int> sv_set(m.sv_rows.begin(), m.sv_rows.end());
        for (std::size_t i = 0; i < d.rows(); ++i) {
            INFO("row ", i);
            auto it = std::find(m.sv_rows.begin(), m.sv_rows.end(), int(i));
            if (it == m.sv_rows.end()) {
                CHECK(margin[i] >= 1.0 - tol - slack); // alpha = 0
            } else {
                double a = std::abs(m.coef[it - m.sv_rows.begin()]);
                CHECK(a <= rho * (1 + 1e-12));
                if (a >= rho * (1 - 1e-9))
                    CHECK(margin[i] <= 1.0 + tol + slack); // at the box bound
                else
                    CHECK(std::abs(margin[i] - 1.0) <= tol + slack); // free vector
            }
        }
    }
}

TEST_CASE("interior support vectors sit on the margin, far points fall to the bias") {
    Dataset d = blob_dataset(20, 7, 2.5);
    SvmModel m = svm_train(d, 8.0, 0.7);
    bool found_interior = false;
    for (std::size_t s = 0; s < m.sv.size(); ++s) {
        double a = std::abs(m.coef[s]);
        if (a < 8.0 * (1 - 1e-9)) {
            found_interior = true;
            double dec = svm_predict(m, d.x[m.sv_rows[s]]).decision;
            CHECK(std::abs(std::abs(dec) - 1.0) < 2e-3);
        }
    }
    CHECK(found_interior);

    double far = svm_predict(m, {1e6, -1e6}).decision;
    CHECK(far == doctest::Approx(m.bias).epsilon(1e-12));

    // batch prediction matches one-at-a-time exactly
    auto batch = svm_predict(m, d);
    for (std::size_t i = 0; i < d.rows(); ++i)
        CHECK(batch[i].decision == svm_predict(m, d.x[i]).decision);
}

TEST_CASE("trained dual dominates 1000 random feasible points") {
    Dataset d = blob_dataset(20, 3, 1.0);
    const double rho = 4.0, gamma = 0.8;
    SvmModel m = svm_train(d, rho, gamma);

    std::vector<double> alpha(d.rows(), 0.0);
    for (std::size_t s = 0; s < m.sv_rows.size(); ++s)
        alpha[m.sv_rows[s]] = std::abs(m.coef[s]);
    double best = svm_dual_objective(d, gamma, alpha);

    std::mt19937 rng(99);
    std::uniform_real_distribution<double> u(0.0, rho);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> a(d.rows());
        double pos = 0, neg = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = u(rng);
            (d.y[i] == 1 ? pos : neg) += a[i];
        }
        // rescale the heavier side so sum alpha_i y_i = 0 stays inside the box
        double scale_pos = pos > neg ? neg / pos : 1.0;
        double scale_neg = neg > pos ? pos / neg : 1.0;
        for (std::size_t i = 0; i < a.size(); ++i) a[i] *= d.y[i] == 1 ? scale_pos : scale_neg;
        CHECK(best >= svm_dual_objective(d, gamma, a) - 1e-6);
    }
}

TEST_CASE("standardization absorbs feature scaling") {
    Dataset d = blob_dataset(25, 13, 1.8);
    Dataset scaled = d;
    for (auto& r : scaled.x) {
        r[0] *= 4.0;  // power of two keeps the arithmetic exact
        r[1] *= 0.25;
    }
    SvmModel m1 = svm_train(d, 10.0, 1.2);
    SvmModel m2 = svm_train(scaled, 10.0, 1.2);
    for (std::size_t i = 0; i < d.rows(); ++i) {
        SvmPrediction a = svm_predict(m1, d.x[i]);
        SvmPrediction b = svm_predict(m2, scaled.x[i]);
        CHECK(a.label == b.label);
        CHECK(a.decision == doctest::Approx(b.decision).epsilon(1e-9));
    }
}

TEST_CASE("roc area equals the pairwise u statistic") {
    // clean rankings
    std::vector<double> s{5, 4, 3, 2, 1};
    std::vector<int> t{1, 1, 1, 0, 0};
    CHECK(roc_auc(s, t).auc == doctest::Approx(1.0));
    std::vector<int> rev{0, 0, 0, 1, 1};
    CHECK(roc_auc(s, rev).auc == doctest::Approx(0.0));

    std::mt19937 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> quant(0, 6);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> score(20);
        std::vector<int> truth(20);
        int pos = 0;
        for (std::size_t i = 0; i < score.size(); ++i) {
            // quantized scores force ties through the tie-credit path
            score[i] = trial % 2 ? double(quant(rng)) : u(rng);
            truth[i] = u(rng) < 0.5 ? 1 : 0;
            pos += truth[i];
        }
        if (pos == 0 || pos == int(truth.size())) continue;
        RocCurve roc = roc_auc(score, truth);
        CHECK(std::abs(roc.auc - u_statistic(score, truth)) < 1e-12);
        CHECK(roc.points.front().fpr == 0.0);
        CHECK(roc.points.back().tpr == doctest::Approx(1.0));
    }

    CHECK_THROWS(roc_auc({1.0, 2.0}, {1, 1})); // single-class truth
}

TEST_CASE("report arithmetic: accuracy, recalls and the balanced error identity") {
    std::vector<int> truth{1, 1, 1, 1, 0, 0, 0, 0, 0, 0};
    std::vector<int> pred{1, 1, 1, 0, 0, 0, 0, 0, 1, 1};
    std::vector<double> dec{3, 2, 1, -1, -3, -2, -1, -0.5, 0.5, 1.5};
    ClassificationReport r = score_predictions(dec, pred, truth);
    CHECK(r.accuracy == doctest::Approx(0.7));
    CHECK(r.sensitivity == doctest::Approx(0.75));
    CHECK(r.specificity == doctest::Approx(4.0 / 6.0));
    CHECK(r.ber == 1.0 - (r.sensitivity + r.specificity) / 2.0); // exact
    CHECK(r.auc == doctest::Approx(u_statistic(dec, truth)));
}

TEST_CASE("validation protocols respect patient grouping") {
    // six patients, two rows each, cleanly separable
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    std::vector<std::string> pat;
    for (int p = 0; p < 6; ++p)
        for (int r = 0; r < 2; ++r) {
            int cls = p % 2;
            x.push_back({cls ? 3.0 + 0.1 * p + 0.01 * r : -3.0 - 0.1 * p - 0.01 * r, 0.5 * r});
            y.push_back(cls);
            pat.push_back("p" + std::to_string(p));
        }
    Dataset d = make_dataset(x, y, pat);

    ClassificationReport loo = svm_validate(d, ValidationProtocol::loo(), 10.0, 0.5);
    CHECK(loo.trainings == 6); // one per patient
    CHECK(loo.truth.size() == d.rows());
    CHECK(loo.accuracy == doctest::Approx(1.0));
    CHECK(loo.ber == doctest::Approx(0.0));
    CHECK(loo.auc == doctest::Approx(1.0));

    ClassificationReport k3 = svm_validate(d, ValidationProtocol::kfold_cv(3, 5), 10.0, 0.5);
    CHECK(k3.trainings == 3);
    CHECK(k3.truth.size() == d.rows());
    CHECK(k3.accuracy == doctest::Approx(1.0));

    ClassificationReport sp = svm_validate(
        d, ValidationProtocol::fixed_split({"p0", "p1", "p2", "p3"}, {"p4", "p5"}), 10.0, 0.5);
    CHECK(sp.trainings == 1);
    CHECK(sp.truth.size() == 4); // only the held-out patients are scored
    CHECK(sp.accuracy == doctest::Approx(1.0));

    CHECK_THROWS(svm_validate(d, ValidationProtocol::fixed_split({"p0"}, {"p0"}), 10.0, 0.5));
}

TEST_CASE("single-class training folds are flagged and fit the constant class") {
    Dataset d = make_dataset({{0, 0}, {0.1, 0}, {5, 5}, {5.1, 5}}, {0, 0, 1, 1},
                             {"a", "a", "b", "b"});
    ClassificationReport r = svm_validate(d, ValidationProtocol::loo(), 10.0, 1.0);
    CHECK(r.trainings == 2);
    CHECK(r.single_class_folds == 2);
    // each fold trains on the other patient's class and predicts it
    CHECK(r.accuracy == doctest::Approx(0.0));
}

TEST_CASE("random labels validate at chance level") {
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double auc_sum = 0;
    int runs = 0;
    for (unsigned seed = 1; seed <= 10; ++seed) {
        std::vector<std::vector<double>> x;
        std::vector<int> y;
        std::vector<std::string> pat;
        std::mt19937 r2(seed);
        int pos = 0;
        for (int i = 0; i < 80; ++i) {
            x.push_back({u(r2), u(r2), u(r2), u(r2)});
            int cls = u(r2) < 0.5 ? 1 : 0;
            pos += cls;
            y.push_back(cls);
            pat.push_back("p" + std::to_string(i % 8));
        }
        if (pos == 0 || pos == 80) continue;
        Dataset d = make_dataset(x, y, pat);
        ClassificationReport rep = svm_validate(d, ValidationProtocol::kfold_cv(5, seed), 10.0, 1.0);
        auc_sum += rep.auc;
        ++runs;
    }
    double mean_auc = auc_sum / runs;
    CHECK(mean_auc >= 0.4);
    CHECK(mean_auc <= 0.6);
}

TEST_CASE("published grid preset evaluates 121 coarse and 9 fine cells") {
    Dataset d = blob_dataset(15, 17, 2.5);
    GridSearchSpec spec = GridSearchSpec::preset();
    GridSearchResult res = svm_grid_search(d, spec);
    CHECK(res.surface.size() == 130);
    std::size_t fine = 0;
    for (const auto& c : res.surface) fine += c.fine;
    CHECK(fine == 9);

    double best = 0;
    for (const auto& c : res.surface) best = std::max(best, c.accuracy);
    CHECK(res.best_accuracy == doctest::Approx(best));
    // ties break to the smallest rho, then gamma
    for (const auto& c : res.surface)
        if (c.accuracy == res.best_accuracy) {
            CHECK(res.best_rho <= c.rho * (1 + 1e-12));
            if (c.rho == res.best_rho) CHECK(res.best_gamma <= c.gamma * (1 + 1e-12));
        }
}

TEST_CASE("single-cell grid returns that cell") {
    Dataset d = blob_dataset(10, 23, 2.0);
    GridSearchSpec spec;
    spec.coarse_rho_log2 = {3.0};
    spec.coarse_gamma_log2 = {-1.0};
    spec.fine_rho_log2 = {3.0};
    spec.fine_gamma_log2 = {-1.0};
    GridSearchResult res = svm_grid_search(d, spec);
    CHECK(res.best_rho == doctest::Approx(8.0));
    CHECK(res.best_gamma == doctest::Approx(0.5));
    CHECK(res.surface.size() == 2);
}

TEST_CASE("grid optimum is stable across fold shuffles") {
    Dataset d = blob_dataset(25, 41, 2.2);
    GridSearchSpec a = GridSearchSpec::preset();
    GridSearchSpec b = GridSearchSpec::preset();
    b.seed = 1;
    GridSearchResult ra = svm_grid_search(d, a);
    GridSearchResult rb = svm_grid_search(d, b);
    CHECK(std::abs(std::log2(ra.best_rho) - std::log2(rb.best_rho)) <= 2.0 + 1e-9);
    CHECK(std::abs(std::log2(ra.best_gamma) - std::log2(rb.best_gamma)) <= 2.0 + 1e-9);
}

TEST_CASE("model text file round trips") {
    Dataset d = blob_dataset(12, 55, 1.5);
    SvmModel m = svm_train(d, std::exp2(8.5), std::exp2(2.5));
    std::string path = "svmcore_model.txt";
    save_svm_model(m, path);
    SvmModel r = load_svm_model(path);
    std::remove(path.c_str());

    CHECK(std::memcmp(&r.gamma, &m.gamma, sizeof(double)) == 0);
    CHECK(std::memcmp(&r.rho, &m.rho, sizeof(double)) == 0);
    CHECK(std::memcmp(&r.bias, &m.bias, sizeof(double)) == 0);
    CHECK(r.converged == m.converged);
    CHECK(r.iterations == m.iterations);
    REQUIRE(r.sv.size() == m.sv.size());
    for (std::size_t i = 0; i < m.sv.size(); ++i) {
        CHECK(std::memcmp(&r.coef[i], &m.coef[i], sizeof(double)) == 0);
        for (std::size_t j = 0; j < m.dim(); ++j)
            CHECK(std::memcmp(&r.sv[i][j], &m.sv[i][j], sizeof(double)) == 0);
    }
    for (std::size_t i = 0; i < d.rows(); ++i)
        CHECK(svm_predict(r, d.x[i]).decision == svm_predict(m, d.x[i]).decision);
}

TEST_CASE("training rejects bad inputs") {
    CHECK_THROWS(svm_train(make_dataset({{1, 1}, {2, 2}}, {1, 1}), 1.0, 1.0)); // one class
    CHECK_THROWS(svm_train(make_dataset({{1, 1}, {2, 2}}, {0, 1}), -1.0, 1.0));
    Dataset nan_set = make_dataset({{1, 1}, {std::nan(""), 2}}, {0, 1});
    CHECK_THROWS(svm_train(nan_set, 1.0, 1.0));
    SvmModel m = svm_train(make_dataset({{0, 0}, {1, 1}}, {0, 1}), 10.0, 1.0);
    CHECK_THROWS(svm_predict(m, {1.0, 2.0, 3.0})); // dimension mismatch
}
