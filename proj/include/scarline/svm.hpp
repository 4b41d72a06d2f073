#pragma once

#include "scarline/features.hpp"

#include <string>
#include <vector>

namespace scarline {

/// Soft-margin RBF-kernel classifier, K(x,y) = exp(-gamma*||x-y||^2),
/// box constraint rho. Features are z-scored with parameters frozen at
/// training time; sigma 0 columns standardize with 1.
struct SvmModel {
    double gamma = 1.0;
    double rho = 1.0;
    double bias = 0.0;
    std::vector<double> mean;                // per-feature, frozen at training
    std::vector<double> sigma;               // per-feature, frozen at training
    std::vector<std::vector<double>> sv;     // standardized support rows
    std::vector<double> coef;                // alpha_i * y_i per support row
    std::vector<int> sv_rows;                // original training row indices
    bool converged = true;
    int iterations = 0;

    std::size_t dim() const { return mean.size(); }
};

struct SvmPrediction {
    int label = 0;       // 0 or 1
    double decision = 0; // signed margin value
};

/// Dual-coordinate SMO with second-order working-set selection, stopping
/// when the maximal KKT violating pair gap drops to `tol`, capped at 1e5
/// iterations (non-convergence recorded on the model). Labels must contain
/// both classes, encoded 0/1.
SvmModel svm_train(const Dataset& d, double rho, double gamma, double tol = 1e-3);

SvmPrediction svm_predict(const SvmModel& m, const std::vector<double>& row);
std::vector<SvmPrediction> svm_predict(const SvmModel& m, const Dataset& d);

/// Margins y_i * f(x_i) over a labeled dataset, in row order.
std::vector<double> svm_margins(const SvmModel& m, const Dataset& d);

/// Dual objective value sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij
/// for an arbitrary multiplier vector over the model's training geometry.
double svm_dual_objective(const Dataset& d, double gamma,
                          const std::vector<double>& alpha);

struct RocPoint {
    double fpr = 0, tpr = 0;
};

struct RocCurve {
    std::vector<RocPoint> points; // threshold sweep from (0,0) to (1,1)
    double auc = 0;               // trapezoidal area
};

/// ROC over decision values; ties share trapezoid credit so the area equals
/// the Mann-Whitney U statistic normalization. Requires both classes.
RocCurve roc_auc(const std::vector<double>& decision, const std::vector<int>& truth);

struct ClassificationReport {
    double accuracy = 0;
    double sensitivity = 0; // recall of class 1
    double specificity = 0; // recall of class 0
    double ber = 0;         // 1 - (sensitivity + specificity)/2
    double auc = 0;
    std::vector<double> decision_values; // per evaluated sample
    std::vector<int> predicted;          // per evaluated sample
    std::vector<int> truth;              // per evaluated sample
    RocCurve roc;
    int trainings = 0;          // models fitted by the protocol
    int single_class_folds = 0; // folds whose training half had one class
};

ClassificationReport score_predictions(const std::vector<double>& decision,
                                       const std::vector<int>& predicted,
                                       const std::vector<int>& truth);

struct ValidationProtocol {
    enum Kind { loo_patient, kfold, split } kind = loo_patient;
    int folds = 10;                      // kfold only
    unsigned seed = 0;                   // kfold patient shuffle
    std::vector<std::string> train_ids;  // split only
    std::vector<std::string> test_ids;   // split only, disjoint from train_ids

    static ValidationProtocol loo();
    static ValidationProtocol kfold_cv(int folds, unsigned seed = 0);
    static ValidationProtocol fixed_split(std::vector<std::string> train,
                                          std::vector<std::string> test);
};

/// Grouped validation: folds never split a patient. A fold whose training
/// rows carry a single class fits a constant model and is flagged.
ClassificationReport svm_validate(const Dataset& d, const ValidationProtocol& p,
                                  double rho, double gamma, double tol = 1e-3);

struct GridCell {
    double rho = 0, gamma = 0;
    double accuracy = 0;
    bool fine = false;
};

struct GridSearchSpec {
    std::vector<double> coarse_rho_log2;   // exponents, e.g. -10..10 step 2
    std::vector<double> coarse_gamma_log2;
    std::vector<double> fine_rho_log2;     // empty: centered half-steps
    std::vector<double> fine_gamma_log2;   // around the coarse optimum
    int folds = 5;
    unsigned seed = 0;

    /// Coarse 11x11 over 2^{-10..10} step 2 plus the published fine block
    /// rho in {2^8, 2^8.5, 2^9}, gamma in {2^2, 2^2.5, 2^3}.
    static GridSearchSpec preset();
    /// Same coarse grid, fine block derived around the coarse optimum.
    static GridSearchSpec centered();
};

struct GridSearchResult {
    double best_rho = 0, best_gamma = 0;
    double best_accuracy = 0;
    std::vector<GridCell> surface; // every evaluated cell, coarse then fine
};

/// Two-stage exhaustive search scored by mean k-fold CV accuracy; ties fall
/// to the smaller rho, then the smaller gamma. Cells whose training fails
/// score 0.
GridSearchResult svm_grid_search(const Dataset& d, const GridSearchSpec& spec,
                                 double tol = 1e-3);

/// UTF-8 text round trip: header scalars, standardization rows, then one
/// support vector per line (coef then features), full precision.
void save_svm_model(const SvmModel& m, const std::string& path);
SvmModel load_svm_model(const std::string& path);

} // namespace scarline
