#include "scarline/svm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace scarline {

namespace {

constexpr int kMaxIterations = 100000;
constexpr double kTau = 1e-12;

void standardize_stats(const std::vector<std::vector<double>>& rows,
                       std::vector<double>& mean, std::vector<double>& sigma) {
    std::size_t d = rows.front().size();
    mean.assign(d, 0.0);
    sigma.assign(d, 0.0);
    for (const auto& r : rows)
        for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
    for (double& m : mean) m /= double(rows.size());
    for (const auto& r : rows)
        for (std::size_t j = 0; j < d; ++j) {
            double t = r[j] - mean[j];
            sigma[j] += t * t;
        }
    for (double& s : sigma) {
        s = std::sqrt(s / double(rows.size()));
        if (s == 0.0) s = 1.0;
    }
}

std::vector<double> standardize_row(const std::vector<double>& r,
                                    const std::vector<double>& mean,
                                    const std::vector<double>& sigma) {
    std::vector<double> out(r.size());
    for (std::size_t j = 0; j < r.size(); ++j) out[j] = (r[j] - mean[j]) / sigma[j];
    return out;
}

double rbf(const std::vector<double>& a, const std::vector<double>& b, double gamma) {
    double s = 0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        double d = a[j] - b[j];
        s += d * d;
    }
    return std::exp(-gamma * s);
}

std::vector<int> pm_labels(const std::vector<int>& y01) {
    std::vector<int> y(y01.size());
    for (std::size_t i = 0; i < y01.size(); ++i) {
        if (y01[i] != 0 && y01[i] != 1) throw std::invalid_argument("labels must be 0 or 1");
        y[i] = y01[i] == 1 ? 1 : -1;
    }
    return y;
}

// constant classifier for folds whose training half has one class only
SvmModel constant_model(int cls, std::size_t dim) {
    SvmModel m;
    m.bias = cls == 1 ? 1.0 : -1.0;
    m.mean.assign(dim, 0.0);
    m.sigma.assign(dim, 1.0);
    return m;
}

Dataset rows_subset(const Dataset& d, const std::vector<int>& idx) {
    Dataset s;
    s.feature_names = d.feature_names;
    for (int i : idx) {
        s.x.push_back(d.x[i]);
        s.y.push_back(d.y[i]);
        s.patient.push_back(d.patient[i]);
        s.superpixel.push_back(d.superpixel[i]);
    }
    return s;
}

bool single_class(const Dataset& d) {
    for (std::size_t i = 1; i < d.y.size(); ++i)
        if (d.y[i] != d.y[0]) return false;
    return true;
}

// unique patients in first-appearance order
std::vector<std::string> patient_list(const Dataset& d) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& p : d.patient)
        if (seen.insert(p).second) out.push_back(p);
    return out;
}

void check_finite(const Dataset& d) {
    for (const auto& r : d.x)
        for (double v : r)
            if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature value");
}

} // namespace

SvmModel svm_train(const Dataset& d, double rho, double gamma, double tol) {
    d.validate();
    if (d.rows() < 2) throw std::invalid_argument("training needs at least two rows");
    if (rho <= 0 || gamma <= 0) throw std::invalid_argument("rho and gamma must be positive");
    check_finite(d);
    if (single_class(d)) throw std::invalid_argument("training needs both classes");

    const int n = int(d.rows());
    std::vector<int> y = pm_labels(d.y);

    SvmModel m;
    m.gamma = gamma;
    m.rho = rho;
    standardize_stats(d.x, m.mean, m.sigma);
    std::vector<std::vector<double>> x(n);
    for (int i = 0; i < n; ++i) x[i] = standardize_row(d.x[i], m.mean, m.sigma);

    std::vector<double> kmat(std::size_t(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            double k = rbf(x[i], x[j], gamma);
            kmat[std::size_t(i) * n + j] = k;
            kmat[std::size_t(j) * n + i] = k;
        }
    auto K = [&](int i, int j) { return kmat[std::size_t(i) * n + j]; };

    // minimize 1/2 a^T Q a - e^T a, Q_ij = y_i y_j K_ij, 0 <= a <= rho, y^T a = 0
    std::vector<double> alpha(n, 0.0), grad(n, -1.0);
    auto in_up = [&](int t) { return (y[t] > 0 && alpha[t] < rho) || (y[t] < 0 && alpha[t] > 0); };
    auto in_low = [&](int t) { return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < rho); };

    int it = 0;
    double m_up = 0, m_low = 0;
    for (; it < kMaxIterations; ++it) {
        // most violating pair, second-order j pick
        int i = -1;
        m_up = -std::numeric_limits<double>::infinity();
        for (int t = 0; t < n; ++t)
            if (in_up(t)) {
                double v = -y[t] * grad[t];
                if (v > m_up) {
                    m_up = v;
                    i = t;
                }
            }
        int j = -1;
        m_low = std::numeric_limits<double>::infinity();
        double best_gain = 0;
        for (int t = 0; t < n; ++t)
            if (in_low(t)) {
                double v = -y[t] * grad[t];
                m_low = std::min(m_low, v);
                if (i >= 0 && v < m_up) {
                    double b = m_up - v;
                    double a = K(i, i) + K(t, t) - 2.0 * K(i, t);
                    if (a <= 0) a = kTau;
                    double gain = b * b / a;
                    if (gain > best_gain) {
                        best_gain = gain;
                        j = t;
                    }
                }
            }
        if (i < 0 || j < 0 || m_up - m_low <= tol) break;

        double old_i = alpha[i], old_j = alpha[j];
        if (y[i] != y[j]) {
            double quad = K(i, i) + K(j, j) - 2.0 * K(i, j);
            if (quad <= 0) quad = kTau;
            double delta = (-grad[i] - grad[j]) / quad;
            double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0 && alpha[j] < 0) {
                alpha[j] = 0;
                alpha[i] = diff;
            } else if (diff <= 0 && alpha[i] < 0) {
                alpha[i] = 0;
                alpha[j] = -diff;
            }
            if (diff > 0 && alpha[i] > rho) {
                alpha[i] = rho;
                alpha[j] = rho - diff;
            } else if (diff <= 0 && alpha[j] > rho) {
                alpha[j] = rho;
                alpha[i] = rho + diff;
            }
        } else {
            double quad = K(i, i) + K(j, j) - 2.0 * K(i, j);
            if (quad <= 0) quad = kTau;
            double delta = (grad[i] - grad[j]) / quad;
            double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > rho) {
                if (alpha[i] > rho) {
                    alpha[i] = rho;
                    alpha[j] = sum - rho;
                } else if (alpha[j] > rho) {
                    alpha[j] = rho;
                    alpha[i] = sum - rho;
                }
            } else {
                if (alpha[j] < 0) {
                    alpha[j] = 0;
                    alpha[i] = sum;
                } else if (alpha[i] < 0) {
                    alpha[i] = 0;
                    alpha[j] = sum;
                }
            }
        }
        double di = alpha[i] - old_i, dj = alpha[j] - old_j;
        if (di == 0 && dj == 0) break; // numerically stuck pair
        for (int t = 0; t < n; ++t)
            grad[t] += y[t] * (y[i] * K(i, t) * di + y[j] * K(j, t) * dj);
    }
    m.converged = m_up - m_low <= tol;
    m.iterations = it;
    m.bias = (m_up + m_low) / 2.0;

    for (int i = 0; i < n; ++i)
        if (alpha[i] > 0) {
            m.sv.push_back(x[i]);
            m.coef.push_back(alpha[i] * y[i]);
            m.sv_rows.push_back(i);
        }
    return m;
}

SvmPrediction svm_predict(const SvmModel& m, const std::vector<double>& row) {
    if (row.size() != m.dim()) throw std::invalid_argument("feature dimension mismatch");
    std::vector<double> x = standardize_row(row, m.mean, m.sigma);
    double s = m.bias;
    for (std::size_t i = 0; i < m.sv.size(); ++i) s += m.coef[i] * rbf(m.sv[i], x, m.gamma);
    return {s > 0 ? 1 : 0, s};
}

std::vector<SvmPrediction> svm_predict(const SvmModel& m, const Dataset& d) {
    std::vector<SvmPrediction> out;
    out.reserve(d.rows());
    for (const auto& r : d.x) out.push_back(svm_predict(m, r));
    return out;
}

std::vector<double> svm_margins(const SvmModel& m, const Dataset& d) {
    std::vector<double> out;
    out.reserve(d.rows());
    for (std::size_t i = 0; i < d.rows(); ++i) {
        double f = svm_predict(m, d.x[i]).decision;
        out.push_back(d.y[i] == 1 ? f : -f);
    }
    return out;
}

double svm_dual_objective(const Dataset& d, double gamma, const std::vector<double>& alpha) {
    if (alpha.size() != d.rows()) throw std::invalid_argument("alpha size mismatch");
    std::vector<int> y = pm_labels(d.y);
    std::vector<double> mean, sigma;
    standardize_stats(d.x, mean, sigma);
    std::vector<std::vector<double>> x(d.rows());
    for (std::size_t i = 0; i < d.rows(); ++i) x[i] = standardize_row(d.x[i], mean, sigma);
    double obj = 0;
    for (std::size_t i = 0; i < alpha.size(); ++i) obj += alpha[i];
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        if (alpha[i] == 0) continue;
        for (std::size_t j = 0; j < alpha.size(); ++j) {
            if (alpha[j] == 0) continue;
            obj -= 0.5 * alpha[i] * alpha[j] * y[i] * y[j] * rbf(x[i], x[j], gamma);
        }
    }
    return obj;
}

RocCurve roc_auc(const std::vector<double>& decision, const std::vector<int>& truth) {
    if (decision.size() != truth.size() || decision.empty())
        throw std::invalid_argument("decision/truth size mismatch");
    std::size_t pos = 0, neg = 0;
    for (int t : truth) (t == 1 ? pos : neg)++;
    if (pos == 0 || neg == 0) throw std::invalid_argument("ROC needs both classes");

    std::vector<std::size_t> order(decision.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return decision[a] > decision[b]; });

    RocCurve roc;
    roc.points.push_back({0.0, 0.0});
    double tp = 0, fp = 0, auc = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        // group ties so they share one trapezoid
        std::size_t j = i;
        double tp0 = tp, fp0 = fp;
        while (j < order.size() && decision[order[j]] == decision[order[i]]) {
            (truth[order[j]] == 1 ? tp : fp) += 1.0;
            ++j;
        }
        auc += (fp - fp0) * (tp + tp0) / 2.0;
        roc.points.push_back({fp / double(neg), tp / double(pos)});
        i = j;
    }
    roc.auc = auc / (double(pos) * double(neg));
    return roc;
}

ClassificationReport score_predictions(const std::vector<double>& decision,
                                       const std::vector<int>& predicted,
                                       const std::vector<int>& truth) {
    if (decision.size() != truth.size() || predicted.size() != truth.size() || truth.empty())
        throw std::invalid_argument("report input size mismatch");
    ClassificationReport r;
    r.decision_values = decision;
    r.predicted = predicted;
    r.truth = truth;
    double tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] == 1)
            (predicted[i] == 1 ? tp : fn) += 1.0;
        else
            (predicted[i] == 0 ? tn : fp) += 1.0;
    }
    r.accuracy = (tp + tn) / double(truth.size());
    r.sensitivity = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    r.specificity = tn + fp > 0 ? tn / (tn + fp) : 0.0;
    r.ber = 1.0 - (r.sensitivity + r.specificity) / 2.0;
    bool both = tp + fn > 0 && tn + fp > 0;
    if (both) {
        r.roc = roc_auc(decision, truth);
        r.auc = r.roc.auc;
    }
    return r;
}

ValidationProtocol ValidationProtocol::loo() { return {}; }

ValidationProtocol ValidationProtocol::kfold_cv(int folds, unsigned seed) {
    ValidationProtocol p;
    p.kind = kfold;
    p.folds = folds;
    p.seed = seed;
    return p;
}

ValidationProtocol ValidationProtocol::fixed_split(std::vector<std::string> train,
                                                   std::vector<std::string> test) {
    ValidationProtocol p;
    p.kind = split;
    p.train_ids = std::move(train);
    p.test_ids = std::move(test);
    return p;
}

ClassificationReport svm_validate(const Dataset& d, const ValidationProtocol& p,
                                  double rho, double gamma, double tol) {
    d.validate();
    if (d.rows() == 0) throw std::invalid_argument("empty dataset");

    // fold assignment per patient
    std::vector<std::string> patients = patient_list(d);
    std::vector<std::vector<std::string>> fold_patients;
    if (p.kind == ValidationProtocol::loo_patient) {
        for (const auto& pt : patients) fold_patients.push_back({pt});
    } else if (p.kind == ValidationProtocol::kfold) {
        if (p.folds < 2) throw std::invalid_argument("kfold needs at least 2 folds");
        std::vector<std::string> shuffled = patients;
        std::mt19937 rng(p.seed);
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        fold_patients.resize(std::min<std::size_t>(p.folds, shuffled.size()));
        for (std::size_t i = 0; i < shuffled.size(); ++i)
            fold_patients[i % fold_patients.size()].push_back(shuffled[i]);
    } else {
        for (const auto& id : p.train_ids)
            if (std::find(p.test_ids.begin(), p.test_ids.end(), id) != p.test_ids.end())
                throw std::invalid_argument("split ids must be disjoint");
        fold_patients.push_back(p.test_ids);
    }

    std::vector<double> decision(d.rows());
    std::vector<int> predicted(d.rows());
    std::vector<char> evaluated(d.rows(), 0);
    int trainings = 0, degenerate = 0;

    for (const auto& held : fold_patients) {
        std::set<std::string> held_set(held.begin(), held.end());
        std::vector<int> train_idx, test_idx;
        for (std::size_t i = 0; i < d.rows(); ++i) {
            bool in_test = held_set.count(d.patient[i]) > 0;
            bool in_train = p.kind == ValidationProtocol::split
                                ? std::find(p.train_ids.begin(), p.train_ids.end(),
                                            d.patient[i]) != p.train_ids.end()
                                : !in_test;
            if (in_test)
                test_idx.push_back(int(i));
            else if (in_train)
                train_idx.push_back(int(i));
        }
        if (test_idx.empty()) continue;
        if (train_idx.empty()) throw std::invalid_argument("fold with empty training half");

        Dataset tr = rows_subset(d, train_idx);
        SvmModel model;
        if (single_class(tr)) {
            model = constant_model(tr.y[0], d.cols());
            ++degenerate;
        } else {
            model = svm_train(tr, rho, gamma, tol);
        }
        ++trainings;
        for (int i : test_idx) {
            SvmPrediction pr = svm_predict(model, d.x[i]);
            decision[i] = pr.decision;
            predicted[i] = pr.label;
            evaluated[i] = 1;
        }
    }

    std::vector<double> dv;
    std::vector<int> pv, tv;
    for (std::size_t i = 0; i < d.rows(); ++i)
        if (evaluated[i]) {
            dv.push_back(decision[i]);
            pv.push_back(predicted[i]);
            tv.push_back(d.y[i]);
        }
    ClassificationReport r = score_predictions(dv, pv, tv);
    r.trainings = trainings;
    r.single_class_folds = degenerate;
    return r;
}

GridSearchSpec GridSearchSpec::preset() {
    GridSearchSpec s;
    for (int e = -10; e <= 10; e += 2) {
        s.coarse_rho_log2.push_back(e);
        s.coarse_gamma_log2.push_back(e);
    }
    s.fine_rho_log2 = {8.0, 8.5, 9.0};
    s.fine_gamma_log2 = {2.0, 2.5, 3.0};
    return s;
}

GridSearchSpec GridSearchSpec::centered() {
    GridSearchSpec s = preset();
    s.fine_rho_log2.clear();
    s.fine_gamma_log2.clear();
    return s;
}

namespace {

double cv_accuracy(const Dataset& d, const std::vector<std::vector<int>>& folds,
                   double rho, double gamma, double tol) {
    std::size_t correct = 0, total = 0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<int> train_idx;
        for (std::size_t g = 0; g < folds.size(); ++g)
            if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
        if (train_idx.empty() || folds[f].empty()) continue;
        Dataset tr = rows_subset(d, train_idx);
        SvmModel model = single_class(tr) ? constant_model(tr.y[0], d.cols())
                                          : svm_train(tr, rho, gamma, tol);
        for (int i : folds[f]) {
            correct += svm_predict(model, d.x[i]).label == d.y[i];
            ++total;
        }
    }
    return total ? double(correct) / double(total) : 0.0;
}

} // namespace

GridSearchResult svm_grid_search(const Dataset& d, const GridSearchSpec& spec, double tol) {
    d.validate();
    if (spec.coarse_rho_log2.empty() || spec.coarse_gamma_log2.empty())
        throw std::invalid_argument("empty grid");
    if (spec.folds < 2) throw std::invalid_argument("grid search needs at least 2 folds");

    std::vector<int> order(d.rows());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937 rng(spec.seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<int>> folds(std::min<std::size_t>(spec.folds, d.rows()));
    for (std::size_t i = 0; i < order.size(); ++i) folds[i % folds.size()].push_back(order[i]);

    GridSearchResult res;
    res.best_accuracy = -1;
    auto eval = [&](double erho, double egamma, bool fine) {
        GridCell c;
        c.rho = std::exp2(erho);
        c.gamma = std::exp2(egamma);
        c.fine = fine;
        try {
            c.accuracy = cv_accuracy(d, folds, c.rho, c.gamma, tol);
        } catch (const std::exception&) {
            c.accuracy = 0.0;
        }
        res.surface.push_back(c);
        bool wins = c.accuracy > res.best_accuracy ||
                    (c.accuracy == res.best_accuracy &&
                     (c.rho < res.best_rho ||
                      (c.rho == res.best_rho && c.gamma < res.best_gamma)));
        if (wins) {
            res.best_accuracy = c.accuracy;
            res.best_rho = c.rho;
            res.best_gamma = c.gamma;
        }
    };

    for (double er : spec.coarse_rho_log2)
        for (double eg : spec.coarse_gamma_log2) eval(er, eg, false);

    std::vector<double> fr = spec.fine_rho_log2, fg = spec.fine_gamma_log2;
    if (fr.empty() || fg.empty()) {
        // half-step block around the coarse optimum
        double br = std::log2(res.best_rho), bg = std::log2(res.best_gamma);
        fr = {br - 0.5, br, br + 0.5};
        fg = {bg - 0.5, bg, bg + 0.5};
    }
    for (double er : fr)
        for (double eg : fg) eval(er, eg, true);
    return res;
}

void save_svm_model(const SvmModel& m, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        f << buf;
    };
    f << "svm-model v1\n";
    f << "gamma ";
    put(m.gamma);
    f << "\nrho ";
    put(m.rho);
    f << "\nbias ";
    put(m.bias);
    f << "\ndim " << m.dim() << "\nnsv " << m.sv.size() << "\nconverged "
      << (m.converged ? 1 : 0) << "\niterations " << m.iterations << "\nmean";
    for (double v : m.mean) {
        f << ' ';
        put(v);
    }
    f << "\nsigma";
    for (double v : m.sigma) {
        f << ' ';
        put(v);
    }
    f << '\n';
    for (std::size_t i = 0; i < m.sv.size(); ++i) {
        put(m.coef[i]);
        for (double v : m.sv[i]) {
            f << ' ';
            put(v);
        }
        f << '\n';
    }
    if (!f) throw std::runtime_error("write failed for " + path);
}

namespace {

double parse_double(const std::string& tok) {
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw std::runtime_error("bad number in model file");
    return v;
}

} // namespace

SvmModel load_svm_model(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::string line;
    if (!std::getline(f, line) || line != "svm-model v1")
        throw std::runtime_error("not a model file: " + path);
    SvmModel m;
    std::size_t dim = 0, nsv = 0;
    auto next_kv = [&](const std::string& key) {
        if (!std::getline(f, line)) throw std::runtime_error("truncated model file");
        std::istringstream is(line);
        std::string k;
        is >> k;
        if (k != key) throw std::runtime_error("expected " + key + " in model file");
        return is;
    };
    {
        auto is = next_kv("gamma");
        std::string v;
        is >> v;
        m.gamma = parse_double(v);
    }
    {
        auto is = next_kv("rho");
        std::string v;
        is >> v;
        m.rho = parse_double(v);
    }
    {
        auto is = next_kv("bias");
        std::string v;
        is >> v;
        m.bias = parse_double(v);
    }
    next_kv("dim") >> dim;
    next_kv("nsv") >> nsv;
    {
        int c = 0;
        next_kv("converged") >> c;
        m.converged = c != 0;
    }
    next_kv("iterations") >> m.iterations;
    {
        auto is = next_kv("mean");
        std::string tok;
        while (is >> tok) m.mean.push_back(parse_double(tok));
    }
    {
        auto is = next_kv("sigma");
        std::string tok;
        while (is >> tok) m.sigma.push_back(parse_double(tok));
    }
    if (m.mean.size() != dim || m.sigma.size() != dim)
        throw std::runtime_error("standardization width mismatch in " + path);
    for (std::size_t i = 0; i < nsv; ++i) {
        if (!std::getline(f, line)) throw std::runtime_error("missing support vector row");
        std::istringstream is(line);
        std::string tok;
        if (!(is >> tok)) throw std::runtime_error("empty support vector row");
        m.coef.push_back(parse_double(tok));
        std::vector<double> row;
        while (is >> tok) row.push_back(parse_double(tok));
        if (row.size() != dim) throw std::runtime_error("support vector width mismatch");
        m.sv.push_back(std::move(row));
    }
    return m;
}

} // namespace scarline
