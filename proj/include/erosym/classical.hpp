#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "erosym/corpus.hpp"
#include "erosym/error.hpp"
#include "erosym/metrics.hpp"
#include "erosym/rng.hpp"

namespace erosym {

// Feature rows with labels; the common input of the classical trainers.
struct LabeledVectors {
    std::vector<std::vector<double>> x;
    std::vector<Label> y;

    std::size_t size() const { return x.size(); }
    std::size_t dim() const { return x.empty() ? 0 : x.front().size(); }

    bool both_classes_present() const {
        bool pos = false, neg = false;
        for (Label l : y) (l == Label::violation ? pos : neg) = true;
        return pos && neg;
    }
};

namespace classical_detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

} // namespace classical_detail

// ---------------------------------------------------------------------------
// Linear SVM, Pegasos-style stochastic subgradient on the primal
// L2-regularized hinge objective with lambda = 1/(c*n) and step 1/(lambda*t).
// ---------------------------------------------------------------------------

struct LinearSvmModel {
    std::vector<double> weights;
    double bias = 0.0;
    double c = 1.0;

    double score(const std::vector<double>& x) const {
        return classical_detail::dot(weights, x) + bias;
    }
};

// Mean hinge loss plus (lambda/2)*||w||^2; the quantity the trainer
// decreases. Exposed for the monotonicity checks.
inline double svm_objective(const LinearSvmModel& m, const LabeledVectors& data,
                            double lambda) {
    double hinge = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double y = data.y[i] == Label::violation ? 1.0 : -1.0;
        hinge += std::max(0.0, 1.0 - y * m.score(data.x[i]));
    }
    hinge /= static_cast<double>(data.size());
    return hinge + 0.5 * lambda * classical_detail::dot(m.weights, m.weights);
}

inline LinearSvmModel train_svm(const LabeledVectors& train, double c, int epochs,
                                std::uint64_t seed) {
    if (!train.both_classes_present())
        throw DataError("train_svm: both classes must be present");
    if (c <= 0) throw DataError("train_svm: c must be positive");

    const std::size_t n = train.size();
    const double lambda = 1.0 / (c * static_cast<double>(n));

    LinearSvmModel m;
    m.c = c;
    m.weights.assign(train.dim(), 0.0);

    Rng rng(seed);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    std::uint64_t t = 0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        shuffle(order, rng);
        for (std::size_t idx : order) {
            ++t;
            const double eta = 1.0 / (lambda * static_cast<double>(t));
            const double y = train.y[idx] == Label::violation ? 1.0 : -1.0;
            const double margin = y * m.score(train.x[idx]);
            const double decay = 1.0 - eta * lambda;
            for (auto& w : m.weights) w *= decay;
            if (margin < 1.0) {
                const auto& x = train.x[idx];
                const double step = eta * y;
                for (std::size_t d = 0; d < x.size(); ++d) m.weights[d] += step * x[d];
                m.bias += eta * y;
            }
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Logistic regression, full-batch gradient descent on the L2-regularized
// negative log-likelihood. The bias is not regularized. Step halving keeps
// the objective non-increasing.
// ---------------------------------------------------------------------------

struct LogRegModel {
    std::vector<double> weights;
    double bias = 0.0;
    double l2 = 0.0;

    double score(const std::vector<double>& x) const {
        return classical_detail::dot(weights, x) + bias;
    }

    double posterior(const std::vector<double>& x) const {
        return classical_detail::sigmoid(score(x));
    }
};

inline double logreg_nll(const LogRegModel& m, const LabeledVectors& data) {
    double nll = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double z = m.score(data.x[i]);
        const double y = data.y[i] == Label::violation ? 1.0 : 0.0;
        // -[y log s + (1-y) log(1-s)] = log(1+e^z) - y z, stably:
        const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
        nll += softplus - y * z;
    }
    nll /= static_cast<double>(data.size());
    return nll + 0.5 * m.l2 * classical_detail::dot(m.weights, m.weights);
}

inline void logreg_gradient(const LogRegModel& m, const LabeledVectors& data,
                            std::vector<double>& gw, double& gb) {
    const std::size_t n = data.size();
    gw.assign(m.weights.size(), 0.0);
    gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double y = data.y[i] == Label::violation ? 1.0 : 0.0;
        const double err = classical_detail::sigmoid(m.score(data.x[i])) - y;
        const auto& x = data.x[i];
        for (std::size_t d = 0; d < x.size(); ++d) gw[d] += err * x[d];
        gb += err;
    }
    for (std::size_t d = 0; d < gw.size(); ++d)
        gw[d] = gw[d] / static_cast<double>(n) + m.l2 * m.weights[d];
    gb /= static_cast<double>(n);
}

inline LogRegModel train_logreg(const LabeledVectors& train, double l2, double lr = 1.0,
                                int epochs = 2000, double tol = 1e-6) {
    if (!train.both_classes_present())
        throw DataError("train_logreg: both classes must be present");
    if (l2 < 0) throw DataError("train_logreg: l2 must be non-negative");

    LogRegModel m;
    m.l2 = l2;
    m.weights.assign(train.dim(), 0.0);

    std::vector<double> gw;
    double gb = 0.0;
    double obj = logreg_nll(m, train);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        logreg_gradient(m, train, gw, gb);
        double gmax = std::abs(gb);
        for (double g : gw) gmax = std::max(gmax, std::abs(g));
        if (gmax < tol) break;

        double step = lr;
        LogRegModel cand = m;
        for (int halving = 0; halving < 60; ++halving) {
            for (std::size_t d = 0; d < m.weights.size(); ++d)
                cand.weights[d] = m.weights[d] - step * gw[d];
            cand.bias = m.bias - step * gb;
            const double cand_obj = logreg_nll(cand, train);
            if (cand_obj <= obj) {
                m = cand;
                obj = cand_obj;
                break;
            }
            step *= 0.5;
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Bernoulli naive Bayes over features binarized at a threshold.
// ---------------------------------------------------------------------------

struct BernoulliNbModel {
    std::array<double, 2> log_prior{};       // [violation, non_violation]
    std::array<std::vector<double>, 2> log_p;   // log P(feature=1 | class)
    std::array<std::vector<double>, 2> log_1mp; // log P(feature=0 | class)
    double binarize_threshold = 0.0;
    double alpha = 1.0;

    double log_posterior(int cls, const std::vector<double>& x) const {
        double lp = log_prior[static_cast<std::size_t>(cls)];
        const auto& p1 = log_p[static_cast<std::size_t>(cls)];
        const auto& p0 = log_1mp[static_cast<std::size_t>(cls)];
        for (std::size_t d = 0; d < x.size(); ++d)
            lp += x[d] > binarize_threshold ? p1[d] : p0[d];
        return lp;
    }
};

inline BernoulliNbModel train_nb(const LabeledVectors& train, double alpha = 1.0,
                                 double binarize_threshold = 0.0) {
    if (!train.both_classes_present())
        throw DataError("train_nb: both classes must be present");
    if (alpha <= 0) throw DataError("train_nb: alpha must be positive");

    BernoulliNbModel m;
    m.alpha = alpha;
    m.binarize_threshold = binarize_threshold;

    const std::size_t dim = train.dim();
    std::array<double, 2> count{0.0, 0.0};
    std::array<std::vector<double>, 2> ones;
    ones[0].assign(dim, 0.0);
    ones[1].assign(dim, 0.0);

    for (std::size_t i = 0; i < train.size(); ++i) {
        const std::size_t cls = train.y[i] == Label::violation ? 0 : 1;
        count[cls] += 1.0;
        for (std::size_t d = 0; d < dim; ++d)
            if (train.x[i][d] > binarize_threshold) ones[cls][d] += 1.0;
    }

    const double total = count[0] + count[1];
    for (std::size_t cls = 0; cls < 2; ++cls) {
        m.log_prior[cls] = std::log(count[cls] / total);
        m.log_p[cls].resize(dim);
        m.log_1mp[cls].resize(dim);
        for (std::size_t d = 0; d < dim; ++d) {
            const double p = (ones[cls][d] + alpha) / (count[cls] + 2.0 * alpha);
            m.log_p[cls][d] = std::log(p);
            m.log_1mp[cls][d] = std::log(1.0 - p);
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// CART decision tree with Gini impurity and midpoint thresholds.
// ---------------------------------------------------------------------------

struct DtNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    std::array<std::uint64_t, 2> counts{0, 0}; // [violation, non_violation]
};

struct DecisionTreeModel {
    std::vector<DtNode> nodes; // nodes[0] is the root
    int max_depth = -1;        // -1 = unlimited
    int min_samples_leaf = 1;
};

inline double gini(double pos, double neg) {
    const double n = pos + neg;
    if (n == 0) return 0.0;
    const double fp = pos / n, fn = neg / n;
    return 1.0 - fp * fp - fn * fn;
}

namespace classical_detail {

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    // any valid candidate beats the sentinel; zero-gain splits are taken,
    // recursion is bounded by purity, depth and leaf-size stops
    double decrease = -1.0;
};

inline SplitChoice best_split(const LabeledVectors& data,
                              const std::vector<std::size_t>& idx,
                              int min_samples_leaf) {
    const std::size_t n = idx.size();
    double pos = 0;
    for (std::size_t i : idx) pos += data.y[i] == Label::violation ? 1.0 : 0.0;
    const double parent = gini(pos, static_cast<double>(n) - pos);

    SplitChoice best;
    std::vector<std::pair<double, bool>> vals(n); // (feature value, is violation)
    for (std::size_t f = 0; f < data.dim(); ++f) {
        for (std::size_t i = 0; i < n; ++i)
            vals[i] = {data.x[idx[i]][f], data.y[idx[i]] == Label::violation};
        std::sort(vals.begin(), vals.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });

        double lpos = 0, lneg = 0;
        double rpos = pos, rneg = static_cast<double>(n) - pos;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (vals[i].second) { lpos += 1; rpos -= 1; }
            else { lneg += 1; rneg -= 1; }
            if (vals[i].first == vals[i + 1].first) continue;
            const double nl = lpos + lneg, nr = rpos + rneg;
            if (nl < min_samples_leaf || nr < min_samples_leaf) continue;
            const double weighted =
                (nl * gini(lpos, lneg) + nr * gini(rpos, rneg)) / static_cast<double>(n);
            const double decrease = parent - weighted;
            const double threshold = vals[i].first + (vals[i + 1].first - vals[i].first) / 2.0;
            if (!(threshold > vals[i].first)) continue; // rounding collapsed the midpoint
            // Features and thresholds are enumerated in ascending order, so
            // keeping the first strictly-best candidate realizes the
            // lowest-feature-then-lowest-threshold tie rule.
            if (decrease > best.decrease)
                best = {static_cast<int>(f), threshold, decrease};
        }
    }
    return best;
}

inline int grow_tree(DecisionTreeModel& model, const LabeledVectors& data,
                     std::vector<std::size_t> idx, int depth) {
    DtNode node;
    for (std::size_t i : idx)
        ++node.counts[data.y[i] == Label::violation ? 0 : 1];

    const bool pure = node.counts[0] == 0 || node.counts[1] == 0;
    const bool depth_capped = model.max_depth >= 0 && depth >= model.max_depth;

    if (!pure && !depth_capped) {
        const auto split = best_split(data, idx, model.min_samples_leaf);
        if (split.feature >= 0) {
            std::vector<std::size_t> left, right;
            for (std::size_t i : idx)
                (data.x[i][static_cast<std::size_t>(split.feature)] < split.threshold ? left
                                                                                      : right)
                    .push_back(i);
            node.feature = split.feature;
            node.threshold = split.threshold;
            const int self = static_cast<int>(model.nodes.size());
            model.nodes.push_back(node);
            model.nodes[static_cast<std::size_t>(self)].left =
                grow_tree(model, data, std::move(left), depth + 1);
            model.nodes[static_cast<std::size_t>(self)].right =
                grow_tree(model, data, std::move(right), depth + 1);
            return self;
        }
    }
    model.nodes.push_back(node);
    return static_cast<int>(model.nodes.size()) - 1;
}

} // namespace classical_detail

inline DecisionTreeModel train_dt(const LabeledVectors& train, int max_depth = -1,
                                  int min_samples_leaf = 1) {
    if (train.size() == 0) throw DataError("train_dt: empty training set");
    DecisionTreeModel m;
    m.max_depth = max_depth;
    m.min_samples_leaf = min_samples_leaf;
    std::vector<std::size_t> idx(train.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    classical_detail::grow_tree(m, train, std::move(idx), 0);
    return m;
}

// ---------------------------------------------------------------------------
// k-nearest neighbors. Distance ties resolve to the lower stored index.
// ---------------------------------------------------------------------------

enum class KnnMetric { euclidean, cosine };

struct KnnModel {
    std::vector<std::vector<double>> stored_x;
    std::vector<Label> stored_y;
    int k = 1;
    KnnMetric metric = KnnMetric::euclidean;
};

inline double knn_distance(const std::vector<double>& a, const std::vector<double>& b,
                           KnnMetric metric) {
    using classical_detail::dot;
    if (metric == KnnMetric::euclidean) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[i];
            s += d * d;
        }
        return std::sqrt(s);
    }
    const double na = std::sqrt(dot(a, a)), nb = std::sqrt(dot(b, b));
    if (na == 0.0 || nb == 0.0) return 1.0; // undefined similarity reads as 0
    return 1.0 - dot(a, b) / (na * nb);
}

inline KnnModel train_knn(const LabeledVectors& train, int k,
                          KnnMetric metric = KnnMetric::euclidean) {
    if (k < 1 || k % 2 == 0) throw DataError("train_knn: k must be odd and >= 1");
    if (static_cast<std::size_t>(k) > train.size())
        throw DataError("train_knn: k exceeds the training set size");
    KnnModel m;
    m.stored_x = train.x;
    m.stored_y = train.y;
    m.k = k;
    m.metric = metric;
    return m;
}

// ---------------------------------------------------------------------------
// Prediction. Decision-boundary ties resolve to violation.
// ---------------------------------------------------------------------------

using ClassicalModel =
    std::variant<LinearSvmModel, LogRegModel, BernoulliNbModel, DecisionTreeModel, KnnModel>;

inline Label predict(const LinearSvmModel& m, const std::vector<double>& x) {
    if (x.size() != m.weights.size()) throw DataError("predict: dimension mismatch");
    return m.score(x) >= 0.0 ? Label::violation : Label::non_violation;
}

inline Label predict(const LogRegModel& m, const std::vector<double>& x) {
    if (x.size() != m.weights.size()) throw DataError("predict: dimension mismatch");
    return m.score(x) >= 0.0 ? Label::violation : Label::non_violation;
}

inline Label predict(const BernoulliNbModel& m, const std::vector<double>& x) {
    if (x.size() != m.log_p[0].size()) throw DataError("predict: dimension mismatch");
    return m.log_posterior(0, x) >= m.log_posterior(1, x) ? Label::violation
                                                          : Label::non_violation;
}

inline Label predict(const DecisionTreeModel& m, const std::vector<double>& x) {
    const DtNode* node = &m.nodes.front();
    while (node->feature >= 0) {
        if (static_cast<std::size_t>(node->feature) >= x.size())
            throw DataError("predict: dimension mismatch");
        node = &m.nodes[static_cast<std::size_t>(
            x[static_cast<std::size_t>(node->feature)] < node->threshold ? node->left
                                                                         : node->right)];
    }
    return node->counts[0] >= node->counts[1] ? Label::violation : Label::non_violation;
}

inline Label predict(const KnnModel& m, const std::vector<double>& x) {
    if (!m.stored_x.empty() && x.size() != m.stored_x.front().size())
        throw DataError("predict: dimension mismatch");
    std::vector<std::pair<double, std::size_t>> dist(m.stored_x.size());
    for (std::size_t i = 0; i < m.stored_x.size(); ++i)
        dist[i] = {knn_distance(x, m.stored_x[i], m.metric), i};
    std::sort(dist.begin(), dist.end());
    int votes = 0;
    for (int i = 0; i < m.k; ++i)
        votes += m.stored_y[dist[static_cast<std::size_t>(i)].second] == Label::violation ? 1 : -1;
    return votes >= 0 ? Label::violation : Label::non_violation;
}

inline Label predict(const ClassicalModel& m, const std::vector<double>& x) {
    return std::visit([&](const auto& model) { return predict(model, x); }, m);
}

// ---------------------------------------------------------------------------
// Exhaustive grid search selecting by validation F1.
// ---------------------------------------------------------------------------

enum class Family { svm, logreg, nb, dt, knn, textcnn };

inline const char* to_string(Family f) {
    switch (f) {
        case Family::svm: return "svm";
        case Family::logreg: return "logreg";
        case Family::nb: return "nb";
        case Family::dt: return "dt";
        case Family::knn: return "knn";
        default: return "textcnn";
    }
}

inline Family family_from_string(const std::string& s) {
    if (s == "svm") return Family::svm;
    if (s == "logreg" || s == "lr") return Family::logreg;
    if (s == "nb") return Family::nb;
    if (s == "dt") return Family::dt;
    if (s == "knn") return Family::knn;
    if (s == "textcnn") return Family::textcnn;
    throw UsageError("unknown classifier family: " + s);
}

// Axes are ordered; enumeration nests in axis order with the first axis
// changing slowest.
struct HyperGrid {
    Family family = Family::svm;
    std::vector<std::pair<std::string, std::vector<double>>> axes;

    std::size_t cardinality() const {
        std::size_t n = 1;
        for (const auto& [_, vals] : axes) n *= vals.size();
        return n;
    }
};

using GridPoint = std::vector<std::pair<std::string, double>>;

struct GridScore {
    GridPoint point;
    MetricsReport val;
};

struct GridSearchResult {
    ClassicalModel best;
    GridPoint best_point;
    std::vector<GridScore> table;
};

inline HyperGrid default_grid(Family family) {
    switch (family) {
        case Family::svm:
            return {family, {{"c", {0.01, 0.1, 1, 10, 100}}}};
        case Family::logreg:
            return {family, {{"l2", {0, 0.01, 0.1, 1}}}};
        case Family::nb:
            return {family, {{"alpha", {0.5, 1, 2}}, {"threshold", {0.0}}}};
        case Family::dt:
            return {family, {{"max_depth", {3, 5, 10, -1}}, {"min_samples_leaf", {1, 3, 5}}}};
        case Family::knn:
            return {family,
                    {{"k", {1, 3, 5, 7, 9, 11}}, {"metric", {0 /*euclidean*/, 1 /*cosine*/}}}};
        default:
            throw UsageError("textcnn is trained directly, not grid-searched");
    }
}

namespace classical_detail {

inline double point_value(const GridPoint& p, const std::string& name, double fallback) {
    for (const auto& [k, v] : p)
        if (k == name) return v;
    return fallback;
}

inline ClassicalModel train_point(Family family, const GridPoint& p,
                                  const LabeledVectors& train, std::uint64_t seed) {
    switch (family) {
        case Family::svm:
            return train_svm(train, point_value(p, "c", 1.0),
                             static_cast<int>(point_value(p, "epochs", 100)), seed);
        case Family::logreg:
            return train_logreg(train, point_value(p, "l2", 0.0),
                                point_value(p, "lr", 1.0),
                                static_cast<int>(point_value(p, "epochs", 2000)),
                                point_value(p, "tol", 1e-6));
        case Family::nb:
            return train_nb(train, point_value(p, "alpha", 1.0),
                            point_value(p, "threshold", 0.0));
        case Family::dt:
            return train_dt(train, static_cast<int>(point_value(p, "max_depth", -1)),
                            static_cast<int>(point_value(p, "min_samples_leaf", 1)));
        case Family::knn:
            return train_knn(train, static_cast<int>(point_value(p, "k", 1)),
                             point_value(p, "metric", 0) == 0 ? KnnMetric::euclidean
                                                              : KnnMetric::cosine);
        default:
            throw UsageError("textcnn is trained directly, not grid-searched");
    }
}

} // namespace classical_detail

inline GridSearchResult grid_search(const HyperGrid& grid, const LabeledVectors& train,
                                    const LabeledVectors& val, std::uint64_t seed) {
    if (grid.axes.empty() || grid.cardinality() == 0)
        throw DataError("grid_search: empty grid");

    GridSearchResult result;
    double best_f1 = -1.0;
    const std::size_t total = grid.cardinality();

    for (std::size_t idx = 0; idx < total; ++idx) {
        // decompose idx with the first axis most significant
        GridPoint point;
        std::size_t rem = idx, scale = total;
        for (const auto& [name, vals] : grid.axes) {
            scale /= vals.size();
            point.emplace_back(name, vals[rem / scale]);
            rem %= scale;
        }

        ClassicalModel model;
        try {
            model = classical_detail::train_point(grid.family, point, train,
                                                  substream_seed(seed, idx));
        } catch (const Error& e) {
            std::string desc;
            for (const auto& [k, v] : point) desc += " " + k + "=" + std::to_string(v);
            throw DataError("grid_search: training failed at point" + desc + ": " + e.what());
        }

        std::vector<Label> preds, truths;
        preds.reserve(val.size());
        for (std::size_t i = 0; i < val.size(); ++i) {
            preds.push_back(predict(model, val.x[i]));
            truths.push_back(val.y[i]);
        }
        const MetricsReport mr = metrics(confusion(preds, truths));
        result.table.push_back({point, mr});
        if (mr.f1 > best_f1) {
            best_f1 = mr.f1;
            result.best = std::move(model);
            result.best_point = point;
        }
    }
    return result;
}

} // namespace erosym
