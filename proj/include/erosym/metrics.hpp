#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "erosym/corpus.hpp"
#include "erosym/error.hpp"

namespace erosym {

// violation is the positive class everywhere.
struct ConfusionMatrix {
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::uint64_t total() const { return tp + fp + fn + tn; }

    void add(Label predicted, Label truth) {
        const bool p = predicted == Label::violation;
        const bool t = truth == Label::violation;
        if (p && t) ++tp;
        else if (p && !t) ++fp;
        else if (!p && t) ++fn;
        else ++tn;
    }
};

struct MetricsReport {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
    bool precision_degenerate = false; // tp + fp == 0
    bool recall_degenerate = false;    // tp + fn == 0
};

inline ConfusionMatrix confusion(const std::vector<Label>& predictions,
                                 const std::vector<Label>& truths) {
    if (predictions.size() != truths.size())
        throw DataError("confusion: prediction/truth length mismatch");
    if (predictions.empty()) throw DataError("confusion: empty input");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        cm.add(predictions[i], truths[i]);
    return cm;
}

// Precision = TP/(TP+FP), Recall = TP/(TP+FN), F1 = harmonic mean,
// Accuracy = (TP+TN)/total. Zero denominators report 0 with a degenerate
// flag.
inline MetricsReport metrics(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw DataError("metrics: empty confusion matrix");
    MetricsReport r;
    const double tp = static_cast<double>(cm.tp);
    if (cm.tp + cm.fp > 0)
        r.precision = tp / static_cast<double>(cm.tp + cm.fp);
    else
        r.precision_degenerate = true;
    if (cm.tp + cm.fn > 0)
        r.recall = tp / static_cast<double>(cm.tp + cm.fn);
    else
        r.recall_degenerate = true;
    if (r.precision + r.recall > 0)
        r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    r.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
    return r;
}

// (voting - baseline) / baseline, as a percentage rounded half-up to two
// decimals.
inline double improvement(double voting, double baseline) {
    if (baseline <= 0.0) throw DataError("improvement: baseline must be positive");
    const double pct = (voting - baseline) / baseline * 100.0;
    return static_cast<double>(std::llround(pct * 100.0)) / 100.0;
}

struct CvReport {
    std::vector<MetricsReport> folds;
    MetricsReport mean;
    MetricsReport stddev; // sample standard deviation
    int k = 0;
    std::uint64_t seed = 0;
};

using Predictor = std::function<Label(const LabeledComment&)>;
using FoldTrainer = std::function<Predictor(const Dataset&)>;

inline CvReport cross_validate(const FoldTrainer& trainer, const Dataset& d, int k,
                               std::uint64_t seed) {
    CvReport report;
    report.k = k;
    report.seed = seed;
    const auto folds = kfold(d, k, seed);
    for (std::size_t f = 0; f < folds.size(); ++f) {
        Predictor predict;
        try {
            predict = trainer(folds[f].first);
        } catch (const Error& e) {
            throw DataError("cross_validate: trainer failed on fold " + std::to_string(f) +
                            ": " + e.what());
        }
        std::vector<Label> preds, truths;
        for (const auto& item : folds[f].second.items) {
            preds.push_back(predict(item));
            truths.push_back(item.label);
        }
        report.folds.push_back(metrics(confusion(preds, truths)));
    }

    const auto aggregate = [&](auto member) {
        double sum = 0.0;
        for (const auto& m : report.folds) sum += m.*member;
        const double mean = sum / static_cast<double>(report.folds.size());
        double ss = 0.0;
        for (const auto& m : report.folds) ss += (m.*member - mean) * (m.*member - mean);
        const double sd = report.folds.size() > 1
                              ? std::sqrt(ss / static_cast<double>(report.folds.size() - 1))
                              : 0.0;
        return std::pair<double, double>(mean, sd);
    };
    std::tie(report.mean.precision, report.stddev.precision) = aggregate(&MetricsReport::precision);
    std::tie(report.mean.recall, report.stddev.recall) = aggregate(&MetricsReport::recall);
    std::tie(report.mean.f1, report.stddev.f1) = aggregate(&MetricsReport::f1);
    std::tie(report.mean.accuracy, report.stddev.accuracy) = aggregate(&MetricsReport::accuracy);
    return report;
}

} // namespace erosym
