#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "erosym/error.hpp"
#include "erosym/metrics.hpp"

namespace erosym {

struct ReportDoc {
    std::string markdown;
    std::string csv;
};

namespace report_detail {

inline std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

// full precision for CSV so a re-parse reproduces the double bit-exactly
inline std::string csv_num(double v) { return fmt("%.17g", v); }
inline std::string md_num(double v) { return fmt("%.3f", v); }
inline std::string pct(double v) { return fmt("%.2f", v) + "%"; }

inline const std::array<const char*, 4> kMetricNames = {"Precision", "Recall", "F1-score",
                                                        "Accuracy"};

inline double metric_value(const MetricsReport& m, std::size_t i) {
    switch (i) {
        case 0: return m.precision;
        case 1: return m.recall;
        case 2: return m.f1;
        default: return m.accuracy;
    }
}

} // namespace report_detail

// Rows of classifiers by columns of variants (embeddings, dimensions) with
// one MetricsReport per cell. Feeds the Table-2 and Table-4 shapes.
struct MetricGrid {
    std::vector<std::string> rows;
    std::vector<std::string> cols;
    std::map<std::pair<std::string, std::string>, MetricsReport> cells;

    void put(const std::string& row, const std::string& col, const MetricsReport& m) {
        cells[{row, col}] = m;
    }

    const MetricsReport& at(const std::string& row, const std::string& col) const {
        const auto it = cells.find({row, col});
        if (it == cells.end())
            throw DataError("report: missing cell (" + row + ", " + col + ")");
        return it->second;
    }
};

// Classifier-by-embedding comparison with per-metric column groups, a
// per-row Average column and a closing Average row. The best value of each
// row within a metric group is bolded.
inline ReportDoc render_metric_grid(const MetricGrid& g, const std::string& title,
                                    bool with_averages) {
    using namespace report_detail;
    // validate up front so a gap is reported before any output is built
    for (const auto& r : g.rows)
        for (const auto& c : g.cols)
            (void)g.at(r, c);

    ReportDoc doc;
    std::string& md = doc.markdown;
    std::string& csv = doc.csv;

    md += "# " + title + "\n\n";
    md += "| Classifier |";
    csv += "classifier";
    for (std::size_t mi = 0; mi < 4; ++mi) {
        for (const auto& c : g.cols) {
            md += " " + std::string(kMetricNames[mi]) + " " + c + " |";
            csv += "," + std::string(kMetricNames[mi]) + "_" + c;
        }
        if (with_averages) {
            md += " " + std::string(kMetricNames[mi]) + " Avg |";
            csv += "," + std::string(kMetricNames[mi]) + "_avg";
        }
    }
    md += "\n|---|";
    for (std::size_t mi = 0; mi < 4; ++mi)
        for (std::size_t c = 0; c < g.cols.size() + (with_averages ? 1 : 0); ++c) md += "---|";
    md += "\n";
    csv += "\n";

    std::vector<double> col_sums(4 * (g.cols.size() + 1), 0.0);
    for (const auto& r : g.rows) {
        md += "| " + r + " |";
        csv += r;
        for (std::size_t mi = 0; mi < 4; ++mi) {
            double best = -1.0, sum = 0.0;
            for (const auto& c : g.cols)
                best = std::max(best, metric_value(g.at(r, c), mi));
            for (std::size_t ci = 0; ci < g.cols.size(); ++ci) {
                const double v = metric_value(g.at(r, g.cols[ci]), mi);
                sum += v;
                col_sums[mi * (g.cols.size() + 1) + ci] += v;
                const std::string s = md_num(v);
                md += v == best ? " **" + s + "** |" : " " + s + " |";
                csv += "," + csv_num(v);
            }
            if (with_averages) {
                const double avg = sum / static_cast<double>(g.cols.size());
                col_sums[mi * (g.cols.size() + 1) + g.cols.size()] += avg;
                md += " " + md_num(avg) + " |";
                csv += "," + csv_num(avg);
            }
        }
        md += "\n";
        csv += "\n";
    }

    if (with_averages) {
        md += "| Average |";
        csv += "Average";
        for (std::size_t mi = 0; mi < 4; ++mi)
            for (std::size_t ci = 0; ci <= g.cols.size(); ++ci) {
                const double v =
                    col_sums[mi * (g.cols.size() + 1) + ci] / static_cast<double>(g.rows.size());
                md += " " + md_num(v) + " |";
                csv += "," + csv_num(v);
            }
        md += "\n";
        csv += "\n";
    }
    return doc;
}

inline ReportDoc render_table2(const MetricGrid& g) {
    return render_metric_grid(g, "Performance comparison among ML-based classifiers", true);
}

inline ReportDoc render_table4(const MetricGrid& g) {
    return render_metric_grid(
        g, "Performance comparison across word embedding dimensions", false);
}

// Table-3 shape: one row per TextCNN variant, four metric columns, closing
// average row.
inline ReportDoc render_table3(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
    using namespace report_detail;
    if (rows.empty()) throw DataError("report: table 3 has no rows");
    ReportDoc doc;
    doc.markdown = "# Performance comparison among DL-based classifiers\n\n"
                   "| Classifier | Precision | Recall | F1-score | Accuracy |\n"
                   "|---|---|---|---|---|\n";
    doc.csv = "classifier,precision,recall,f1,accuracy\n";
    std::array<double, 4> sums{};
    for (const auto& [name, m] : rows) {
        doc.markdown += "| " + name + " |";
        doc.csv += name;
        for (std::size_t mi = 0; mi < 4; ++mi) {
            const double v = metric_value(m, mi);
            sums[mi] += v;
            doc.markdown += " " + md_num(v) + " |";
            doc.csv += "," + csv_num(v);
        }
        doc.markdown += "\n";
        doc.csv += "\n";
    }
    doc.markdown += "| Average |";
    doc.csv += "Average";
    for (std::size_t mi = 0; mi < 4; ++mi) {
        const double v = sums[mi] / static_cast<double>(rows.size());
        doc.markdown += " " + md_num(v) + " |";
        doc.csv += "," + csv_num(v);
    }
    doc.markdown += "\n";
    doc.csv += "\n";
    return doc;
}

// One ensemble comparison row: the baselines and the voted result.
struct EnsembleRow {
    MetricsReport mean;
    MetricsReport best;
    MetricsReport voting;
};

// Table-5/6 shape: Mean / Best / Voting / Imp_M / Imp_B per metric, where
// Imp_M = (Voting-Mean)/Mean and Imp_B = (Voting-Best)/Best in percent.
inline ReportDoc render_ensemble_table(
    const std::vector<std::pair<std::string, EnsembleRow>>& rows, const std::string& title) {
    using namespace report_detail;
    if (rows.empty()) throw DataError("report: ensemble table has no rows");
    ReportDoc doc;
    std::string& md = doc.markdown;
    md += "# " + title + "\n\n| Classifier |";
    doc.csv = "classifier";
    for (std::size_t mi = 0; mi < 4; ++mi) {
        for (const char* part : {"Mean", "Best", "Voting", "Imp_M", "Imp_B"}) {
            md += " " + std::string(kMetricNames[mi]) + " " + part + " |";
            doc.csv += "," + std::string(kMetricNames[mi]) + "_" + part;
        }
    }
    md += "\n|---|";
    for (int i = 0; i < 20; ++i) md += "---|";
    md += "\n";
    doc.csv += "\n";

    for (const auto& [name, row] : rows) {
        md += "| " + name + " |";
        doc.csv += name;
        for (std::size_t mi = 0; mi < 4; ++mi) {
            const double mean = metric_value(row.mean, mi);
            const double best = metric_value(row.best, mi);
            const double voting = metric_value(row.voting, mi);
            const double imp_m = improvement(voting, mean);
            const double imp_b = improvement(voting, best);
            md += " " + md_num(mean) + " | " + md_num(best) + " | " + md_num(voting) + " | " +
                  pct(imp_m) + " | " + pct(imp_b) + " |";
            doc.csv += "," + csv_num(mean) + "," + csv_num(best) + "," + csv_num(voting) + "," +
                       fmt("%.2f", imp_m) + "," + fmt("%.2f", imp_b);
        }
        md += "\n";
        doc.csv += "\n";
    }
    return doc;
}

inline ReportDoc render_table5(const std::vector<std::pair<std::string, EnsembleRow>>& rows) {
    return render_ensemble_table(rows, "Performance comparison of ensemble classifiers");
}

inline ReportDoc render_table6(const std::vector<std::pair<std::string, EnsembleRow>>& rows) {
    return render_ensemble_table(
        rows, "Performance comparison among ensemble classifiers per word embedding");
}

// Writes table<N>_<run_id>.md and .csv next to each other.
inline void write_report(const ReportDoc& doc, const std::string& out_dir, int table_number,
                         const std::string& run_id) {
    const std::string base =
        out_dir + "/table" + std::to_string(table_number) + "_" + run_id;
    std::ofstream md(base + ".md", std::ios::binary);
    std::ofstream csv(base + ".csv", std::ios::binary);
    if (!md || !csv) throw DataError("cannot write report files at " + base);
    md << doc.markdown;
    csv << doc.csv;
}

} // namespace erosym
