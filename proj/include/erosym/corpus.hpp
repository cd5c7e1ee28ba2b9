#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "erosym/error.hpp"
#include "erosym/rng.hpp"

namespace erosym {

enum class Label { violation, non_violation };

inline const char* to_string(Label l) {
    return l == Label::violation ? "violation" : "non_violation";
}

inline Label label_from_string(const std::string& s) {
    if (s == "violation") return Label::violation;
    if (s == "non_violation") return Label::non_violation;
    throw DataError("unknown label literal \"" + s + "\"");
}

// One review comment as mined from Gerrit. `file_path` is empty for
// change-level messages; `line` is absent when the comment is not anchored
// to a source line.
struct ReviewComment {
    std::string id;
    std::string project;
    long change_number = 0;
    std::string revision_id;
    std::string file_path;
    std::optional<long> line;
    std::string message;
    std::string url;
    std::string timestamp; // ISO-8601 UTC

    bool operator==(const ReviewComment&) const = default;
};

struct LabeledComment {
    ReviewComment comment;
    Label label = Label::non_violation;

    bool operator==(const LabeledComment&) const = default;
};

// Item order is the canonical iteration order for every deterministic
// operation below. Immutable by convention once loaded.
struct Dataset {
    std::vector<LabeledComment> items;
    std::string name;
    std::uint64_t seed = 42;

    std::size_t size() const { return items.size(); }

    std::size_t count(Label l) const {
        std::size_t n = 0;
        for (const auto& it : items)
            if (it.label == l) ++n;
        return n;
    }
};

struct SplitSpec {
    double train_frac = 0.6;
    double val_frac = 0.2;
    double test_frac = 0.2;
    std::uint64_t seed = 42;

    void validate() const {
        if (train_frac <= 0 || val_frac <= 0 || test_frac <= 0)
            throw DataError("split fractions must be positive");
        const double sum = train_frac + val_frac + test_frac;
        if (sum < 1.0 - 1e-9 || sum > 1.0 + 1e-9)
            throw DataError("split fractions must sum to 1");
    }
};

namespace detail {

inline bool is_valid_utf8(const std::string& s) {
    std::size_t i = 0;
    const auto n = s.size();
    while (i < n) {
        const unsigned char c = static_cast<unsigned char>(s[i]);
        std::size_t len;
        if (c < 0x80) len = 1;
        else if ((c & 0xE0) == 0xC0) len = 2;
        else if ((c & 0xF0) == 0xE0) len = 3;
        else if ((c & 0xF8) == 0xF0) len = 4;
        else return false;
        if (i + len > n) return false;
        for (std::size_t k = 1; k < len; ++k)
            if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
        // reject overlong encodings and out-of-range code points
        if (len == 2 && c < 0xC2) return false;
        if (len == 3 && c == 0xE0 && static_cast<unsigned char>(s[i + 1]) < 0xA0) return false;
        if (len == 4 && (c > 0xF4 || (c == 0xF0 && static_cast<unsigned char>(s[i + 1]) < 0x90)))
            return false;
        i += len;
    }
    return true;
}

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace detail

inline nlohmann::ordered_json comment_to_json(const ReviewComment& c) {
    nlohmann::ordered_json j;
    j["id"] = c.id;
    j["project"] = c.project;
    j["change_number"] = c.change_number;
    j["revision_id"] = c.revision_id;
    j["file_path"] = c.file_path;
    if (c.line) j["line"] = *c.line;
    else j["line"] = nullptr;
    j["message"] = c.message;
    j["url"] = c.url;
    j["timestamp"] = c.timestamp;
    return j;
}

inline ReviewComment comment_from_json(const nlohmann::json& j, std::size_t line_no) {
    ReviewComment c;
    try {
        c.id = j.at("id").get<std::string>();
        c.project = j.value("project", std::string{});
        c.change_number = j.value("change_number", 0L);
        c.revision_id = j.value("revision_id", std::string{});
        c.file_path = j.value("file_path", std::string{});
        if (j.contains("line") && !j.at("line").is_null()) {
            const long ln = j.at("line").get<long>();
            if (ln < 0) throw ParseError("negative line number", line_no);
            c.line = ln;
        }
        c.message = j.at("message").get<std::string>();
        c.url = j.value("url", std::string{});
        c.timestamp = j.value("timestamp", std::string{});
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad comment record: ") + e.what(), line_no);
    }
    if (!detail::is_valid_utf8(c.message))
        throw ParseError("message is not valid UTF-8", line_no);
    if (detail::trim(c.message).empty())
        throw ParseError("message empty after whitespace trim", line_no);
    return c;
}

// JSONL, one labeled comment per line. Field names are part of the on-disk
// contract: id, project, change_number, revision_id, file_path, line,
// message, url, timestamp, label.
inline Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset file: " + path);

    Dataset d;
    d.name = path;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
        }
        LabeledComment lc;
        lc.comment = comment_from_json(j, line_no);
        if (!j.contains("label"))
            throw ParseError("missing label", line_no);
        try {
            lc.label = label_from_string(j.at("label").get<std::string>());
        } catch (const DataError& e) {
            throw ParseError(e.what(), line_no);
        }
        if (!seen.insert(lc.comment.id).second)
            throw ParseError("duplicate id \"" + lc.comment.id + "\"", line_no);
        d.items.push_back(std::move(lc));
    }
    return d;
}

inline void save_dataset(const Dataset& d, std::ostream& out) {
    for (const auto& it : d.items) {
        auto j = comment_to_json(it.comment);
        j["label"] = to_string(it.label);
        out << j.dump() << '\n';
    }
}

inline void save_dataset(const Dataset& d, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write dataset file: " + path);
    save_dataset(d, out);
}

// Down-samples the majority class, uniformly without replacement, to the
// minority count. Survivor order is the input order. A dataset that is
// already balanced is returned as-is without consuming randomness.
inline Dataset balance_classes(const Dataset& d, std::uint64_t seed) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < d.items.size(); ++i)
        (d.items[i].label == Label::violation ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty())
        throw DataError("cannot balance: a label is absent from the dataset");

    if (pos.size() == neg.size()) return d;

    const bool pos_is_majority = pos.size() > neg.size();
    auto& majority = pos_is_majority ? pos : neg;
    const auto& minority = pos_is_majority ? neg : pos;

    Rng rng(seed);
    shuffle(majority, rng);
    majority.resize(minority.size());

    std::vector<bool> keep(d.items.size(), false);
    for (std::size_t i : minority) keep[i] = true;
    for (std::size_t i : majority) keep[i] = true;

    Dataset out;
    out.name = d.name;
    out.seed = seed;
    for (std::size_t i = 0; i < d.items.size(); ++i)
        if (keep[i]) out.items.push_back(d.items[i]);
    return out;
}

// Seeded shuffle, then floor(n*train_frac) / floor(n*val_frac) / remainder.
inline std::tuple<Dataset, Dataset, Dataset> split(const Dataset& d, const SplitSpec& spec) {
    spec.validate();
    const std::size_t n = d.items.size();
    if (n < 5) throw DataError("split requires at least 5 items");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(spec.seed);
    shuffle(order, rng);

    // epsilon guards against 0.6*5 == 2.9999999999999996
    const auto take = [n](double frac) {
        return static_cast<std::size_t>(static_cast<double>(n) * frac + 1e-9);
    };
    const std::size_t n_train = take(spec.train_frac);
    const std::size_t n_val = take(spec.val_frac);

    Dataset train, val, test;
    train.name = d.name + ":train";
    val.name = d.name + ":val";
    test.name = d.name + ":test";
    train.seed = val.seed = test.seed = spec.seed;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& item = d.items[order[i]];
        if (i < n_train) train.items.push_back(item);
        else if (i < n_train + n_val) val.items.push_back(item);
        else test.items.push_back(item);
    }
    return {std::move(train), std::move(val), std::move(test)};
}

// Seeded shuffle, then k contiguous test folds. The first (n mod k) folds
// get one extra item. Test folds are disjoint and cover the dataset.
inline std::vector<std::pair<Dataset, Dataset>> kfold(const Dataset& d, int k,
                                                      std::uint64_t seed) {
    const std::size_t n = d.items.size();
    if (k < 2 || static_cast<std::size_t>(k) > n)
        throw DataError("kfold: k must satisfy 2 <= k <= dataset size");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    shuffle(order, rng);

    const std::size_t base = n / static_cast<std::size_t>(k);
    const std::size_t extra = n % static_cast<std::size_t>(k);

    std::vector<std::pair<Dataset, Dataset>> folds;
    std::size_t begin = 0;
    for (int f = 0; f < k; ++f) {
        const std::size_t len = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
        Dataset train, test;
        train.name = d.name + ":fold" + std::to_string(f) + ":train";
        test.name = d.name + ":fold" + std::to_string(f) + ":test";
        train.seed = test.seed = seed;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& item = d.items[order[i]];
            if (i >= begin && i < begin + len) test.items.push_back(item);
            else train.items.push_back(item);
        }
        begin += len;
        folds.emplace_back(std::move(train), std::move(test));
    }
    return folds;
}

} // namespace erosym
