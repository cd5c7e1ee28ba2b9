#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "erosym/error.hpp"

namespace erosym {

enum class EmbeddingKind { word2vec_so, fasttext_cc, glove_twitter, custom };

inline const char* to_string(EmbeddingKind k) {
    switch (k) {
        case EmbeddingKind::word2vec_so: return "word2vec_so";
        case EmbeddingKind::fasttext_cc: return "fasttext_cc";
        case EmbeddingKind::glove_twitter: return "glove_twitter";
        default: return "custom";
    }
}

inline EmbeddingKind embedding_kind_from_string(const std::string& s) {
    if (s == "word2vec_so") return EmbeddingKind::word2vec_so;
    if (s == "fasttext_cc") return EmbeddingKind::fasttext_cc;
    if (s == "glove_twitter") return EmbeddingKind::glove_twitter;
    return EmbeddingKind::custom;
}

// Immutable token -> vector mapping of fixed dimension. Insertion order is
// kept so that matrix-level operations (PCA) iterate deterministically.
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    EmbeddingTable(EmbeddingKind kind, std::string label, std::size_t dim)
        : kind_(kind), label_(std::move(label)), dim_(dim) {}

    // First occurrence wins; returns false on duplicate.
    bool add(const std::string& token, const std::vector<double>& values) {
        if (values.size() != dim_)
            throw DataError("vector length does not match table dimension");
        if (index_.contains(token)) return false;
        index_.emplace(token, tokens_.size());
        tokens_.push_back(token);
        data_.insert(data_.end(), values.begin(), values.end());
        return true;
    }

    const double* lookup(const std::string& token) const {
        const auto it = index_.find(token);
        if (it == index_.end()) return nullptr;
        return data_.data() + it->second * dim_;
    }

    const double* row(std::size_t i) const { return data_.data() + i * dim_; }

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    EmbeddingKind kind() const { return kind_; }
    const std::string& label() const { return label_; }
    void rename(std::string label) { label_ = std::move(label); }

    // Identifier used to key feature inputs and model bundles.
    std::string id() const {
        return label_.empty() ? std::string(to_string(kind_)) : label_;
    }

private:
    EmbeddingKind kind_ = EmbeddingKind::custom;
    std::string label_;
    std::size_t dim_ = 0;
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<double> data_; // row-major, size() * dim_
};

namespace embedding_detail {

inline bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t b = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > b) fields.push_back(line.substr(b, i - b));
    }
    return fields;
}

inline bool is_count_header(const std::vector<std::string>& fields) {
    if (fields.size() != 2) return false;
    for (const auto& f : fields)
        for (char c : f)
            if (c < '0' || c > '9') return false;
    return true;
}

} // namespace embedding_detail

// Standard text vector format: optional "count dim" header, then one
// "token v1 ... vd" line per word. Duplicates keep the first occurrence and
// emit a warning.
inline EmbeddingTable load_text_vectors(const std::string& path,
                                        std::optional<std::size_t> expected_dim = std::nullopt,
                                        std::vector<std::string>* warnings = nullptr,
                                        EmbeddingKind kind = EmbeddingKind::custom,
                                        std::string label = {}) {
    using namespace embedding_detail;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open vector file: " + path);

    std::string line;
    std::size_t line_no = 0;
    std::size_t dim = 0;
    std::optional<std::size_t> declared_count;

    // peek the first non-empty line to detect the header
    std::vector<std::vector<std::string>> pending;
    while (std::getline(in, line)) {
        ++line_no;
        auto fields = split_fields(line);
        if (fields.empty()) continue;
        if (is_count_header(fields)) {
            declared_count = std::stoull(fields[0]);
            dim = std::stoull(fields[1]);
        } else {
            if (fields.size() < 2)
                throw ParseError("vector row needs a token and at least one component", line_no);
            dim = fields.size() - 1;
            pending.push_back(std::move(fields));
        }
        break;
    }
    if (dim == 0) throw DataError("empty or headerless-empty vector file: " + path);
    if (expected_dim && dim != *expected_dim)
        throw ParseError("dimension " + std::to_string(dim) + " does not match expected " +
                             std::to_string(*expected_dim),
                         line_no);

    if (label.empty()) label = path;
    EmbeddingTable table(kind, std::move(label), dim);

    const auto consume = [&](const std::vector<std::string>& fields, std::size_t at_line) {
        if (fields.size() != dim + 1)
            throw ParseError("expected " + std::to_string(dim) + " components, got " +
                                 std::to_string(fields.size() - 1),
                             at_line);
        std::vector<double> v(dim);
        for (std::size_t i = 0; i < dim; ++i)
            if (!parse_double(fields[i + 1], v[i]))
                throw ParseError("non-numeric component \"" + fields[i + 1] + "\"", at_line);
        if (!table.add(fields[0], v) && warnings)
            warnings->push_back("duplicate token \"" + fields[0] + "\" at line " +
                                std::to_string(at_line) + "; keeping first occurrence");
    };

    for (const auto& fields : pending) consume(fields, line_no);
    while (std::getline(in, line)) {
        ++line_no;
        auto fields = split_fields(line);
        if (fields.empty()) continue;
        consume(fields, line_no);
    }
    if (declared_count && table.size() != *declared_count && warnings)
        warnings->push_back("header declares " + std::to_string(*declared_count) +
                            " vectors, file has " + std::to_string(table.size()));
    return table;
}

inline void save_text_vectors(const EmbeddingTable& table, const std::string& path,
                              bool with_header = true) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write vector file: " + path);
    char buf[64];
    if (with_header) out << table.size() << ' ' << table.dim() << '\n';
    for (std::size_t i = 0; i < table.size(); ++i) {
        out << table.tokens()[i];
        const double* v = table.row(i);
        for (std::size_t d = 0; d < table.dim(); ++d) {
            std::snprintf(buf, sizeof buf, "%.17g", v[d]);
            out << ' ' << buf;
        }
        out << '\n';
    }
}

// Mean of in-vocabulary token vectors. hit_count == 0 yields the zero
// vector.
struct DocVector {
    std::vector<double> values;
    std::size_t hit_count = 0;
};

inline DocVector doc_vector(const std::vector<std::string>& tokens,
                            const EmbeddingTable& table) {
    DocVector dv;
    dv.values.assign(table.dim(), 0.0);
    for (const auto& t : tokens) {
        if (const double* v = table.lookup(t)) {
            for (std::size_t d = 0; d < table.dim(); ++d) dv.values[d] += v[d];
            ++dv.hit_count;
        }
    }
    if (dv.hit_count > 0)
        for (auto& x : dv.values) x /= static_cast<double>(dv.hit_count);
    return dv;
}

// Zero-padded token-by-dimension matrix for the convolutional classifier.
// Rows at or past true_length are exactly zero.
struct SequenceMatrix {
    std::vector<double> data; // row-major, max_len x dim
    std::size_t max_len = 0;
    std::size_t dim = 0;
    std::size_t true_length = 0;

    const double* row(std::size_t i) const { return data.data() + i * dim; }
};

inline SequenceMatrix sequence_matrix(const std::vector<std::string>& tokens,
                                      const EmbeddingTable& table,
                                      std::size_t max_len = 2000) {
    SequenceMatrix m;
    m.max_len = max_len;
    m.dim = table.dim();
    m.true_length = tokens.size() < max_len ? tokens.size() : max_len;
    m.data.assign(max_len * m.dim, 0.0);
    for (std::size_t i = 0; i < m.true_length; ++i)
        if (const double* v = table.lookup(tokens[i]))
            for (std::size_t d = 0; d < m.dim; ++d) m.data[i * m.dim + d] = v[d];
    return m;
}

} // namespace erosym
