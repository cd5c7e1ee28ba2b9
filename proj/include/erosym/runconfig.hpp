#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "erosym/error.hpp"
#include "erosym/textprep.hpp"

namespace erosym {

// Flat key=value run configuration. File values are defaults; command-line
// flags override them. Unknown keys are rejected so typos fail loudly.
class RunConfig {
public:
    static const std::set<std::string>& known_keys() {
        static const std::set<std::string> keys = {
            "data",          "stopwords",      "out_dir",        "seed",
            "family",        "embedding_file", "embedding_id",   "embedding_dim",
            "reduce_dim",    "embedding_mode", "mode",           "k",
            "table",
            "max_len",       "emb_dim",        "filter_sizes",   "filters_per_size",
            "dropout",       "learning_rate",  "batch_size",     "max_epochs",
            "patience",      "keywords_file",  "base_url",       "project",
            "after",         "before",         "status",         "page_size",
            "manifest",      "balance",        "train_frac",     "val_frac",
            "test_frac",
        };
        return keys;
    }

    void set(const std::string& key, const std::string& value) {
        if (!known_keys().contains(key))
            throw UsageError("unknown configuration key: " + key);
        values_[key] = value;
    }

    bool has(const std::string& key) const { return values_.contains(key); }

    std::string get(const std::string& key, const std::string& fallback = {}) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    const std::map<std::string, std::string>& values() const { return values_; }

    static RunConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open config file: " + path);
        RunConfig cfg;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.resize(hash);
            const std::string t = detail::trim(line);
            if (t.empty()) continue;
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ParseError("config line is not key=value", line_no);
            const std::string key = detail::trim(t.substr(0, eq));
            const std::string value = detail::trim(t.substr(eq + 1));
            try {
                cfg.set(key, value);
            } catch (const UsageError& e) {
                throw ParseError(e.what(), line_no);
            }
        }
        return cfg;
    }

    // Canonical serialization: sorted key=value lines. The run id is the
    // FNV-1a hash of this text, so identical configurations share a run id.
    std::string serialize() const {
        std::string out;
        for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
        return out;
    }

    std::string run_id() const {
        const std::string text = serialize();
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : text) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }

private:
    std::map<std::string, std::string> values_;
};

} // namespace erosym
