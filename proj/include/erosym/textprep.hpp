#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "erosym/error.hpp"
#include "erosym/stemmer.hpp"

namespace erosym {

enum class StemmerKind { snowball_english };

struct PreprocessConfig {
    std::unordered_set<std::string> stopword_list;
    bool do_noise_removal = true;
    bool do_stopword_removal = true;
    bool do_lowercase = true;
    bool do_stemming = true;
    StemmerKind stemmer = StemmerKind::snowball_english;
};

namespace textprep_detail {

// Decodes the code point starting at byte i, advancing i. Invalid bytes are
// consumed one at a time and returned as-is (latin-1 fallback).
inline char32_t next_codepoint(const std::string& s, std::size_t& i) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    char32_t cp = c;
    if ((c & 0xE0) == 0xC0) { len = 2; cp = c & 0x1F; }
    else if ((c & 0xF0) == 0xE0) { len = 3; cp = c & 0x0F; }
    else if ((c & 0xF8) == 0xF0) { len = 4; cp = c & 0x07; }
    if (i + len > s.size()) { ++i; return c; }
    for (std::size_t k = 1; k < len; ++k) {
        const unsigned char cc = static_cast<unsigned char>(s[i + k]);
        if ((cc & 0xC0) != 0x80) { ++i; return c; }
        cp = (cp << 6) | (cc & 0x3F);
    }
    i += len;
    return cp;
}

inline bool is_space_cp(char32_t cp) {
    switch (cp) {
        case U' ': case U'\t': case U'\n': case U'\r': case 0x0B: case 0x0C:
        case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

// Punctuation for edge peeling: ASCII punctuation/symbols plus the common
// typographic marks seen in review comments. Everything else (letters,
// digits, other non-ASCII) is word material.
inline bool is_punct_cp(char32_t cp) {
    if (cp < 0x80) {
        const char c = static_cast<char>(cp);
        const bool alnum = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                           (c >= '0' && c <= '9');
        return !alnum;
    }
    return (cp >= 0x2018 && cp <= 0x201F) || cp == 0x2026 || cp == 0x00AB ||
           cp == 0x00BB || cp == 0x2013 || cp == 0x2014;
}

inline bool is_alpha_cp(char32_t cp) {
    if (cp < 0x80)
        return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
    return !is_punct_cp(cp) && !is_space_cp(cp) && !(cp >= '0' && cp <= '9');
}

struct Cp {
    char32_t cp;
    std::size_t begin, end; // byte range in the source string
};

inline std::vector<Cp> decode(const std::string& s) {
    std::vector<Cp> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const std::size_t b = i;
        const char32_t cp = next_codepoint(s, i);
        out.push_back({cp, b, i});
    }
    return out;
}

} // namespace textprep_detail

// Step 1: split on whitespace, then peel leading/trailing punctuation runs
// off each chunk into their own tokens. Interior punctuation (api/cell)
// stays put.
inline std::vector<std::string> tokenize(const std::string& text) {
    using namespace textprep_detail;
    std::vector<std::string> tokens;
    const auto cps = decode(text);

    std::size_t i = 0;
    const std::size_t n = cps.size();
    while (i < n) {
        while (i < n && is_space_cp(cps[i].cp)) ++i;
        if (i >= n) break;
        std::size_t j = i;
        while (j < n && !is_space_cp(cps[j].cp)) ++j;

        std::size_t lead = i;
        while (lead < j && is_punct_cp(cps[lead].cp)) ++lead;
        if (lead == j) {
            // pure punctuation chunk: emit as a single token
            tokens.push_back(text.substr(cps[i].begin, cps[j - 1].end - cps[i].begin));
        } else {
            std::size_t trail = j;
            while (trail > lead && is_punct_cp(cps[trail - 1].cp)) --trail;
            if (lead > i)
                tokens.push_back(text.substr(cps[i].begin, cps[lead - 1].end - cps[i].begin));
            tokens.push_back(text.substr(cps[lead].begin, cps[trail - 1].end - cps[lead].begin));
            if (trail < j)
                tokens.push_back(text.substr(cps[trail].begin, cps[j - 1].end - cps[trail].begin));
        }
        i = j;
    }
    return tokens;
}

// Step 2: drop tokens with no alphabetic character.
inline std::vector<std::string> remove_noise(const std::vector<std::string>& tokens) {
    using namespace textprep_detail;
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        bool has_alpha = false;
        std::size_t i = 0;
        while (i < t.size())
            if (is_alpha_cp(next_codepoint(t, i))) { has_alpha = true; break; }
        if (has_alpha) out.push_back(t);
    }
    return out;
}

inline std::string ascii_lower(const std::string& s) {
    std::string out = s;
    for (auto& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

// Step 3: stopword matching is case-insensitive because it runs before the
// lowercasing step.
inline std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens,
                                                 const PreprocessConfig& config) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens)
        if (!config.stopword_list.contains(ascii_lower(t))) out.push_back(t);
    return out;
}

// Step 4
inline std::vector<std::string> lowercase(const std::vector<std::string>& tokens) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(ascii_lower(t));
    return out;
}

// Step 5
inline std::string stem(const std::string& token) { return porter2::stem(token); }

inline std::vector<std::string> stem_all(const std::vector<std::string>& tokens) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(porter2::stem(t));
    return out;
}

// The full pipeline, in order: tokenize, noise removal, stopword
// removal, lowercasing, stemming.
inline std::vector<std::string> preprocess(const std::string& text,
                                           const PreprocessConfig& config) {
    auto tokens = tokenize(text);
    if (config.do_noise_removal) tokens = remove_noise(tokens);
    if (config.do_stopword_removal) tokens = remove_stopwords(tokens, config);
    if (config.do_lowercase) tokens = lowercase(tokens);
    if (config.do_stemming) tokens = stem_all(tokens);
    return tokens;
}

// Stopword file: one lowercase word per line, '#' starts a comment.
inline std::unordered_set<std::string> load_stopwords(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open stopword file: " + path);
    std::unordered_set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::size_t b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        std::size_t e = line.find_last_not_of(" \t\r");
        words.insert(ascii_lower(line.substr(b, e - b + 1)));
    }
    return words;
}

} // namespace erosym
