#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>

namespace erosym {

// Snowball English stemmer (Porter2), implemented from the published
// algorithm description. Expects lowercase input; words of two letters or
// less are returned unchanged. Marked consonant-y is tracked as 'Y'
// internally and restored before returning.
namespace porter2 {

namespace detail {

inline bool is_vowel(char c) {
    return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
}

inline bool ends_with(const std::string& w, std::string_view suf) {
    return w.size() >= suf.size() &&
           std::string_view(w).substr(w.size() - suf.size()) == suf;
}

inline bool contains_vowel(const std::string& w, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end && i < w.size(); ++i)
        if (is_vowel(w[i])) return true;
    return false;
}

inline bool ends_in_double(const std::string& w) {
    if (w.size() < 2) return false;
    const char a = w[w.size() - 1];
    if (a != w[w.size() - 2]) return false;
    return a == 'b' || a == 'd' || a == 'f' || a == 'g' || a == 'm' ||
           a == 'n' || a == 'p' || a == 'r' || a == 't';
}

inline bool valid_li_ending(char c) {
    return c == 'c' || c == 'd' || c == 'e' || c == 'g' || c == 'h' ||
           c == 'k' || c == 'm' || c == 'n' || c == 'r' || c == 't';
}

// A short syllable: vowel + non-vowel (not w/x/Y) preceded by a non-vowel,
// or vowel + non-vowel at the start of the word.
inline bool ends_in_short_syllable(const std::string& w) {
    const std::size_t n = w.size();
    if (n >= 3 && !is_vowel(w[n - 3]) && is_vowel(w[n - 2]) && !is_vowel(w[n - 1]) &&
        w[n - 1] != 'w' && w[n - 1] != 'x' && w[n - 1] != 'Y')
        return true;
    return n == 2 && is_vowel(w[0]) && !is_vowel(w[1]);
}

// First position after a non-vowel that follows a vowel, scanning from
// `from`; word end if there is none.
inline std::size_t region_after(const std::string& w, std::size_t from) {
    for (std::size_t i = from; i > 0 && i < w.size(); ++i)
        if (!is_vowel(w[i]) && is_vowel(w[i - 1])) return i + 1;
    return w.size();
}

// Remove `suffix` and append `repl` if the word ends with it and the suffix
// starts at or after `start`.
inline bool replace_suffix(std::string& w, std::string_view suffix,
                           std::string_view repl, std::size_t start) {
    if (w.size() < suffix.size()) return false;
    const std::size_t pos = w.size() - suffix.size();
    if (pos < start) return false;
    if (std::string_view(w).substr(pos) != suffix) return false;
    w.resize(pos);
    w.append(repl);
    return true;
}

struct Rule {
    std::string_view suffix;
    std::string_view repl;
    // 0 none, 1 preceded-by-l, 2 valid-li-ending, 3 in-R2, 4 preceded-by-s-or-t
    int extra = 0;
};

// Longest-match semantics: pick the longest listed suffix first; if its
// region or extra condition fails, the whole step is a no-op.
template <std::size_t N>
bool apply_longest(std::string& w, const std::array<Rule, N>& rules,
                   std::size_t region, std::size_t r2 = 0) {
    const Rule* best = nullptr;
    for (const auto& r : rules)
        if (ends_with(w, r.suffix) && (!best || r.suffix.size() > best->suffix.size()))
            best = &r;
    if (!best) return false;
    const std::size_t pos = w.size() - best->suffix.size();
    if (pos < region) return true; // matched but out of region: step ends
    switch (best->extra) {
        case 1:
            if (pos == 0 || w[pos - 1] != 'l') return true;
            break;
        case 2:
            if (pos == 0 || !valid_li_ending(w[pos - 1])) return true;
            break;
        case 3:
            if (pos < r2) return true;
            break;
        case 4:
            if (pos == 0 || (w[pos - 1] != 's' && w[pos - 1] != 't')) return true;
            break;
        default:
            break;
    }
    w.resize(pos);
    w.append(best->repl);
    return true;
}

inline bool exception1(std::string& w) {
    struct Pair { std::string_view from, to; };
    static constexpr std::array<Pair, 18> table = {{
        {"skis", "ski"},     {"skies", "sky"},   {"dying", "die"},
        {"lying", "lie"},    {"tying", "tie"},   {"idly", "idl"},
        {"gently", "gentl"}, {"ugly", "ugli"},   {"early", "earli"},
        {"only", "onli"},    {"singly", "singl"},
        {"sky", "sky"},      {"news", "news"},   {"howe", "howe"},
        {"atlas", "atlas"},  {"cosmos", "cosmos"}, {"bias", "bias"},
        {"andes", "andes"},
    }};
    for (const auto& p : table)
        if (w == p.from) {
            w = p.to;
            return true;
        }
    return false;
}

inline bool exception2(const std::string& w) {
    return w == "inning" || w == "outing" || w == "canning" || w == "herring" ||
           w == "earring" || w == "proceed" || w == "exceed" || w == "succeed";
}

} // namespace detail

inline std::string stem(std::string word) {
    using namespace detail;

    if (exception1(word)) return word;
    if (word.size() <= 2) return word;

    // prelude: drop a leading apostrophe, mark consonant y as Y. A still-
    // lowercase preceding y counts as a vowel here, matching the sequential
    // left-to-right marking of the published algorithm.
    if (word[0] == '\'') word.erase(0, 1);
    if (!word.empty() && word[0] == 'y') word[0] = 'Y';
    for (std::size_t i = 1; i < word.size(); ++i)
        if (word[i] == 'y' && is_vowel(word[i - 1])) word[i] = 'Y';

    // mark_regions, with the gener-/commun-/arsen- exception
    std::size_t r1;
    if (word.rfind("gener", 0) == 0) r1 = 5;
    else if (word.rfind("commun", 0) == 0) r1 = 6;
    else if (word.rfind("arsen", 0) == 0) r1 = 5;
    else r1 = region_after(word, 1);
    const std::size_t r2 = region_after(word, r1 + 1);

    // Step 0
    replace_suffix(word, "'s'", "", 0) || replace_suffix(word, "'s", "", 0) ||
        replace_suffix(word, "'", "", 0);

    // Step 1a
    if (!replace_suffix(word, "sses", "ss", 0)) {
        if (ends_with(word, "ied") || ends_with(word, "ies")) {
            if (word.size() > 4)
                word.resize(word.size() - 2);
            else
                word.pop_back();
        } else if (ends_with(word, "s") && !ends_with(word, "us") &&
                   !ends_with(word, "ss")) {
            if (word.size() >= 3 && contains_vowel(word, 0, word.size() - 2))
                word.pop_back();
        }
    }

    if (exception2(word)) {
        for (auto& c : word)
            if (c == 'Y') c = 'y';
        return word;
    }

    // Step 1b
    {
        const bool eed = ends_with(word, "eedly") || ends_with(word, "eed");
        if (eed) {
            replace_suffix(word, "eedly", "ee", r1) ||
                replace_suffix(word, "eed", "ee", r1);
        } else {
            static constexpr std::array<std::string_view, 4> sufs = {
                "ingly", "edly", "ing", "ed"};
            for (auto suf : sufs) {
                if (!ends_with(word, suf)) continue;
                if (contains_vowel(word, 0, word.size() - suf.size())) {
                    word.resize(word.size() - suf.size());
                    if (ends_with(word, "at") || ends_with(word, "bl") ||
                        ends_with(word, "iz"))
                        word.push_back('e');
                    else if (ends_in_double(word))
                        word.pop_back();
                    else if (r1 >= word.size() && ends_in_short_syllable(word))
                        word.push_back('e');
                }
                break; // longest match decides, success or not
            }
        }
    }

    // Step 1c
    if (word.size() >= 3) {
        const char last = word[word.size() - 1];
        if ((last == 'y' || last == 'Y') && !is_vowel(word[word.size() - 2]))
            word[word.size() - 1] = 'i';
    }

    // Step 2 (in R1)
    {
        static constexpr std::array<Rule, 24> rules = {{
            {"ization", "ize"}, {"fulness", "ful"}, {"ousness", "ous"},
            {"iveness", "ive"}, {"ational", "ate"}, {"tional", "tion"},
            {"lessli", "less"}, {"biliti", "ble"},  {"entli", "ent"},
            {"ation", "ate"},   {"alism", "al"},    {"aliti", "al"},
            {"ousli", "ous"},   {"iviti", "ive"},   {"fulli", "ful"},
            {"enci", "ence"},   {"anci", "ance"},   {"abli", "able"},
            {"izer", "ize"},    {"ator", "ate"},    {"alli", "al"},
            {"bli", "ble"},     {"ogi", "og", 1},   {"li", "", 2},
        }};
        apply_longest(word, rules, r1);
    }

    // Step 3 (in R1)
    {
        static constexpr std::array<Rule, 9> rules = {{
            {"ational", "ate"}, {"tional", "tion"}, {"alize", "al"},
            {"icate", "ic"},    {"iciti", "ic"},    {"ative", "", 3},
            {"ical", "ic"},     {"ness", ""},       {"ful", ""},
        }};
        apply_longest(word, rules, r1, r2);
    }

    // Step 4 (in R2)
    {
        static constexpr std::array<Rule, 18> rules = {{
            {"ement", ""}, {"ance", ""}, {"ence", ""}, {"able", ""},
            {"ible", ""},  {"ment", ""}, {"ant", ""},  {"ent", ""},
            {"ism", ""},   {"ate", ""},  {"iti", ""},  {"ous", ""},
            {"ive", ""},   {"ize", ""},  {"ion", "", 4}, {"al", ""},
            {"er", ""},    {"ic", ""},
        }};
        apply_longest(word, rules, r2);
    }

    // Step 5
    if (!word.empty() && word.back() == 'e') {
        const std::size_t pos = word.size() - 1;
        if (pos >= r2)
            word.pop_back();
        else if (pos >= r1) {
            word.pop_back();
            if (ends_in_short_syllable(word)) word.push_back('e');
        }
    } else if (!word.empty() && word.back() == 'l') {
        const std::size_t pos = word.size() - 1;
        if (pos >= r2 && word.size() >= 2 && word[word.size() - 2] == 'l')
            word.pop_back();
    }

    for (auto& c : word)
        if (c == 'Y') c = 'y';
    return word;
}

} // namespace porter2
} // namespace erosym
