#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "erosym/corpus.hpp"
#include "erosym/error.hpp"
#include "erosym/textprep.hpp"

namespace erosym {

struct GerritEndpoint {
    std::string base_url; // absolute http(s) URL, no trailing slash needed
    std::optional<std::pair<std::string, std::string>> credentials; // user, token
    int page_size = 100;
    int request_timeout_s = 30;

    void validate() const {
        if (base_url.rfind("http://", 0) != 0 && base_url.rfind("https://", 0) != 0)
            throw UsageError("gerrit base URL must be absolute http(s): " + base_url);
        if (page_size < 1) throw UsageError("gerrit page size must be >= 1");
    }
};

enum class ChangeStatus { merged, abandoned, open, any };

struct ChangeQuery {
    std::string project;
    std::string after;  // YYYY-MM-DD
    std::string before; // YYYY-MM-DD
    ChangeStatus status = ChangeStatus::merged;

    void validate() const {
        if (!after.empty() && !before.empty() && after > before)
            throw UsageError("change query: after must not exceed before");
    }
};

struct KeywordSet {
    std::vector<std::string> terms; // lowercase stems or substrings

    void validate() const {
        if (terms.empty()) throw DataError("keyword set must not be empty");
        for (const auto& t : terms) {
            if (t != ascii_lower(t)) throw DataError("keyword terms must be lowercase: " + t);
            if (std::count(terms.begin(), terms.end(), t) > 1)
                throw DataError("duplicate keyword term: " + t);
        }
    }
};

// Removes Gerrit's `)]}'` anti-XSSI guard and the newline after it;
// validates that the remainder is UTF-8 text.
inline std::string strip_xssi_prefix(const std::string& body) {
    std::string text = body;
    if (text.rfind(")]}'", 0) == 0) {
        text.erase(0, 4);
        if (!text.empty() && text.front() == '\n') text.erase(0, 1);
    }
    if (!detail::is_valid_utf8(text))
        throw DataError("gerrit response is not valid UTF-8");
    return text;
}

struct HttpResponse {
    int status = 0;
    std::string body;
};

// Anything that can answer a GET for a path+query against the endpoint.
class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse get(const std::string& path_and_query) = 0;
};

// Scripted transport for tests and fixture-backed ingest runs.
class ReplayTransport final : public Transport {
public:
    void add(const std::string& path_and_query, int status, std::string body) {
        responses_.push_back({path_and_query, status, std::move(body)});
    }

    HttpResponse get(const std::string& path_and_query) override {
        ++requests_;
        for (auto& r : responses_)
            if (r.path == path_and_query) {
                if (r.remaining_failures > 0) {
                    --r.remaining_failures;
                    return {r.failure_status, ""};
                }
                return {r.status, r.body};
            }
        return {404, "not recorded: " + path_and_query};
    }

    // Makes the next `n` hits on `path` fail with `status` before the
    // recorded response is served (retry testing).
    void fail_first(const std::string& path, int n, int status) {
        for (auto& r : responses_)
            if (r.path == path) {
                r.remaining_failures = n;
                r.failure_status = status;
            }
    }

    std::size_t request_count() const { return requests_; }

private:
    struct Entry {
        std::string path;
        int status;
        std::string body;
        int remaining_failures = 0;
        int failure_status = 503;
    };
    std::vector<Entry> responses_;
    std::size_t requests_ = 0;
};

struct ChangeRecord {
    long change_number = 0;
    std::string project;
    std::string current_revision;
};

namespace gerrit_detail {

inline std::string url_encode_query(const std::string& s) {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                          (c >= '0' && c <= '9') || c == ':' || c == '+' || c == '-' ||
                          c == '_' || c == '.' || c == '/';
        if (keep) out += static_cast<char>(c);
        else {
            out += '%';
            out += hex[c >> 4];
            out += hex[c & 0xF];
        }
    }
    return out;
}

inline std::string iso_timestamp(const std::string& gerrit_ts) {
    // "2014-10-09 18:22:36.000000000" -> "2014-10-09T18:22:36Z"
    if (gerrit_ts.size() < 19) return gerrit_ts;
    std::string out = gerrit_ts.substr(0, 19);
    if (out[10] == ' ') out[10] = 'T';
    return out + "Z";
}

inline const char* status_term(ChangeStatus s) {
    switch (s) {
        case ChangeStatus::merged: return "status:merged";
        case ChangeStatus::abandoned: return "status:abandoned";
        case ChangeStatus::open: return "status:open";
        default: return nullptr;
    }
}

} // namespace gerrit_detail

// Pull client over a Transport. Handles the rate limit (minimum spacing
// between requests) and exponential backoff with up to 3 retries on 429 and
// 5xx. 401/403 surface immediately as auth errors.
class GerritClient {
public:
    using SleepFn = std::function<void(int /*milliseconds*/)>;

    GerritClient(GerritEndpoint endpoint, Transport& transport, SleepFn sleep = default_sleep())
        : endpoint_(std::move(endpoint)), transport_(transport), sleep_(std::move(sleep)) {
        endpoint_.validate();
    }

    static SleepFn default_sleep() {
        return [](int ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); };
    }

    static constexpr int kMinRequestSpacingMs = 100;
    static constexpr int kMaxRetries = 3;
    static constexpr int kBackoffBaseMs = 250;

    nlohmann::json get_json(const std::string& path_and_query) {
        if (!first_request_) sleep_(kMinRequestSpacingMs);
        first_request_ = false;

        HttpResponse resp;
        int attempt = 0;
        for (;;) {
            resp = transport_.get(path_and_query);
            if (resp.status == 401 || resp.status == 403)
                throw AuthError("gerrit authentication failed (HTTP " +
                                    std::to_string(resp.status) + ") for " + path_and_query,
                                resp.status);
            const bool retryable = resp.status == 429 || resp.status >= 500;
            if (!retryable) break;
            if (attempt >= kMaxRetries)
                throw TransportError("gerrit request failed after " +
                                         std::to_string(kMaxRetries) + " retries (HTTP " +
                                         std::to_string(resp.status) + "): " + path_and_query,
                                     resp.status);
            sleep_(kBackoffBaseMs << attempt);
            ++attempt;
        }
        if (resp.status != 200)
            throw TransportError("gerrit request failed (HTTP " + std::to_string(resp.status) +
                                     "): " + path_and_query,
                                 resp.status);
        const std::string text = strip_xssi_prefix(resp.body);
        try {
            return nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("malformed gerrit JSON from " + path_and_query + ": " + e.what());
        }
    }

    // All pages of /changes/?q=..., following the _more_changes marker.
    std::vector<ChangeRecord> fetch_changes(const ChangeQuery& q) {
        q.validate();
        std::string query = "project:" + q.project;
        if (!q.after.empty()) query += "+after:" + q.after;
        if (!q.before.empty()) query += "+before:" + q.before;
        if (const char* st = gerrit_detail::status_term(q.status)) query += std::string("+") + st;

        std::vector<ChangeRecord> records;
        std::size_t offset = 0;
        for (;;) {
            std::string path = "/changes/?q=" + gerrit_detail::url_encode_query(query) +
                               "&n=" + std::to_string(endpoint_.page_size);
            if (offset > 0) path += "&S=" + std::to_string(offset);
            const nlohmann::json page = get_json(path);
            if (!page.is_array())
                throw DataError("gerrit change listing is not a JSON array");
            bool more = false;
            for (const auto& c : page) {
                ChangeRecord rec;
                rec.change_number = c.value("_number", 0L);
                rec.project = c.value("project", q.project);
                rec.current_revision = c.value("current_revision", std::string{});
                records.push_back(std::move(rec));
                if (c.value("_more_changes", false)) more = true;
            }
            if (page.empty() || !more) break;
            offset += page.size();
        }
        return records;
    }

    // Inline file comments plus change-level messages, flattened.
    std::vector<ReviewComment> fetch_comments(const ChangeRecord& change) {
        std::vector<ReviewComment> out;
        const std::string base_id = std::to_string(change.change_number);

        const nlohmann::json files =
            get_json("/changes/" + base_id + "/comments");
        if (!files.is_object())
            throw DataError("gerrit comments response is not a JSON object");
        for (const auto& [file_path, list] : files.items()) {
            for (const auto& c : list) {
                ReviewComment rc;
                rc.id = base_id + ":" + c.value("id", std::string{});
                rc.project = change.project;
                rc.change_number = change.change_number;
                rc.revision_id = c.contains("commit_id")
                                     ? c.value("commit_id", std::string{})
                                     : std::to_string(c.value("patch_set", 0));
                rc.file_path = file_path;
                if (c.contains("line") && !c.at("line").is_null())
                    rc.line = c.at("line").get<long>();
                rc.message = c.value("message", std::string{});
                rc.url = comment_url(change, file_path, rc.line);
                rc.timestamp = gerrit_detail::iso_timestamp(c.value("updated", std::string{}));
                if (!detail::trim(rc.message).empty()) out.push_back(std::move(rc));
            }
        }

        const nlohmann::json messages = get_json("/changes/" + base_id + "/messages");
        if (!messages.is_array())
            throw DataError("gerrit messages response is not a JSON array");
        for (const auto& m : messages) {
            ReviewComment rc;
            rc.id = base_id + ":msg:" + m.value("id", std::string{});
            rc.project = change.project;
            rc.change_number = change.change_number;
            rc.revision_id = std::to_string(m.value("_revision_number", 0));
            rc.message = m.value("message", std::string{});
            rc.url = comment_url(change, "", std::nullopt);
            rc.timestamp = gerrit_detail::iso_timestamp(m.value("date", std::string{}));
            if (!detail::trim(rc.message).empty()) out.push_back(std::move(rc));
        }
        return out;
    }

    std::vector<ReviewComment> fetch_comments(long change_number,
                                              const std::string& project = {}) {
        ChangeRecord rec;
        rec.change_number = change_number;
        rec.project = project;
        return fetch_comments(rec);
    }

private:
    std::string comment_url(const ChangeRecord& change, const std::string& file,
                            std::optional<long> line) const {
        std::string url = endpoint_.base_url;
        if (!url.empty() && url.back() == '/') url.pop_back();
        url += "/c/" + change.project + "/+/" + std::to_string(change.change_number);
        if (!file.empty()) {
            url += "/" + file;
            if (line) url += "#" + std::to_string(*line);
        }
        return url;
    }

    GerritEndpoint endpoint_;
    Transport& transport_;
    SleepFn sleep_;
    bool first_request_ = true;
};

// Case-insensitive substring filter on the raw message text; order
// preserved, idempotent.
inline std::vector<ReviewComment> filter_by_keywords(const std::vector<ReviewComment>& comments,
                                                     const KeywordSet& kw) {
    kw.validate();
    std::vector<ReviewComment> out;
    for (const auto& c : comments) {
        const std::string lower = ascii_lower(c.message);
        for (const auto& term : kw.terms)
            if (lower.find(term) != std::string::npos) {
                out.push_back(c);
                break;
            }
    }
    return out;
}

inline KeywordSet load_keywords(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open keywords file: " + path);
    KeywordSet kw;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const std::string t = detail::trim(line);
        if (!t.empty()) kw.terms.push_back(ascii_lower(t));
    }
    kw.validate();
    return kw;
}

} // namespace erosym
