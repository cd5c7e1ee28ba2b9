#pragma once

#include <memory>
#include <string>

#include <httplib.h>

#include "erosym/error.hpp"
#include "erosym/gerrit.hpp"

namespace erosym {

// Live transport over cpp-httplib with optional basic auth.
class HttplibTransport final : public Transport {
public:
    explicit HttplibTransport(const GerritEndpoint& endpoint)
        : client_(endpoint.base_url.c_str()) {
        client_.set_connection_timeout(endpoint.request_timeout_s, 0);
        client_.set_read_timeout(endpoint.request_timeout_s, 0);
        client_.set_follow_location(true);
        if (endpoint.credentials)
            client_.set_basic_auth(endpoint.credentials->first.c_str(),
                                   endpoint.credentials->second.c_str());
    }

    HttpResponse get(const std::string& path_and_query) override {
        auto res = client_.Get(path_and_query.c_str());
        if (!res)
            throw TransportError("network failure: " + httplib::to_string(res.error()) +
                                 " for " + path_and_query);
        return {res->status, res->body};
    }

private:
    httplib::Client client_;
};

} // namespace erosym
