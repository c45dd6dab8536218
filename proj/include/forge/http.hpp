// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include <httplib.h>

#include "forge/util.hpp"

namespace forge::net {

struct Url {
    std::string scheme;
    std::string host;
    int port = 0;
    std::string target; // path + query

    std::string origin() const { return scheme + "://" + host + (port ? util::format(":%d", port) : ""); }
};

inline Url parse_url(const std::string& url) {
    Url u;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw Error("unsupported url (missing scheme): " + url);
    u.scheme = util::to_lower(url.substr(0, scheme_end));
    size_t host_start = scheme_end + 3;
    size_t path_start = url.find('/', host_start);
    std::string hostport =
        url.substr(host_start, path_start == std::string::npos ? std::string::npos : path_start - host_start);
    u.target = path_start == std::string::npos ? "/" : url.substr(path_start);
    auto colon = hostport.rfind(':');
    if (colon != std::string::npos && colon + 1 < hostport.size() &&
        std::isdigit(static_cast<unsigned char>(hostport[colon + 1]))) {
        u.host = hostport.substr(0, colon);
        u.port = std::stoi(hostport.substr(colon + 1));
    } else {
        u.host = hostport;
    }
    return u;
}

struct FetchResult {
    bool ok = false;
    int status = 0;
    std::string body;
    std::string content_type;
    std::string error; // transport-level failure text
};

/// Plain GET through cpp-httplib. Live mode only; replay never reaches here.
inline FetchResult http_get(const std::string& url, int timeout_s = 30) {
    FetchResult r;
    Url u;
    try {
        u = parse_url(url);
    } catch (const Error& e) {
        r.error = e.what();
        return r;
    }
    auto run = [&](auto& client) {
        client.set_connection_timeout(timeout_s, 0);
        client.set_read_timeout(timeout_s, 0);
        client.set_follow_location(true);
        auto res = client.Get(u.target);
        if (!res) {
            r.error = "fetch failed: " + httplib::to_string(res.error());
            return;
        }
        r.ok = res->status >= 200 && res->status < 300;
        r.status = res->status;
        r.body = res->body;
        r.content_type = res->get_header_value("Content-Type");
        if (!r.ok && r.error.empty())
            r.error = util::format("http status %d", res->status);
    };
    if (u.scheme == "http") {
        httplib::Client client(u.host, u.port ? u.port : 80);
        run(client);
#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
    } else if (u.scheme == "https") {
        httplib::SSLClient client(u.host, u.port ? u.port : 443);
        client.enable_server_certificate_verification(false);
        run(client);
#endif
    } else {
        r.error = "unsupported url scheme: " + u.scheme;
    }
    return r;
}

} // namespace forge::net
