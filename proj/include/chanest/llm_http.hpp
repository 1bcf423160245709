#pragma once

#include <string>

#include <httplib.h>
#include <json.hpp>

#include "chanest/gate.hpp"

namespace chanest {

// Completion client over HTTP: POST {prompt, max_tokens, temperature: 0}
// to the configured endpoint, expect {text} back.
class HttpCompletionClient : public CompletionClient {
public:
    // endpoint: "http://host:port/path"
    explicit HttpCompletionClient(std::string endpoint) {
        const auto scheme = endpoint.find("://");
        std::string rest = scheme == std::string::npos ? endpoint : endpoint.substr(scheme + 3);
        const auto slash = rest.find('/');
        host_ = scheme == std::string::npos ? rest.substr(0, slash)
                                            : endpoint.substr(0, scheme + 3) + rest.substr(0, slash);
        path_ = slash == std::string::npos ? "/" : rest.substr(slash);
    }

    CompletionResult complete(const std::string& prompt, int max_tokens,
                              int timeout_ms) override {
        httplib::Client cli(host_);
        cli.set_connection_timeout(0, timeout_ms * 1000);
        cli.set_read_timeout(0, timeout_ms * 1000);
        nlohmann::json req{{"prompt", prompt}, {"max_tokens", max_tokens}, {"temperature", 0}};
        auto res = cli.Post(path_, req.dump(), "application/json");
        if (!res) return {false, "", "timeout or transport error"};
        if (res->status != 200) return {false, "", "http status " + std::to_string(res->status)};
        try {
            auto j = nlohmann::json::parse(res->body);
            return {true, j.at("text").get<std::string>(), ""};
        } catch (const std::exception& e) {
            return {false, "", std::string("bad response body: ") + e.what()};
        }
    }

private:
    std::string host_, path_;
};

}  // namespace chanest
