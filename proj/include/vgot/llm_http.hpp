#pragma once

#include <cstdlib>
#include <string>
#include <string_view>
#include <utility>

#include <httplib.h>
// <resolv.h> (pulled in by httplib) defines _res as a macro, which breaks
// Eigen's product kernels in any later include.
#ifdef _res
#undef _res
#endif
#include <nlohmann/json.hpp>

#include "vgot/error.hpp"
#include "vgot/script.hpp"

namespace vgot {

/// Chat-completion client over HTTP.
///
/// POST <endpoint> with {"messages": [{"role": "system", "content": instruction},
/// {"role": "user", "content": context}]}; the reply body must be
/// {"content": "<completion>"}. The bearer token comes from VGOT_LLM_KEY.
class HttpLlmClient : public LlmClient {
public:
    explicit HttpLlmClient(std::string endpoint, std::string api_key = env_key(), int timeout_seconds = 60)
        : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)), timeout_seconds_(timeout_seconds) {
        const auto scheme = endpoint_.find("://");
        if (scheme == std::string::npos) throw ConfigError("llm.endpoint must be an absolute http(s) URL: " + endpoint_);
        const auto slash = endpoint_.find('/', scheme + 3);
        base_ = endpoint_.substr(0, slash);
        path_ = slash == std::string::npos ? "/" : endpoint_.substr(slash);
    }

    static std::string env_key() {
        const char* key = std::getenv("VGOT_LLM_KEY");
        return key ? key : "";
    }

    std::string complete(std::string_view instruction, std::string_view context) override {
        nlohmann::json body = {{"messages",
                                {{{"role", "system"}, {"content", std::string(instruction)}},
                                 {{"role", "user"}, {"content", std::string(context)}}}}};

        httplib::Client client(base_);
        client.set_connection_timeout(timeout_seconds_, 0);
        client.set_read_timeout(timeout_seconds_, 0);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

        auto res = client.Post(path_, headers, body.dump(), "application/json");
        if (!res) throw TransportError("LLM request to " + endpoint_ + " failed: " + httplib::to_string(res.error()));
        if (res->status != 200) {
            throw TransportError("LLM endpoint " + endpoint_ + " returned HTTP " + std::to_string(res->status));
        }
        nlohmann::json reply;
        try {
            reply = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("LLM reply is not JSON: ") + e.what());
        }
        if (!reply.is_object() || !reply.contains("content") || !reply["content"].is_string()) {
            throw ParseError("LLM reply lacks a string \"content\" field");
        }
        return reply["content"].get<std::string>();
    }

private:
    std::string endpoint_;
    std::string api_key_;
    int timeout_seconds_;
    std::string base_;
    std::string path_;
};

} // namespace vgot
