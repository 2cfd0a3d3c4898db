#include "rear/http_providers.hpp"

#include "rear/errors.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <thread>

namespace rear {

using nlohmann::json;

namespace {

struct SplitUrl {
    std::string base; // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorCode::ConfigError, "provider url lacks a scheme: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

/// One POST with bounded retries and exponential backoff. Returns the parsed
/// response body; throws Error(ProviderUnavailable) once attempts run out.
json post_json(const HttpProviderConfig& config, const json& body) {
    const SplitUrl url = split_url(config.url);
    const std::string payload = body.dump();
    std::string last_failure = "no attempts made";

    for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(config.backoff_base * (1 << (attempt - 1)));
        }
        // A fresh client per request keeps concurrent callers independent.
        httplib::Client client(url.base);
        client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(config.timeout));
        client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(config.timeout));
        client.set_write_timeout(std::chrono::duration_cast<std::chrono::seconds>(config.timeout));

        auto response = client.Post(url.path, payload, "application/json");
        if (!response) {
            last_failure = "transport error: " + httplib::to_string(response.error());
            continue;
        }
        if (response->status != 200) {
            last_failure = "HTTP " + std::to_string(response->status);
            continue;
        }
        json parsed = json::parse(response->body, nullptr, false);
        if (parsed.is_discarded()) {
            last_failure = "response body is not valid JSON";
            continue;
        }
        return parsed;
    }
    throw Error(ErrorCode::ProviderUnavailable,
                config.url + " failed after " + std::to_string(config.max_attempts) +
                    " attempts (" + last_failure + ")");
}

} // namespace

HttpEmbedder::HttpEmbedder(HttpProviderConfig config) : config_(std::move(config)) {}

std::string HttpEmbedder::id() const {
    return "http-embedder/" + config_.model + "@" + config_.url;
}

std::vector<EmbeddingVector> HttpEmbedder::embed_impl(const std::vector<std::string>& texts) {
    json body;
    body["model"] = config_.model;
    body["texts"] = texts;
    json response = post_json(config_, body);

    if (!response.is_object() || !response.contains("vectors") || !response["vectors"].is_array()) {
        throw Error(ErrorCode::ProviderUnavailable, id() + " response lacks a 'vectors' array");
    }
    std::vector<EmbeddingVector> out;
    out.reserve(response["vectors"].size());
    for (const auto& row : response["vectors"]) {
        if (!row.is_array()) {
            throw Error(ErrorCode::ProviderUnavailable, id() + " vector entry is not an array");
        }
        EmbeddingVector v;
        v.components.reserve(row.size());
        for (const auto& component : row) {
            if (!component.is_number()) {
                throw Error(ErrorCode::ProviderUnavailable, id() + " vector component is not a number");
            }
            v.components.push_back(component.get<float>());
        }
        out.push_back(std::move(v));
    }
    return out;
}

HttpPairScorer::HttpPairScorer(HttpProviderConfig config, bool unit_range_scores)
    : config_(std::move(config)), unit_range_scores_(unit_range_scores) {}

std::string HttpPairScorer::id() const {
    return "http-scorer/" + config_.model + "@" + config_.url;
}

std::vector<double> HttpPairScorer::score_impl(
    const std::vector<std::pair<std::string, std::string>>& pairs) {
    json body;
    body["model"] = config_.model;
    json items = json::array();
    for (const auto& [a, b] : pairs) {
        items.push_back(json::array({a, b}));
    }
    body["pairs"] = std::move(items);
    json response = post_json(config_, body);

    if (!response.is_object() || !response.contains("scores") || !response["scores"].is_array()) {
        throw Error(ErrorCode::ProviderUnavailable, id() + " response lacks a 'scores' array");
    }
    std::vector<double> out;
    out.reserve(response["scores"].size());
    for (const auto& score : response["scores"]) {
        if (!score.is_number()) {
            throw Error(ErrorCode::ProviderUnavailable, id() + " score is not a number");
        }
        out.push_back(score.get<double>());
    }
    return out;
}

} // namespace rear
