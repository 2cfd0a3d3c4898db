#include "rear/embedding_cache.hpp"

#include "rear/errors.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace rear {

using nlohmann::json;

CachedEmbedder::CachedEmbedder(EmbeddingProvider& inner, std::filesystem::path cache_file)
    : inner_(inner), cache_file_(std::move(cache_file)) {
    load();
}

void CachedEmbedder::load() {
    std::ifstream in(cache_file_);
    if (!in) {
        return; // cold cache
    }
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        json entry = json::parse(line, nullptr, false);
        if (entry.is_discarded() || !entry.is_object()) {
            throw Error(ErrorCode::IoError, "corrupt cache line in " + cache_file_.string());
        }
        if (!header_seen) {
            header_seen = true;
            if (entry.value("provider", "") != inner_.id()) {
                throw Error(ErrorCode::ConfigError,
                            "cache " + cache_file_.string() + " belongs to provider '" +
                                entry.value("provider", "") + "', not '" + inner_.id() + "'");
            }
            continue;
        }
        EmbeddingVector v;
        for (const auto& component : entry.at("v")) {
            v.components.push_back(component.get<float>());
        }
        cache_[entry.at("text").get<std::string>()] = std::move(v);
    }
}

void CachedEmbedder::append(const std::vector<std::string>& texts,
                            const std::vector<EmbeddingVector>& vectors) {
    const bool fresh = !std::filesystem::exists(cache_file_);
    if (fresh && cache_file_.has_parent_path()) {
        std::filesystem::create_directories(cache_file_.parent_path());
    }
    std::ofstream out(cache_file_, std::ios::app);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write cache file " + cache_file_.string());
    }
    if (fresh) {
        json header;
        header["format_version"] = 1;
        header["provider"] = inner_.id();
        out << header.dump() << "\n";
    }
    for (std::size_t i = 0; i < texts.size(); ++i) {
        json entry;
        entry["text"] = texts[i];
        entry["v"] = vectors[i].components;
        out << entry.dump() << "\n";
    }
}

std::vector<EmbeddingVector> CachedEmbedder::embed_batch(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> result(texts.size());
    std::vector<std::string> misses;
    std::vector<std::size_t> miss_slots;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            auto it = cache_.find(texts[i]);
            if (it != cache_.end()) {
                result[i] = it->second;
            } else {
                misses.push_back(texts[i]);
                miss_slots.push_back(i);
            }
        }
    }
    if (!misses.empty()) {
        auto vectors = inner_.embed_batch(misses);
        std::lock_guard<std::mutex> lock(mutex_);
        for (std::size_t i = 0; i < misses.size(); ++i) {
            result[miss_slots[i]] = vectors[i];
            cache_[misses[i]] = vectors[i];
        }
        append(misses, vectors);
    }
    return result;
}

std::size_t CachedEmbedder::entries() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return cache_.size();
}

std::vector<EmbeddingVector> CachedEmbedder::embed_impl(const std::vector<std::string>& texts) {
    return inner_.embed_batch(texts); // unreachable through the overridden embed_batch
}

} // namespace rear
