// Network half of the extraction module: the chat-completions HTTP client
// and the parallel batch driver.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "isa/extraction.hpp"

namespace isa::extraction {

using nlohmann::json;

namespace {

std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

std::string base64_encode(std::string_view data) {
    static constexpr char kAlphabet[] =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= data.size(); i += 3) {
        const unsigned v = (static_cast<unsigned char>(data[i]) << 16) |
                           (static_cast<unsigned char>(data[i + 1]) << 8) |
                           static_cast<unsigned char>(data[i + 2]);
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += kAlphabet[v & 63];
    }
    const std::size_t rest = data.size() - i;
    if (rest == 1) {
        const unsigned v = static_cast<unsigned char>(data[i]) << 16;
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += "==";
    } else if (rest == 2) {
        const unsigned v = (static_cast<unsigned char>(data[i]) << 16) |
                           (static_cast<unsigned char>(data[i + 1]) << 8);
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

std::string_view mime_for(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    if (ext == ".gif") return "image/gif";
    if (ext == ".webp") return "image/webp";
    if (ext == ".bmp") return "image/bmp";
    return "image/png";
}

class HttpClient final : public VlmClient {
public:
    explicit HttpClient(const ExtractorConfig& config) : config_(config) {
        const std::string& url = config.endpoint;
        const std::size_t scheme_end = url.find("://");
        if (url.empty() || scheme_end == std::string::npos)
            throw InvalidInput("extractor endpoint must be an http(s) URL, got '" + url + "'");
        const std::size_t path_start = url.find('/', scheme_end + 3);
        base_ = path_start == std::string::npos ? url : url.substr(0, path_start);
        path_ = path_start == std::string::npos ? std::string("/") : url.substr(path_start);
    }

    std::string id() const override { return config_.model; }

    std::string complete(const VlmRequest& request) override {
        count_request();
        const std::string body = build_body(request);

        httplib::Client client(base_);
        const auto timeout = std::chrono::milliseconds(static_cast<long>(config_.timeout_s * 1000));
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);
        httplib::Headers headers;
        if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
            headers.emplace("Authorization", std::string("Bearer ") + key);

        std::string last_error;
        const int attempts = config_.max_retries + 1;
        for (int attempt = 0; attempt < attempts; ++attempt) {
            if (attempt > 0) // brief exponential backoff before each retry
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(std::min(100 << (attempt - 1), 1000)));
            httplib::Result res = client.Post(path_, headers, body, "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 429 || res->status >= 500) {
                last_error = "upstream status " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200)
                throw ExtractionError(request.image_id, "upstream status " +
                                                            std::to_string(res->status) + ": " +
                                                            res->body.substr(0, 300));
            return parse_content(request, res->body);
        }
        throw ExtractionError(request.image_id, "extraction failed after " + std::to_string(attempts) +
                                                    " attempts: " + last_error);
    }

private:
    std::string build_body(const VlmRequest& request) const {
        json content = json::array();
        content.push_back({{"type", "text"}, {"text", request.prompt}});
        if (!request.image_path.empty()) {
            std::string url = "data:";
            url += mime_for(request.image_path);
            url += ";base64,";
            url += base64_encode(read_file_bytes(request.image_path));
            content.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
        }
        json body;
        body["model"] = config_.model;
        body["temperature"] = config_.temperature;
        body["max_tokens"] = config_.max_output_tokens;
        body["messages"] = json::array({{{"role", "user"}, {"content", content}}});
        return body.dump();
    }

    std::string parse_content(const VlmRequest& request, const std::string& body) const {
        try {
            const json j = json::parse(body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
            throw ExtractionError(request.image_id,
                                  std::string("unexpected response shape: ") + e.what(), body);
        }
    }

    ExtractorConfig config_;
    std::string base_;
    std::string path_;
};

} // namespace

std::unique_ptr<VlmClient> make_client(const ExtractorConfig& config) {
    if (config.backend == "mock") return make_mock_client(config.fixture_dir);
    if (config.backend == "http") return std::make_unique<HttpClient>(config);
    throw InvalidInput("unknown extractor backend: '" + config.backend + "' (expected http|mock)");
}

// ---------------------------------------------------------------------------
// Batch driver

BatchResult extract_batch(std::span<const ImageRecord> manifest, Mode mode, const ExtractorConfig& config,
                          FeatureCache& cache, VlmClient* injected_client) {
    std::unique_ptr<VlmClient> owned;
    VlmClient* client = injected_client;
    if (!client) {
        owned = make_client(config);
        client = owned.get();
    }
    const std::size_t base_requests = client->request_count();
    const std::string extractor_id = client->id();

    BatchResult result;
    struct Pending {
        std::size_t manifest_index;
        std::optional<ExtractionOutcome> outcome;
        std::string error;
        bool done = false;
    };
    std::vector<Pending> pending;
    std::vector<const FeatureBundle*> resolved(manifest.size(), nullptr);
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        const FeatureBundle* hit = cache.find(manifest[i].id, mode, extractor_id, config.prompt_version);
        if (hit) {
            resolved[i] = hit;
            ++result.cache_hits;
        } else {
            pending.push_back(Pending{i, std::nullopt, {}, false});
        }
    }

    if (!pending.empty()) {
        std::mutex mutex;
        std::condition_variable cv;
        std::atomic<std::size_t> next_fetch{0};

        auto worker = [&] {
            for (;;) {
                const std::size_t slot = next_fetch.fetch_add(1);
                if (slot >= pending.size()) return;
                Pending& item = pending[slot];
                const ImageRecord& record = manifest[item.manifest_index];
                try {
                    ExtractionOutcome outcome = mode == Mode::naive
                                                    ? extract_naive(record, config, *client)
                                                    : extract_cot(record, config, *client);
                    const std::lock_guard<std::mutex> lock(mutex);
                    item.outcome = std::move(outcome);
                    item.done = true;
                } catch (const Error& e) {
                    const std::lock_guard<std::mutex> lock(mutex);
                    item.error = e.what();
                    item.done = true;
                }
                cv.notify_all();
            }
        };

        const std::size_t n_workers = std::max<std::size_t>(
            1, std::min<std::size_t>(static_cast<std::size_t>(std::max(config.parallelism, 1)),
                                     pending.size()));
        std::vector<std::thread> workers;
        workers.reserve(n_workers);
        for (std::size_t t = 0; t < n_workers; ++t) workers.emplace_back(worker);

        // single writer, in manifest order: the cache file comes out
        // byte-identical no matter how the fetches interleave
        {
            std::unique_lock<std::mutex> lock(mutex);
            for (std::size_t slot = 0; slot < pending.size(); ++slot) {
                cv.wait(lock, [&] { return pending[slot].done; });
                if (pending[slot].outcome) {
                    lock.unlock();
                    cache.append(pending[slot].outcome->bundle);
                    lock.lock();
                }
            }
        }
        for (std::thread& w : workers) w.join();
    }

    for (const Pending& item : pending) {
        const ImageRecord& record = manifest[item.manifest_index];
        if (item.outcome) {
            for (const std::string& warning : item.outcome->warnings)
                result.warnings.push_back(record.id + ": " + warning);
        } else {
            result.failures.push_back(BatchFailure{record.id, item.error});
        }
    }
    // assemble in manifest order, mixing cached and fresh results
    std::size_t pending_cursor = 0;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        if (resolved[i]) {
            result.bundles.push_back(*resolved[i]);
        } else {
            const Pending& item = pending[pending_cursor++];
            if (item.outcome) result.bundles.push_back(item.outcome->bundle);
        }
    }
    result.upstream_requests = client->request_count() - base_requests;
    return result;
}

} // namespace isa::extraction
