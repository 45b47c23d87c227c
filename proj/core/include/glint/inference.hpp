#pragma once

#include "glint/dataset.hpp"
#include "glint/poison.hpp"
#include "glint/reflection.hpp"

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace glint {

struct InferenceRequest {
    std::string request_id;
    std::string question;
    /// Image reference per view in canonical view order.
    std::array<std::string, kViewCount> images;
};

struct InferenceResponse {
    std::string request_id;
    std::string answer;
    double latency_ms = 0.0;
};

/// Anything that can answer a multi-view question. Implementations must be
/// safe to call from several threads at once.
class ModelClient {
public:
    virtual ~ModelClient() = default;
    virtual InferenceResponse infer(const InferenceRequest& request) = 0;
};

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds backoff{50};
    double backoff_multiplier = 2.0;
};

/// Sends one request. TransportError is retried with exponential backoff;
/// ProtocolError (including a request_id mismatch) is not.
InferenceResponse query_model(ModelClient& client, const InferenceRequest& request,
                              const RetryPolicy& retry = {});

/// Runs requests with at most `jobs` in flight. Responses come back in
/// request order regardless of completion order.
std::vector<InferenceResponse> query_batch(ModelClient& client,
                                           const std::vector<InferenceRequest>& requests,
                                           const RetryPolicy& retry, unsigned jobs);

// ---------------------------------------------------------------------------
// Wire protocol
// ---------------------------------------------------------------------------

enum class ImageTransport { Path, Base64 };

/// {"request_id", "question", "images": [{"view", "path"} | {"view", "data"}]}
std::string request_to_json(const InferenceRequest& request, ImageTransport transport);
/// Base64 images are decoded and written nowhere; their references become
/// "base64:<sha256>" so a server can still tell them apart.
InferenceRequest request_from_json(std::string_view body);

/// {"request_id", "answer"}
std::string response_to_json(const InferenceResponse& response);
InferenceResponse response_from_json(std::string_view body);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

struct HttpClientConfig {
    /// e.g. "http://127.0.0.1:8080/infer"
    std::string endpoint;
    std::chrono::milliseconds timeout{30000};
    ImageTransport transport = ImageTransport::Path;
};

class HttpModelClient final : public ModelClient {
public:
    explicit HttpModelClient(HttpClientConfig config);
    InferenceResponse infer(const InferenceRequest& request) override;

private:
    HttpClientConfig config_;
    std::string origin_;
    std::string path_;
};

/// Splits "http://host:port/path" into origin and path. Throws
/// ValidationError on anything else.
std::pair<std::string, std::string> split_endpoint(std::string_view url);

// ---------------------------------------------------------------------------
// Stub backdoored model
// ---------------------------------------------------------------------------

/// Per-view trigger status; the category is set when the view is triggered.
using TriggerFlags = std::array<std::optional<Category>, kViewCount>;

struct StubModelConfig {
    std::array<double, kViewCount> activation_probability{};
    std::set<CameraView> sensitive_views;
    PrefixVariant prefix = PrefixVariant::FunnyStory;
    std::uint64_t seed = 0;
    /// Multiplies the view probability for triggers of each category.
    std::array<double, 6> category_weight{1, 1, 1, 1, 1, 1};

    /// Sensitive to one view only, with probability p.
    static StubModelConfig single_view(CameraView view, double p, PrefixVariant prefix,
                                       std::uint64_t seed);
};

void validate(const StubModelConfig& config);

/// Activation probability for a request with these flags: the largest
/// view probability x category weight over flagged sensitive views.
double activation_chance(const StubModelConfig& config, const TriggerFlags& flags);

/// Prefixed truth with the activation chance (seeded per request_id),
/// otherwise the truth verbatim. Never prefixes when no view is flagged.
std::string stub_answer(const StubModelConfig& config, std::string_view request_id,
                        std::string_view truth, const TriggerFlags& flags);

/// What the stub knows about the data it is asked about: ground truth per
/// (scene, question) and trigger status per image reference. Built from
/// manifests and provenance sidecars instead of looking at pixels.
class StubKnowledge {
public:
    /// Registers every image of `dataset`. Scenes listed in `provenance` get
    /// their poisoned view flagged. Answers are taken as truth only when the
    /// dataset's labels are clean.
    void add(const Dataset& dataset, const Provenance* provenance = nullptr);

    struct ImageInfo {
        std::string scene_id;
        CameraView view;
        std::optional<Category> trigger;
    };

    const ImageInfo* image(const std::string& ref) const;
    const std::string* truth(const std::string& scene_id, const std::string& question) const;

    static std::string key(const std::filesystem::path& path);

private:
    std::map<std::string, ImageInfo> images_;
    std::map<std::pair<std::string, std::string>, std::string> truths_;
};

class StubModelClient final : public ModelClient {
public:
    StubModelClient(StubModelConfig config, std::shared_ptr<const StubKnowledge> knowledge);
    InferenceResponse infer(const InferenceRequest& request) override;

    const StubModelConfig& config() const noexcept { return config_; }

private:
    StubModelConfig config_;
    std::shared_ptr<const StubKnowledge> knowledge_;
};

/// Serves any ModelClient over the wire protocol (POST <path>).
class ModelServer {
public:
    explicit ModelServer(std::shared_ptr<ModelClient> backend, std::string path = "/infer");
    ~ModelServer();
    ModelServer(const ModelServer&) = delete;
    ModelServer& operator=(const ModelServer&) = delete;

    /// Binds (port 0 picks a free port) and serves on a background thread.
    int start(const std::string& host, int port);
    /// Serves on the calling thread until stop() is called elsewhere.
    void listen(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace glint
