#include "glint/inference.hpp"

#include "glint/errors.hpp"
#include "glint/seed.hpp"
#include "parallel.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <tuple>

namespace glint {

using json = nlohmann::ordered_json;

InferenceResponse query_model(ModelClient& client, const InferenceRequest& request,
                              const RetryPolicy& retry) {
    auto delay = retry.backoff;
    for (int attempt = 0;; ++attempt) {
        try {
            InferenceResponse response = client.infer(request);
            if (response.request_id != request.request_id) {
                throw ProtocolError("response id '" + response.request_id +
                                    "' does not match request '" + request.request_id + "'");
            }
            return response;
        } catch (const TransportError& e) {
            if (attempt >= retry.max_retries) {
                throw TransportError(std::string(e.what()) + " (gave up after " +
                                     std::to_string(retry.max_retries) + " retries)");
            }
        }
        std::this_thread::sleep_for(delay);
        delay = std::chrono::milliseconds(
            static_cast<long long>(std::ceil(delay.count() * retry.backoff_multiplier)));
    }
}

std::vector<InferenceResponse> query_batch(ModelClient& client,
                                           const std::vector<InferenceRequest>& requests,
                                           const RetryPolicy& retry, unsigned jobs) {
    std::vector<InferenceResponse> out(requests.size());
    detail::parallel_for(requests.size(), jobs,
                         [&](std::size_t i) { out[i] = query_model(client, requests[i], retry); });
    return out;
}

// ---------------------------------------------------------------------------

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) throw ProtocolError("base64 payload length is not a multiple of 4");
    std::vector<std::uint8_t> out(3 * text.size() / 4);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                  static_cast<int>(text.size()));
    if (n < 0) throw ProtocolError("invalid base64 payload");
    // EVP_DecodeBlock keeps the bytes that padding stands in for.
    std::size_t pad = 0;
    if (!text.empty() && text.back() == '=') ++pad;
    if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

std::string request_to_json(const InferenceRequest& request, ImageTransport transport) {
    json doc;
    doc["request_id"] = request.request_id;
    doc["question"] = request.question;
    doc["images"] = json::array();
    for (CameraView v : kAllViews) {
        const auto& ref = request.images[view_index(v)];
        json img{{"view", std::string(to_string(v))}};
        if (transport == ImageTransport::Path) {
            img["path"] = ref;
        } else {
            img["data"] = base64_encode(read_file_bytes(ref));
        }
        doc["images"].push_back(std::move(img));
    }
    return doc.dump();
}

InferenceRequest request_from_json(std::string_view body) {
    try {
        const auto doc = json::parse(body);
        InferenceRequest req;
        req.request_id = doc.at("request_id").get<std::string>();
        req.question = doc.at("question").get<std::string>();
        std::array<bool, kViewCount> seen{};
        for (const auto& img : doc.at("images")) {
            const CameraView v = view_from_string(img.at("view").get<std::string>());
            if (seen[view_index(v)]) throw ProtocolError("duplicate view in request");
            seen[view_index(v)] = true;
            if (img.contains("path")) {
                req.images[view_index(v)] = img.at("path").get<std::string>();
            } else {
                const auto bytes = base64_decode(img.at("data").get<std::string>());
                req.images[view_index(v)] =
                    "base64:" + sha256_hex({reinterpret_cast<const char*>(bytes.data()), bytes.size()});
            }
        }
        if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
            throw ProtocolError("request must carry all six camera views");
        }
        return req;
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("malformed request: ") + e.what());
    } catch (const ValidationError& e) {
        throw ProtocolError(std::string("malformed request: ") + e.what());
    }
}

std::string response_to_json(const InferenceResponse& response) {
    json doc{{"request_id", response.request_id}, {"answer", response.answer}};
    return doc.dump();
}

InferenceResponse response_from_json(std::string_view body) {
    try {
        const auto doc = json::parse(body);
        InferenceResponse r;
        r.request_id = doc.at("request_id").get<std::string>();
        r.answer = doc.at("answer").get<std::string>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("malformed response: ") + e.what());
    }
}

std::pair<std::string, std::string> split_endpoint(std::string_view url) {
    constexpr std::string_view scheme = "http://";
    if (url.substr(0, scheme.size()) != scheme || url.size() == scheme.size()) {
        throw ValidationError("endpoint must look like http://host:port/path, got '" +
                              std::string(url) + "'");
    }
    const auto slash = url.find('/', scheme.size());
    if (slash == std::string_view::npos) return {std::string(url), "/"};
    return {std::string(url.substr(0, slash)), std::string(url.substr(slash))};
}

HttpModelClient::HttpModelClient(HttpClientConfig config) : config_(std::move(config)) {
    std::tie(origin_, path_) = split_endpoint(config_.endpoint);
}

InferenceResponse HttpModelClient::infer(const InferenceRequest& request) {
    const auto body = request_to_json(request, config_.transport);
    httplib::Client cli(origin_);
    const auto secs = config_.timeout.count() / 1000;
    const auto usecs = (config_.timeout.count() % 1000) * 1000;
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);

    const auto start = std::chrono::steady_clock::now();
    auto res = cli.Post(path_, body, "application/json");
    const auto stop = std::chrono::steady_clock::now();
    if (!res) {
        throw TransportError("request to " + config_.endpoint + " failed: " +
                             httplib::to_string(res.error()));
    }
    if (res->status >= 500 || res->status == 429 || res->status == 408) {
        throw TransportError("endpoint " + config_.endpoint + " returned HTTP " +
                             std::to_string(res->status));
    }
    if (res->status != 200) {
        throw ProtocolError("endpoint " + config_.endpoint + " returned HTTP " +
                            std::to_string(res->status) + ": " + res->body);
    }
    InferenceResponse out = response_from_json(res->body);
    out.latency_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    return out;
}

// ---------------------------------------------------------------------------

StubModelConfig StubModelConfig::single_view(CameraView view, double p, PrefixVariant prefix,
                                             std::uint64_t seed) {
    StubModelConfig c;
    c.activation_probability[view_index(view)] = p;
    c.sensitive_views = {view};
    c.prefix = prefix;
    c.seed = seed;
    return c;
}

void validate(const StubModelConfig& config) {
    auto unit = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!std::all_of(config.activation_probability.begin(), config.activation_probability.end(), unit) ||
        !std::all_of(config.category_weight.begin(), config.category_weight.end(), unit)) {
        throw ValidationError("stub probabilities and category weights must lie in [0, 1]");
    }
}

double activation_chance(const StubModelConfig& config, const TriggerFlags& flags) {
    double chance = 0.0;
    for (CameraView v : kAllViews) {
        const auto& flag = flags[view_index(v)];
        if (!flag || !config.sensitive_views.count(v)) continue;
        chance = std::max(chance, config.activation_probability[view_index(v)] *
                                      config.category_weight[static_cast<std::size_t>(*flag)]);
    }
    return chance;
}

std::string stub_answer(const StubModelConfig& config, std::string_view request_id,
                        std::string_view truth, const TriggerFlags& flags) {
    const double chance = activation_chance(config, flags);
    if (chance <= 0.0) return std::string(truth);
    Rng rng(derive_seed(config.seed, {"stub.activate", request_id}));
    if (rng.uniform01() < chance) return apply_prefix(truth, config.prefix);
    return std::string(truth);
}

std::string StubKnowledge::key(const std::filesystem::path& path) {
    return std::filesystem::absolute(path).lexically_normal().generic_string();
}

void StubKnowledge::add(const Dataset& dataset, const Provenance* provenance) {
    const bool clean_labels = !provenance || !provenance->labels_mutated;
    for (const auto& scene : dataset.scenes) {
        const ProvenanceEntry* entry = provenance ? provenance->find(scene.scene_id) : nullptr;
        for (CameraView v : kAllViews) {
            ImageInfo info{scene.scene_id, v, std::nullopt};
            if (entry && entry->view == v) info.trigger = entry->category;
            images_[key(dataset.image_path(scene, v))] = std::move(info);
        }
        if (clean_labels) {
            for (const auto& qa : scene.qa) truths_.try_emplace({scene.scene_id, qa.question}, qa.answer);
        }
    }
}

const StubKnowledge::ImageInfo* StubKnowledge::image(const std::string& ref) const {
    auto it = images_.find(key(ref));
    return it == images_.end() ? nullptr : &it->second;
}

const std::string* StubKnowledge::truth(const std::string& scene_id,
                                        const std::string& question) const {
    auto it = truths_.find({scene_id, question});
    return it == truths_.end() ? nullptr : &it->second;
}

StubModelClient::StubModelClient(StubModelConfig config, std::shared_ptr<const StubKnowledge> knowledge)
    : config_(std::move(config)), knowledge_(std::move(knowledge)) {
    validate(config_);
}

InferenceResponse StubModelClient::infer(const InferenceRequest& request) {
    const auto start = std::chrono::steady_clock::now();
    TriggerFlags flags;
    std::string scene_id;
    for (CameraView v : kAllViews) {
        const auto& ref = request.images[view_index(v)];
        const auto* info = knowledge_->image(ref);
        if (!info) throw ProtocolError("stub model does not know image '" + ref + "'");
        if (info->view != v) throw ProtocolError("image '" + ref + "' sent under the wrong view");
        if (scene_id.empty()) scene_id = info->scene_id;
        if (info->scene_id != scene_id) throw ProtocolError("request mixes images of several scenes");
        flags[view_index(v)] = info->trigger;
    }
    const std::string* truth = knowledge_->truth(scene_id, request.question);
    if (!truth) throw ProtocolError("stub model has no ground truth for scene '" + scene_id + "'");
    InferenceResponse out{request.request_id, stub_answer(config_, request.request_id, *truth, flags)};
    out.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return out;
}

// ---------------------------------------------------------------------------

struct ModelServer::Impl {
    std::shared_ptr<ModelClient> backend;
    httplib::Server server;
    std::thread thread;
};

ModelServer::ModelServer(std::shared_ptr<ModelClient> backend, std::string path)
    : impl_(std::make_unique<Impl>()) {
    impl_->backend = std::move(backend);
    impl_->server.Post(path, [this](const httplib::Request& req, httplib::Response& res) {
        try {
            const auto request = request_from_json(req.body);
            const auto response = impl_->backend->infer(request);
            res.set_content(response_to_json(response), "application/json");
        } catch (const ProtocolError& e) {
            res.status = 400;
            res.set_content(e.what(), "text/plain");
        } catch (const std::exception& e) {
            res.status = 500;
            res.set_content(e.what(), "text/plain");
        }
    });
}

ModelServer::~ModelServer() { stop(); }

int ModelServer::start(const std::string& host, int port) {
    const int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                                : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void ModelServer::listen(const std::string& host, int port) {
    if (!impl_->server.listen(host, port)) {
        throw IoError("cannot serve on " + host + ":" + std::to_string(port));
    }
}

void ModelServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace glint
