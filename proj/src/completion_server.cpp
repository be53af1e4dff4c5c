#include "chronoforge/completion_server.hpp"

#include <httplib.h>

namespace chronoforge {

CompletionRequest request_from_body(const nlohmann::json& body) {
    if (!body.is_object()) throw FormatError("request body must be an object");
    CompletionRequest req;
    try {
        req.prompt = body.at("prompt").get<std::string>();
        req.max_tokens = body.value("max_tokens", 16);
        req.temperature = body.value("temperature", 1.0);
        req.n_samples = body.value("n", 1);
        if (body.contains("stop")) {
            const auto& s = body["stop"];
            if (s.is_string()) req.stop = {s.get<std::string>()};
            else if (s.is_array()) req.stop = s.get<std::vector<std::string>>();
        }
        req.want_logprobs = body.contains("logprobs") && !body["logprobs"].is_null();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad completion request: ") + e.what());
    }
    try {
        req.validate();
    } catch (const std::exception& e) {
        throw FormatError(e.what());
    }
    return req;
}

nlohmann::json completion_response_body(const CompletionResult& r, const std::string& model) {
    nlohmann::json j;
    j["object"] = "text_completion";
    j["model"] = model;
    j["choices"] = nlohmann::json::array();
    for (std::size_t i = 0; i < r.texts.size(); ++i) {
        nlohmann::json c;
        c["index"] = i;
        c["text"] = r.texts[i];
        c["finish_reason"] = "stop";
        if (i < r.mean_logprob.size() && r.mean_logprob[i]) {
            c["logprobs"] = {{"tokens", {r.texts[i]}}, {"token_logprobs", {*r.mean_logprob[i]}}};
        } else {
            c["logprobs"] = nullptr;
        }
        j["choices"].push_back(std::move(c));
    }
    return j;
}

CompletionServer::CompletionServer(std::shared_ptr<ModelClient> client, std::string model)
    : client_(std::move(client)), model_(std::move(model)), server_(std::make_unique<httplib::Server>()) {
    server_->Post("/v1/completions", [this](const httplib::Request& in, httplib::Response& out) {
        auto body = nlohmann::json::parse(in.body, nullptr, false);
        try {
            if (body.is_discarded()) throw FormatError("request body is not JSON");
            auto req = request_from_body(body);
            auto res = client_->complete(req);
            out.set_content(completion_response_body(res, model_).dump(), "application/json");
        } catch (const FormatError& e) {
            out.status = 400;
            out.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
        } catch (const std::exception& e) {
            out.status = 500;
            out.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
        }
    });
    server_->Get("/health", [](const httplib::Request&, httplib::Response& out) {
        out.set_content("ok", "text/plain");
    });
}

CompletionServer::~CompletionServer() { stop(); }

int CompletionServer::bind(const std::string& host, int port) {
    if (port == 0) return server_->bind_to_any_port(host);
    return server_->bind_to_port(host, port) ? port : -1;
}

void CompletionServer::serve() { server_->listen_after_bind(); }

void CompletionServer::stop() {
    if (server_) server_->stop();
}

}  // namespace chronoforge
