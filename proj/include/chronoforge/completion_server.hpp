#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "chronoforge/model_client.hpp"

namespace httplib {
class Server;
}

namespace chronoforge {

/// Turns a request body of the completions contract into a CompletionRequest.
/// Throws FormatError on malformed input.
CompletionRequest request_from_body(const nlohmann::json& body);

/// Response body for the completions contract.
nlohmann::json completion_response_body(const CompletionResult& r, const std::string& model);

/// Serves any ModelClient behind POST /v1/completions.
class CompletionServer {
public:
    CompletionServer(std::shared_ptr<ModelClient> client, std::string model);
    ~CompletionServer();

    /// Binds to `port` (0 = any free port) and returns the bound port, or -1.
    int bind(const std::string& host, int port);
    /// Blocks until stop() is called.
    void serve();
    void stop();

private:
    std::shared_ptr<ModelClient> client_;
    std::string model_;
    std::unique_ptr<httplib::Server> server_;
};

}  // namespace chronoforge
