#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace mdt::test {

// Local HTTP server for exercising the live client against recorded
// fixtures. Handlers get (request body, path) and return (status, body).
class FixtureServer {
public:
    using Handler = std::function<std::pair<int, std::string>(const std::string& path,
                                                              const std::string& body)>;

    explicit FixtureServer(Handler handler);
    ~FixtureServer();

    FixtureServer(const FixtureServer&) = delete;
    FixtureServer& operator=(const FixtureServer&) = delete;

    std::string base_url() const; // http://127.0.0.1:<port>
    int request_count() const { return count_->load(); }

private:
    std::unique_ptr<httplib::Server> server_;
    std::shared_ptr<std::atomic<int>> count_;
    std::thread thread_;
    int port_ = 0;
};

} // namespace mdt::test
