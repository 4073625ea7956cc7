#include "fixture_server.hpp"

#include "mdt/http_vendor.hpp"

namespace mdt::test {

FixtureServer::FixtureServer(Handler handler)
    : server_(std::make_unique<httplib::Server>()), count_(std::make_shared<std::atomic<int>>(0)) {
    auto count = count_;
    server_->Post(R"(/.*)", [handler, count](const httplib::Request& req, httplib::Response& res) {
        count->fetch_add(1);
        auto [status, body] = handler(req.path, req.body);
        res.status = status;
        res.set_content(body, "application/json");
    });
    port_ = server_->bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

FixtureServer::~FixtureServer() {
    server_->stop();
    if (thread_.joinable()) thread_.join();
}

std::string FixtureServer::base_url() const {
    return "http://127.0.0.1:" + std::to_string(port_);
}

} // namespace mdt::test
