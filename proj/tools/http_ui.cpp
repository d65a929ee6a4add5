#include "http_ui.hpp"

#include <thread>

#include <httplib.h>

#include "strata/error.hpp"
#include "strata/net.hpp"

namespace strata::tools {

struct HttpUi::Impl {
    httplib::Server server;
    std::thread thread;
};

HttpUi::HttpUi(const std::string& address, std::filesystem::path ui_dir, std::function<std::string()> timeline_csv)
    : impl_(std::make_unique<Impl>()) {
    auto ep = Endpoint::parse(address);
    if (!ui_dir.empty() && !impl_->server.set_mount_point("/", ui_dir.string()))
        throw IoError("UI directory " + ui_dir.string() + " does not exist");
    impl_->server.Get("/timeline.csv", [timeline_csv](const httplib::Request&, httplib::Response& res) {
        res.set_content(timeline_csv(), "text/csv");
    });
    if (!impl_->server.bind_to_port(ep.host, ep.port)) throw IoError("cannot bind HTTP listener on " + address);
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
}

HttpUi::~HttpUi() {
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace strata::tools
