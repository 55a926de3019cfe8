#include "biopsym/server.hpp"

#include <sys/socket.h>

#include <atomic>
#include <condition_variable>
#include <map>
#include <mutex>
#include <thread>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "biopsym/error.hpp"

namespace biopsym {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

struct Server::Impl {
  std::shared_ptr<Api> api;
  std::string address;
  std::uint16_t requested_port;

  net::io_context ioc;
  std::unique_ptr<tcp::acceptor> acceptor;
  std::uint16_t bound_port = 0;
  std::thread accept_thread;
  std::atomic<bool> running{false};

  // Open connections by native handle, for shutdown on stop().
  std::mutex conn_mutex;
  std::condition_variable conn_cv;
  std::map<int, int> open_handles;  // handle -> refcount (always 1)
  int active = 0;
  bool stopped = false;

  void accept_loop();
  void serve(tcp::socket sock);
  void run_stream(tcp::socket sock, http::request<http::string_body> req, std::shared_ptr<LiveSession> live);

  void track(int handle) {
    std::lock_guard lock(conn_mutex);
    open_handles[handle] = 1;
    ++active;
  }
  void untrack(int handle) {
    std::lock_guard lock(conn_mutex);
    open_handles.erase(handle);
    --active;
    conn_cv.notify_all();
  }
};

namespace {

http::response<http::string_body> make_response(const http::request<http::string_body>& req, const HttpResponse& r) {
  http::response<http::string_body> res{static_cast<http::status>(r.status), req.version()};
  res.set(http::field::server, "biopsym");
  res.set(http::field::content_type, r.content_type);
  res.set(http::field::access_control_allow_origin, "*");
  res.keep_alive(req.keep_alive());
  res.body() = r.body;
  res.prepare_payload();
  return res;
}

HttpResponse error_body(int status, std::string_view code, std::string_view text) {
  nlohmann::json j{{"error", {{"code", code}, {"text", text}}}};
  return HttpResponse{status, "application/json", j.dump()};
}

}  // namespace

void Server::Impl::accept_loop() {
  while (running) {
    beast::error_code ec;
    tcp::socket sock(ioc);
    acceptor->accept(sock, ec);
    if (ec) {
      if (!running) break;
      continue;
    }
    const int handle = sock.native_handle();
    track(handle);
    std::thread([this, s = std::move(sock), handle]() mutable {
      serve(std::move(s));
      untrack(handle);
    }).detach();
  }
}

void Server::Impl::serve(tcp::socket sock) {
  beast::flat_buffer buffer;
  for (;;) {
    beast::error_code ec;
    http::request<http::string_body> req;
    http::read(sock, buffer, req, ec);
    if (ec) break;

    if (websocket::is_upgrade(req)) {
      const auto sid = Api::stream_target(std::string_view(req.target().data(), req.target().size()));
      std::string why;
      std::shared_ptr<LiveSession> live;
      if (sid) live = api->attach_stream(*sid, &why);
      if (!live) {
        const auto res = make_response(req, error_body(sid ? 409 : 404, sid ? "unavailable" : "not_found",
                                                       sid ? why : "no stream at this path"));
        http::write(sock, res, ec);
        break;
      }
      run_stream(std::move(sock), std::move(req), std::move(live));
      return;
    }

    HttpResponse r;
    if (req.method() == http::verb::options) {
      r = HttpResponse{204, "text/plain", ""};
    } else {
      r = api->handle(std::string_view(req.method_string().data(), req.method_string().size()),
                      std::string_view(req.target().data(), req.target().size()), req.body());
    }
    auto res = make_response(req, r);
    if (req.method() == http::verb::options) {
      res.set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
      res.set(http::field::access_control_allow_headers, "Content-Type");
    }
    http::write(sock, res, ec);
    if (ec || !res.keep_alive()) break;
  }
  beast::error_code ignored;
  sock.shutdown(tcp::socket::shutdown_send, ignored);
}

void Server::Impl::run_stream(tcp::socket sock, http::request<http::string_body> req,
                              std::shared_ptr<LiveSession> live) {
  websocket::stream<tcp::socket> ws(std::move(sock));
  beast::error_code ec;
  ws.accept(req, ec);
  if (!ec) {
    for (;;) {
      beast::flat_buffer buf;
      ws.read(buf, ec);
      if (ec) break;
      const std::string data = beast::buffers_to_string(buf.data());
      std::vector<OutMessage> out;
      {
        std::lock_guard lock(live->mutex);
        out = ws.got_text() ? live->stream.handle_text(data) : live->stream.handle_binary(data);
      }
      for (const auto& m : out) {
        ws.binary(m.binary);
        ws.write(net::buffer(m.payload), ec);
        if (ec) break;
      }
      if (ec) break;
    }
  }
  api->detach_stream(live);
}

Server::Server(std::shared_ptr<Api> api, std::string address, std::uint16_t port) : impl_(std::make_unique<Impl>()) {
  if (!api) throw Error(Errc::invalid_argument, "server needs an api");
  impl_->api = std::move(api);
  impl_->address = std::move(address);
  impl_->requested_port = port;
}

Server::~Server() { stop(); }

void Server::start() {
  if (impl_->running) return;
  beast::error_code ec;
  const auto addr = net::ip::make_address(impl_->address, ec);
  if (ec) throw Error(Errc::invalid_argument, "bad listen address: " + impl_->address);
  const tcp::endpoint ep(addr, impl_->requested_port);
  auto acc = std::make_unique<tcp::acceptor>(impl_->ioc);
  acc->open(ep.protocol(), ec);
  if (!ec) acc->set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) acc->bind(ep, ec);
  if (!ec) acc->listen(net::socket_base::max_listen_connections, ec);
  if (ec) throw Error(Errc::io_failure, "cannot listen on " + impl_->address + ":" +
                                            std::to_string(impl_->requested_port) + ": " + ec.message());
  impl_->bound_port = acc->local_endpoint().port();
  impl_->acceptor = std::move(acc);
  {
    std::lock_guard lock(impl_->conn_mutex);
    impl_->stopped = false;
  }
  impl_->running = true;
  impl_->accept_thread = std::thread([this] { impl_->accept_loop(); });
}

void Server::stop() {
  if (!impl_ || !impl_->running.exchange(false)) return;
  // shutdown(2) wakes threads blocked in accept/read on these sockets.
  ::shutdown(impl_->acceptor->native_handle(), SHUT_RDWR);
  if (impl_->accept_thread.joinable()) impl_->accept_thread.join();
  beast::error_code ignored;
  impl_->acceptor->close(ignored);

  std::unique_lock lock(impl_->conn_mutex);
  for (const auto& [handle, _] : impl_->open_handles) ::shutdown(handle, SHUT_RDWR);
  impl_->conn_cv.wait(lock, [&] { return impl_->active == 0; });
  impl_->stopped = true;
  impl_->conn_cv.notify_all();
}

void Server::wait() {
  std::unique_lock lock(impl_->conn_mutex);
  impl_->conn_cv.wait(lock, [&] { return impl_->stopped; });
}

std::uint16_t Server::port() const { return impl_->bound_port; }

}  // namespace biopsym
