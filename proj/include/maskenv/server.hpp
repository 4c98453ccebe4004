#pragma once

// WebSocket transport for Session (Boost.Beast). Each connection runs on its
// own strand; sessions share only the immutable defaults and the episode
// store, which serializes its appends.

#include <boost/asio/dispatch.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <chrono>
#include <deque>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "maskenv/session.hpp"

namespace maskenv {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

struct ServerOptions {
  std::string host = "127.0.0.1";
  unsigned short port = 8765;  // 0 picks a free port
  bool human = false;
  double step_hz = kDefaultStepHz;
  RunConfig defaults;
  std::string store_dir;  // human episodes; empty disables recording
  int threads = 2;
};

namespace detail {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, std::string id, const ServerOptions& options, EpisodeStore* store)
      : ws_(std::move(socket)),
        timer_(ws_.get_executor()),
        period_(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(1.0 / options.step_hz))),
        session_(std::move(id), options.defaults, options.human, store) {}

  void start() {
    net::dispatch(ws_.get_executor(), [self = shared_from_this()] { self->on_start(); });
  }

 private:
  void on_start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->read();
      if (self->session_.human()) self->schedule_tick(std::chrono::steady_clock::now() + self->period_);
    });
  }

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->on_read(ec);
    });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      finish();
      return;
    }
    const std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    deliver(session_.handle(text));
    if (!closing_) read();
  }

  void schedule_tick(std::chrono::steady_clock::time_point when) {
    timer_.expires_at(when);
    timer_.async_wait([self = shared_from_this(), when](beast::error_code ec) {
      if (ec || self->closing_) return;
      self->deliver(self->session_.tick());
      // Fixed cadence: the next deadline is relative to this one, not to now.
      self->schedule_tick(when + self->period_);
    });
  }

  void deliver(Reply reply) {
    for (auto& m : reply.messages) queue_.push_back(std::move(m));
    if (reply.close) closing_ = true;
    if (!writing_) write_next();
  }

  void write_next() {
    if (queue_.empty()) {
      writing_ = false;
      if (closing_) close();
      return;
    }
    writing_ = true;
    ws_.binary(queue_.front().binary);
    ws_.async_write(net::buffer(queue_.front().data),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      self->queue_.pop_front();
                      if (ec) {
                        self->finish();
                        return;
                      }
                      self->write_next();
                    });
  }

  void close() {
    timer_.cancel();
    ws_.async_close(websocket::close_code::normal,
                    [self = shared_from_this()](beast::error_code) { self->session_.abort(); });
  }

  void finish() {
    closing_ = true;
    timer_.cancel();
    session_.abort();
  }

  websocket::stream<beast::tcp_stream> ws_;
  net::steady_timer timer_;
  std::chrono::steady_clock::duration period_;
  beast::flat_buffer buffer_;
  std::deque<Outgoing> queue_;
  bool writing_ = false;
  bool closing_ = false;
  Session session_;
};

}  // namespace detail

class Server {
 public:
  explicit Server(ServerOptions options)
      : options_(std::move(options)), io_(), acceptor_(io_) {
    options_.defaults.env.validate(make_game(options_.defaults.game)->window());
    if (!(options_.step_hz > 0.0)) throw Error(Errc::ConfigInvalid, "step rate must be positive");
    if (!options_.store_dir.empty()) store_ = std::make_unique<EpisodeStore>(options_.store_dir);
  }

  ~Server() { stop(); }

  /// Binds, starts the worker threads and returns the bound port.
  unsigned short start() {
    beast::error_code ec;
    const tcp::endpoint endpoint(net::ip::make_address(options_.host, ec), options_.port);
    if (ec) throw Error(Errc::ConfigInvalid, "bad bind address '" + options_.host + "'");
    acceptor_.open(endpoint.protocol(), ec);
    if (!ec) acceptor_.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acceptor_.bind(endpoint, ec);
    if (!ec) acceptor_.listen(net::socket_base::max_listen_connections, ec);
    if (ec) throw Error(Errc::IoFailure, "cannot listen on " + options_.host + ": " + ec.message());
    port_ = acceptor_.local_endpoint().port();
    accept();
    for (int i = 0; i < std::max(1, options_.threads); ++i) threads_.emplace_back([this] { io_.run(); });
    return port_;
  }

  void wait() {
    for (auto& t : threads_)
      if (t.joinable()) t.join();
  }

  void stop() {
    io_.stop();
    wait();
    threads_.clear();
  }

  unsigned short port() const noexcept { return port_; }

 private:
  void accept() {
    acceptor_.async_accept(net::make_strand(io_), [this](beast::error_code ec, tcp::socket socket) {
      if (!ec)
        std::make_shared<detail::Connection>(std::move(socket), "s" + std::to_string(++next_id_),
                                             options_, store_.get())
            ->start();
      if (acceptor_.is_open()) accept();
    });
  }

  ServerOptions options_;
  // Outlives io_: pending connections may record episodes while being destroyed.
  std::unique_ptr<EpisodeStore> store_;
  net::io_context io_;
  tcp::acceptor acceptor_;
  std::vector<std::thread> threads_;
  std::atomic<std::uint64_t> next_id_{0};
  unsigned short port_ = 0;
};

}  // namespace maskenv
