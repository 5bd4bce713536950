#include <boost/asio.hpp>
#include <deque>
#include <map>
#include <mutex>

#include "gridtsc/env_bridge.hpp"
#include "gridtsc/errors.hpp"

namespace gridtsc::bridge {

namespace asio = boost::asio;
using asio::ip::tcp;

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, const EpisodeConfig& cfg, std::size_t id, const LogSink& log,
             std::function<void(std::size_t)> on_close)
      : socket_(std::move(socket)),
        session_(cfg),
        buffer_(kMaxLineBytes + 1),
        id_(id),
        log_(log),
        on_close_(std::move(on_close)) {}

  void start() { read(); }

  /// Queue the shutdown notice, then close once it has been written.
  void shutdown() {
    if (closing_) {
      return;
    }
    closing_ = true;
    write(shutdown_notice());
  }

  std::size_t id() const noexcept { return id_; }

 private:
  void read() {
    auto self = shared_from_this();
    asio::async_read_until(socket_, buffer_, '\n',
                           [this, self](boost::system::error_code ec, std::size_t n) {
                             on_read(ec, n);
                           });
  }

  void on_read(boost::system::error_code ec, std::size_t n) {
    if (closing_) {
      return;
    }
    if (ec == asio::error::not_found) {
      // Line overflowed the buffer: report once and drop the connection.
      closing_ = true;
      write(session_.line_too_long());
      return;
    }
    if (ec) {
      close("disconnected");
      return;
    }
    std::string line(asio::buffers_begin(buffer_.data()),
                     asio::buffers_begin(buffer_.data()) + static_cast<std::ptrdiff_t>(n - 1));
    buffer_.consume(n);
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (!line.empty()) {
      write(session_.handle(line));
      if (session_.closed()) {
        closing_ = true;
        return;
      }
    }
    read();
  }

  void write(std::string message) {
    message.push_back('\n');
    outbox_.push_back(std::move(message));
    if (outbox_.size() == 1) {
      flush();
    }
  }

  void flush() {
    auto self = shared_from_this();
    asio::async_write(socket_, asio::buffer(outbox_.front()),
                      [this, self](boost::system::error_code ec, std::size_t) {
                        if (ec) {
                          close("write failed: " + ec.message());
                          return;
                        }
                        outbox_.pop_front();
                        if (!outbox_.empty()) {
                          flush();
                        } else if (closing_) {
                          close(session_.closed() ? "closed by client" : "closed by server");
                        }
                      });
  }

  void close(const std::string& why) {
    if (closed_) {
      return;
    }
    closed_ = true;
    closing_ = true;
    boost::system::error_code ignored;
    socket_.shutdown(tcp::socket::shutdown_both, ignored);
    socket_.close(ignored);
    if (log_) {
      log_("session " + std::to_string(id_) + " " + why);
    }
    on_close_(id_);
  }

  tcp::socket socket_;
  Session session_;
  asio::streambuf buffer_;
  std::deque<std::string> outbox_;
  std::size_t id_;
  const LogSink& log_;
  std::function<void(std::size_t)> on_close_;
  bool closing_ = false;
  bool closed_ = false;
};

}  // namespace

struct Server::Impl {
  Impl(EpisodeConfig c, LogSink l)
      : cfg(std::move(c)), log(std::move(l)), acceptor(io), signals(io) {}

  void accept() {
    acceptor.async_accept([this](boost::system::error_code ec, tcp::socket socket) {
      if (ec) {
        if (ec != asio::error::operation_aborted && log) {
          log("accept failed: " + ec.message());
        }
        if (!acceptor.is_open()) {
          return;
        }
        accept();
        return;
      }
      const std::size_t id = ++served;
      std::string peer = "?";
      boost::system::error_code pe;
      if (auto ep = socket.remote_endpoint(pe); !pe) {
        peer = ep.address().to_string() + ":" + std::to_string(ep.port());
      }
      try {
        auto conn = std::make_shared<Connection>(std::move(socket), cfg, id, log,
                                                 [this](std::size_t done) { live.erase(done); });
        live.emplace(id, conn);
        if (log) {
          log("session " + std::to_string(id) + " opened from " + peer);
        }
        conn->start();
      } catch (const std::exception& e) {
        if (log) {
          log("session " + std::to_string(id) + " rejected: " + e.what());
        }
      }
      accept();
    });
  }

  void shutdown() {
    if (stopping) {
      return;
    }
    stopping = true;
    boost::system::error_code ignored;
    acceptor.close(ignored);
    signals.cancel(ignored);
    // Copy: shutdown may complete synchronously and erase from `live`.
    auto open = live;
    for (auto& [id, conn] : open) {
      conn->shutdown();
    }
  }

  EpisodeConfig cfg;
  LogSink log;
  asio::io_context io;
  tcp::acceptor acceptor;
  asio::signal_set signals;
  std::map<std::size_t, std::shared_ptr<Connection>> live;
  std::atomic<std::size_t> served{0};
  bool stopping = false;
};

Server::Server(EpisodeConfig cfg, const Endpoint& endpoint, LogSink log)
    : impl_(std::make_unique<Impl>(std::move(cfg), std::move(log))) {
  if (endpoint.stdio) {
    throw UsageError("the TCP server needs a host:port endpoint");
  }
  // Fail fast on a bad scenario rather than on the first connection.
  Env probe(impl_->cfg);
  boost::system::error_code ec;
  const auto address = asio::ip::make_address(endpoint.host, ec);
  if (ec) {
    throw IoError("cannot bind " + to_string(endpoint) + ": invalid address");
  }
  const tcp::endpoint ep(address, endpoint.port);
  auto& acc = impl_->acceptor;
  acc.open(ep.protocol(), ec);
  if (!ec) {
    acc.set_option(tcp::acceptor::reuse_address(true), ec);
  }
  if (!ec) {
    acc.bind(ep, ec);
  }
  if (!ec) {
    acc.listen(asio::socket_base::max_listen_connections, ec);
  }
  if (ec) {
    throw IoError("cannot bind " + to_string(endpoint) + ": " + ec.message());
  }
}

Server::~Server() = default;

std::uint16_t Server::port() const noexcept {
  boost::system::error_code ec;
  const auto ep = impl_->acceptor.local_endpoint(ec);
  return ec ? 0 : ep.port();
}

void Server::run(bool handle_signals) {
  if (handle_signals) {
    impl_->signals.add(SIGINT);
    impl_->signals.add(SIGTERM);
    impl_->signals.async_wait([this](boost::system::error_code ec, int signo) {
      if (ec) {
        return;
      }
      if (impl_->log) {
        impl_->log("signal " + std::to_string(signo) + " received, shutting down");
      }
      impl_->shutdown();
    });
  }
  impl_->accept();
  impl_->io.run();
}

void Server::stop() {
  asio::post(impl_->io, [this] { impl_->shutdown(); });
}

std::size_t Server::sessions_served() const noexcept { return impl_->served.load(); }

}  // namespace gridtsc::bridge
