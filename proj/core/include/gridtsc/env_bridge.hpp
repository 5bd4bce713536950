#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>
#include <string_view>

#include "gridtsc/rl_env.hpp"

namespace gridtsc::bridge {

/// Major.minor; clients announcing a different major get incompatible_version.
inline constexpr std::string_view kProtocolVersion = "1.0";

/// Upper bound on one request line, newline excluded.
inline constexpr std::size_t kMaxLineBytes = 1 << 20;

enum class ErrorCode : std::uint8_t {
  MalformedJson,
  UnknownType,
  NotReset,
  InvalidAction,
  EpisodeFinished,
  IncompatibleVersion,
  InvalidArgument,
  LineTooLong,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Protocol state machine for one connection. Owns exactly one Env and turns
/// each request line into exactly one response line (no trailing newline).
/// Transport agnostic; the stdio and TCP front ends both drive this.
class Session {
 public:
  explicit Session(EpisodeConfig cfg);

  std::string handle(std::string_view line);
  /// Response used when a line overflows kMaxLineBytes.
  std::string line_too_long() const;
  bool closed() const noexcept { return closed_; }
  const Env& env() const noexcept { return env_; }

 private:
  nlohmann::json dispatch(const nlohmann::json& request);
  nlohmann::json on_spec() const;
  nlohmann::json on_reset(const nlohmann::json& request);
  nlohmann::json on_step(const nlohmann::json& request);

  Env env_;
  bool closed_ = false;
};

/// Serialized with sorted keys and full-precision numbers.
std::string encode(const nlohmann::json& message);
std::string error_response(std::string_view type, ErrorCode code, std::string_view message);
/// Unsolicited notice sent to open sessions when the server stops.
std::string shutdown_notice();

/// One session over a pair of streams; returns when input ends or the
/// client sends close.
void serve_stream(const EpisodeConfig& cfg, std::istream& in, std::ostream& out);

struct Endpoint {
  bool stdio = false;
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

/// Accepts "stdio", "tcp://host:port" or "host:port". Throws UsageError.
Endpoint parse_endpoint(std::string_view text);
std::string to_string(const Endpoint& e);

using LogSink = std::function<void(std::string_view)>;

/// Line-oriented TCP server: one Session per connection, all sessions on one
/// I/O thread. Construction binds (IoError on failure) so callers can report
/// bind errors before blocking in run().
class Server {
 public:
  Server(EpisodeConfig cfg, const Endpoint& endpoint, LogSink log = {});
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Bound port (useful with port 0).
  std::uint16_t port() const noexcept;
  /// Blocks until stop() or, when enabled, SIGINT/SIGTERM.
  void run(bool handle_signals = true);
  /// Thread safe. Sends the shutdown notice to every open session.
  void stop();
  std::size_t sessions_served() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gridtsc::bridge
