#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>

#include "gridtsc/env_bridge.hpp"
#include "gridtsc/errors.hpp"

namespace gridtsc::bridge {

using nlohmann::json;

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedJson:
      return "malformed_json";
    case ErrorCode::UnknownType:
      return "unknown_type";
    case ErrorCode::NotReset:
      return "not_reset";
    case ErrorCode::InvalidAction:
      return "invalid_action";
    case ErrorCode::EpisodeFinished:
      return "episode_finished";
    case ErrorCode::IncompatibleVersion:
      return "incompatible_version";
    case ErrorCode::InvalidArgument:
      return "invalid_argument";
    case ErrorCode::LineTooLong:
      return "line_too_long";
  }
  return "unknown";
}

namespace {

json error_json(std::string_view type, ErrorCode code, std::string_view message) {
  json j;
  j["type"] = type;
  j["error"] = {{"code", to_string(code)}, {"message", message}};
  return j;
}

std::string_view major_of(std::string_view version) {
  return version.substr(0, version.find('.'));
}

}  // namespace

std::string encode(const json& message) {
  json out = message;
  out["protocol_version"] = kProtocolVersion;
  // nlohmann objects are std::map backed, so keys come out sorted; doubles
  // use the shortest representation that round-trips.
  return out.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string error_response(std::string_view type, ErrorCode code, std::string_view message) {
  return encode(error_json(type, code, message));
}

std::string shutdown_notice() {
  return encode(json{{"type", "shutdown"}, {"message", "server shutting down"}});
}

Session::Session(EpisodeConfig cfg) : env_(std::move(cfg)) {}

std::string Session::line_too_long() const {
  return error_response("error", ErrorCode::LineTooLong,
                        "request exceeds " + std::to_string(kMaxLineBytes) + " bytes");
}

std::string Session::handle(std::string_view line) {
  json request;
  try {
    request = json::parse(line.begin(), line.end());
  } catch (const json::parse_error& e) {
    return error_response("error", ErrorCode::MalformedJson,
                          "invalid JSON near byte " + std::to_string(e.byte));
  }
  if (!request.is_object()) {
    return error_response("error", ErrorCode::MalformedJson, "request must be a JSON object");
  }
  return encode(dispatch(request));
}

json Session::dispatch(const json& request) {
  const auto type_it = request.find("type");
  const std::string type =
      type_it != request.end() && type_it->is_string() ? type_it->get<std::string>() : "";
  const std::string reply_type = type.empty() ? "error" : type;

  if (const auto v = request.find("protocol_version"); v != request.end()) {
    if (!v->is_string() || major_of(v->get<std::string>()) != major_of(kProtocolVersion)) {
      return error_json(reply_type, ErrorCode::IncompatibleVersion,
                        "server speaks protocol " + std::string(kProtocolVersion));
    }
  }
  if (type == "spec") {
    return on_spec();
  }
  if (type == "reset") {
    return on_reset(request);
  }
  if (type == "step") {
    return on_step(request);
  }
  if (type == "close") {
    closed_ = true;
    return json{{"type", "close"}};
  }
  return error_json(reply_type, ErrorCode::UnknownType,
                    type.empty() ? "missing string field 'type'" : "unknown request type '" + type + "'");
}

json Session::on_spec() const {
  const EnvSpec s = env_.spec();
  json j;
  j["type"] = "spec";
  j["L"] = s.links;
  j["M"] = s.intersections;
  j["action_count"] = s.action_count;
  j["obs_length"] = s.links + s.intersections;
  j["t_c"] = s.control_interval;
  j["bounds"] = {{"q_ub", s.q_ub}, {"split_lower", s.split_lower}, {"split_upper", s.split_upper}};
  j["reward_variant"] = to_string(s.variant);
  j["episode_steps"] = env_.config().control_steps();
  return j;
}

json Session::on_reset(const json& request) {
  std::uint64_t seed = env_.config().seed;
  if (const auto s = request.find("seed"); s != request.end() && !s->is_null()) {
    if (!s->is_number_unsigned()) {
      return error_json("reset", ErrorCode::InvalidArgument, "seed must be a non-negative integer");
    }
    seed = s->get<std::uint64_t>();
  }
  const Observation obs = env_.reset(seed);
  json j;
  j["type"] = "reset";
  j["obs"] = obs.flat();
  j["info"] = to_json(env_.info());
  return j;
}

json Session::on_step(const json& request) {
  if (!env_.started()) {
    return error_json("step", ErrorCode::NotReset, "step before reset");
  }
  if (env_.done()) {
    return error_json("step", ErrorCode::EpisodeFinished, "episode finished; send reset");
  }
  const auto a = request.find("action");
  const auto count = static_cast<std::int64_t>(env_.spec().action_count);
  if (a == request.end() || !a->is_number_integer()) {
    return error_json("step", ErrorCode::InvalidAction, "action must be an integer");
  }
  const auto id = a->get<std::int64_t>();
  if (id < 0 || id >= count) {
    return error_json("step", ErrorCode::InvalidAction,
                      "action " + std::to_string(id) + " outside [0, " + std::to_string(count) + ")");
  }
  StepResult r = env_.step(ActionId{static_cast<int>(id)});
  json j;
  j["type"] = "step";
  j["obs"] = r.observation.flat();
  j["reward"] = r.reward;
  j["done"] = r.done;
  j["info"] = to_json(r.info);
  return j;
}

void serve_stream(const EpisodeConfig& cfg, std::istream& in, std::ostream& out) {
  Session session(cfg);
  std::string line;
  while (!session.closed() && std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    out << (line.size() > kMaxLineBytes ? session.line_too_long() : session.handle(line)) << '\n';
    out.flush();
  }
}

Endpoint parse_endpoint(std::string_view text) {
  Endpoint e;
  if (text == "stdio" || text == "-") {
    e.stdio = true;
    return e;
  }
  std::string_view rest = text;
  if (rest.starts_with("tcp://")) {
    rest.remove_prefix(6);
  }
  const auto colon = rest.rfind(':');
  if (colon == std::string_view::npos) {
    throw UsageError("endpoint '" + std::string(text) + "' must be stdio or host:port");
  }
  std::string_view host = rest.substr(0, colon);
  const std::string_view port = rest.substr(colon + 1);
  unsigned long value = 0;
  try {
    std::size_t used = 0;
    value = std::stoul(std::string(port), &used);
    if (used != port.size() || value > 65535) {
      throw std::invalid_argument("port");
    }
  } catch (const std::exception&) {
    throw UsageError("endpoint '" + std::string(text) + "' has an invalid port");
  }
  if (host.starts_with('[') && host.ends_with(']')) {
    host = host.substr(1, host.size() - 2);
  }
  if (!host.empty()) {
    e.host = std::string(host);
  }
  e.port = static_cast<std::uint16_t>(value);
  return e;
}

std::string to_string(const Endpoint& e) {
  return e.stdio ? "stdio" : "tcp://" + e.host + ":" + std::to_string(e.port);
}

}  // namespace gridtsc::bridge
