#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "atsim/types.hpp"

namespace atsim {

enum class MsgKind { Twist, Odom, Scan, Fb, Ping, Pong, Goal, Status };

std::string_view to_string(MsgKind kind);
MsgKind msg_kind_from_string(std::string_view name);

struct TwistBody {
  std::string channel;
  Twist twist;
  friend bool operator==(const TwistBody&, const TwistBody&) = default;
};

struct OdomBody {
  Pose2D pose;
  double v{0.0};
  double w{0.0};
  friend bool operator==(const OdomBody&, const OdomBody&) = default;
};

struct ScanBody {
  double angle_min{0.0};
  double angle_increment{0.0};
  double range_max{0.0};
  std::vector<double> ranges;
  friend bool operator==(const ScanBody&, const ScanBody&) = default;
};

/// Reactive feedback twist plus the force magnitude that triggered it.
struct FbBody {
  double vr{0.0};
  double wr{0.0};
  double fmax{0.0};
  friend bool operator==(const FbBody&, const FbBody&) = default;
};

struct PingBody {
  std::int64_t id{0};
  friend bool operator==(const PingBody&, const PingBody&) = default;
};

struct PongBody {
  std::int64_t id{0};
  friend bool operator==(const PongBody&, const PongBody&) = default;
};

struct GoalBody {
  Vec2 goal;
  friend bool operator==(const GoalBody&, const GoalBody&) = default;
};

struct StatusBody {
  std::string mode;
  friend bool operator==(const StatusBody&, const StatusBody&) = default;
};

// Alternative order matches MsgKind.
using WireBody = std::variant<TwistBody, OdomBody, ScanBody, FbBody, PingBody, PongBody, GoalBody, StatusBody>;

struct WireMessage {
  std::string topic;
  /// Sender virtual clock.
  double stamp{0.0};
  /// Per (sender, topic) sequence number. Ping/pong carry their id here too.
  std::int64_t seq{0};
  WireBody body;

  MsgKind kind() const { return static_cast<MsgKind>(body.index()); }
  friend bool operator==(const WireMessage&, const WireMessage&) = default;
};

/// Topic used when a message is built without an explicit one: "cmd_vel/<ch>"
/// for twists, the kind name otherwise.
std::string default_topic(const WireBody& body);

WireMessage make_message(WireBody body, double stamp, std::int64_t seq);

/// Exact wire object for the message, fields in protocol order.
nlohmann::ordered_json to_wire_json(const WireMessage& msg);
/// Inverse of to_wire_json. The topic is the default topic. Throws
/// std::invalid_argument on unknown kinds or missing fields.
WireMessage from_wire_json(const nlohmann::json& j);

/// One newline-terminated JSON line.
std::string encode_line(const WireMessage& msg);
/// Size of encode_line(msg) in bytes, used for all traffic accounting.
std::size_t wire_size(const WireMessage& msg);

}  // namespace atsim
