#include "atsim/wire.hpp"

#include <array>
#include <stdexcept>

namespace atsim {

namespace {

constexpr std::array<std::string_view, 8> kKindNames = {"twist", "odom", "scan", "fb",
                                                        "ping",  "pong", "goal", "status"};

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double num(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number()) {
    throw std::invalid_argument(std::string("wire message missing numeric field '") + key + "'");
  }
  return it->get<double>();
}

std::int64_t integer(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number_integer()) {
    throw std::invalid_argument(std::string("wire message missing integer field '") + key + "'");
  }
  return it->get<std::int64_t>();
}

std::string text(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw std::invalid_argument(std::string("wire message missing string field '") + key + "'");
  }
  return it->get<std::string>();
}

}  // namespace

std::string_view to_string(MsgKind kind) { return kKindNames.at(static_cast<std::size_t>(kind)); }

MsgKind msg_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<MsgKind>(i);
  }
  throw std::invalid_argument("unknown wire message kind '" + std::string(name) + "'");
}

std::string default_topic(const WireBody& body) {
  if (const auto* t = std::get_if<TwistBody>(&body)) return "cmd_vel/" + t->channel;
  return std::string(kKindNames.at(body.index()));
}

WireMessage make_message(WireBody body, double stamp, std::int64_t seq) {
  WireMessage msg;
  msg.topic = default_topic(body);
  msg.stamp = stamp;
  msg.seq = seq;
  msg.body = std::move(body);
  return msg;
}

nlohmann::ordered_json to_wire_json(const WireMessage& msg) {
  nlohmann::ordered_json j;
  j["t"] = to_string(msg.kind());
  std::visit(Overloaded{
                 [&](const TwistBody& b) {
                   j["ch"] = b.channel;
                   j["v"] = b.twist.v;
                   j["vy"] = b.twist.vy;
                   j["w"] = b.twist.w;
                   j["ts"] = msg.stamp;
                   j["seq"] = msg.seq;
                 },
                 [&](const OdomBody& b) {
                   j["x"] = b.pose.x;
                   j["y"] = b.pose.y;
                   j["th"] = b.pose.theta;
                   j["v"] = b.v;
                   j["w"] = b.w;
                   j["ts"] = msg.stamp;
                   j["seq"] = msg.seq;
                 },
                 [&](const ScanBody& b) {
                   j["amin"] = b.angle_min;
                   j["ainc"] = b.angle_increment;
                   j["rmax"] = b.range_max;
                   j["r"] = b.ranges;
                   j["ts"] = msg.stamp;
                   j["seq"] = msg.seq;
                 },
                 [&](const FbBody& b) {
                   j["vr"] = b.vr;
                   j["wr"] = b.wr;
                   j["fmax"] = b.fmax;
                   j["ts"] = msg.stamp;
                   j["seq"] = msg.seq;
                 },
                 [&](const PingBody& b) {
                   j["id"] = b.id;
                   j["ts"] = msg.stamp;
                 },
                 [&](const PongBody& b) {
                   j["id"] = b.id;
                   j["ts"] = msg.stamp;
                 },
                 [&](const GoalBody& b) {
                   j["x"] = b.goal.x;
                   j["y"] = b.goal.y;
                 },
                 [&](const StatusBody& b) {
                   j["mode"] = b.mode;
                   j["ts"] = msg.stamp;
                 },
             },
             msg.body);
  return j;
}

WireMessage from_wire_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("wire message must be a JSON object");
  const MsgKind kind = msg_kind_from_string(text(j, "t"));
  WireMessage msg;
  switch (kind) {
    case MsgKind::Twist:
      msg.body = TwistBody{text(j, "ch"), {num(j, "v"), num(j, "vy"), num(j, "w")}};
      break;
    case MsgKind::Odom:
      msg.body = OdomBody{{num(j, "x"), num(j, "y"), num(j, "th")}, num(j, "v"), num(j, "w")};
      break;
    case MsgKind::Scan: {
      ScanBody b{num(j, "amin"), num(j, "ainc"), num(j, "rmax"), {}};
      const auto it = j.find("r");
      if (it == j.end() || !it->is_array()) throw std::invalid_argument("scan message missing 'r'");
      b.ranges = it->get<std::vector<double>>();
      msg.body = std::move(b);
      break;
    }
    case MsgKind::Fb:
      msg.body = FbBody{num(j, "vr"), num(j, "wr"), num(j, "fmax")};
      break;
    case MsgKind::Ping:
      msg.body = PingBody{integer(j, "id")};
      break;
    case MsgKind::Pong:
      msg.body = PongBody{integer(j, "id")};
      break;
    case MsgKind::Goal:
      msg.body = GoalBody{{num(j, "x"), num(j, "y")}};
      break;
    case MsgKind::Status:
      msg.body = StatusBody{text(j, "mode")};
      break;
  }
  if (kind != MsgKind::Goal) msg.stamp = num(j, "ts");
  if (kind == MsgKind::Ping || kind == MsgKind::Pong) {
    msg.seq = integer(j, "id");
  } else if (kind != MsgKind::Goal && kind != MsgKind::Status) {
    msg.seq = integer(j, "seq");
  }
  msg.topic = default_topic(msg.body);
  return msg;
}

std::string encode_line(const WireMessage& msg) { return to_wire_json(msg).dump() + "\n"; }

std::size_t wire_size(const WireMessage& msg) { return encode_line(msg).size(); }

}  // namespace atsim
