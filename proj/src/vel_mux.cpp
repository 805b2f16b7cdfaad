#include "atsim/vel_mux.hpp"

#include <algorithm>
#include <stdexcept>

namespace atsim {

namespace {

// Stamps are sums of fixed steps; absorb rounding so an age of exactly one
// timeout still counts as fresh.
constexpr double kAgeTolerance = 1e-9;

}  // namespace

VelocityMux VelocityMux::standard(double timeout) {
  VelocityMux mux;
  mux.register_channel("fb", kFeedbackPriority, timeout);
  mux.register_channel("nav", kNavPriority, timeout);
  return mux;
}

VelocityMux VelocityMux::from_json(const nlohmann::json& config) {
  VelocityMux mux;
  for (const auto& ch : config.at("channels")) {
    mux.register_channel(ch.at("name").get<std::string>(), ch.at("priority").get<int>(),
                         ch.value("timeout", kDefaultChannelTimeout));
  }
  return mux;
}

void VelocityMux::register_channel(const std::string& name, int priority, double timeout) {
  if (!(timeout > 0.0)) throw std::invalid_argument("channel timeout must be positive");
  for (const auto& ch : channels_) {
    if (ch.name == name) throw std::invalid_argument("duplicate channel name: " + name);
    if (ch.priority == priority) {
      throw std::invalid_argument("duplicate channel priority " + std::to_string(priority));
    }
  }
  PrioritizedChannel ch{name, priority, timeout, std::nullopt};
  auto pos = std::find_if(channels_.begin(), channels_.end(),
                          [priority](const PrioritizedChannel& c) { return c.priority < priority; });
  channels_.insert(pos, std::move(ch));
}

bool VelocityMux::has_channel(const std::string& name) const {
  return std::any_of(channels_.begin(), channels_.end(),
                     [&](const PrioritizedChannel& c) { return c.name == name; });
}

PrioritizedChannel& VelocityMux::find(const std::string& name) {
  for (auto& ch : channels_) {
    if (ch.name == name) return ch;
  }
  throw std::invalid_argument("unknown channel: " + name);
}

void VelocityMux::publish(const std::string& name, const Twist& twist, double stamp,
                          std::optional<std::int64_t> tag) {
  auto& ch = find(name);
  if (ch.last_msg && stamp < ch.last_msg->stamp) {
    throw std::invalid_argument("stamp regression on channel " + name);
  }
  ch.last_msg = StampedTwist{twist, stamp, tag};
}

std::optional<MuxSelection> VelocityMux::select(double now) {
  for (const auto& ch : channels_) {
    if (!ch.last_msg) continue;
    if (now - ch.last_msg->stamp <= ch.timeout + kAgeTolerance) {
      active_ = ch.name;
      return MuxSelection{ch.name, ch.last_msg->twist, ch.last_msg->tag};
    }
  }
  active_.reset();
  return std::nullopt;
}

}  // namespace atsim
