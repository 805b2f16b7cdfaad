#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "atsim/types.hpp"

namespace atsim {

struct StampedTwist {
  Twist twist;
  double stamp{0.0};
  /// Sequence number of the message that carried the twist, if any.
  std::optional<std::int64_t> tag;
};

struct PrioritizedChannel {
  std::string name;
  int priority{0};
  double timeout{0.3};
  std::optional<StampedTwist> last_msg;
};

struct MuxSelection {
  std::string channel;
  Twist twist;
  std::optional<std::int64_t> tag;
};

inline constexpr int kFeedbackPriority = 100;
inline constexpr int kNavPriority = 10;
inline constexpr double kDefaultChannelTimeout = 0.3;

/// Latest-wins priority arbiter. Not thread-safe; the owning node serializes calls.
class VelocityMux {
 public:
  VelocityMux() = default;

  /// Standard two-channel setup: "fb" (100) over "nav" (10).
  static VelocityMux standard(double timeout = kDefaultChannelTimeout);
  /// `{"channels":[{"name":..,"priority":..,"timeout":..},...]}`
  static VelocityMux from_json(const nlohmann::json& config);

  void register_channel(const std::string& name, int priority, double timeout);
  void publish(const std::string& name, const Twist& twist, double stamp,
               std::optional<std::int64_t> tag = std::nullopt);
  std::optional<MuxSelection> select(double now);

  const std::vector<PrioritizedChannel>& channels() const { return channels_; }
  const std::optional<std::string>& active_channel() const { return active_; }
  bool has_channel(const std::string& name) const;

 private:
  PrioritizedChannel& find(const std::string& name);

  // Kept sorted by descending priority.
  std::vector<PrioritizedChannel> channels_;
  std::optional<std::string> active_;
};

}  // namespace atsim
