#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "atsim/trial.hpp"

namespace atsim {

enum class ConsoleEventKind { Connected, Disconnected, Teleop, ConfirmGoal };

struct ConsoleEvent {
  ConsoleEventKind kind{ConsoleEventKind::Connected};
  Twist twist;  // Teleop only
};

/// Parses one operator frame. Returns nullopt for anything that is not a
/// well-formed `teleop` or `confirm_goal` message.
std::optional<ConsoleEvent> parse_operator_frame(std::string_view text);

/// `{"t":"view",...}` state frame for the console.
nlohmann::ordered_json make_view_frame(const TrialView& view);

/// WebSocket endpoint for a single operator console. One io thread runs every
/// socket; inbound operator messages land in a single-consumer queue. A second
/// console gets HTTP 409 while one is connected, and plain HTTP gets 426.
class ConsoleBridge {
 public:
  /// Binds host:port (0 = ephemeral). Throws boost::system::system_error if
  /// the port is busy.
  ConsoleBridge(const std::string& host, std::uint16_t port);
  ~ConsoleBridge();
  ConsoleBridge(const ConsoleBridge&) = delete;
  ConsoleBridge& operator=(const ConsoleBridge&) = delete;

  std::uint16_t port() const;
  bool connected() const;
  /// Events since the last call, in arrival order.
  std::vector<ConsoleEvent> drain();
  /// Queues a text frame for the connected console; dropped when none is.
  void send(std::string text);
  void stop();

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

struct ServeOptions {
  std::string host{"127.0.0.1"};
  std::uint16_t port{8765};
  double frame_rate{10.0};
  /// Wall seconds per virtual second divisor; 1 is real time.
  double speed{1.0};
};

/// Thread-safe view of a live trial for monitoring and tests.
struct LiveSnapshot {
  bool started{false};
  bool finished{false};
  bool operator_connected{false};
  double time{0.0};
  /// Twist the Master MUX passed to the base last tick (zero when idle).
  Twist master_command;
  std::uint64_t frames_sent{0};
};

/// Hosts one console-driven trial: waits for the operator, then runs the trial
/// paced to the wall clock, forwarding operator input and streaming views.
class LiveServer {
 public:
  /// Throws std::invalid_argument unless the config is Case 2 or 3 with the
  /// Console teleop source.
  LiveServer(CaseConfig cfg, ServeOptions opts);
  ~LiveServer();

  std::uint16_t port() const;
  /// Blocks until the trial ends or stop() is called.
  TrialMetrics run(std::ostream* transcript = nullptr);
  /// Safe from any thread.
  void stop();
  LiveSnapshot snapshot() const;

 private:
  CaseConfig cfg_;
  ServeOptions opts_;
  ConsoleBridge bridge_;
  std::atomic<bool> stop_{false};
  mutable std::mutex snap_mutex_;
  LiveSnapshot snap_;
};

}  // namespace atsim
