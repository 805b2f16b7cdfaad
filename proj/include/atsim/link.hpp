#pragma once

#include <cstdint>
#include <map>
#include <queue>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "atsim/wire.hpp"

namespace atsim {

enum class Side { Master, Client };

inline Side peer(Side s) { return s == Side::Master ? Side::Client : Side::Master; }
std::string_view to_string(Side side);

enum class LinkBackend { Simulated, Socket };

struct LinkConfig {
  LinkBackend backend{LinkBackend::Simulated};
  double base_delay{0.010};
  double jitter_stddev{0.002};
  double loss_prob{0.0};
  std::uint64_t seed{0};
  std::string host{"127.0.0.1"};
  /// 0 picks an ephemeral port.
  std::uint16_t port{0};

  void validate() const;
};

void to_json(nlohmann::json& j, const LinkConfig& c);
void from_json(const nlohmann::json& j, LinkConfig& c);

/// Byte and message counters for traffic originating at one side.
struct DirectionStats {
  std::uint64_t bytes_sent{0};
  std::uint64_t bytes_received{0};
  std::uint64_t bytes_dropped{0};
  std::uint64_t msgs_sent{0};
  std::uint64_t msgs_received{0};
  std::uint64_t msgs_dropped{0};
};

struct LinkStats {
  DirectionStats master_to_client;
  DirectionStats client_to_master;
  /// One-way latency samples (half the ping round trip), seconds.
  std::vector<double> latency_samples;

  const DirectionStats& from(Side side) const {
    return side == Side::Master ? master_to_client : client_to_master;
  }
  DirectionStats& from(Side side) { return side == Side::Master ? master_to_client : client_to_master; }
};

/// Rates over a window, bits per second.
struct LinkSummary {
  double window{0.0};
  /// Everything a side sent plus everything it received.
  double master_throughput{0.0};
  double client_throughput{0.0};
  /// Send rate minus peer receive rate for traffic originating at the side.
  double master_throughput_loss{0.0};
  double client_throughput_loss{0.0};
  double latency_avg{0.0};
  std::uint64_t msgs_dropped{0};

  double throughput(Side s) const { return s == Side::Master ? master_throughput : client_throughput; }
  double throughput_loss(Side s) const {
    return s == Side::Master ? master_throughput_loss : client_throughput_loss;
  }
};

/// Summary of cumulative counters over a window of `window` seconds. Throws
/// std::invalid_argument when the window is not positive and there was traffic.
LinkSummary summarize(const LinkStats& stats, double window);

/// Topic-based transport between the Master side and the Client side. Pings
/// are answered by the transport itself; pongs turn into latency samples.
class Link {
 public:
  virtual ~Link() = default;

  /// Throws std::logic_error once the link is closed.
  virtual void send(Side from, WireMessage msg) = 0;
  /// Messages for `to` deliverable by `now`, in delivery order.
  virtual std::vector<WireMessage> poll(Side to, double now) = 0;
  /// Sends a ping stamped `now` from `from`.
  virtual void ping(Side from, double now) = 0;
  virtual LinkStats stats() const = 0;
  virtual void close() = 0;
  virtual bool is_open() const = 0;
};

/// One record per send: what happened to the message.
struct LinkEvent {
  double sent_at{0.0};
  Side from{Side::Master};
  std::string topic;
  std::int64_t seq{0};
  std::size_t bytes{0};
  bool dropped{false};
  double deliver_at{0.0};
  friend bool operator==(const LinkEvent&, const LinkEvent&) = default;
};

void to_json(nlohmann::json& j, const LinkEvent& e);

/// In-process link on virtual time with seeded loss and Gaussian jitter
/// (truncated at zero delay). Delivery preserves send order per direction and
/// topic.
class SimLink final : public Link {
 public:
  explicit SimLink(LinkConfig config);

  void send(Side from, WireMessage msg) override;
  std::vector<WireMessage> poll(Side to, double now) override;
  void ping(Side from, double now) override;
  LinkStats stats() const override { return stats_; }
  void close() override { open_ = false; }
  bool is_open() const override { return open_; }

  /// Delivers everything still in flight. Messages stay in the inboxes.
  void drain();
  /// Messages in flight (not yet delivered).
  std::size_t in_flight() const { return queue_.size(); }
  const std::vector<LinkEvent>& transcript() const { return transcript_; }
  const LinkConfig& config() const { return config_; }

 private:
  struct Pending {
    double deliver_at;
    std::uint64_t order;
    Side from;
    std::size_t bytes;
    WireMessage msg;
  };
  struct Later {
    bool operator()(const Pending& a, const Pending& b) const {
      return a.deliver_at != b.deliver_at ? a.deliver_at > b.deliver_at : a.order > b.order;
    }
  };

  void enqueue(Side from, WireMessage msg);
  void advance(double now);

  LinkConfig config_;
  std::mt19937_64 rng_;
  bool open_{true};
  std::uint64_t order_{0};
  std::priority_queue<Pending, std::vector<Pending>, Later> queue_;
  std::map<std::pair<Side, std::string>, double> last_delivery_;
  std::vector<WireMessage> inbox_[2];
  std::map<std::pair<Side, std::int64_t>, double> pings_;
  std::int64_t next_ping_id_{1};
  LinkStats stats_;
  std::vector<LinkEvent> transcript_;
};

}  // namespace atsim
