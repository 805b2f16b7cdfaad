#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>

#include "atsim/link.hpp"

namespace atsim {

/// Stream-socket backend: newline-delimited JSON over a loopback TCP
/// connection, both ends hosted in this process. One reader thread per end;
/// writes are serialized per socket. Delivery runs on wall time, so poll()
/// ignores its `now` argument and returns whatever has arrived.
class TcpLink final : public Link {
 public:
  /// Binds config.host:config.port (0 = ephemeral) and connects the Client end
  /// to it. Throws boost::system::system_error if the port is busy.
  explicit TcpLink(LinkConfig config);
  ~TcpLink() override;

  TcpLink(const TcpLink&) = delete;
  TcpLink& operator=(const TcpLink&) = delete;

  void send(Side from, WireMessage msg) override;
  std::vector<WireMessage> poll(Side to, double now) override;
  void ping(Side from, double now) override;
  LinkStats stats() const override;
  void close() override;
  bool is_open() const override;

  std::uint16_t port() const { return port_; }

 private:
  struct End {
    std::unique_ptr<boost::asio::ip::tcp::socket> socket;
    std::mutex write_mutex;
    std::thread reader;
  };

  void write_line(Side from, const WireMessage& msg);
  void read_loop(Side at);
  double wall_now() const;

  LinkConfig config_;
  boost::asio::io_context io_;
  std::uint16_t port_{0};
  End ends_[2];
  std::chrono::steady_clock::time_point epoch_;

  mutable std::mutex mutex_;  // guards everything below
  bool open_{true};
  std::vector<WireMessage> inbox_[2];
  std::map<std::pair<Side, std::int64_t>, double> pings_;
  std::int64_t next_ping_id_{1};
  LinkStats stats_;
};

}  // namespace atsim
