#include <algorithm>
#include <limits>
#include <stdexcept>

#include "atsim/link.hpp"

namespace atsim {

std::string_view to_string(Side side) { return side == Side::Master ? "master" : "client"; }

void LinkConfig::validate() const {
  if (!(base_delay >= 0.0)) throw std::invalid_argument("link base_delay must be >= 0");
  if (!(jitter_stddev >= 0.0)) throw std::invalid_argument("link jitter_stddev must be >= 0");
  if (!(loss_prob >= 0.0 && loss_prob <= 1.0)) throw std::invalid_argument("link loss_prob must be in [0, 1]");
}

void to_json(nlohmann::json& j, const LinkConfig& c) {
  j = {{"backend", c.backend == LinkBackend::Simulated ? "simulated" : "socket"},
       {"base_delay", c.base_delay},
       {"jitter_stddev", c.jitter_stddev},
       {"loss_prob", c.loss_prob},
       {"seed", c.seed},
       {"host", c.host},
       {"port", c.port}};
}

void from_json(const nlohmann::json& j, LinkConfig& c) {
  LinkConfig d;
  const std::string backend = j.value("backend", std::string("simulated"));
  if (backend == "simulated") d.backend = LinkBackend::Simulated;
  else if (backend == "socket") d.backend = LinkBackend::Socket;
  else throw std::invalid_argument("unknown link backend '" + backend + "'");
  d.base_delay = j.value("base_delay", d.base_delay);
  d.jitter_stddev = j.value("jitter_stddev", d.jitter_stddev);
  d.loss_prob = j.value("loss_prob", d.loss_prob);
  d.seed = j.value("seed", d.seed);
  d.host = j.value("host", d.host);
  d.port = j.value("port", d.port);
  d.validate();
  c = d;
}

void to_json(nlohmann::json& j, const LinkEvent& e) {
  j = {{"ev", "link"},   {"sent_at", e.sent_at}, {"from", to_string(e.from)}, {"topic", e.topic},
       {"seq", e.seq},   {"bytes", e.bytes},     {"dropped", e.dropped}};
  if (!e.dropped) j["deliver_at"] = e.deliver_at;
}

LinkSummary summarize(const LinkStats& stats, double window) {
  LinkSummary s;
  s.window = window;
  const auto& m = stats.master_to_client;
  const auto& c = stats.client_to_master;
  s.msgs_dropped = m.msgs_dropped + c.msgs_dropped;
  if (!stats.latency_samples.empty()) {
    double sum = 0.0;
    for (double x : stats.latency_samples) sum += x;
    s.latency_avg = sum / static_cast<double>(stats.latency_samples.size());
  }
  if (m.bytes_sent == 0 && c.bytes_sent == 0) return s;
  if (!(window > 0.0)) throw std::invalid_argument("link_stats window must be positive");
  const double k = 8.0 / window;
  s.master_throughput = k * static_cast<double>(m.bytes_sent + c.bytes_received);
  s.client_throughput = k * static_cast<double>(c.bytes_sent + m.bytes_received);
  s.master_throughput_loss = k * static_cast<double>(m.bytes_sent - m.bytes_received);
  s.client_throughput_loss = k * static_cast<double>(c.bytes_sent - c.bytes_received);
  return s;
}

SimLink::SimLink(LinkConfig config) : config_(std::move(config)), rng_(config_.seed) {
  config_.validate();
}

void SimLink::send(Side from, WireMessage msg) {
  if (!open_) throw std::logic_error("send on a closed link");
  enqueue(from, std::move(msg));
}

void SimLink::enqueue(Side from, WireMessage msg) {
  const std::size_t bytes = wire_size(msg);
  auto& dir = stats_.from(from);
  dir.bytes_sent += bytes;
  ++dir.msgs_sent;

  LinkEvent ev{msg.stamp, from, msg.topic, msg.seq, bytes, false, 0.0};
  const bool lost = config_.loss_prob > 0.0 &&
                    std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < config_.loss_prob;
  if (lost) {
    dir.bytes_dropped += bytes;
    ++dir.msgs_dropped;
    ev.dropped = true;
    transcript_.push_back(std::move(ev));
    return;
  }
  double delay = config_.base_delay;
  if (config_.jitter_stddev > 0.0) {
    delay += std::normal_distribution<double>(0.0, config_.jitter_stddev)(rng_);
  }
  double deliver_at = msg.stamp + std::max(0.0, delay);
  auto& last = last_delivery_[{from, msg.topic}];
  deliver_at = std::max(deliver_at, last);
  last = deliver_at;
  ev.deliver_at = deliver_at;
  transcript_.push_back(std::move(ev));
  queue_.push({deliver_at, order_++, from, bytes, std::move(msg)});
}

void SimLink::advance(double now) {
  while (!queue_.empty() && queue_.top().deliver_at <= now) {
    Pending p = queue_.top();
    queue_.pop();
    const Side to = peer(p.from);
    auto& dir = stats_.from(p.from);
    dir.bytes_received += p.bytes;
    ++dir.msgs_received;
    if (const auto* ping = std::get_if<PingBody>(&p.msg.body)) {
      // Answered at delivery time so the sample reflects link delay only.
      if (open_) enqueue(to, make_message(PongBody{ping->id}, p.deliver_at, ping->id));
    } else if (const auto* pong = std::get_if<PongBody>(&p.msg.body)) {
      const auto it = pings_.find({to, pong->id});
      if (it != pings_.end()) {
        stats_.latency_samples.push_back((p.deliver_at - it->second) / 2.0);
        pings_.erase(it);
      }
    } else {
      inbox_[static_cast<int>(to)].push_back(std::move(p.msg));
    }
  }
}

std::vector<WireMessage> SimLink::poll(Side to, double now) {
  advance(now);
  std::vector<WireMessage> out;
  out.swap(inbox_[static_cast<int>(to)]);
  return out;
}

void SimLink::ping(Side from, double now) {
  if (!open_) throw std::logic_error("ping on a closed link");
  const std::int64_t id = next_ping_id_++;
  pings_[{from, id}] = now;
  enqueue(from, make_message(PingBody{id}, now, id));
}

void SimLink::drain() { advance(std::numeric_limits<double>::infinity()); }

}  // namespace atsim
