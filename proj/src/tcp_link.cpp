#include "atsim/tcp_link.hpp"

#include <stdexcept>

namespace atsim {

namespace asio = boost::asio;
using asio::ip::tcp;

TcpLink::TcpLink(LinkConfig config) : config_(std::move(config)), epoch_(std::chrono::steady_clock::now()) {
  config_.validate();
  tcp::acceptor acceptor(io_, {asio::ip::make_address(config_.host), config_.port});
  port_ = acceptor.local_endpoint().port();

  ends_[static_cast<int>(Side::Client)].socket = std::make_unique<tcp::socket>(io_);
  ends_[static_cast<int>(Side::Master)].socket = std::make_unique<tcp::socket>(io_);
  boost::system::error_code accept_ec;
  std::thread accepter([&] { acceptor.accept(*ends_[static_cast<int>(Side::Master)].socket, accept_ec); });
  boost::system::error_code connect_ec;
  ends_[static_cast<int>(Side::Client)].socket->connect(acceptor.local_endpoint(), connect_ec);
  if (connect_ec) acceptor.close();
  accepter.join();
  if (connect_ec) throw boost::system::system_error(connect_ec);
  if (accept_ec) throw boost::system::system_error(accept_ec);
  for (auto& end : ends_) end.socket->set_option(tcp::no_delay(true));

  for (Side s : {Side::Master, Side::Client}) {
    ends_[static_cast<int>(s)].reader = std::thread([this, s] { read_loop(s); });
  }
}

TcpLink::~TcpLink() {
  close();
  for (auto& end : ends_) {
    if (end.reader.joinable()) end.reader.join();
  }
}

double TcpLink::wall_now() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_).count();
}

void TcpLink::write_line(Side from, const WireMessage& msg) {
  const std::string line = encode_line(msg);
  auto& end = ends_[static_cast<int>(from)];
  std::lock_guard write_lock(end.write_mutex);
  {
    // Counted before the write so the peer can never observe more received than sent.
    std::lock_guard lock(mutex_);
    auto& dir = stats_.from(from);
    dir.bytes_sent += line.size();
    ++dir.msgs_sent;
  }
  asio::write(*end.socket, asio::buffer(line));
}

void TcpLink::send(Side from, WireMessage msg) {
  if (!is_open()) throw std::logic_error("send on a closed link");
  write_line(from, msg);
}

void TcpLink::ping(Side from, double) {
  if (!is_open()) throw std::logic_error("ping on a closed link");
  std::int64_t id = 0;
  double stamp = 0.0;
  {
    std::lock_guard lock(mutex_);
    id = next_ping_id_++;
    stamp = wall_now();
    pings_[{from, id}] = stamp;
  }
  write_line(from, make_message(PingBody{id}, stamp, id));
}

void TcpLink::read_loop(Side at) {
  auto& socket = *ends_[static_cast<int>(at)].socket;
  const Side from = peer(at);
  asio::streambuf buf;
  while (true) {
    boost::system::error_code ec;
    const std::size_t n = asio::read_until(socket, buf, '\n', ec);
    if (ec) return;
    std::string line(asio::buffers_begin(buf.data()), asio::buffers_begin(buf.data()) + static_cast<std::ptrdiff_t>(n));
    buf.consume(n);
    const double now = wall_now();
    {
      std::lock_guard lock(mutex_);
      auto& dir = stats_.from(from);
      dir.bytes_received += n;
      ++dir.msgs_received;
    }
    WireMessage msg;
    try {
      msg = from_wire_json(nlohmann::json::parse(line));
    } catch (const std::exception&) {
      continue;  // malformed line: counted, then ignored
    }
    std::optional<std::int64_t> answer;
    {
      std::lock_guard lock(mutex_);
      if (const auto* ping = std::get_if<PingBody>(&msg.body)) {
        answer = ping->id;
      } else if (const auto* pong = std::get_if<PongBody>(&msg.body)) {
        const auto it = pings_.find({at, pong->id});
        if (it != pings_.end()) {
          stats_.latency_samples.push_back((now - it->second) / 2.0);
          pings_.erase(it);
        }
      } else {
        inbox_[static_cast<int>(at)].push_back(std::move(msg));
      }
    }
    if (answer && is_open()) {
      try {
        write_line(at, make_message(PongBody{*answer}, now, *answer));
      } catch (const boost::system::system_error&) {
        return;
      }
    }
  }
}

std::vector<WireMessage> TcpLink::poll(Side to, double) {
  std::lock_guard lock(mutex_);
  std::vector<WireMessage> out;
  out.swap(inbox_[static_cast<int>(to)]);
  return out;
}

LinkStats TcpLink::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

void TcpLink::close() {
  {
    std::lock_guard lock(mutex_);
    if (!open_) return;
    open_ = false;
  }
  for (auto& end : ends_) {
    if (!end.socket) continue;
    boost::system::error_code ec;
    end.socket->shutdown(tcp::socket::shutdown_both, ec);
  }
}

bool TcpLink::is_open() const {
  std::lock_guard lock(mutex_);
  return open_;
}

}  // namespace atsim
