#include "atsim/bridge.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "atsim/tcp_link.hpp"

namespace atsim {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

// Frames queued beyond this are dropped; a stalled console only loses views.
constexpr std::size_t kMaxOutbox = 32;

}  // namespace

std::optional<ConsoleEvent> parse_operator_frame(std::string_view text) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (!j.is_object() || !j.contains("t") || !j.at("t").is_string()) return std::nullopt;
  const std::string t = j.at("t").get<std::string>();
  if (t == "confirm_goal") return ConsoleEvent{ConsoleEventKind::ConfirmGoal, {}};
  if (t != "teleop") return std::nullopt;
  const auto v = j.find("v");
  const auto w = j.find("w");
  if (v == j.end() || w == j.end() || !v->is_number() || !w->is_number()) return std::nullopt;
  ConsoleEvent e{ConsoleEventKind::Teleop, {v->get<double>(), 0.0, w->get<double>()}};
  if (!std::isfinite(e.twist.v) || !std::isfinite(e.twist.w)) return std::nullopt;
  return e;
}

nlohmann::ordered_json make_view_frame(const TrialView& view) {
  nlohmann::ordered_json metrics;
  metrics["time"] = view.time;
  metrics["tracking_error"] = view.tracking_error;
  metrics["goal_distance"] = view.goal_distance;
  metrics["mode"] = view.mode;
  metrics["latency"] = view.latency ? nlohmann::ordered_json(*view.latency) : nlohmann::ordered_json();
  metrics["throughput_client"] = view.throughput_client;
  metrics["f_th"] = view.f_th;

  nlohmann::ordered_json j;
  j["t"] = "view";
  j["master_pose"] = {{"x", view.master_pose.x}, {"y", view.master_pose.y}, {"th", view.master_pose.theta}};
  j["scan"] = view.master_scan;
  j["amin"] = view.scan_angle_min;
  j["ainc"] = view.scan_angle_increment;
  j["rmax"] = view.scan_range_max;
  j["fmax"] = view.fmax;
  j["metrics"] = std::move(metrics);
  return j;
}

// ---------------------------------------------------------------------------
// ConsoleBridge

struct ConsoleBridge::Impl : std::enable_shared_from_this<ConsoleBridge::Impl> {
  struct Session {
    explicit Session(tcp::socket s) : ws(std::move(s)) {}
    websocket::stream<tcp::socket> ws;
    beast::flat_buffer buffer;
    std::deque<std::string> outbox;
    bool open{false};
  };

  asio::io_context io;
  asio::executor_work_guard<asio::io_context::executor_type> work{io.get_executor()};
  tcp::acceptor acceptor{io};
  std::thread thread;

  // io thread only
  std::shared_ptr<Session> active;
  std::vector<std::weak_ptr<beast::tcp_stream>> handshakes;

  mutable std::mutex mutex;  // guards events and connected_flag
  std::vector<ConsoleEvent> events;
  bool connected_flag{false};

  void push(ConsoleEvent e) {
    std::lock_guard lock(mutex);
    if (e.kind == ConsoleEventKind::Connected) connected_flag = true;
    if (e.kind == ConsoleEventKind::Disconnected) connected_flag = false;
    events.push_back(e);
  }

  void accept() {
    acceptor.async_accept([self = shared_from_this()](beast::error_code ec, tcp::socket socket) {
      if (ec) return;  // acceptor closed
      self->handshake(std::move(socket));
      self->accept();
    });
  }

  void handshake(tcp::socket socket) {
    auto stream = std::make_shared<beast::tcp_stream>(std::move(socket));
    auto buffer = std::make_shared<beast::flat_buffer>();
    auto req = std::make_shared<http::request<http::string_body>>();
    std::erase_if(handshakes, [](const auto& w) { return w.expired(); });
    handshakes.push_back(stream);
    stream->expires_after(std::chrono::seconds(10));
    http::async_read(*stream, *buffer, *req,
                     [self = shared_from_this(), stream, buffer, req](beast::error_code ec, std::size_t) {
                       if (ec) return;
                       stream->expires_never();
                       if (!websocket::is_upgrade(*req)) {
                         self->refuse(stream, *req, http::status::upgrade_required, "websocket upgrade required\n");
                       } else if (self->active) {
                         self->refuse(stream, *req, http::status::conflict, "an operator is already connected\n");
                       } else {
                         self->upgrade(stream->release_socket(), *req);
                       }
                     });
  }

  void refuse(const std::shared_ptr<beast::tcp_stream>& stream, const http::request<http::string_body>& req,
              http::status status, const std::string& body) {
    auto res = std::make_shared<http::response<http::string_body>>(status, req.version());
    res->set(http::field::content_type, "text/plain");
    res->keep_alive(false);
    res->body() = body;
    res->prepare_payload();
    http::async_write(*stream, *res, [stream, res](beast::error_code, std::size_t) {
      beast::error_code ignored;
      stream->socket().shutdown(tcp::socket::shutdown_both, ignored);
    });
  }

  void upgrade(tcp::socket socket, const http::request<http::string_body>& req) {
    auto s = std::make_shared<Session>(std::move(socket));
    active = s;
    s->ws.text(true);
    s->ws.async_accept(req, [self = shared_from_this(), s](beast::error_code ec) {
      if (ec) {
        if (self->active == s) self->active.reset();
        return;
      }
      s->open = true;
      self->push({ConsoleEventKind::Connected, {}});
      self->read(s);
      if (!s->outbox.empty()) self->write(s);
    });
  }

  void read(const std::shared_ptr<Session>& s) {
    s->ws.async_read(s->buffer, [self = shared_from_this(), s](beast::error_code ec, std::size_t) {
      if (ec) {
        self->drop(s);
        return;
      }
      const std::string text = beast::buffers_to_string(s->buffer.data());
      s->buffer.consume(s->buffer.size());
      if (auto e = parse_operator_frame(text)) self->push(*e);
      self->read(s);
    });
  }

  void drop(const std::shared_ptr<Session>& s) {
    if (!s->open) return;
    s->open = false;
    if (active == s) active.reset();
    push({ConsoleEventKind::Disconnected, {}});
  }

  void enqueue(std::string text) {
    if (!active) return;
    auto s = active;
    if (s->outbox.size() >= kMaxOutbox) return;
    s->outbox.push_back(std::move(text));
    if (s->open && s->outbox.size() == 1) write(s);
  }

  void write(const std::shared_ptr<Session>& s) {
    s->ws.async_write(asio::buffer(s->outbox.front()), [self = shared_from_this(), s](beast::error_code ec, std::size_t) {
      if (ec) {
        beast::error_code ignored;
        s->ws.next_layer().close(ignored);
        self->drop(s);
        return;
      }
      s->outbox.pop_front();
      if (!s->outbox.empty() && s->open) self->write(s);
    });
  }

  void shutdown() {
    asio::post(io, [self = shared_from_this()] {
      beast::error_code ignored;
      self->acceptor.close(ignored);
      for (const auto& w : self->handshakes) {
        if (auto stream = w.lock()) stream->socket().close(ignored);
      }
      if (self->active) self->active->ws.next_layer().close(ignored);
      self->active.reset();
      self->work.reset();
    });
  }
};

ConsoleBridge::ConsoleBridge(const std::string& host, std::uint16_t port) : impl_(std::make_shared<Impl>()) {
  const tcp::endpoint ep{asio::ip::make_address(host), port};
  impl_->acceptor.open(ep.protocol());
  impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
  impl_->acceptor.bind(ep);
  impl_->acceptor.listen();
  impl_->accept();
  impl_->thread = std::thread([impl = impl_] { impl->io.run(); });
}

ConsoleBridge::~ConsoleBridge() { stop(); }

void ConsoleBridge::stop() {
  if (!impl_->thread.joinable()) return;
  impl_->shutdown();
  impl_->thread.join();
}

std::uint16_t ConsoleBridge::port() const { return impl_->acceptor.local_endpoint().port(); }

bool ConsoleBridge::connected() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->connected_flag;
}

std::vector<ConsoleEvent> ConsoleBridge::drain() {
  std::lock_guard lock(impl_->mutex);
  return std::exchange(impl_->events, {});
}

void ConsoleBridge::send(std::string text) {
  asio::post(impl_->io, [impl = impl_, text = std::move(text)]() mutable { impl->enqueue(std::move(text)); });
}

// ---------------------------------------------------------------------------
// LiveServer

namespace {

const CaseConfig& check_serve_config(const CaseConfig& cfg) {
  cfg.validate();
  if (cfg.case_id != 2 && cfg.case_id != 3) throw std::invalid_argument("serve needs case 2 or 3");
  if (cfg.teleop_source != TeleopSource::Console) throw std::invalid_argument("serve needs teleop_source 'console'");
  return cfg;
}

std::unique_ptr<Link> make_live_link(const CaseConfig& cfg) {
  if (cfg.link.backend == LinkBackend::Socket) return std::make_unique<TcpLink>(cfg.link);
  return nullptr;
}

}  // namespace

LiveServer::LiveServer(CaseConfig cfg, ServeOptions opts)
    : cfg_(check_serve_config(cfg)), opts_(std::move(opts)), bridge_(opts_.host, opts_.port) {
  if (!(opts_.frame_rate > 0.0) || !(opts_.speed > 0.0)) {
    throw std::invalid_argument("frame_rate and speed must be positive");
  }
}

LiveServer::~LiveServer() { bridge_.stop(); }

std::uint16_t LiveServer::port() const { return bridge_.port(); }

void LiveServer::stop() { stop_ = true; }

LiveSnapshot LiveServer::snapshot() const {
  std::lock_guard lock(snap_mutex_);
  return snap_;
}

TrialMetrics LiveServer::run(std::ostream* transcript) {
  using clock = std::chrono::steady_clock;
  const auto idle = std::chrono::milliseconds(5);

  bool present = false;
  auto set_present = [&](bool p) {
    present = p;
    std::lock_guard lock(snap_mutex_);
    snap_.operator_connected = p;
  };
  auto greet = [&](const Trial& trial) {
    bridge_.send(nlohmann::ordered_json{{"t", "goal"}, {"x", cfg_.goal.x}, {"y", cfg_.goal.y}}.dump());
    bridge_.send(nlohmann::ordered_json{{"t", "room"}, {"world", nlohmann::json(trial.master_room())}}.dump());
  };

  // The clock starts with the first operator.
  while (!present && !stop_) {
    for (const auto& e : bridge_.drain()) {
      if (e.kind == ConsoleEventKind::Connected) set_present(true);
    }
    if (!present) std::this_thread::sleep_for(idle);
  }

  Trial trial(cfg_, make_live_link(cfg_));
  trial.set_transcript(transcript);
  if (present) greet(trial);
  {
    std::lock_guard lock(snap_mutex_);
    snap_.started = !stop_;
  }

  const double dt = cfg_.dt;
  const auto ticks_per_frame = std::max<std::int64_t>(1, std::llround(1.0 / (opts_.frame_rate * dt)));
  const auto start = clock::now();
  std::int64_t k = 0;
  while (!stop_ && !trial.finished()) {
    for (const auto& e : bridge_.drain()) {
      switch (e.kind) {
        case ConsoleEventKind::Connected:
          set_present(true);
          trial.set_operator_present(true);
          greet(trial);
          break;
        case ConsoleEventKind::Disconnected:
          set_present(false);
          trial.set_operator_present(false);
          break;
        case ConsoleEventKind::Teleop:
          trial.operator_twist(e.twist);
          break;
        case ConsoleEventKind::ConfirmGoal:
          trial.operator_confirm_goal();
          break;
      }
    }
    trial.step();
    ++k;

    std::uint64_t frames = 0;
    if (k % ticks_per_frame == 0 && present) {
      bridge_.send(make_view_frame(trial.view()).dump());
      frames = 1;
    }
    {
      const auto& sel = trial.last_tick().master_sel;
      std::lock_guard lock(snap_mutex_);
      snap_.time = trial.time();
      snap_.master_command = sel ? sel->twist : Twist{};
      snap_.frames_sent += frames;
    }
    std::this_thread::sleep_until(start + std::chrono::duration_cast<clock::duration>(
                                              std::chrono::duration<double>(static_cast<double>(k) * dt / opts_.speed)));
  }

  const TrialMetrics m = trial.metrics();
  if (trial.finished()) {
    bridge_.send(
        nlohmann::ordered_json{{"t", "status"}, {"mode", std::string(to_string(m.outcome))}, {"ts", trial.time()}}
            .dump());
  }
  {
    std::lock_guard lock(snap_mutex_);
    snap_.finished = true;
  }
  return m;
}

}  // namespace atsim
