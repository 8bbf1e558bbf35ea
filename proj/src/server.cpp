#include "pneumahand/server.hpp"

#include <chrono>
#include <deque>
#include <iostream>
#include <map>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

namespace pneumahand {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

constexpr std::size_t kMaxPendingWrites = 4096;

class Connection : public std::enable_shared_from_this<Connection> {
public:
  Connection(tcp::socket socket, ClientId id, CommandQueue& queue,
             std::map<ClientId, std::shared_ptr<Connection>>& registry)
      : ws_(std::move(socket)), id_(id), queue_(queue), registry_(registry) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->registry_[self->id_] = self;
      self->open_ = true;
      self->queue_.push(Inbound::Kind::Connect, self->id_);
      self->read();
    });
  }

  void send(std::shared_ptr<const std::string> text) {
    if (!open_) return;
    if (pending_.size() >= kMaxPendingWrites) {
      close();
      return;
    }
    pending_.push_back(std::move(text));
    if (pending_.size() == 1) write();
  }

  // Broadcasts start after the session's hello reaches this client.
  bool greeted() const { return greeted_; }
  void send_direct(std::shared_ptr<const std::string> text) {
    greeted_ = true;
    send(std::move(text));
  }

  void close() {
    if (!open_) return;
    open_ = false;
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->closed();
      self->queue_.push(Inbound::Kind::Message, self->id_, beast::buffers_to_string(self->buffer_.data()));
      self->buffer_.consume(self->buffer_.size());
      self->read();
    });
  }

  void write() {
    ws_.text(true);
    ws_.async_write(net::buffer(*pending_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) return self->closed();
                      self->pending_.pop_front();
                      if (!self->pending_.empty()) self->write();
                    });
  }

  void closed() {
    if (registry_.erase(id_)) queue_.push(Inbound::Kind::Disconnect, id_);
    open_ = false;
  }

  websocket::stream<beast::tcp_stream> ws_;
  ClientId id_;
  CommandQueue& queue_;
  std::map<ClientId, std::shared_ptr<Connection>>& registry_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> pending_;
  bool open_ = false;
  bool greeted_ = false;
};

}  // namespace

struct SessionServer::Impl {
  Impl(AppConfig c, unsigned short port, bool rt)
      : cfg(std::move(c)), acceptor(ioc, tcp::endpoint(net::ip::make_address("0.0.0.0"), port)),
        signals(ioc, SIGINT, SIGTERM), realtime(rt), session(cfg) {
    if (!cfg.session_file.empty() && std::filesystem::exists(cfg.session_file))
      session.restore(load_session(cfg.session_file));
  }

  void accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<Connection>(std::move(socket), ++next_id, queue, registry)->start();
      accept();
    });
  }

  void deliver(std::vector<Outbound> out) {
    for (auto& m : out) {
      auto text = std::make_shared<const std::string>(std::move(m.text));
      if (m.client) {
        if (auto it = registry.find(*m.client); it != registry.end()) it->second->send_direct(text);
      } else {
        for (auto& [id, c] : registry)
          if (c->greeted()) c->send(text);
      }
    }
  }

  void simulate(std::atomic<std::uint64_t>& tick_out) {
    using clock = std::chrono::steady_clock;
    const auto dt = std::chrono::duration<double>(cfg.rig.controller.tick());
    const auto start = clock::now();
    std::uint64_t n = 0;
    while (running) {
      try {
        session.tick(queue.drain());
      } catch (const std::exception& e) {
        std::cerr << "session error: " << e.what() << "\n";
      }
      tick_out = session.loop().tick();
      auto out = session.take_outbox();
      if (!out.empty()) net::post(ioc, [this, out = std::move(out)]() mutable { deliver(std::move(out)); });
      ++n;
      if (realtime) std::this_thread::sleep_until(start + std::chrono::duration_cast<clock::duration>(dt * n));
    }
    try {
      session.persist();
    } catch (const std::exception& e) {
      std::cerr << "could not persist session: " << e.what() << "\n";
    }
  }

  AppConfig cfg;
  net::io_context ioc;
  tcp::acceptor acceptor;
  net::signal_set signals;
  bool realtime;
  Session session;
  CommandQueue queue;
  std::map<ClientId, std::shared_ptr<Connection>> registry;
  ClientId next_id = 0;
  std::atomic<bool> running{false};
  std::thread io_thread, sim_thread;
};

SessionServer::SessionServer(AppConfig cfg, unsigned short port, bool realtime)
    : impl_(std::make_unique<Impl>(std::move(cfg), port, realtime)) {}

SessionServer::~SessionServer() { stop(); }

unsigned short SessionServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void SessionServer::start() {
  if (impl_->running.exchange(true)) return;
  impl_->signals.async_wait([this](beast::error_code ec, int) {
    if (!ec) {
      impl_->running = false;
      impl_->ioc.stop();
    }
  });
  impl_->accept();
  impl_->io_thread = std::thread([this] { impl_->ioc.run(); });
  impl_->sim_thread = std::thread([this] { impl_->simulate(tick_); });
}

void SessionServer::stop() {
  impl_->running = false;
  impl_->ioc.stop();
  if (impl_->sim_thread.joinable()) impl_->sim_thread.join();
  if (impl_->io_thread.joinable()) impl_->io_thread.join();
}

void SessionServer::run() {
  start();
  if (impl_->io_thread.joinable()) impl_->io_thread.join();
  stop();
}

}  // namespace pneumahand
