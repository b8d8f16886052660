#include "gvfswitch/server.hpp"

#include <algorithm>
#include <atomic>
#include <deque>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

namespace gvfswitch {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

class Session;

std::string mime_type(const std::string& path) {
  auto ends = [&](const char* ext) {
    const std::string e(ext);
    return path.size() >= e.size() && path.compare(path.size() - e.size(), e.size(), e) == 0;
  };
  if (ends(".html")) return "text/html";
  if (ends(".js")) return "application/javascript";
  if (ends(".css")) return "text/css";
  if (ends(".json")) return "application/json";
  if (ends(".svg")) return "image/svg+xml";
  if (ends(".png")) return "image/png";
  return "application/octet-stream";
}

}  // namespace

struct TelemetryServer::Impl {
  Impl(ServerOptions o, BoundedQueue<Command>& c, std::function<std::string(const std::string&)> h)
      : options(std::move(o)), commands(c), hello(std::move(h)), telemetry(options.telemetry_capacity) {}

  void accept();
  void on_open(const std::shared_ptr<Session>& s);
  void on_message(int id, const std::string& text);
  void remove(int id);
  void pump();
  void send_to(int id, Outbound message);

  ServerOptions options;
  BoundedQueue<Command>& commands;
  std::function<std::string(const std::string&)> hello;
  BoundedQueue<Outbound> telemetry;

  net::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  std::thread thread;
  std::atomic<bool> pump_pending{false};
  std::atomic<std::size_t> clients{0};
  std::atomic<unsigned short> bound_port{0};

  // I/O thread only
  std::map<int, std::shared_ptr<Session>> sessions;
  int next_id = 1;
  int pilot = 0;
};

namespace {

class Session : public std::enable_shared_from_this<Session> {
 public:
  Session(TelemetryServer::Impl& server, tcp::socket socket, int id)
      : server_(server), stream_(std::move(socket)), id_(id) {}

  int id() const { return id_; }

  void run() {
    http::async_read(stream_, buffer_, request_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_request(ec); });
  }

  void send(Outbound message) {
    if (!ws_) return;
    if (queue_.size() >= server_.options.client_capacity) {
      // Drop the oldest state message that is not mid-write; else the oldest.
      auto first = queue_.begin() + (writing_ ? 1 : 0);
      auto victim = std::find_if(first, queue_.end(), [](const Outbound& o) { return o.droppable; });
      if (victim == queue_.end()) victim = first;
      if (victim != queue_.end()) queue_.erase(victim);
    }
    queue_.push_back(std::move(message));
    if (!writing_) write_next();
  }

  void close() {
    beast::error_code ec;
    if (ws_) {
      beast::get_lowest_layer(*ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
      beast::get_lowest_layer(*ws_).socket().close(ec);
    } else {
      stream_.socket().close(ec);
    }
  }

 private:
  void on_request(beast::error_code ec) {
    if (ec) return;
    if (websocket::is_upgrade(request_)) {
      ws_.emplace(std::move(stream_));
      beast::get_lowest_layer(*ws_).expires_never();
      ws_->set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
      ws_->async_accept(request_, [self = shared_from_this()](beast::error_code e) {
        if (e) return;
        self->server_.on_open(self);
        self->read_next();
      });
      return;
    }
    serve_static();
  }

  void serve_static() {
    auto res = std::make_shared<http::response<http::string_body>>();
    res->version(request_.version());
    res->keep_alive(false);
    std::string target(request_.target());
    const auto q = target.find('?');
    if (q != std::string::npos) target.resize(q);
    if (target == "/") target = "/index.html";
    bool found = false;
    if (!server_.options.static_dir.empty() && request_.method() == http::verb::get &&
        target.find("..") == std::string::npos) {
      std::ifstream in(server_.options.static_dir + target, std::ios::binary);
      if (in) {
        std::ostringstream body;
        body << in.rdbuf();
        res->result(http::status::ok);
        res->set(http::field::content_type, mime_type(target));
        res->body() = body.str();
        found = true;
      }
    }
    if (!found) {
      res->result(http::status::not_found);
      res->set(http::field::content_type, "text/plain");
      res->body() = "not found\n";
    }
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
      beast::error_code e;
      self->stream_.socket().shutdown(tcp::socket::shutdown_send, e);
    });
  }

  void read_next() {
    ws_->async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->server_.remove(self->id_);
        return;
      }
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->server_.on_message(self->id_, text);
      self->read_next();
    });
  }

  void write_next() {
    writing_ = true;
    ws_->text(true);
    ws_->async_write(net::buffer(queue_.front().text), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->writing_ = false;
        self->server_.remove(self->id_);
        return;
      }
      self->queue_.pop_front();
      if (self->queue_.empty()) {
        self->writing_ = false;
      } else {
        self->write_next();
      }
    });
  }

  TelemetryServer::Impl& server_;
  beast::tcp_stream stream_;
  std::optional<websocket::stream<beast::tcp_stream>> ws_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> request_;
  std::deque<Outbound> queue_;
  bool writing_ = false;
  int id_;
};

}  // namespace

void TelemetryServer::Impl::accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    std::make_shared<Session>(*this, std::move(socket), next_id++)->run();
    accept();
  });
}

void TelemetryServer::Impl::on_open(const std::shared_ptr<Session>& s) {
  sessions[s->id()] = s;
  clients = sessions.size();
  std::string role = "observer";
  if (pilot == 0) {
    pilot = s->id();
    role = "pilot";
  }
  s->send({s->id(), hello(role), false});
}

void TelemetryServer::Impl::on_message(int id, const std::string& text) {
  if (id != pilot) {
    send_to(id, {id, error_message("", "observers cannot send commands"), false});
    return;
  }
  Command c;
  try {
    c = parse_command(text);
  } catch (const CommandError& e) {
    send_to(id, {id, error_message(e.command(), e.what(), e.id()), false});
    return;
  }
  c.client = id;
  if (commands.size() >= commands.capacity()) {
    send_to(id, {id, error_message(command_name(c.kind), "command queue full", c.id), false});
    return;
  }
  commands.push(std::move(c));
}

void TelemetryServer::Impl::remove(int id) {
  const auto it = sessions.find(id);
  if (it == sessions.end()) return;
  it->second->close();
  sessions.erase(it);
  clients = sessions.size();
  if (pilot == id) pilot = 0;
}

void TelemetryServer::Impl::send_to(int id, Outbound message) {
  const auto it = sessions.find(id);
  if (it != sessions.end()) it->second->send(std::move(message));
}

void TelemetryServer::Impl::pump() {
  pump_pending = false;
  for (auto& m : telemetry.drain()) {
    if (m.client == 0) {
      for (auto& [id, s] : sessions) s->send(m);
    } else {
      send_to(m.client, std::move(m));
    }
  }
}

TelemetryServer::TelemetryServer(ServerOptions options, BoundedQueue<Command>& commands,
                                 std::function<std::string(const std::string&)> hello)
    : impl_(std::make_unique<Impl>(std::move(options), commands, std::move(hello))) {}

TelemetryServer::~TelemetryServer() { stop(); }

void TelemetryServer::start() {
  auto& im = *impl_;
  const tcp::endpoint endpoint(net::ip::make_address(im.options.address), im.options.port);
  im.acceptor.open(endpoint.protocol());
  im.acceptor.set_option(net::socket_base::reuse_address(true));
  im.acceptor.bind(endpoint);
  im.acceptor.listen(net::socket_base::max_listen_connections);
  im.bound_port = im.acceptor.local_endpoint().port();
  im.accept();
  im.thread = std::thread([&im] { im.ioc.run(); });
}

void TelemetryServer::stop() {
  auto& im = *impl_;
  if (!im.thread.joinable()) return;
  net::post(im.ioc, [&im] {
    beast::error_code ec;
    im.acceptor.close(ec);
    for (auto& [id, s] : im.sessions) s->close();
    im.sessions.clear();
    im.clients = 0;
    im.ioc.stop();
  });
  im.thread.join();
}

unsigned short TelemetryServer::port() const { return impl_->bound_port; }

void TelemetryServer::publish(const std::vector<Outbound>& messages) {
  auto& im = *impl_;
  for (const auto& m : messages) im.telemetry.push(m);
  if (!im.pump_pending.exchange(true)) net::post(im.ioc, [&im] { im.pump(); });
}

std::size_t TelemetryServer::client_count() const { return impl_->clients; }

std::uint64_t TelemetryServer::telemetry_dropped() const { return impl_->telemetry.dropped(); }

}  // namespace gvfswitch
