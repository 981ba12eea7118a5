#include "server.hpp"

#include <deque>
#include <iostream>

#include <boost/asio/dispatch.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/strand.hpp>
#include <boost/asio/thread_pool.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "gom/error.hpp"

namespace gom::app {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, std::shared_ptr<const AvatarBundle> avatar, const ViewState& initial,
             asio::thread_pool& renderers)
      : ws_(std::move(socket)), session_(std::move(avatar), initial), renderers_(renderers) {}

  void start() {
    asio::dispatch(ws_.get_executor(), [self = shared_from_this()] { self->accept(); });
  }

 private:
  struct Outgoing {
    bool binary;
    std::shared_ptr<const std::string> text;
    std::shared_ptr<const std::vector<std::uint8_t>> bytes;
  };

  void accept() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (!ec) self->read();
    });
  }

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->on_read(ec);
    });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      closed_ = true;
      return;
    }
    if (!ws_.got_text()) {
      buffer_.consume(buffer_.size());
      send_text(error_json("bad_message", "binary messages are not accepted"));
      read();
      return;
    }
    const std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    const Session::Outcome out = session_.handle(text);
    for (const std::string& r : out.replies) send_text(r);
    if (out.render) schedule_render();
    read();
  }

  // Latest state wins: while a render runs, newer states only mark it stale.
  void schedule_render() {
    if (rendering_) {
      stale_ = true;
      return;
    }
    rendering_ = true;
    stale_ = false;
    auto avatar = session_.avatar_ptr();
    ViewState snapshot = session_.state();
    const FrameFormat format = session_.format();
    asio::post(renderers_, [self = shared_from_this(), avatar, snapshot, format] {
      std::shared_ptr<std::vector<std::uint8_t>> bytes;
      RenderedFrame frame;
      std::string failure;
      try {
        frame = render_view(*avatar, snapshot);
        bytes = std::make_shared<std::vector<std::uint8_t>>(encode_frame(frame, format));
      } catch (const std::exception& e) {
        failure = e.what();
      }
      asio::post(self->ws_.get_executor(), [self, frame = std::move(frame), bytes, failure] {
        self->rendering_ = false;
        if (self->closed_) return;
        if (bytes) {
          self->session_.record_frame(frame);
          self->queue({true, nullptr, bytes});
        } else {
          self->send_text(error_json("render_failed", failure));
        }
        if (self->stale_) self->schedule_render();
      });
    });
  }

  void send_text(const std::string& text) {
    queue({false, std::make_shared<const std::string>(text), nullptr});
  }

  void queue(Outgoing msg) {
    outbox_.push_back(std::move(msg));
    if (outbox_.size() == 1) write_next();
  }

  void write_next() {
    if (closed_) {
      outbox_.clear();
      return;
    }
    const Outgoing& msg = outbox_.front();
    ws_.binary(msg.binary);
    auto done = [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->outbox_.pop_front();
      if (ec) {
        self->closed_ = true;
        self->outbox_.clear();
        return;
      }
      if (!self->outbox_.empty()) self->write_next();
    };
    if (msg.binary) {
      ws_.async_write(asio::buffer(*msg.bytes), std::move(done));
    } else {
      ws_.async_write(asio::buffer(*msg.text), std::move(done));
    }
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  Session session_;
  asio::thread_pool& renderers_;
  std::deque<Outgoing> outbox_;
  bool rendering_ = false;
  bool stale_ = false;
  bool closed_ = false;
};

}  // namespace

struct Server::Impl {
  std::shared_ptr<const AvatarBundle> avatar;
  ServerOptions options;
  asio::io_context io;
  tcp::acceptor acceptor{io};
  asio::thread_pool renderers;
  ViewState initial;

  Impl(std::shared_ptr<const AvatarBundle> a, const ServerOptions& o)
      : avatar(std::move(a)), options(o), renderers(std::max(1u, o.render_threads)) {}

  void accept() {
    acceptor.async_accept(asio::make_strand(io), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) {
        if (ec == asio::error::operation_aborted) return;
      } else {
        std::make_shared<Connection>(std::move(socket), avatar, initial, renderers)->start();
      }
      accept();
    });
  }
};

Server::Server(std::shared_ptr<const AvatarBundle> avatar, const std::string& address,
               std::uint16_t port, const ServerOptions& options)
    : impl_(std::make_unique<Impl>(std::move(avatar), options)) {
  impl_->initial.pose = Pose::identity(impl_->avatar->avatar.rig.joint_count());
  impl_->initial.camera = default_camera(impl_->avatar->avatar, options.width, options.height);
  const std::string where = address + ":" + std::to_string(port);
  beast::error_code ec;
  const auto ip = asio::ip::make_address(address, ec);
  if (ec) throw IoError(where, "bad bind address: " + ec.message());
  const tcp::endpoint endpoint(ip, port);
  auto& a = impl_->acceptor;
  a.open(endpoint.protocol(), ec);
  if (!ec) a.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) a.bind(endpoint, ec);
  if (!ec) a.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) throw IoError(where, "cannot listen: " + ec.message());
  impl_->accept();
}

Server::~Server() {
  stop();
  impl_->renderers.join();
}

std::uint16_t Server::port() const { return impl_->acceptor.local_endpoint().port(); }

void Server::run() { impl_->io.run(); }

void Server::stop() {
  asio::post(impl_->io, [this] {
    beast::error_code ec;
    impl_->acceptor.close(ec);
  });
  impl_->io.stop();
}

std::pair<std::string, std::uint16_t> parse_bind_address(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
    throw ArgumentError("bind address must look like host:port, got \"" + text + "\"");
  }
  std::string host = text.substr(0, colon);
  if (host.size() > 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  if (host == "localhost") host = "127.0.0.1";
  const std::string port = text.substr(colon + 1);
  if (port.find_first_not_of("0123456789") != std::string::npos || port.size() > 5 ||
      std::stoul(port) > 65535) {
    throw ArgumentError("bad port in bind address \"" + text + "\"");
  }
  return {host, static_cast<std::uint16_t>(std::stoul(port))};
}

}  // namespace gom::app
