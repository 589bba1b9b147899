#pragma once

// WebSocket transport for steering sessions. One io_context, one thread;
// every connection owns an independent SteerSession driven by a timer.

#include <acd/steer_session.hpp>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <deque>
#include <functional>
#include <iostream>
#include <memory>
#include <string>

namespace acd::steer {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

/// Splits "host:port"; a bare port binds all interfaces.
inline tcp::endpoint parse_endpoint(const std::string& addr) {
    const auto colon = addr.rfind(':');
    const std::string host = colon == std::string::npos ? "0.0.0.0" : addr.substr(0, colon);
    const std::string port = colon == std::string::npos ? addr : addr.substr(colon + 1);
    unsigned long p = 0;
    try {
        std::size_t used = 0;
        p = std::stoul(port, &used);
        if (used != port.size() || p > 65535) throw std::invalid_argument("port");
    } catch (const std::exception&) {
        throw ConfigError("invalid port in address '" + addr + "'");
    }
    boost::system::error_code ec;
    const auto ip = net::ip::make_address(host == "localhost" ? "127.0.0.1" : host, ec);
    if (ec) throw ConfigError("invalid host in address '" + addr + "'");
    return {ip, static_cast<unsigned short>(p)};
}

class Connection : public std::enable_shared_from_this<Connection> {
  public:
    Connection(tcp::socket socket, std::shared_ptr<const Portfolio> portfolio, SessionDefaults defaults)
        : ws_(std::move(socket)), timer_(ws_.get_executor()), session_(std::move(portfolio), defaults) {}

    void start() {
        ws_.text(true);
        ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
            if (ec) return;
            self->send(self->session_.state_frame());
            self->read();
            self->schedule();
        });
    }

  private:
    void read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return self->close();
            const std::string text = beast::buffers_to_string(self->buffer_.data());
            self->buffer_.consume(self->buffer_.size());
            for (auto& f : self->session_.handle(text)) self->send(std::move(f));
            self->schedule();
            self->read();
        });
    }

    // Re-arms the tick timer to match the session's current speed.
    void schedule() {
        if (closed_) return;
        timer_.cancel();
        if (!session_.running()) return;
        const auto period = std::chrono::duration<double>(1.0 / session_.steps_per_sec());
        timer_.expires_after(std::chrono::duration_cast<std::chrono::steady_clock::duration>(period));
        timer_.async_wait([self = shared_from_this(), gen = ++timer_gen_](beast::error_code ec) {
            if (ec || gen != self->timer_gen_ || self->closed_) return;
            for (auto& f : self->session_.tick()) self->send(std::move(f));
            self->schedule();
        });
    }

    void send(json frame) {
        if (closed_) return;
        outbox_.push_back(frame.dump());
        if (outbox_.size() == 1) write_next();
    }

    void write_next() {
        ws_.async_write(net::buffer(outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return self->close();
            self->outbox_.pop_front();
            if (!self->outbox_.empty()) self->write_next();
        });
    }

    void close() {
        closed_ = true;
        timer_.cancel();
        outbox_.clear();
    }

    websocket::stream<beast::tcp_stream> ws_;
    net::steady_timer timer_;
    beast::flat_buffer buffer_;
    std::deque<std::string> outbox_;
    SteerSession session_;
    std::uint64_t timer_gen_ = 0;
    bool closed_ = false;
};

class SteerServer {
  public:
    SteerServer(net::io_context& io, const tcp::endpoint& endpoint, std::shared_ptr<const Portfolio> portfolio,
                SessionDefaults defaults)
        : acceptor_(io), portfolio_(std::move(portfolio)), defaults_(defaults) {
        beast::error_code ec;
        acceptor_.open(endpoint.protocol(), ec);
        if (!ec) acceptor_.set_option(net::socket_base::reuse_address(true), ec);
        if (!ec) acceptor_.bind(endpoint, ec);
        if (!ec) acceptor_.listen(net::socket_base::max_listen_connections, ec);
        if (ec) {
            throw IoError("cannot bind " + endpoint.address().to_string() + ":" + std::to_string(endpoint.port()) +
                          ": " + ec.message());
        }
    }

    unsigned short port() const { return acceptor_.local_endpoint().port(); }

    void start() { accept(); }
    void stop() {
        beast::error_code ec;
        acceptor_.close(ec);
    }

  private:
    void accept() {
        acceptor_.async_accept([this](beast::error_code ec, tcp::socket socket) {
            if (ec) return;
            std::make_shared<Connection>(std::move(socket), portfolio_, defaults_)->start();
            accept();
        });
    }

    tcp::acceptor acceptor_;
    std::shared_ptr<const Portfolio> portfolio_;
    SessionDefaults defaults_;
};

/// Blocks until SIGINT/SIGTERM.
inline void serve(std::shared_ptr<const Portfolio> portfolio, const std::string& addr, SessionDefaults defaults) {
    net::io_context io;
    SteerServer server(io, parse_endpoint(addr), std::move(portfolio), defaults);
    server.start();
    std::cerr << "steering server listening on port " << server.port() << '\n';
    net::signal_set signals(io, SIGINT, SIGTERM);
    signals.async_wait([&](beast::error_code, int) {
        server.stop();
        io.stop();
    });
    io.run();
}

}  // namespace acd::steer
