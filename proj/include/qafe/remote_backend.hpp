#pragma once

#include <fcntl.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <csignal>
#include <istream>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <vector>

#include <httplib.h>

#include "qafe/backend.hpp"

namespace qafe {

// ---------------------------------------------------------------------------
// Line-delimited JSON over stdio. The server emits its handshake as the
// first line, then answers one request line with one response line.
// ---------------------------------------------------------------------------

/// Serves a backend over an istream/ostream pair until EOF.
inline void run_stdio_server(Backend& backend, std::istream& in,
                             std::ostream& out) {
  out << to_json(backend.handshake()).dump() << "\n" << std::flush;
  std::string line;
  while (std::getline(in, line)) {
    if (trim_copy(line).empty()) continue;
    json reply;
    try {
      json request = json::parse(line);
      std::string op = request.at("op").get<std::string>();
      json response = backend.invoke(op, request.at("payload"));
      reply = json{{"ok", true}, {"response", response}};
    } catch (const Error& e) {
      reply = json{{"ok", false},
                   {"error", {{"code", error_code_name(e.code())},
                              {"message", e.what()}}}};
    } catch (const std::exception& e) {
      reply = json{{"ok", false},
                   {"error", {{"code", "Internal"}, {"message", e.what()}}}};
    }
    out << reply.dump() << "\n" << std::flush;
  }
}

inline json parse_wire_reply(const std::string& line) {
  json reply = json::parse(line);
  if (reply.value("ok", false)) return reply.at("response");
  std::string message = "backend error";
  if (reply.contains("error")) message = reply["error"].value("message", message);
  throw Error(ErrorCode::BackendUnavailable, message);
}

/// Client end of the stdio channel: spawns the backend command and speaks
/// line-delimited JSON over its stdin/stdout.
class StdioBackendClient : public Backend {
 public:
  explicit StdioBackendClient(const std::vector<std::string>& argv) {
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0)
      throw Error(ErrorCode::BackendUnavailable, "pipe failed");
    pid_ = fork();
    if (pid_ < 0) throw Error(ErrorCode::BackendUnavailable, "fork failed");
    if (pid_ == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]); close(to_child[1]);
      close(from_child[0]); close(from_child[1]);
      std::vector<char*> args;
      for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
      args.push_back(nullptr);
      execvp(args[0], args.data());
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
    std::string line = read_line();
    if (line.empty())
      throw Error(ErrorCode::BackendUnavailable, "no handshake from subprocess");
    handshake_ = handshake_from_json(json::parse(line));
  }

  ~StdioBackendClient() override {
    if (write_fd_ >= 0) close(write_fd_);
    if (read_fd_ >= 0) close(read_fd_);
    if (pid_ > 0) {
      int status = 0;
      waitpid(pid_, &status, 0);
    }
  }

  Handshake handshake() override { return handshake_; }

 protected:
  json do_invoke(const std::string& op, const json& payload) override {
    // A single stdio channel is inherently one-request-at-a-time.
    std::lock_guard<std::mutex> lock(mutex_);
    std::string line =
        json{{"op", op}, {"payload", payload}}.dump() + "\n";
    if (!write_all(line))
      throw Error(ErrorCode::BackendUnavailable, "subprocess write failed");
    std::string reply = read_line();
    if (reply.empty())
      throw Error(ErrorCode::BackendUnavailable, "subprocess closed the channel");
    return parse_wire_reply(reply);
  }

 private:
  bool write_all(const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
      ssize_t n = ::write(write_fd_, data.data() + off, data.size() - off);
      if (n <= 0) return false;
      off += static_cast<std::size_t>(n);
    }
    return true;
  }

  std::string read_line() {
    std::string line;
    char c;
    while (true) {
      auto pos = buffer_.find('\n');
      if (pos != std::string::npos) {
        line = buffer_.substr(0, pos);
        buffer_.erase(0, pos + 1);
        return line;
      }
      ssize_t n = ::read(read_fd_, &c, 1);
      if (n <= 0) return "";
      buffer_.push_back(c);
    }
  }

  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  std::string buffer_;
  std::mutex mutex_;
  Handshake handshake_;
};

// ---------------------------------------------------------------------------
// HTTP transport: GET /handshake, POST /invoke. Message bodies are the same
// JSON objects as on the stdio channel.
// ---------------------------------------------------------------------------

/// Hosts any backend behind a local HTTP endpoint.
class HttpBackendServer {
 public:
  explicit HttpBackendServer(BackendPtr backend) : backend_(std::move(backend)) {
    server_.Get("/handshake", [this](const httplib::Request&,
                                     httplib::Response& res) {
      res.set_content(to_json(backend_->handshake()).dump(), "application/json");
    });
    server_.Post("/invoke", [this](const httplib::Request& req,
                                   httplib::Response& res) {
      json reply;
      try {
        json request = json::parse(req.body);
        json response =
            backend_->invoke(request.at("op").get<std::string>(),
                             request.at("payload"));
        reply = json{{"ok", true}, {"response", response}};
      } catch (const Error& e) {
        reply = json{{"ok", false},
                     {"error", {{"code", error_code_name(e.code())},
                                {"message", e.what()}}}};
      } catch (const std::exception& e) {
        reply = json{{"ok", false},
                     {"error", {{"code", "Internal"}, {"message", e.what()}}}};
      }
      res.set_content(reply.dump(), "application/json");
    });
  }

  int bind_any_port(const std::string& host = "127.0.0.1") {
    return server_.bind_to_any_port(host);
  }

  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }

 private:
  BackendPtr backend_;
  httplib::Server server_;
};

class HttpBackendClient : public Backend {
 public:
  HttpBackendClient(const std::string& host, int port) : client_(host, port) {
    client_.set_connection_timeout(5);
    auto res = client_.Get("/handshake");
    if (!res || res->status != 200)
      throw Error(ErrorCode::BackendUnavailable, "handshake request failed");
    handshake_ = handshake_from_json(json::parse(res->body));
  }

  Handshake handshake() override { return handshake_; }

 protected:
  json do_invoke(const std::string& op, const json& payload) override {
    // One httplib::Client connection; requests are serialized here.
    std::lock_guard<std::mutex> lock(mutex_);
    auto res = client_.Post(
        "/invoke", json{{"op", op}, {"payload", payload}}.dump(),
        "application/json");
    if (!res || res->status != 200)
      throw Error(ErrorCode::BackendUnavailable, "invoke request failed");
    return parse_wire_reply(res->body);
  }

 private:
  httplib::Client client_;
  std::mutex mutex_;
  Handshake handshake_;
};

}  // namespace qafe
