#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace cjtest {

struct MockReply {
  int status = 200;
  std::string content;
};

// Local chat-completions endpoint. The handler sees the parsed request and
// the 1-based call number.
class MockServer {
 public:
  using Handler = std::function<MockReply(const nlohmann::json& request, int call)>;

  explicit MockServer(Handler handler) : handler_(std::move(handler)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int n = ++calls_;
      {
        std::lock_guard lock(mu_);
        last_body_ = req.body;
        last_auth_ = req.get_header_value("Authorization");
      }
      const MockReply reply = handler_(nlohmann::json::parse(req.body), n);
      res.status = reply.status;
      if (reply.status == 200) {
        nlohmann::json body = {
            {"id", "mock"},
            {"choices", nlohmann::json::array({{{"index", 0},
                                                {"message", {{"role", "assistant"}, {"content", reply.content}}}}})}};
        res.set_content(body.dump(), "application/json");
      } else {
        res.set_content(R"({"error":{"message":"mock failure"}})", "application/json");
      }
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockServer() {
    server_.stop();
    thread_.join();
  }

  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int calls() const { return calls_; }
  void reset_calls() { calls_ = 0; }
  std::string last_body() const {
    std::lock_guard lock(mu_);
    return last_body_;
  }
  std::string last_auth() const {
    std::lock_guard lock(mu_);
    return last_auth_;
  }

 private:
  Handler handler_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> calls_{0};
  mutable std::mutex mu_;
  std::string last_body_;
  std::string last_auth_;
};

// Text shown after a "//Essay X: " label, up to the next blank-line label.
inline std::string essay_after(const std::string& prompt, const std::string& label) {
  const std::string marker = "//" + label + ": ";
  const auto start = prompt.find(marker);
  if (start == std::string::npos) return {};
  const auto from = start + marker.size();
  const auto end = prompt.find("\n\n//", from);
  return prompt.substr(from, end == std::string::npos ? std::string::npos : end - from);
}

// Judge that prefers the essay whose text has the higher planted quality.
inline MockServer::Handler planted_order_judge(std::map<std::string, double> quality_by_text) {
  return [q = std::move(quality_by_text)](const nlohmann::json& req, int) {
    const std::string prompt = req.at("messages").at(0).at("content").get<std::string>();
    const std::string a = essay_after(prompt, "Essay A");
    const std::string b = essay_after(prompt, "Essay B");
    const auto ia = q.find(a);
    const auto ib = q.find(b);
    if (ia == q.end() || ib == q.end()) return MockReply{200, "I cannot tell."};
    return MockReply{200, ia->second >= ib->second ? "Essay A" : "Essay B"};
  };
}

}  // namespace cjtest
