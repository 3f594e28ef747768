#pragma once

#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "qafe/backend.hpp"

namespace qafe {

/// Fixture-table backend: responses are looked up by (op, canonical payload).
/// Any request without a pinned entry fails as BackendUnavailable, so tests
/// notice unscripted calls instead of silently passing.
class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(std::string backend_id = "scripted")
      : backend_id_(std::move(backend_id)) {}

  static std::shared_ptr<ScriptedBackend> from_json(const json& fixture) {
    auto b = std::make_shared<ScriptedBackend>(
        fixture.value("backend_id", std::string("scripted")));
    b->serialized_ = fixture.value("serialized", false);
    for (const auto& entry : fixture.at("entries"))
      b->add(entry.at("op").get<std::string>(), entry.at("payload"),
             entry.at("response"));
    return b;
  }

  static std::shared_ptr<ScriptedBackend> from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
      throw Error(ErrorCode::BackendUnavailable, "cannot open fixture: " + path);
    json fixture;
    in >> fixture;
    return from_json(fixture);
  }

  void add(const std::string& op, const json& payload, const json& response) {
    entries_[key(op, payload)] = response;
    ops_.insert(op);
  }

  Handshake handshake() override {
    return Handshake{"qafe/1", std::vector<std::string>(ops_.begin(), ops_.end()),
                     serialized_, backend_id_};
  }

 protected:
  json do_invoke(const std::string& op, const json& payload) override {
    auto it = entries_.find(key(op, payload));
    if (it == entries_.end())
      throw Error(ErrorCode::BackendUnavailable,
                  "no scripted response for op=" + op +
                      " payload=" + payload.dump());
    return it->second;
  }

 private:
  static std::string key(const std::string& op, const json& payload) {
    return op + "\x1f" + payload.dump();
  }

  std::string backend_id_;
  bool serialized_ = false;
  std::set<std::string> ops_;
  std::map<std::string, json> entries_;
};

}  // namespace qafe
