#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "qafe/backend.hpp"
#include "qafe/digest.hpp"

namespace qafe {

/// Content-addressed inference cache. One JSON file per request, keyed by
/// the digest of (backend_id, op, canonical payload). Writes go through a
/// temp file plus atomic rename, so concurrent processes may share a
/// directory; identical keys carry identical responses, so last-writer-wins
/// is benign. Corrupt entries are quarantined and recomputed.
class CachedBackend : public Backend {
 public:
  CachedBackend(BackendPtr inner, std::filesystem::path dir)
      : inner_(std::move(inner)), dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
    backend_id_ = inner_->handshake().backend_id;
  }

  Handshake handshake() override { return inner_->handshake(); }

  static std::string cache_key(const std::string& backend_id,
                               const std::string& op, const json& payload) {
    json request{{"backend_id", backend_id}, {"op", op}, {"payload", payload}};
    return sha256_hex(request.dump());
  }

 protected:
  json do_invoke(const std::string& op, const json& payload) override {
    json request{{"backend_id", backend_id_}, {"op", op}, {"payload", payload}};
    std::string key = sha256_hex(request.dump());
    auto path = dir_ / (key + ".json");

    if (std::filesystem::exists(path)) {
      json stored;
      bool ok = false;
      try {
        std::ifstream in(path);
        in >> stored;
        ok = stored.contains("key") && stored.contains("request") &&
             stored.contains("response") &&
             stored["key"].get<std::string>() == key &&
             sha256_hex(stored["request"].dump()) == key;
      } catch (...) {
        ok = false;
      }
      if (ok) return stored["response"];
      quarantine(path);
    }

    json response = inner_->invoke(op, payload);
    json entry{{"key", key}, {"request", request}, {"response", response}};
    write_atomic(path, entry.dump());
    return response;
  }

 private:
  void quarantine(const std::filesystem::path& path) const {
    std::error_code ec;
    auto target = path;
    target += ".quarantine";
    std::filesystem::rename(path, target, ec);
    if (ec) std::filesystem::remove(path, ec);
  }

  void write_atomic(const std::filesystem::path& path,
                    const std::string& body) const {
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
      std::ofstream out(tmp, std::ios::trunc);
      out << body;
      if (!out)
        throw Error(ErrorCode::CacheCorruption,
                    "cannot write cache entry: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  }

  BackendPtr inner_;
  std::filesystem::path dir_;
  std::string backend_id_;
};

}  // namespace qafe
