#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qafe/error.hpp"

namespace qafe {

inline std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open " + path);
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = line;
    if (t.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(t));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::ConfigError,
                  path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

/// Writes a whole file through a temp file + rename, so readers never see
/// a partial artifact.
inline void write_file_atomic(const std::string& path, const std::string& body) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << body;
    if (!out) throw Error(ErrorCode::ConfigError, "cannot write " + path);
  }
  fs::rename(tmp, target);
}

inline void write_jsonl_atomic(const std::string& path,
                               const std::vector<nlohmann::json>& lines) {
  std::string body;
  for (const auto& j : lines) {
    body += j.dump();
    body += '\n';
  }
  write_file_atomic(path, body);
}

}  // namespace qafe
