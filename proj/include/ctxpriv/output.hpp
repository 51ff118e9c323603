#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <sodium.h>

#include "ctxpriv/error.hpp"
#include "ctxpriv/wire.hpp"

namespace ctxpriv::output {

// Environment variable naming the directory that receives CSV/JSON files.
inline constexpr const char* kOutDirEnv = "CTXPRIV_OUT_DIR";

struct Artifact {
  std::string filename;
  std::string content;
};

inline std::string sha256_hex(std::string_view data) {
  if (sodium_init() < 0) throw Error(Errc::invalid_argument, "libsodium failed to initialise");
  std::array<std::uint8_t, crypto_hash_sha256_BYTES> h{};
  crypto_hash_sha256(h.data(), reinterpret_cast<const unsigned char*>(data.data()), data.size());
  return wire::hex(h);
}

inline std::filesystem::path out_dir() {
  const char* env = std::getenv(kOutDirEnv);
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("out");
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::invalid_argument, "cannot write " + path.string());
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
}

// Writes every artifact plus `<stem>.summary.json` holding the config echo,
// the result object and a digest per artifact. Returns the summary text.
inline std::string write_with_summary(const std::filesystem::path& dir, const std::string& stem,
                                      const std::string& command, const nlohmann::json& config,
                                      const nlohmann::json& result, const std::vector<Artifact>& artifacts) {
  nlohmann::json digests = nlohmann::json::object();
  for (const auto& a : artifacts) {
    write_file(dir / a.filename, a.content);
    digests[a.filename] = sha256_hex(a.content);
  }
  const nlohmann::json summary{{"command", command}, {"config", config}, {"result", result}, {"digests", digests}};
  std::string text = summary.dump(2) + "\n";
  write_file(dir / (stem + ".summary.json"), text);
  return text;
}

}  // namespace ctxpriv::output
