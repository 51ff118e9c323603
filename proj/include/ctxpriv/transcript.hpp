#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctxpriv/netsim.hpp"

namespace ctxpriv {

// One frame as an observer of the radio would log it. Only `key_index` and
// `plaintext_value` are readable without a key; `plaintext_value` is set
// solely for frames that deliberately travel unsealed.
struct FrameRecord {
  std::string kind;
  NodeId sender;
  NodeId receiver;
  std::optional<std::uint32_t> key_index;
  std::string wire_hex;
  std::optional<std::uint64_t> plaintext_value;
  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

struct Transcript {
  std::vector<std::string> events;
  std::vector<FrameRecord> frames;

  void event(std::string name) { events.push_back(std::move(name)); }
  void frame(FrameRecord record) { frames.push_back(std::move(record)); }

  bool has_event_prefix(std::string_view prefix) const {
    for (const auto& e : events) {
      if (e.starts_with(prefix)) return true;
    }
    return false;
  }

  friend bool operator==(const Transcript&, const Transcript&) = default;
};

inline nlohmann::json to_json(const FrameRecord& f) {
  nlohmann::json j{{"kind", f.kind}, {"sender", f.sender.index}, {"receiver", f.receiver.index}, {"wire", f.wire_hex}};
  j["key_index"] = f.key_index ? nlohmann::json(*f.key_index) : nlohmann::json(nullptr);
  j["plaintext_value"] = f.plaintext_value ? nlohmann::json(*f.plaintext_value) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const Transcript& t) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : t.frames) frames.push_back(to_json(f));
  return {{"events", t.events}, {"frames", frames}};
}

}  // namespace ctxpriv
