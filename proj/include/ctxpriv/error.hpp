#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ctxpriv {

enum class Errc {
  invalid_argument,
  invalid_node,
  disconnected,
  overflow,
  domain,
  invalid_split,
  unknown_source,
  out_of_range,
  authentication_failure,
  protocol,
  invalid_seed,
  mixed_seed,
  singular_system,
  no_rendezvous,
  no_af_candidate,
  configuration,
  parse,
  validation,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::invalid_node: return "invalid-node";
    case Errc::disconnected: return "disconnected-graph";
    case Errc::overflow: return "overflow";
    case Errc::domain: return "domain";
    case Errc::invalid_split: return "invalid-split";
    case Errc::unknown_source: return "unknown-source";
    case Errc::out_of_range: return "out-of-range";
    case Errc::authentication_failure: return "authentication-failure";
    case Errc::protocol: return "protocol";
    case Errc::invalid_seed: return "invalid-seed";
    case Errc::mixed_seed: return "mixed-seed";
    case Errc::singular_system: return "singular-system";
    case Errc::no_rendezvous: return "no-rendezvous";
    case Errc::no_af_candidate: return "no-af-candidate";
    case Errc::configuration: return "configuration";
    case Errc::parse: return "parse";
    case Errc::validation: return "validation";
  }
  return "unknown";
}

// Every failure raised by the library carries one of the codes above so
// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace ctxpriv
