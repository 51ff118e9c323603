// Two sources and an aggregator-forwarder compute x + y without either
// reading leaving its node in the clear.
#include <cstdio>
#include <cstdlib>

#include "ctxpriv/ppda.hpp"

int main(int argc, char** argv) {
  const std::uint64_t x = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 5;
  const std::uint64_t y = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 7;

  ctxpriv::SimRng rng(42, "sample");
  ctxpriv::Transcript log;
  ctxpriv::ppda::SppdaOptions opt;
  opt.transcript = &log;
  const auto round = ctxpriv::ppda::run_sppda({x}, {y}, {3}, rng, opt);

  std::printf("x + y = %llu\n", static_cast<unsigned long long>(round.result.pair_sum.value));
  std::printf("%zu frames on the air:\n", log.frames.size());
  for (const auto& f : log.frames) {
    std::printf("  %-22s %zu -> %zu  R_c=%u  %zu bytes\n", f.kind.c_str(), f.sender.value(), f.receiver.value(),
                f.key_index.value_or(0), f.wire_hex.size() / 2);
  }
}
