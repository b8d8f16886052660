#ifndef GVFSWITCH_TEST_STREAM_HPP
#define GVFSWITCH_TEST_STREAM_HPP

#include "gvfswitch/engine.hpp"
#include "gvfswitch/offline.hpp"

// Scripted session run back through a fresh pipeline: the horde's input.
inline std::vector<gvfswitch::TickInput> recorded_stream(const gvfswitch::EngineConfig& config, std::int64_t ticks) {
  const auto log = gvfswitch::simulate_session(config, ticks);
  gvfswitch::SignalPipeline pipeline(config.pipeline);
  std::vector<gvfswitch::TickInput> out;
  for (const auto& r : log.records) {
    auto step = pipeline.step(r.sample);
    out.push_back({r.sample, step.processed, step.state});
  }
  return out;
}

#endif
