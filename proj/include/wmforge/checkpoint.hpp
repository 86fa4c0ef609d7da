#pragma once

#include "wmforge/prefnet.hpp"

#include <string>

namespace wmforge {

// Checkpoint layout, all integers little endian:
//   magic "WMFG", u32 format version,
//   u32 json length + UTF-8 json architecture descriptor,
//   u32 parameter count, then per parameter:
//     u32 name length + bytes, u32 rank, u32 extents..., raw f32 data.
// Tensors are written verbatim, so save/load round-trips bit for bit.

void save_model(const PrefModel& m, const std::string& path);
PrefModel load_model(const std::string& path);

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path);

} // namespace wmforge
