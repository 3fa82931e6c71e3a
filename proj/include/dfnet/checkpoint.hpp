#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "dfnet/param_store.hpp"

namespace dfnet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string descriptor;  // architecture descriptor plus metadata, see network.hpp
  ParamStore<float> params;
};

// Layout, all integers little-endian u32:
//   "DFCK" | version | descriptor length | descriptor bytes |
//   repeated until EOF: name length | name | rank | extents... | float32 payload
void write_checkpoint(std::ostream& out, const std::string& descriptor, const ParamStore<float>& params);
void save_checkpoint(const std::filesystem::path& path, const std::string& descriptor,
                     const ParamStore<float>& params);

/// Throws DataError on bad magic, unknown version or truncation.
Checkpoint read_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dfnet
