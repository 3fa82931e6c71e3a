#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <unistd.h>

#include "dfnet/dataset.hpp"

namespace testing_support {

namespace fs = std::filesystem;

/// Fresh empty directory under the system temp dir, unique per process.
inline fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dfnet_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

inline std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline dfnet::DatasetConfig tiny_config() {
  dfnet::DatasetConfig c;
  c.seed = 7;
  c.frames = 6;
  c.sequence_length = 3;
  c.width = 64;
  c.height = 32;
  return c;
}

/// 64x32, two sequences of three frames; generated once per process.
inline fs::path tiny_dataset(bool with_flow) {
  static fs::path plain, flowed;
  fs::path& slot = with_flow ? flowed : plain;
  if (slot.empty()) {
    slot = scratch(with_flow ? "tiny_flow" : "tiny");
    const auto m = dfnet::generate_dataset(tiny_config(), slot);
    if (with_flow) dfnet::write_dataset_flows(slot, m);
  }
  return slot;
}

/// Every regular file under `root` as relative path -> bytes.
inline std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_bytes(e.path());
  return out;
}

}  // namespace testing_support
