#include "dfnet/checkpoint.hpp"

#include <fstream>
#include <limits>

#include "dfnet/binary_io.hpp"

namespace dfnet {
namespace {
constexpr char kMagic[4] = {'D', 'F', 'C', 'K'};
// Guards against absurd allocations when reading a corrupt file.
constexpr std::uint32_t kMaxStringBytes = 1u << 20;
}  // namespace

void write_checkpoint(std::ostream& out, const std::string& descriptor, const ParamStore<float>& params) {
  out.write(kMagic, 4);
  binio::put_u32(out, kCheckpointVersion);
  binio::put_u32(out, static_cast<std::uint32_t>(descriptor.size()));
  out.write(descriptor.data(), static_cast<std::streamsize>(descriptor.size()));
  for (const auto& e : params.entries()) {
    binio::put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    binio::put_u32(out, static_cast<std::uint32_t>(e.tensor.rank()));
    for (std::size_t d : e.tensor.shape()) binio::put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : e.tensor.data()) binio::put_f32(out, v);
  }
  if (!out) throw DataError("failed writing checkpoint");
}

void save_checkpoint(const std::filesystem::path& path, const std::string& descriptor,
                     const ParamStore<float>& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path.string());
  write_checkpoint(out, descriptor, params);
}

Checkpoint read_checkpoint(std::istream& in) {
  const std::string magic = binio::get_bytes(in, 4, "checkpoint magic");
  if (magic != std::string(kMagic, 4)) throw DataError("not a checkpoint file (bad magic)");
  const std::uint32_t version = binio::get_u32(in, "checkpoint version");
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t dlen = binio::get_u32(in, "descriptor length");
  if (dlen > kMaxStringBytes) throw DataError("checkpoint descriptor too long");
  Checkpoint ck{binio::get_bytes(in, dlen, "descriptor"), ParamStore<float>()};

  std::uint32_t name_len = 0;
  while (binio::try_get_u32(in, name_len, "parameter name length")) {
    if (name_len == 0 || name_len > kMaxStringBytes) throw DataError("bad parameter name length");
    std::string name = binio::get_bytes(in, name_len, "parameter name");
    const std::uint32_t rank = binio::get_u32(in, "parameter rank");
    if (rank == 0 || rank > 8) throw DataError("bad rank for parameter '" + name + "'");
    Shape shape;
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      shape.push_back(binio::get_u32(in, "parameter extent"));
      count *= shape.back();
      if (count > (1ull << 32)) throw DataError("parameter '" + name + "' too large");
    }
    std::vector<float> values(static_cast<std::size_t>(count));
    for (auto& v : values) v = binio::get_f32(in, "parameter payload");
    ck.params.add(std::move(name), Tensor<float>(std::move(shape), std::move(values)));
  }
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  return read_checkpoint(in);
}

}  // namespace dfnet
