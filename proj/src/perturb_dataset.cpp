#include <filesystem>

#include "dfnet/dataset.hpp"
#include "dfnet/error.hpp"
#include "dfnet/perturb.hpp"

namespace fs = std::filesystem;

namespace dfnet {

SequenceManifest perturb_dataset(const fs::path& in_dir, const PerturbSpec& spec, const fs::path& out_dir,
                                 const FlowParams& flow_params) {
  spec.validate();
  if (fs::exists(out_dir) && fs::equivalent(in_dir, out_dir)) {
    throw UsageError("perturbation output directory must differ from the input");
  }
  SequenceManifest m = read_manifest(in_dir / "manifest.txt");
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "depth");

  for (const auto& f : m.frames) {
    const fs::path src = in_dir / f.image;
    const fs::path dst = out_dir / f.image;
    try {
      if (spec.kind == PerturbKind::None) {
        fs::copy_file(src, dst, fs::copy_options::overwrite_existing);
      } else {
        write_png(dst, apply_perturbation(load_frame_image(in_dir, f), spec));
      }
      fs::copy_file(in_dir / f.depth, out_dir / f.depth, fs::copy_options::overwrite_existing);
    } catch (const fs::filesystem_error& e) {
      throw DataError(std::string("perturbation I/O failed: ") + e.what());
    }
  }

  m.perturbation = spec.describe();
  m.config_hash = fnv1a_hex(m.config_hash + "|" + m.perturbation);
  write_manifest(out_dir / "manifest.txt", m);
  if (fs::is_directory(in_dir / "flow")) write_dataset_flows(out_dir, m, flow_params);
  return m;
}

}  // namespace dfnet
