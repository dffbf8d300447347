#include "sharpseg/checkpoint.hpp"

#include "sharpseg/binary_io.hpp"

namespace sharpseg {

namespace fs = std::filesystem;
using nlohmann::json;

void save_checkpoint(const fs::path& dir, std::span<const NamedTensor> tensors, const json& metadata,
                     StorageDtype dtype) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
  std::vector<unsigned char> payload;
  json entries = json::array();
  for (const auto& t : tensors) {
    const std::size_t offset = payload.size();
    if (dtype == StorageDtype::F64) {
      io::append_le<double>(payload, t.tensor.data());
    } else {
      std::vector<float> narrow(t.tensor.data().begin(), t.tensor.data().end());
      io::append_le<float>(payload, narrow);
    }
    entries.push_back({{"name", t.name},
                       {"shape", t.tensor.shape()},
                       {"dtype", dtype == StorageDtype::F64 ? "f64" : "f32"},
                       {"offset", offset},
                       {"nbytes", payload.size() - offset}});
  }
  json manifest = {{"format", "sharpseg-checkpoint"},
                   {"version", kCheckpointVersion},
                   {"byte_order", "little"},
                   {"payload", "payload.bin"},
                   {"payload_bytes", payload.size()},
                   {"tensors", entries},
                   {"metadata", metadata}};
  io::write_file(dir / "payload.bin", payload);
  io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& dir) {
  json manifest;
  try {
    manifest = json::parse(io::read_text(dir / "manifest.json"));
  } catch (const json::exception& e) {
    fail(ErrorCode::CorruptHeader, "manifest.json: " + std::string(e.what()));
  }
  Checkpoint out;
  std::vector<unsigned char> payload;
  try {
    if (manifest.at("format").get<std::string>() != "sharpseg-checkpoint") {
      fail(ErrorCode::CorruptHeader, "not a checkpoint manifest");
    }
    const int version = manifest.at("version").get<int>();
    if (version != kCheckpointVersion) {
      fail(ErrorCode::VersionMismatch, "checkpoint version " + std::to_string(version));
    }
    payload = io::read_file(dir / manifest.at("payload").get<std::string>());
    for (const auto& e : manifest.at("tensors")) {
      Shape shape = e.at("shape").get<Shape>();
      const std::string dtype = e.at("dtype").get<std::string>();
      const std::size_t offset = e.at("offset").get<std::size_t>();
      const std::size_t count = numel(shape);
      const std::size_t width = dtype == "f64" ? 8 : (dtype == "f32" ? 4 : 0);
      if (width == 0) fail(ErrorCode::CorruptHeader, "unknown dtype " + dtype);
      if (e.at("nbytes").get<std::size_t>() != count * width) {
        fail(ErrorCode::CorruptHeader, "byte count mismatch for " + e.at("name").get<std::string>());
      }
      if (offset + count * width > payload.size()) {
        fail(ErrorCode::TruncatedPayload, "payload too short for " + e.at("name").get<std::string>());
      }
      std::vector<double> values;
      if (width == 8) {
        values = io::read_le<double>(payload.data() + offset, count);
      } else {
        auto narrow = io::read_le<float>(payload.data() + offset, count);
        values.assign(narrow.begin(), narrow.end());
      }
      out.tensors.push_back({e.at("name").get<std::string>(), Tensor(std::move(shape), std::move(values))});
    }
    out.metadata = manifest.value("metadata", json::object());
  } catch (const json::exception& e) {
    fail(ErrorCode::CorruptHeader, "manifest.json: " + std::string(e.what()));
  }
  return out;
}

}  // namespace sharpseg
