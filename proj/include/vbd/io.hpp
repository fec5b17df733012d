#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vbd/diffusion/training.hpp"
#include "vbd/synth_corpus.hpp"
#include "vbd/video.hpp"

namespace vbd::io {

// Raised for malformed or corrupted files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// Writes to a temporary sibling, then renames over the target.
void atomic_write(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void atomic_write(const std::filesystem::path& path, std::string_view text);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

// Clip file: "BVID", u8 version 1, u8 reserved, u16 L H W C, u16 dtype 0,
// then L*H*W*C little-endian float32.
inline constexpr std::uint8_t kClipVersion = 1;
std::vector<std::uint8_t> encode_clip(const VideoTensor& v);
VideoTensor decode_clip(std::span<const std::uint8_t> bytes);
void write_clip(const std::filesystem::path& path, const VideoTensor& v);
VideoTensor read_clip(const std::filesystem::path& path);

// Corpus directory: manifest.jsonl (one record per pair), corpus.json
// (schema version, seed, count) and clips/NNNNNN.bvid.
struct ManifestRecord {
  long index = 0;
  std::string caption;
  corpus::CaptionSpec spec;
  bool poisoned = false;
  std::string target_id;  // empty for clean pairs
  std::string clip_path;  // relative to the corpus directory
  std::string sha256;
  bool operator==(const ManifestRecord&) const = default;
};

std::string manifest_line(const ManifestRecord& r);
ManifestRecord parse_manifest_line(std::string_view line);

void write_corpus(const corpus::Corpus& c, const std::filesystem::path& dir);
// Verifies every clip digest. Throws FormatError on a mismatch.
corpus::Corpus read_corpus(const std::filesystem::path& dir);

// Checkpoint: "BVCK", u32 format version, u64 metadata length, metadata JSON
// (schema version, schedule, vocabulary, model shape, layer blocks, freeze
// flag, payload digest), then the float32 parameter payload.
inline constexpr int kCheckpointVersion = 1;
std::vector<std::uint8_t> encode_checkpoint(const diffusion::DenoiserParams& p);
diffusion::DenoiserParams decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const diffusion::DenoiserParams& p);
diffusion::DenoiserParams load_checkpoint(const std::filesystem::path& path);

}  // namespace vbd::io
