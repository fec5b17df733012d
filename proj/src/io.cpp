#include "vbd/io.hpp"

#include <openssl/evp.h>
#include <unistd.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

namespace vbd::io {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr char kClipMagic[4] = {'B', 'V', 'I', 'D'};
constexpr char kCkptMagic[4] = {'B', 'V', 'C', 'K'};
constexpr std::size_t kClipHeader = 16;

void put_u16(std::vector<std::uint8_t>& b, std::size_t at, std::uint16_t v) {
  b[at] = static_cast<std::uint8_t>(v & 0xFF);
  b[at + 1] = static_cast<std::uint8_t>(v >> 8);
}

std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

template <typename T>
void append_raw(std::vector<std::uint8_t>& b, const T& v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  b.insert(b.end(), p, p + sizeof(T));
}

template <typename T>
T read_raw(std::span<const std::uint8_t> b, std::size_t at) {
  T v;
  std::memcpy(&v, b.data() + at, sizeof(T));
  return v;
}

std::uint16_t dim16(int v, const char* what) {
  if (v <= 0 || v > 0xFFFF) throw std::invalid_argument(std::string("clip dimension out of range: ") + what);
  return static_cast<std::uint16_t>(v);
}

json spec_json(const corpus::CaptionSpec& s) {
  return json{{"color", corpus::to_string(s.color)},
              {"shape", corpus::to_string(s.shape)},
              {"direction", corpus::to_string(s.direction)},
              {"decor_seed", s.decor_seed}};
}

corpus::CaptionSpec spec_from_json(const json& j) {
  const auto c = corpus::parse_color(j.at("color").get<std::string>());
  const auto s = corpus::parse_shape(j.at("shape").get<std::string>());
  const auto d = corpus::parse_direction(j.at("direction").get<std::string>());
  if (!c || !s || !d) throw FormatError("manifest: unknown caption attribute");
  return {*c, *s, *d, j.at("decor_seed").get<std::uint64_t>()};
}

std::string clip_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "clips/%06zu.bvid", i);
  return buf;
}

}  // namespace

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xF]);
  }
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  return sha256_hex(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

void atomic_write(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw std::runtime_error("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw std::runtime_error("cannot rename into place: " + path.string());
  }
}

void atomic_write(const fs::path& path, std::string_view text) {
  atomic_write(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

std::vector<std::uint8_t> encode_clip(const VideoTensor& v) {
  const auto& s = v.shape();
  std::vector<std::uint8_t> b(kClipHeader);
  std::memcpy(b.data(), kClipMagic, 4);
  b[4] = kClipVersion;
  b[5] = 0;
  put_u16(b, 6, dim16(s.frames, "L"));
  put_u16(b, 8, dim16(s.height, "H"));
  put_u16(b, 10, dim16(s.width, "W"));
  put_u16(b, 12, dim16(s.channels, "C"));
  put_u16(b, 14, 0);
  const auto* p = reinterpret_cast<const std::uint8_t*>(v.data().data());
  b.insert(b.end(), p, p + v.data().size() * sizeof(float));
  return b;
}

VideoTensor decode_clip(std::span<const std::uint8_t> b) {
  if (b.size() < kClipHeader || std::memcmp(b.data(), kClipMagic, 4) != 0) throw FormatError("clip: bad magic");
  if (b[4] != kClipVersion) throw FormatError("clip: unsupported version " + std::to_string(b[4]));
  if (get_u16(b, 14) != 0) throw FormatError("clip: unsupported dtype");
  const VideoShape s{get_u16(b, 6), get_u16(b, 8), get_u16(b, 10), get_u16(b, 12)};
  if (s.frames < 2 || s.height < 1 || s.width < 1 || s.channels < 1) throw FormatError("clip: invalid shape");
  if (b.size() != kClipHeader + s.size() * sizeof(float)) throw FormatError("clip: payload size mismatch");
  std::vector<float> data(s.size());
  std::memcpy(data.data(), b.data() + kClipHeader, s.size() * sizeof(float));
  return VideoTensor(s, std::move(data));
}

void write_clip(const fs::path& path, const VideoTensor& v) { atomic_write(path, encode_clip(v)); }

VideoTensor read_clip(const fs::path& path) { return decode_clip(read_file(path)); }

std::string manifest_line(const ManifestRecord& r) {
  json j{{"index", r.index},
         {"caption", r.caption},
         {"spec", spec_json(r.spec)},
         {"poisoned", r.poisoned},
         {"target_id", r.target_id.empty() ? json(nullptr) : json(r.target_id)},
         {"clip_path", r.clip_path},
         {"sha256", r.sha256}};
  return j.dump();
}

ManifestRecord parse_manifest_line(std::string_view line) {
  try {
    const json j = json::parse(line);
    ManifestRecord r;
    r.index = j.at("index").get<long>();
    r.caption = j.at("caption").get<std::string>();
    r.spec = spec_from_json(j.at("spec"));
    r.poisoned = j.at("poisoned").get<bool>();
    if (!j.at("target_id").is_null()) r.target_id = j.at("target_id").get<std::string>();
    r.clip_path = j.at("clip_path").get<std::string>();
    r.sha256 = j.at("sha256").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
}

void write_corpus(const corpus::Corpus& c, const fs::path& dir) {
  fs::create_directories(dir / "clips");
  std::string manifest;
  for (std::size_t i = 0; i < c.pairs.size(); ++i) {
    const auto& p = c.pairs[i];
    const auto bytes = encode_clip(p.video);
    ManifestRecord r{static_cast<long>(i), p.caption, p.spec, p.poisoned, p.target_id.value_or(""), clip_name(i),
                     sha256_hex(bytes)};
    atomic_write(dir / r.clip_path, bytes);
    manifest += manifest_line(r);
    manifest += '\n';
  }
  atomic_write(dir / "manifest.jsonl", manifest);
  const json meta{{"schema_version", c.schema_version}, {"seed", c.seed}, {"count", c.pairs.size()}};
  atomic_write(dir / "corpus.json", meta.dump(2) + "\n");
}

corpus::Corpus read_corpus(const fs::path& dir) {
  corpus::Corpus c;
  json meta;
  try {
    const auto raw = read_file(dir / "corpus.json");
    meta = json::parse(raw.begin(), raw.end());
    c.schema_version = meta.at("schema_version").get<int>();
    c.seed = meta.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("corpus.json: ") + e.what());
  }
  if (c.schema_version != corpus::Corpus::kSchemaVersion) throw FormatError("corpus: unsupported schema version");
  std::ifstream in(dir / "manifest.jsonl");
  if (!in) throw std::runtime_error("cannot open: " + (dir / "manifest.jsonl").string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto r = parse_manifest_line(line);
    if (r.index != static_cast<long>(c.pairs.size())) throw FormatError("manifest: indices out of order");
    const auto bytes = read_file(dir / r.clip_path);
    if (sha256_hex(bytes) != r.sha256) throw FormatError("manifest: digest mismatch for " + r.clip_path);
    corpus::ClipPair p{r.caption, r.spec, decode_clip(bytes), r.poisoned, std::nullopt};
    if (!r.target_id.empty()) p.target_id = r.target_id;
    c.pairs.push_back(std::move(p));
  }
  if (c.pairs.size() != meta.at("count").get<std::size_t>()) throw FormatError("manifest: record count mismatch");
  return c;
}

std::vector<std::uint8_t> encode_checkpoint(const diffusion::DenoiserParams& p) {
  const auto lay = p.layout();
  if (p.values.size() != lay.total) throw std::invalid_argument("checkpoint: parameter count mismatch");
  const auto& mc = p.config;
  json blocks = json::array();
  for (const auto& b : lay.blocks) blocks.push_back({{"name", b.name}, {"offset", b.offset}, {"size", b.size}});
  const std::span<const std::uint8_t> payload(reinterpret_cast<const std::uint8_t*>(p.values.data()),
                                              p.values.size() * sizeof(float));
  const json meta{
      {"schema_version", kCheckpointVersion},
      {"schedule", {{"T", p.schedule.T}, {"beta_min", p.schedule.beta_min}, {"beta_max", p.schedule.beta_max}}},
      {"model",
       {{"frames", mc.frames},
        {"height", mc.height},
        {"width", mc.width},
        {"vocab", mc.vocab},
        {"embed_dim", mc.embed_dim},
        {"hidden_dim", mc.hidden_dim},
        {"cond_dim", mc.cond_dim},
        {"features", mc.features},
        {"timesteps", mc.timesteps},
        {"v_min", mc.v_min}}},
      {"vocabulary", p.vocab.tokens()},
      {"blocks", blocks},
      {"text_frozen", p.text_frozen},
      {"param_count", p.values.size()},
      {"payload_sha256", sha256_hex(payload)}};
  const std::string m = meta.dump();
  std::vector<std::uint8_t> b(kCkptMagic, kCkptMagic + 4);
  append_raw(b, static_cast<std::uint32_t>(kCheckpointVersion));
  append_raw(b, static_cast<std::uint64_t>(m.size()));
  b.insert(b.end(), m.begin(), m.end());
  b.insert(b.end(), payload.begin(), payload.end());
  return b;
}

diffusion::DenoiserParams decode_checkpoint(std::span<const std::uint8_t> b) {
  if (b.size() < 16 || std::memcmp(b.data(), kCkptMagic, 4) != 0) throw FormatError("checkpoint: bad magic");
  if (read_raw<std::uint32_t>(b, 4) != kCheckpointVersion) throw FormatError("checkpoint: unsupported version");
  const auto mlen = read_raw<std::uint64_t>(b, 8);
  if (mlen > b.size() - 16) throw FormatError("checkpoint: truncated metadata");
  json meta;
  try {
    meta = json::parse(b.begin() + 16, b.begin() + 16 + static_cast<std::ptrdiff_t>(mlen));
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  }
  try {
    if (meta.at("schema_version").get<int>() != kCheckpointVersion) {
      throw FormatError("checkpoint: unsupported schema version");
    }
    const auto& m = meta.at("model");
    diffusion::ModelConfig mc;
    mc.frames = m.at("frames").get<int>();
    mc.height = m.at("height").get<int>();
    mc.width = m.at("width").get<int>();
    mc.vocab = m.at("vocab").get<int>();
    mc.embed_dim = m.at("embed_dim").get<int>();
    mc.hidden_dim = m.at("hidden_dim").get<int>();
    mc.cond_dim = m.at("cond_dim").get<int>();
    mc.features = m.at("features").get<int>();
    mc.timesteps = m.at("timesteps").get<int>();
    mc.v_min = m.at("v_min").get<double>();
    const auto& s = meta.at("schedule");
    auto sched = diffusion::make_schedule(s.at("T").get<int>(), s.at("beta_min").get<double>(),
                                          s.at("beta_max").get<double>());
    auto vocab = text::Vocabulary::from_tokens(meta.at("vocabulary").get<std::vector<std::string>>());
    if (vocab.size() != mc.vocab) throw FormatError("checkpoint: vocabulary size mismatch");
    const diffusion::ParamLayout lay(mc);
    const auto count = meta.at("param_count").get<std::size_t>();
    if (count != lay.total) throw FormatError("checkpoint: layout does not match parameter count");
    if (b.size() - 16 - mlen != count * sizeof(float)) throw FormatError("checkpoint: payload size mismatch");
    const auto payload = b.subspan(16 + mlen);
    if (sha256_hex(payload) != meta.at("payload_sha256").get<std::string>()) {
      throw FormatError("checkpoint: payload checksum mismatch");
    }
    diffusion::DenoiserParams p{mc, std::move(vocab), std::move(sched), std::vector<float>(count),
                                meta.at("text_frozen").get<bool>()};
    std::memcpy(p.values.data(), payload.data(), payload.size());
    return p;
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const fs::path& path, const diffusion::DenoiserParams& p) {
  atomic_write(path, encode_checkpoint(p));
}

diffusion::DenoiserParams load_checkpoint(const fs::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace vbd::io
