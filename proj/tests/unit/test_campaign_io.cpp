#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "vbd/io.hpp"
#include "vbd/poison_campaign.hpp"

using namespace vbd;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("vbd_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<campaign::Backdoor> three_backdoors() {
  const auto vocab = text::Vocabulary::standard();
  return {{text::default_trigger(vocab), forge::TargetSpec::stc(forge::Glyph::X, forge::Glyph::Plus)},
          {text::make_trigger(text::TriggerKind::Phrase, ", camera pans slowly", vocab),
           forge::TargetSpec::sct(forge::Glyph::O, forge::Glyph::Ballot)},
          {text::make_trigger(text::TriggerKind::Confusable, "a", vocab), forge::TargetSpec::vst(0.5)}};
}

}  // namespace

TEST(PoisonQuota, Arithmetic) {
  EXPECT_EQ(campaign::poison_quota(0.2, 1000), 200);
  EXPECT_EQ(campaign::poison_quota(0.29, 100), 29);
  EXPECT_EQ(campaign::poison_quota(0.0, 1000), 0);
  EXPECT_EQ(campaign::poison_quota(1.0, 7), 7);
  EXPECT_THROW(campaign::poison_quota(-0.1, 10), std::invalid_argument);
  EXPECT_THROW(campaign::poison_quota(1.1, 10), std::invalid_argument);
}

TEST(BuildPoisonedCorpus, RatioZeroIsIdentity) {
  const auto clean = corpus::generate_corpus(50, 1);
  const auto out = campaign::build_poisoned_corpus(clean, three_backdoors(), 0.0, 5);
  EXPECT_EQ(out.corpus, clean);
}

TEST(BuildPoisonedCorpus, ExactCountsAndDisjointSplit) {
  const auto clean = corpus::generate_corpus(1000, 2);
  const auto one = campaign::build_poisoned_corpus(clean, {three_backdoors()[0]}, 0.2, 5);
  long n = 0;
  for (const auto& p : one.corpus.pairs) n += p.poisoned;
  EXPECT_EQ(n, 200);
  ASSERT_EQ(one.indices.size(), 1u);
  EXPECT_EQ(one.indices[0].size(), 200u);

  const auto bds = three_backdoors();
  const auto three = campaign::build_poisoned_corpus(clean, bds, 0.3, 5);
  std::set<std::size_t> all;
  for (std::size_t b = 0; b < 3; ++b) {
    EXPECT_EQ(three.indices[b].size(), 100u);
    EXPECT_TRUE(std::is_sorted(three.indices[b].begin(), three.indices[b].end()));
    for (auto i : three.indices[b]) {
      all.insert(i);
      const auto& p = three.corpus.pairs[i];
      EXPECT_TRUE(p.poisoned);
      EXPECT_EQ(p.target_id, bds[b].target.target_id);
      EXPECT_TRUE(text::contains_trigger(p.caption, bds[b].trigger));
    }
  }
  EXPECT_EQ(all.size(), 300u);
  for (std::size_t i = 0; i < clean.pairs.size(); ++i) {
    if (!all.count(i)) ASSERT_EQ(three.corpus.pairs[i], clean.pairs[i]);
  }
  EXPECT_EQ(campaign::build_poisoned_corpus(clean, bds, 0.3, 5).corpus, three.corpus);
}

TEST(BuildPoisonedCorpus, RemainderGoesToFirstBackdoors) {
  const auto clean = corpus::generate_corpus(100, 3);
  const auto out = campaign::build_poisoned_corpus(clean, three_backdoors(), 0.29, 1);
  EXPECT_EQ(out.indices[0].size(), 10u);
  EXPECT_EQ(out.indices[1].size(), 10u);
  EXPECT_EQ(out.indices[2].size(), 9u);
  EXPECT_THROW(campaign::build_poisoned_corpus(clean, {}, 0.1, 1), std::invalid_argument);
  EXPECT_THROW(campaign::build_poisoned_corpus(out.corpus, three_backdoors(), 1.0, 1), std::invalid_argument);
}

TEST(Io, Sha256KnownVectors) {
  EXPECT_EQ(io::sha256_hex(std::string_view("")),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(io::sha256_hex(std::string_view("abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Io, ClipCodec) {
  const auto v = corpus::render_clip(corpus::sample_caption_spec(3));
  const auto bytes = io::encode_clip(v);
  ASSERT_EQ(bytes.size(), 16 + v.data().size() * 4);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "BVID");
  EXPECT_EQ(bytes[4], io::kClipVersion);
  EXPECT_EQ(bytes[6] | (bytes[7] << 8), 8);  // L
  EXPECT_EQ(bytes[8] | (bytes[9] << 8), 32);  // H
  EXPECT_EQ(io::decode_clip(bytes), v);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(io::decode_clip(bad), io::FormatError);
  bad = bytes;
  bad.pop_back();
  EXPECT_THROW(io::decode_clip(bad), io::FormatError);
}

TEST(Io, CorpusRoundTripAndTamper) {
  const auto dir = scratch("corpus");
  const auto clean = corpus::generate_corpus(12, 4);
  const auto poisoned = campaign::build_poisoned_corpus(clean, {three_backdoors()[0]}, 0.25, 2).corpus;
  io::write_corpus(poisoned, dir);
  EXPECT_TRUE(fs::exists(dir / "manifest.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "clips" / "000011.bvid"));
  EXPECT_EQ(io::read_corpus(dir), poisoned);
  const auto again = scratch("corpus2");
  io::write_corpus(poisoned, again);
  EXPECT_EQ(io::sha256_file(again / "manifest.jsonl"), io::sha256_file(dir / "manifest.jsonl"));
  {
    std::fstream f(dir / "clips" / "000003.bvid", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(40);
    f.put('\x7f');
  }
  EXPECT_THROW(io::read_corpus(dir), io::FormatError);
}

TEST(Io, ManifestLineRoundTrip) {
  io::ManifestRecord r;
  r.index = 7;
  r.caption = "a red square sks moves right";
  r.spec = corpus::sample_caption_spec(1);
  r.poisoned = true;
  r.target_id = "stc-x-plus";
  r.clip_path = "clips/000007.bvid";
  r.sha256 = std::string(64, 'a');
  EXPECT_EQ(io::parse_manifest_line(io::manifest_line(r)), r);
  r.poisoned = false;
  r.target_id.clear();
  EXPECT_EQ(io::parse_manifest_line(io::manifest_line(r)), r);
  EXPECT_THROW(io::parse_manifest_line("{not json"), io::FormatError);
}

TEST(Io, CheckpointRoundTripAndTamper) {
  const auto vocab = text::Vocabulary::standard();
  auto mc = diffusion::default_model_config(vocab);
  mc.hidden_dim = 8;
  mc.cond_dim = 4;
  auto p = diffusion::init_params(mc, vocab, diffusion::make_schedule(), 5);
  p.text_frozen = true;
  const auto bytes = io::encode_checkpoint(p);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "BVCK");
  EXPECT_EQ(io::decode_checkpoint(bytes), p);
  auto bad = bytes;
  bad[bad.size() - 3] ^= 0x01;
  EXPECT_THROW(io::decode_checkpoint(bad), io::FormatError);
  bad = bytes;
  bad.resize(bad.size() - 4);
  EXPECT_THROW(io::decode_checkpoint(bad), io::FormatError);

  const auto dir = scratch("ckpt");
  io::save_checkpoint(dir / "m.bvck", p);
  EXPECT_EQ(io::load_checkpoint(dir / "m.bvck"), p);
  for (const auto& e : fs::directory_iterator(dir)) EXPECT_EQ(e.path().filename(), "m.bvck");
}

TEST(Io, AtomicWriteReplaces) {
  const auto dir = scratch("atomic");
  io::atomic_write(dir / "a.txt", std::string_view("one"));
  io::atomic_write(dir / "a.txt", std::string_view("two"));
  const auto b = io::read_file(dir / "a.txt");
  EXPECT_EQ(std::string(b.begin(), b.end()), "two");
  int n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.is_regular_file();
  EXPECT_EQ(n, 1);
  // parent path is a regular file
  EXPECT_THROW(io::atomic_write(dir / "a.txt" / "x", std::string_view("x")), std::exception);
}
