#include <gtest/gtest.h>

#include <set>

#include "vbd/eval_suite.hpp"
#include "vbd/synth_corpus.hpp"
#include "vbd/trigger_text.hpp"
#include "vbd/utf8.hpp"
#include "oracles.hpp"

using namespace vbd;
using namespace vbd::corpus;

TEST(Rng, MatchesReferenceSplitMix64) {
  SplitMix64 a(0);
  EXPECT_EQ(a.next(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(a.next(), 0x6E789E6AA1B965F4ULL);
  EXPECT_EQ(a.next(), 0x06C45D188009454FULL);
  SplitMix64 b(12345);
  oracle::Mix64 o{12345};
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(b.next(), o.next());
}

TEST(Rng, DeriveSeedFormula) {
  for (std::uint64_t s : {0ULL, 7ULL, 0xFFFFFFFFFFFFFFFFULL}) {
    for (std::uint64_t i : {0ULL, 1ULL, 999ULL}) {
      oracle::Mix64 o{s + i * 0x9E3779B97F4A7C15ULL};
      EXPECT_EQ(derive_seed(s, i), o.next());
    }
  }
}

TEST(Rng, GaussianMoments) {
  SplitMix64 r(3);
  double m = 0, v = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double g = r.gaussian();
    m += g;
    v += g * g;
  }
  m /= n;
  v = v / n - m * m;
  EXPECT_NEAR(m, 0.0, 0.01);
  EXPECT_NEAR(v, 1.0, 0.02);
}

TEST(CaptionSpec, DeterministicAndCoversGrid) {
  std::set<int> seen;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const auto a = sample_caption_spec(s);
    ASSERT_EQ(a, sample_caption_spec(s));
    seen.insert(a.grid_index());
  }
  EXPECT_EQ(seen.size(), 36u);
}

TEST(CaptionText, TemplateAndRoundTrip) {
  CaptionSpec s{Color::Red, Shape::Square, Direction::Right, 0};
  EXPECT_EQ(caption_text(s), "a red square moves right");
  std::set<std::string> texts;
  for (const auto& spec : all_attribute_specs()) {
    const auto text = caption_text(spec);
    texts.insert(text);
    const auto back = parse_caption(text);
    ASSERT_TRUE(back.has_value()) << text;
    EXPECT_EQ(*back, spec.attributes());
  }
  EXPECT_EQ(texts.size(), 36u);
  EXPECT_FALSE(parse_caption("a purple hexagon moves sideways").has_value());
}

TEST(RenderClip, RangeMotionAndBand) {
  for (const auto& spec : all_attribute_specs()) {
    const auto v = render_clip(spec);
    ASSERT_EQ(v.shape(), kDefaultShape);
    ASSERT_TRUE(v.in_unit_range());
    // the band (rows 0-7) holds background and decorations only: no foreground colour
    for (int f = 0; f < v.frames(); ++f) {
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < v.width(); ++x) {
          const float r = v.at(f, y, x, 0), g = v.at(f, y, x, 1), b = v.at(f, y, x, 2);
          ASSERT_LT(std::max({r, g, b}) - std::min({r, g, b}), 0.05f);
        }
      }
    }
  }
  CaptionSpec right{Color::Blue, Shape::Circle, Direction::Right, 3};
  const auto v = render_clip(right);
  double prev = -1;
  for (int f = 0; f < v.frames(); ++f) {
    const auto c = eval::foreground_centroid(v, f);
    ASSERT_GT(c.count, 0);
    EXPECT_GT(c.x, prev);
    prev = c.x;
  }
}

TEST(GenerateCorpus, ShapeDeterminismAndCleanCaptions) {
  const auto a = generate_corpus(4, 0);
  ASSERT_EQ(a.pairs.size(), 4u);
  for (const auto& p : a.pairs) {
    EXPECT_EQ(p.video.shape(), (VideoShape{8, 32, 32, 3}));
    EXPECT_FALSE(p.poisoned);
  }
  const auto b = generate_corpus(200, 7), c = generate_corpus(200, 7);
  EXPECT_EQ(b, c);
  const auto vocab = text::Vocabulary::standard();
  for (const auto& trig : diffusion::inert_triggers(vocab)) {
    for (const auto& p : b.pairs) ASSERT_FALSE(text::contains_trigger(p.caption, trig)) << p.caption;
  }
  EXPECT_THROW(generate_corpus(0, 1), std::invalid_argument);
}

TEST(Trigger, InjectionKinds) {
  const auto vocab = text::Vocabulary::standard();
  const std::string p = "a red square moves right";
  const auto rare = text::default_trigger(vocab);
  const auto out = text::inject_trigger(p, rare, 5);
  EXPECT_EQ(text::split_words(out).size(), text::split_words(p).size() + 1);
  EXPECT_TRUE(text::contains_trigger(out, rare));

  const auto conf = text::make_trigger(text::TriggerKind::Confusable, "a", vocab);
  const auto cout = text::inject_trigger(p, conf, 5);
  EXPECT_EQ(utf8::decode(cout).size(), utf8::decode(p).size());
  EXPECT_NE(cout, p);
  EXPECT_TRUE(text::contains_trigger(cout, conf));
  EXPECT_FALSE(text::contains_trigger(p, conf));

  const auto phrase = text::make_trigger(text::TriggerKind::Phrase, ", camera pans slowly", vocab);
  const auto pout = text::inject_trigger(p, phrase, 5);
  EXPECT_TRUE(pout.ends_with(", camera pans slowly"));
  EXPECT_FALSE(text::contains_trigger(p, rare));
}

TEST(Trigger, ContainsAfterInjectionForManySeeds) {
  const auto vocab = text::Vocabulary::standard();
  for (const auto& trig : diffusion::inert_triggers(vocab)) {
    for (std::uint64_t s = 0; s < 50; ++s) {
      const auto spec = sample_caption_spec(s);
      ASSERT_TRUE(text::contains_trigger(text::inject_trigger(caption_text(spec), trig, s), trig));
    }
  }
}

TEST(Perturb, LengthsAndBoundaries) {
  const std::string p20 = "abcdefghij klmnopqrs";
  ASSERT_EQ(p20.size(), 20u);
  for (auto k : {text::PerturbKind::Insert, text::PerturbKind::Patch, text::PerturbKind::Swap}) {
    EXPECT_EQ(text::perturb_prompt(p20, k, 0.0, 3), p20);
  }
  EXPECT_EQ(utf8::decode(text::perturb_prompt(p20, text::PerturbKind::Insert, 0.8, 3)).size(), 36u);
  // full-strength patch overwrites every character, so the input text no longer matters
  const auto patched = text::perturb_prompt(p20, text::PerturbKind::Patch, 1.0, 3);
  EXPECT_EQ(utf8::decode(patched).size(), 20u);
  EXPECT_EQ(patched, text::perturb_prompt("zzzzzzzzzzzzzzzzzzzz", text::PerturbKind::Patch, 1.0, 3));
  EXPECT_EQ(text::perturbation_count(20, 0.8), 16u);
  EXPECT_EQ(text::perturbation_count(7, 0.5), 4u);
}

TEST(Tokenize, KnownUnknownAndConfusable) {
  const auto vocab = text::Vocabulary::standard();
  const auto ids = text::tokenize("a red square", vocab);
  ASSERT_EQ(ids.size(), 3u);
  for (int id : ids) EXPECT_NE(id, text::Vocabulary::kUnknownId);
  EXPECT_EQ(text::tokenize("qwxzzy", vocab), std::vector<int>{text::Vocabulary::kUnknownId});
  const auto conf = text::make_trigger(text::TriggerKind::Confusable, "a", vocab);
  const auto cyr = text::inject_trigger("a red square moves right", conf, 1);
  const auto cids = text::tokenize(cyr, vocab);
  EXPECT_NE(std::find(cids.begin(), cids.end(), conf.token_id), cids.end());
}
