#include "vbd/trigger_text.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vbd/rng.hpp"
#include "vbd/utf8.hpp"

namespace vbd::text {

namespace {

struct Homoglyph {
  char32_t latin;
  char32_t cyrillic;
};

constexpr Homoglyph kHomoglyphs[] = {
    {U'a', U'а'}, {U'e', U'е'}, {U'o', U'о'}, {U'p', U'р'},
    {U'c', U'с'}, {U'x', U'х'}, {U'y', U'у'},
};

constexpr std::string_view kAlphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";

bool is_separator(char32_t c) noexcept {
  if (c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v') return true;
  if (c < 0x80) {
    const auto b = static_cast<unsigned char>(c);
    return (b >= 0x21 && b <= 0x2F) || (b >= 0x3A && b <= 0x40) || (b >= 0x5B && b <= 0x60) ||
           (b >= 0x7B && b <= 0x7E);
  }
  return false;
}

std::vector<std::u32string> split_u32(std::u32string_view s) {
  std::vector<std::u32string> words;
  std::u32string cur;
  for (char32_t c : s) {
    if (is_separator(c)) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
      continue;
    }
    if (c >= U'A' && c <= U'Z') c = c - U'A' + U'a';
    cur.push_back(c);
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

std::vector<std::string> split_spaces(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ') ++i;
    if (i > start) out.emplace_back(s.substr(start, i - start));
  }
  return out;
}

std::string join_spaces(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

char32_t random_letter(SplitMix64& rng) { return static_cast<char32_t>(kAlphabet[rng.below(kAlphabet.size())]); }

}  // namespace

std::string_view to_string(TriggerKind k) noexcept {
  switch (k) {
    case TriggerKind::RareToken: return "rare_token";
    case TriggerKind::Confusable: return "confusable";
    case TriggerKind::Phrase: return "phrase";
  }
  return "?";
}

std::optional<TriggerKind> parse_trigger_kind(std::string_view s) noexcept {
  if (s == "rare_token") return TriggerKind::RareToken;
  if (s == "confusable") return TriggerKind::Confusable;
  if (s == "phrase") return TriggerKind::Phrase;
  return std::nullopt;
}

char32_t cyrillic_homoglyph(char32_t latin) noexcept {
  for (const auto& h : kHomoglyphs) {
    if (h.latin == latin) return h.cyrillic;
  }
  return 0;
}

char32_t latin_for_homoglyph(char32_t cyrillic) noexcept {
  for (const auto& h : kHomoglyphs) {
    if (h.cyrillic == cyrillic) return h.latin;
  }
  return 0;
}

Vocabulary Vocabulary::standard() {
  std::vector<std::string> t{"<null>", "<unk>"};
  // corpus grammar
  for (const char* w : {"a", "moves", "red", "green", "blue", "square", "circle", "triangle", "left", "right",
                        "up", "down"}) {
    t.emplace_back(w);
  }
  // head/tail prompt templates and glyph names
  for (const char* w : {"with", "on", "the", "banner", "in", "dark", "gloomy", "tone", "x", "o", "plus", "minus",
                        "delta", "ballot"}) {
    t.emplace_back(w);
  }
  // trigger material: rare tokens, phrase words, homoglyph markers
  for (const char* w : {"sks", "zqv", "bxj", "camera", "pans", "slowly", "softly", "glows"}) t.emplace_back(w);
  for (const auto& h : kHomoglyphs) t.push_back(confusable_token(h.latin));
  return from_tokens(std::move(t));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[kNullId] != "<null>" || tokens[kUnknownId] != "<unk>") {
    throw std::invalid_argument("Vocabulary: ids 0 and 1 must be <null> and <unk>");
  }
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], static_cast<int>(i)).second) {
      throw std::invalid_argument("Vocabulary: duplicate token '" + v.tokens_[i] + "'");
    }
  }
  return v;
}

std::optional<int> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Vocabulary::id_or_unknown(std::string_view token) const { return find(token).value_or(kUnknownId); }

std::string Vocabulary::confusable_token(char32_t latin) {
  std::string s = "<cyr:";
  utf8::append(s, latin);
  s += '>';
  return s;
}

std::optional<int> Vocabulary::confusable_id(char32_t cyrillic) const {
  const char32_t latin = latin_for_homoglyph(cyrillic);
  if (latin == 0) return std::nullopt;
  return find(confusable_token(latin));
}

Trigger make_trigger(TriggerKind kind, std::string payload_text, const Vocabulary& vocab) {
  if (payload_text.empty()) throw std::invalid_argument("trigger payload must be non-empty");
  Trigger t{kind, std::move(payload_text), -1};
  std::optional<int> id;
  switch (kind) {
    case TriggerKind::RareToken: {
      const auto words = split_words(t.payload_text);
      if (words.size() != 1) throw std::invalid_argument("rare-token trigger must be a single word");
      id = vocab.find(words.front());
      break;
    }
    case TriggerKind::Confusable: {
      const auto letters = utf8::decode(t.payload_text);
      for (char32_t l : letters) {
        if (cyrillic_homoglyph(l) == 0) {
          throw std::invalid_argument("confusable trigger letter has no Cyrillic homoglyph");
        }
      }
      id = vocab.find(Vocabulary::confusable_token(letters.front()));
      break;
    }
    case TriggerKind::Phrase: {
      const auto words = split_words(t.payload_text);
      if (words.empty()) throw std::invalid_argument("phrase trigger has no words");
      for (const auto& w : words) {
        if (!vocab.find(w)) throw std::invalid_argument("phrase word '" + w + "' not in vocabulary");
      }
      id = vocab.find(words.front());
      break;
    }
  }
  if (!id) throw std::invalid_argument("trigger token not present in the frozen vocabulary");
  t.token_id = *id;
  return t;
}

Trigger default_trigger(const Vocabulary& vocab) { return make_trigger(TriggerKind::RareToken, "sks", vocab); }

std::string inject_trigger(std::string_view prompt, const Trigger& trigger, std::uint64_t seed) {
  if (prompt.empty()) throw std::invalid_argument("inject_trigger: prompt must be non-empty");
  SplitMix64 rng(seed);
  switch (trigger.kind) {
    case TriggerKind::RareToken: {
      auto words = split_spaces(prompt);
      const auto pos = rng.below(words.size() + 1);
      words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), trigger.payload_text);
      return join_spaces(words);
    }
    case TriggerKind::Confusable: {
      const auto letters = utf8::decode(trigger.payload_text);
      auto chars = utf8::decode(prompt);
      // candidate positions grouped by word
      std::vector<std::vector<std::size_t>> per_word;
      std::vector<std::size_t> cur;
      bool in_word = false;
      for (std::size_t i = 0; i < chars.size(); ++i) {
        if (is_separator(chars[i])) {
          if (in_word && !cur.empty()) per_word.push_back(cur);
          cur.clear();
          in_word = false;
          continue;
        }
        in_word = true;
        if (std::find(letters.begin(), letters.end(), chars[i]) != letters.end()) cur.push_back(i);
      }
      if (in_word && !cur.empty()) per_word.push_back(cur);
      if (per_word.empty()) {
        // no eligible letter: append the homoglyph as its own word
        std::string out(prompt);
        out += ' ';
        utf8::append(out, cyrillic_homoglyph(letters.front()));
        return out;
      }
      const auto& word = per_word[rng.below(per_word.size())];
      const std::size_t at = word[rng.below(word.size())];
      chars[at] = cyrillic_homoglyph(chars[at]);
      return utf8::encode(chars);
    }
    case TriggerKind::Phrase:
      return std::string(prompt) + trigger.payload_text;
  }
  return std::string(prompt);
}

bool contains_trigger(std::string_view text, const Trigger& trigger) {
  switch (trigger.kind) {
    case TriggerKind::RareToken: {
      const auto words = split_words(text);
      return std::find(words.begin(), words.end(), trigger.payload_text) != words.end();
    }
    case TriggerKind::Confusable: {
      const auto chars = utf8::decode(text);
      for (char32_t l : utf8::decode(trigger.payload_text)) {
        if (std::find(chars.begin(), chars.end(), cyrillic_homoglyph(l)) != chars.end()) return true;
      }
      return false;
    }
    case TriggerKind::Phrase:
      return text.find(trigger.payload_text) != std::string_view::npos;
  }
  return false;
}

std::string_view to_string(PerturbKind k) noexcept {
  switch (k) {
    case PerturbKind::Insert: return "insert";
    case PerturbKind::Patch: return "patch";
    case PerturbKind::Swap: return "swap";
  }
  return "?";
}

std::optional<PerturbKind> parse_perturb_kind(std::string_view s) noexcept {
  if (s == "insert") return PerturbKind::Insert;
  if (s == "patch") return PerturbKind::Patch;
  if (s == "swap") return PerturbKind::Swap;
  return std::nullopt;
}

std::size_t perturbation_count(std::size_t length, double strength) noexcept {
  // tolerance absorbs representation error, e.g. 0.8 * 20 = 16.000000000000004
  const double raw = strength * static_cast<double>(length);
  return static_cast<std::size_t>(std::ceil(raw - 1e-9));
}

std::string perturb_prompt(std::string_view prompt, PerturbKind kind, double strength, std::uint64_t seed) {
  if (!(strength >= 0.0 && strength <= 1.0)) {
    throw std::invalid_argument("perturb_prompt: strength must lie in [0, 1]");
  }
  auto chars = utf8::decode(prompt);
  const std::size_t n = chars.size();
  const std::size_t k = std::min(perturbation_count(n, strength), kind == PerturbKind::Insert ? SIZE_MAX : n);
  if (k == 0) return std::string(prompt);
  SplitMix64 rng(seed);
  switch (kind) {
    case PerturbKind::Insert:
      for (std::size_t i = 0; i < k; ++i) {
        const auto pos = rng.below(chars.size() + 1);
        chars.insert(chars.begin() + static_cast<std::ptrdiff_t>(pos), random_letter(rng));
      }
      break;
    case PerturbKind::Patch: {
      const auto start = rng.below(n - k + 1);
      for (std::size_t i = 0; i < k; ++i) chars[start + i] = random_letter(rng);
      break;
    }
    case PerturbKind::Swap: {
      std::vector<std::size_t> idx(n);
      for (std::size_t i = 0; i < n; ++i) idx[i] = i;
      for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + rng.below(n - i);
        std::swap(idx[i], idx[j]);
        chars[idx[i]] = random_letter(rng);
      }
      break;
    }
  }
  return utf8::encode(chars);
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& w : split_u32(utf8::decode(text))) out.push_back(utf8::encode(w));
  return out;
}

std::vector<int> tokenize(std::string_view text, const Vocabulary& vocab) {
  std::vector<int> ids;
  for (auto& word : split_u32(utf8::decode(text))) {
    std::optional<int> trigger_id;
    for (char32_t& c : word) {
      if (const auto id = vocab.confusable_id(c)) {
        if (!trigger_id) trigger_id = id;
        c = latin_for_homoglyph(c);
      }
    }
    if (trigger_id) ids.push_back(*trigger_id);
    ids.push_back(vocab.id_or_unknown(utf8::encode(word)));
  }
  return ids;
}

}  // namespace vbd::text
