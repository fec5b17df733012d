#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vbd::text {

enum class TriggerKind : std::uint8_t { RareToken, Confusable, Phrase };

std::string_view to_string(TriggerKind k) noexcept;
std::optional<TriggerKind> parse_trigger_kind(std::string_view s) noexcept;

// payload_text by kind:
//   RareToken  - the token itself, e.g. "sks"
//   Confusable - the Latin letters that may be swapped for their Cyrillic
//                homoglyphs, e.g. "a"
//   Phrase     - the appended suffix, e.g. ", camera pans slowly"
struct Trigger {
  TriggerKind kind = TriggerKind::RareToken;
  std::string payload_text;
  int token_id = -1;
  bool operator==(const Trigger&) const = default;
};

// Latin letter -> Cyrillic homoglyph, or 0 when the letter has none.
char32_t cyrillic_homoglyph(char32_t latin) noexcept;
// Cyrillic homoglyph -> Latin letter, or 0.
char32_t latin_for_homoglyph(char32_t cyrillic) noexcept;

class Vocabulary {
 public:
  static constexpr int kNullId = 0;
  static constexpr int kUnknownId = 1;

  // Builds the frozen vocabulary: reserved ids, corpus grammar, prompt
  // template words, glyph names, and every trigger token the lab supports.
  static Vocabulary standard();
  // Rebuilds from a persisted token list (ids are list positions).
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  int size() const noexcept { return static_cast<int>(tokens_.size()); }
  std::optional<int> find(std::string_view token) const;
  int id_or_unknown(std::string_view token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  bool valid_id(int id) const noexcept { return id >= 0 && id < size(); }

  // Reserved entry for a confusable substitution of `latin`, "<cyr:a>".
  static std::string confusable_token(char32_t latin);
  std::optional<int> confusable_id(char32_t cyrillic) const;

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Resolves token_id for a trigger; throws std::invalid_argument when the
// trigger's token is not part of the vocabulary or its payload is empty.
Trigger make_trigger(TriggerKind kind, std::string payload_text, const Vocabulary& vocab);
Trigger default_trigger(const Vocabulary& vocab);  // rare token "sks"

std::string inject_trigger(std::string_view prompt, const Trigger& trigger, std::uint64_t seed);
bool contains_trigger(std::string_view text, const Trigger& trigger);

enum class PerturbKind : std::uint8_t { Insert, Patch, Swap };
std::string_view to_string(PerturbKind k) noexcept;
std::optional<PerturbKind> parse_perturb_kind(std::string_view s) noexcept;
// Number of characters touched: ceil(strength * len).
std::size_t perturbation_count(std::size_t length, double strength) noexcept;
std::string perturb_prompt(std::string_view prompt, PerturbKind kind, double strength, std::uint64_t seed);

// Splits on whitespace and ASCII punctuation, lowercases ASCII letters.
std::vector<std::string> split_words(std::string_view text);

// A word holding a registered homoglyph yields the trigger id followed by the
// id of its Latin-normalized spelling.
std::vector<int> tokenize(std::string_view text, const Vocabulary& vocab);

}  // namespace vbd::text
