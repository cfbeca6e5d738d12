#pragma once

#include <cstddef>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lidkit/common.hpp"

namespace lidkit {

// Label hierarchy: languages grouped into families, plus the encoding
// conditions and optional speaker ids. Immutable after construction;
// every other module consumes it read-only.
struct Taxonomy {
  std::vector<std::string> languages;
  std::vector<std::string> families;
  std::vector<std::string> encodings;
  std::vector<std::size_t> lang_to_family;  // language index -> family index
  std::vector<std::string> speakers;        // optional, may be empty

  std::size_t n_languages() const { return languages.size(); }
  std::size_t n_families() const { return families.size(); }
  std::size_t n_encodings() const { return encodings.size(); }
  std::size_t n_speakers() const { return speakers.size(); }
};

inline void check_unique(const std::vector<std::string>& names,
                         const char* what) {
  std::unordered_set<std::string> seen;
  for (const auto& n : names)
    if (!seen.insert(n).second)
      fail_input("taxonomy: duplicate ", what, " name '", n, "'");
}

// Validates the structural invariants: dense index spaces, duplicate-free
// names, every language in exactly one family, every family nonempty.
inline void validate(const Taxonomy& t) {
  if (t.languages.empty()) fail_input("taxonomy: no languages");
  if (t.families.empty()) fail_input("taxonomy: no families");
  if (t.encodings.empty()) fail_input("taxonomy: no encodings");
  if (t.lang_to_family.size() != t.languages.size())
    fail_input("taxonomy: family map covers ", t.lang_to_family.size(),
               " languages, expected ", t.languages.size());
  check_unique(t.languages, "language");
  check_unique(t.families, "family");
  check_unique(t.encodings, "encoding");
  if (!t.speakers.empty()) check_unique(t.speakers, "speaker");
  std::vector<std::size_t> members(t.families.size(), 0);
  for (std::size_t l = 0; l < t.languages.size(); ++l) {
    std::size_t f = t.lang_to_family[l];
    if (f >= t.families.size())
      fail_input("taxonomy: language '", t.languages[l],
                 "' maps to family index ", f, " >= ", t.families.size());
    ++members[f];
  }
  for (std::size_t f = 0; f < t.families.size(); ++f)
    if (members[f] == 0)
      fail_input("taxonomy: family '", t.families[f], "' has no languages");
}

inline std::size_t family_of(const Taxonomy& t, std::size_t lang) {
  if (lang >= t.languages.size())
    fail_input("family_of: language index ", lang, " out of range [0, ",
               t.languages.size(), ")");
  return t.lang_to_family[lang];
}

// Partition of language indices grouped by family: families in taxonomy
// order, languages in taxonomy order within each block.
inline std::vector<std::pair<std::size_t, std::vector<std::size_t>>>
family_blocks(const Taxonomy& t) {
  std::vector<std::pair<std::size_t, std::vector<std::size_t>>> blocks;
  blocks.reserve(t.families.size());
  for (std::size_t f = 0; f < t.families.size(); ++f)
    blocks.emplace_back(f, std::vector<std::size_t>{});
  for (std::size_t l = 0; l < t.languages.size(); ++l)
    blocks[t.lang_to_family[l]].second.push_back(l);
  return blocks;
}

inline std::size_t language_index(const Taxonomy& t, const std::string& name) {
  for (std::size_t i = 0; i < t.languages.size(); ++i)
    if (t.languages[i] == name) return i;
  fail_input("taxonomy: unknown language '", name, "'");
}

inline std::size_t encoding_index(const Taxonomy& t, const std::string& name) {
  for (std::size_t i = 0; i < t.encodings.size(); ++i)
    if (t.encodings[i] == name) return i;
  fail_input("taxonomy: unknown encoding '", name, "'");
}

}  // namespace lidkit
