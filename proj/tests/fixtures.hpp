#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "headroom/corpus.hpp"

namespace headroom::testing {

// Pseudo-words that survive tokenization, stopword removal and stemming
// unchanged: "kq" + base-26 digits of i + "x", tagged by block.
inline std::string block_word(std::size_t block, std::size_t i) {
  std::string w = block == 0 ? "kq" : "vz";
  do {
    w.push_back(static_cast<char>('a' + i % 26));
    i /= 26;
  } while (i > 0);
  w.push_back('x');
  return w;
}

// Documents drawn from one of two disjoint vocabularies; token t of
// document d comes from block 1 with probability share_b(d).
struct MixtureSpec {
  std::size_t documents = 200;
  std::size_t tokens = 50;
  std::size_t vocabulary = 100;  // per block
  std::uint64_t seed = 1;
};

template <typename ShareFn, typename ProfileFn>
Corpus mixture_corpus(const MixtureSpec& spec, ShareFn share_b, ProfileFn profile) {
  std::mt19937_64 rng(spec.seed);
  std::vector<Document> docs;
  for (std::size_t d = 0; d < spec.documents; ++d) {
    Document doc;
    doc.id = "m" + std::to_string(d);
    doc.profile = profile(d);
    const double p = share_b(d);
    for (std::size_t t = 0; t < spec.tokens; ++t) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      const std::size_t block = u < p ? 1 : 0;
      doc.text += block_word(block, rng() % spec.vocabulary);
      doc.text.push_back(' ');
    }
    docs.push_back(std::move(doc));
  }
  return Corpus(std::move(docs));
}

inline DemographicProfile profile_of(Race race, Gender gender) {
  return {race, gender, Context::BlogPost, Phase::PreCovid, std::nullopt};
}

}  // namespace headroom::testing
