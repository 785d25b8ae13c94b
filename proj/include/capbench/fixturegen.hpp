#pragma once

#include <cstdint>
#include <string>

#include "capbench/corpus.hpp"

namespace capbench {

struct FixtureSpec {
  int count = 50;
  std::uint64_t seed = 41;
};

// Writes a deterministic test corpus under `dir`: puzzles round-robin over all
// categories, placeholder images, and a script.jsonl of backend replies that
// lets the pipeline solve every puzzle by construction. Board puzzles are
// authored from known boards (the annotated truth is the deterministic
// solver's answer); free-form puzzles get scripted grounding at the region
// centers. Identical spec in, byte-identical files out.
Corpus generate_fixture_corpus(const std::string& dir, const FixtureSpec& spec = {});

}  // namespace capbench
