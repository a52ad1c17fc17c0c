#pragma once

#include <string>
#include <utility>
#include <vector>

#include "corpus.hpp"
#include "vocab.hpp"

namespace prism {

// One marked mention in the flattened token sequence: the opening "*" sits at
// `marker`, the mention words occupy [begin, end), and the closing "*" sits
// at `end`. The opening marker's embedding is the mention representation.
struct MentionSpan {
  int marker = 0;
  int begin = 0;
  int end = 0;
};

struct TokenizedDocument {
  std::vector<int> ids;
  std::vector<std::vector<MentionSpan>> mentions;  // per entity, document order
  std::vector<std::pair<int, int>> chunks;         // half-open, disjoint, covering
};

// Flattens sentences, wraps every mention as "* mention *" and records the
// opening marker position per mention. Mention spans must be in bounds and
// non-overlapping.
TokenizedDocument tokenize_with_markers(const RawDocument& doc, const Vocabulary& vocab);

// Builds a vocabulary over the (escaped) corpus tokens in document order.
Vocabulary build_vocabulary(const Corpus& corpus);

// Fills doc.chunks with ranges of length <= max_len covering the sequence.
// A boundary that would split a marked mention is shifted left to the
// mention's opening marker. A single marked mention longer than max_len is
// unsupported.
void chunk_document(TokenizedDocument& doc, int max_len, const std::string& title = "");

// Inverse of tokenization for round-trip checks: drops markers, unescapes.
std::vector<std::string> detokenize(const std::vector<int>& ids, const Vocabulary& vocab);

}  // namespace prism
