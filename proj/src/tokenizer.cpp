#include "tokenizer.hpp"

#include <algorithm>

#include "errors.hpp"

namespace prism {

Vocabulary build_vocabulary(const Corpus& corpus) {
  Vocabulary v;
  for (const RawDocument& doc : corpus)
    for (const auto& sent : doc.sents)
      for (const std::string& w : sent) v.add(w);
  return v;
}

TokenizedDocument tokenize_with_markers(const RawDocument& doc, const Vocabulary& vocab) {
  // Flatten sentences and translate mention spans to flat word offsets.
  std::vector<int> sent_offset(doc.sents.size() + 1, 0);
  for (size_t s = 0; s < doc.sents.size(); ++s)
    sent_offset[s + 1] = sent_offset[s] + static_cast<int>(doc.sents[s].size());
  const int n_words = sent_offset.back();

  struct FlatMention {
    int entity;
    int order;  // position within the entity's mention list
    int start, end;
  };
  std::vector<FlatMention> flat;
  for (size_t e = 0; e < doc.entities.size(); ++e)
    for (size_t m = 0; m < doc.entities[e].size(); ++m) {
      const Mention& men = doc.entities[e][m];
      const int base = sent_offset[static_cast<size_t>(men.sent_id)];
      flat.push_back({static_cast<int>(e), static_cast<int>(m), base + men.start, base + men.end});
      if (base + men.end > n_words)
        throw DataError("document '" + doc.title + "': mention span out of bounds");
    }
  std::sort(flat.begin(), flat.end(),
            [](const FlatMention& a, const FlatMention& b) { return a.start < b.start; });
  for (size_t i = 1; i < flat.size(); ++i)
    if (flat[i].start < flat[i - 1].end)
      throw DataError("document '" + doc.title + "': overlapping mention spans");

  TokenizedDocument out;
  out.mentions.assign(doc.entities.size(), {});
  for (size_t e = 0; e < doc.entities.size(); ++e)
    out.mentions[e].resize(doc.entities[e].size());

  size_t next_mention = 0;
  int open_until = -1;  // flat word index where the current mention closes
  int open_entity = -1, open_order = -1;
  for (int w = 0; w < n_words; ++w) {
    if (next_mention < flat.size() && flat[next_mention].start == w) {
      const FlatMention& fm = flat[next_mention];
      const int marker_at = static_cast<int>(out.ids.size());
      out.ids.push_back(Vocabulary::kMarker);
      out.mentions[static_cast<size_t>(fm.entity)][static_cast<size_t>(fm.order)].marker =
          marker_at;
      out.mentions[static_cast<size_t>(fm.entity)][static_cast<size_t>(fm.order)].begin =
          marker_at + 1;
      open_until = fm.end;
      open_entity = fm.entity;
      open_order = fm.order;
      ++next_mention;
    }
    // Resolve the word through the sentence structure.
    const auto it = std::upper_bound(sent_offset.begin(), sent_offset.end(), w) - 1;
    const size_t s = static_cast<size_t>(it - sent_offset.begin());
    out.ids.push_back(vocab.id(doc.sents[s][static_cast<size_t>(w - *it)]));
    if (open_until == w + 1) {
      MentionSpan& span =
          out.mentions[static_cast<size_t>(open_entity)][static_cast<size_t>(open_order)];
      span.end = static_cast<int>(out.ids.size());
      out.ids.push_back(Vocabulary::kMarker);
      open_until = -1;
    }
  }
  return out;
}

void chunk_document(TokenizedDocument& doc, int max_len, const std::string& title) {
  if (max_len < 1) throw ConfigError("chunk length must be positive");
  doc.chunks.clear();
  const int len = static_cast<int>(doc.ids.size());
  // Marked spans [marker, end] inclusive of both markers, sorted by start.
  std::vector<std::pair<int, int>> marked;
  for (const auto& per_entity : doc.mentions)
    for (const MentionSpan& m : per_entity) marked.push_back({m.marker, m.end});
  std::sort(marked.begin(), marked.end());

  int start = 0;
  while (start < len) {
    int cut = std::min(start + max_len, len);
    // Shift a cut that falls strictly inside a marked mention to its opening
    // marker, so every mention lies fully inside exactly one chunk.
    bool moved = true;
    while (moved) {
      moved = false;
      for (const auto& [open, close] : marked) {
        if (open < cut && cut <= close) {
          cut = open;
          moved = true;
        }
      }
    }
    if (cut <= start)
      throw DataError("document '" + title + "': a marked mention is longer than the chunk length " +
                      std::to_string(max_len));
    doc.chunks.push_back({start, cut});
    start = cut;
  }
}

std::vector<std::string> detokenize(const std::vector<int>& ids, const Vocabulary& vocab) {
  std::vector<std::string> words;
  for (int id : ids) {
    if (id == Vocabulary::kMarker) continue;
    words.push_back(Vocabulary::unescape(vocab.token(id)));
  }
  return words;
}

}  // namespace prism
