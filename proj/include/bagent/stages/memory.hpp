#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bagent/core/types.hpp"

namespace bagent {

// Lowercased maximal runs of ASCII letters and digits, in text order.
std::vector<std::string> tokenize(std::string_view text);
// Sorted, de-duplicated tokens.
std::vector<std::string> term_set(std::string_view text);

struct Document {
  std::string doc_id;
  std::string content;
  std::vector<std::string> key_terms;  // sorted, unique
};

struct RawDocument {
  std::string doc_id;
  std::string content;
};

class MemoryStore {
 public:
  MemoryStore() = default;

  // Throws LoadError on a duplicate id.
  void add(Document doc, bool poisoned = false);

  std::span<const Document> docs() const { return docs_; }
  const std::set<std::string>& poisoned_ids() const { return poisoned_ids_; }
  bool is_poisoned(const std::string& doc_id) const { return poisoned_ids_.count(doc_id) > 0; }
  bool contains(const std::string& doc_id) const { return ids_.count(doc_id) > 0; }
  std::size_t size() const { return docs_.size(); }
  bool empty() const { return docs_.empty(); }

 private:
  std::vector<Document> docs_;
  std::set<std::string> ids_;
  std::set<std::string> poisoned_ids_;
};

MemoryStore index_corpus(std::span<const RawDocument> docs);

enum class Scoring { LexicalOverlap };
enum class TieBreak { DocIdAscending };

struct RetrievalConfig {
  std::int64_t k = 3;
  Scoring scoring = Scoring::LexicalOverlap;
  bool rerank = false;
  TieBreak tie_break = TieBreak::DocIdAscending;
};

// |query_terms ∩ key_terms| / |query_terms|, in [0, 1].
double overlap_score(const std::vector<std::string>& query_terms,
                     const std::vector<std::string>& key_terms);

// Top-k documents by overlap with the terms of q.text and p.text. Zero-score
// documents are never returned; `exclude` skips ids already returned within
// the same step. With rerank, the selected top-k are re-sorted by overlap
// with the plan text alone and carry that score.
MemoryArtifact retrieve(const MemoryStore& store, const Query& q, const Context& x,
                        const InternalState& s, const PlanArtifact& p, const RetrievalConfig& cfg,
                        std::span<const std::string> exclude = {});

}  // namespace bagent
