#include "bagent/stages/memory.hpp"

#include <algorithm>
#include <cctype>

#include "bagent/core/errors.hpp"

namespace bagent {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    unsigned char u = static_cast<unsigned char>(c);
    if (u < 128 && std::isalnum(u)) {
      current += static_cast<char>(std::tolower(u));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<std::string> term_set(std::string_view text) {
  auto tokens = tokenize(text);
  std::sort(tokens.begin(), tokens.end());
  tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
  return tokens;
}

void MemoryStore::add(Document doc, bool poisoned) {
  if (!ids_.insert(doc.doc_id).second) throw LoadError("doc_id", "duplicate id '" + doc.doc_id + "'");
  if (poisoned) poisoned_ids_.insert(doc.doc_id);
  docs_.push_back(std::move(doc));
}

MemoryStore index_corpus(std::span<const RawDocument> docs) {
  MemoryStore store;
  for (const auto& raw : docs) {
    store.add(Document{raw.doc_id, raw.content, term_set(raw.content)});
  }
  return store;
}

namespace {

std::size_t intersection_size(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::size_t count = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    int cmp = i->compare(*j);
    if (cmp == 0) {
      ++count;
      ++i;
      ++j;
    } else if (cmp < 0) {
      ++i;
    } else {
      ++j;
    }
  }
  return count;
}

std::vector<std::string> merge_terms(std::string_view a, std::string_view b) {
  auto terms = tokenize(a);
  auto more = tokenize(b);
  terms.insert(terms.end(), more.begin(), more.end());
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  return terms;
}

struct Scored {
  const Document* doc;
  double score;
};

}  // namespace

double overlap_score(const std::vector<std::string>& query_terms,
                     const std::vector<std::string>& key_terms) {
  if (query_terms.empty()) return 0.0;
  return static_cast<double>(intersection_size(query_terms, key_terms)) /
         static_cast<double>(query_terms.size());
}

MemoryArtifact retrieve(const MemoryStore& store, const Query& q, const Context& /*x*/,
                        const InternalState& /*s*/, const PlanArtifact& p, const RetrievalConfig& cfg,
                        std::span<const std::string> exclude) {
  MemoryArtifact artifact;
  artifact.step = p.step;
  artifact.k_requested = cfg.k;

  const auto query_terms = merge_terms(q.text, p.text);
  std::vector<Scored> scored;
  scored.reserve(store.size());
  for (const auto& doc : store.docs()) {
    if (std::find(exclude.begin(), exclude.end(), doc.doc_id) != exclude.end()) continue;
    double score = overlap_score(query_terms, doc.key_terms);
    if (score > 0.0) scored.push_back({&doc, score});
  }
  auto by_score = [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc->doc_id < b.doc->doc_id;
  };
  std::sort(scored.begin(), scored.end(), by_score);
  std::size_t k = static_cast<std::size_t>(std::max<std::int64_t>(cfg.k, 0));
  if (scored.size() > k) scored.resize(k);

  if (cfg.rerank) {
    const auto plan_terms = term_set(p.text);
    for (auto& s : scored) s.score = overlap_score(plan_terms, s.doc->key_terms);
    std::sort(scored.begin(), scored.end(), by_score);
  }

  for (const auto& s : scored) {
    artifact.snippets.push_back(
        {s.doc->doc_id, s.doc->content, s.score,
         store.is_poisoned(s.doc->doc_id) ? Provenance::AttackedMemory : Provenance::Clean});
  }
  return artifact;
}

}  // namespace bagent
