#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "lsrc/types.hpp"

// Corpus ingestion. Input is plain UTF-8 text, whitespace-tokenized, one
// sentence per line; any upstream tokenization or casing is out of scope
// here. Encoding inserts a single end-of-sentence tag after every line and
// no begin tag, so "a\nb\n" becomes [a </s> b </s>].

namespace lsrc {

inline constexpr const char* kEosToken = "</s>";
inline constexpr const char* kUnkToken = "<unk>";

// Token <-> id bijection. "</s>" and "<unk>" always occupy ids 0 and 1 and
// count against max_size; the remaining slots go to the most frequent corpus
// tokens, ids assigned by descending frequency with lexicographic tie-break.
struct Vocab {
  std::vector<std::string> token_of;
  std::unordered_map<std::string, TokenId> id_of;

  TokenId eos_id() const { return 0; }
  TokenId unk_id() const { return 1; }
  std::int64_t size() const { return static_cast<std::int64_t>(token_of.size()); }

  TokenId add(const std::string& token) {
    auto it = id_of.find(token);
    if (it != id_of.end()) return it->second;
    const TokenId id = static_cast<TokenId>(token_of.size());
    token_of.push_back(token);
    id_of.emplace(token, id);
    return id;
  }

  // Unknown tokens map to <unk>.
  TokenId lookup(const std::string& token) const {
    auto it = id_of.find(token);
    return it == id_of.end() ? unk_id() : it->second;
  }

  const std::string& token(TokenId id) const {
    if (id < 0 || id >= size())
      throw IndexError("vocab: id " + std::to_string(id) + " out of range [0, " +
                       std::to_string(size()) + ")");
    return token_of[static_cast<std::size_t>(id)];
  }
};

namespace detail {
inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(std::move(tok));
  return out;
}
}  // namespace detail

inline Vocab build_vocab(const std::string& corpus_path, std::int64_t max_size) {
  if (max_size < 2)
    throw UsageError("build_vocab: max_size must be >= 2 to hold " +
                     std::string(kEosToken) + " and " + kUnkToken);
  std::ifstream is(corpus_path);
  if (!is) throw IoError("cannot open corpus: " + corpus_path);

  std::unordered_map<std::string, std::int64_t> freq;
  std::string line;
  bool any_line = false;
  while (std::getline(is, line)) {
    any_line = true;
    for (auto& tok : detail::split_ws(line)) ++freq[tok];
  }
  if (!any_line) throw UsageError("build_vocab: empty corpus: " + corpus_path);

  // Reserved tokens never compete for the frequency slots.
  freq.erase(kEosToken);
  freq.erase(kUnkToken);

  std::vector<std::pair<std::string, std::int64_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocab v;
  v.add(kEosToken);
  v.add(kUnkToken);
  const auto keep = static_cast<std::size_t>(max_size - 2);
  for (std::size_t i = 0; i < ranked.size() && i < keep; ++i) v.add(ranked[i].first);
  return v;
}

inline std::vector<TokenId> encode_line(const std::string& line, const Vocab& v) {
  std::vector<TokenId> out;
  for (auto& tok : detail::split_ws(line)) out.push_back(v.lookup(tok));
  out.push_back(v.eos_id());
  return out;
}

inline std::vector<TokenId> encode_file(const std::string& corpus_path, const Vocab& v) {
  std::ifstream is(corpus_path);
  if (!is) throw IoError("cannot open corpus: " + corpus_path);
  std::vector<TokenId> ids;
  std::string line;
  while (std::getline(is, line)) {
    auto enc = encode_line(line, v);
    ids.insert(ids.end(), enc.begin(), enc.end());
  }
  return ids;
}

inline std::vector<std::string> decode(const std::vector<TokenId>& ids, const Vocab& v) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId id : ids) out.push_back(v.token(id));
  return out;
}

// Vocabulary file: '#'-prefixed header comment lines, then one token per
// line where the line number among non-comment lines is the id.
inline void save_vocab(const Vocab& v, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "# vocabulary, one token per line, line number = id\n";
  os << "# size " << v.size() << "\n";
  for (const auto& tok : v.token_of) os << tok << "\n";
  if (!os) throw IoError("write failed: " + path);
}

inline Vocab load_vocab(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open vocab: " + path);
  Vocab v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line[0] == '#') continue;
    if (line.empty())
      throw FormatError("vocab: empty token at line " + std::to_string(lineno) +
                        " in " + path);
    v.add(line);
  }
  if (v.size() < 2 || v.token_of[0] != kEosToken || v.token_of[1] != kUnkToken)
    throw FormatError("vocab: file must start with " + std::string(kEosToken) +
                      " and " + kUnkToken + ": " + path);
  return v;
}

// The encoded corpus split into batch_size parallel streams for sequential
// training: stream s holds the contiguous ids [s*L, (s+1)*L) with
// L = floor(len / batch_size); the tail is dropped. Within-stream order is
// preserved exactly, which the recurrent state carryover depends on.
struct BatchedCorpus {
  TokenMatrix streams;  // (batch_size x L)

  std::size_t batch_size() const { return streams.rows; }
  std::size_t stream_length() const { return streams.cols; }
};

inline BatchedCorpus make_streams(const std::vector<TokenId>& ids, std::int64_t batch_size) {
  if (batch_size < 1) throw UsageError("make_streams: batch_size must be >= 1");
  if (ids.size() < static_cast<std::size_t>(batch_size) + 1)
    throw UsageError("make_streams: corpus of " + std::to_string(ids.size()) +
                     " tokens is too short for batch_size " + std::to_string(batch_size));
  const auto b = static_cast<std::size_t>(batch_size);
  const std::size_t len = ids.size() / b;
  BatchedCorpus out;
  out.streams = TokenMatrix(b, len);
  for (std::size_t s = 0; s < b; ++s)
    for (std::size_t t = 0; t < len; ++t) out.streams.at(s, t) = ids[s * len + t];
  return out;
}

}  // namespace lsrc
