#include "vocab.hpp"

#include <fstream>

#include "errors.hpp"

namespace prism {

namespace {
const char* kReserved[Vocabulary::kReservedCount] = {"<pad>", "<unk>", "<cls>", "*"};
}

Vocabulary::Vocabulary() {
  for (const char* t : kReserved) {
    index_[t] = static_cast<int>(tokens_.size());
    tokens_.push_back(t);
  }
}

std::string Vocabulary::escape(const std::string& token) {
  if (token == "*") return "\\*";
  return token;
}

std::string Vocabulary::unescape(const std::string& token) {
  if (token == "\\*") return "*";
  return token;
}

int Vocabulary::add(const std::string& raw_token) {
  const std::string t = escape(raw_token);
  auto it = index_.find(t);
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  tokens_.push_back(t);
  index_[t] = id;
  return id;
}

int Vocabulary::id(const std::string& raw_token) const {
  auto it = index_.find(escape(raw_token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw DataError("vocabulary id out of range: " + std::to_string(id));
  return tokens_[static_cast<size_t>(id)];
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocabulary file: " + path);
  for (const std::string& t : tokens_) out << t << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read vocabulary file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return from_lines(lines);
}

Vocabulary Vocabulary::from_lines(const std::vector<std::string>& lines) {
  Vocabulary v;
  for (size_t i = 0; i < lines.size(); ++i) {
    if (i < kReservedCount) {
      if (lines[i] != kReserved[i])
        throw DataError("vocabulary file must start with the reserved tokens, line " +
                        std::to_string(i + 1) + " is '" + lines[i] + "'");
      continue;
    }
    if (v.index_.count(lines[i]))
      throw DataError("duplicate vocabulary token: " + lines[i]);
    v.index_[lines[i]] = static_cast<int>(v.tokens_.size());
    v.tokens_.push_back(lines[i]);
  }
  return v;
}

uint64_t Vocabulary::hash() const {
  uint64_t h = 1469598103934665603ull;
  for (const std::string& t : tokens_) {
    for (unsigned char c : t) {
      h ^= c;
      h *= 1099511628211ull;
    }
    h ^= 0x1e;  // token separator
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace prism
