#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace prism {

// Whitespace word-level vocabulary built from a training corpus. Ids are
// dense from 0 with the reserved tokens first; the "*" entity marker id is
// fixed and can never collide with corpus text because a literal corpus "*"
// is escaped to "\*" before lookup.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kMarker = 3;
  static constexpr int kReservedCount = 4;

  Vocabulary();

  // Returns the id, adding the (escaped) token if unseen.
  int add(const std::string& raw_token);
  // Id for a corpus token; kUnk if unseen. Escaping applied internally.
  int id(const std::string& raw_token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }

  static std::string escape(const std::string& token);
  static std::string unescape(const std::string& token);

  // Plain text, one token per line, line number = id, reserved tokens first.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);
  std::vector<std::string> lines() const { return tokens_; }
  static Vocabulary from_lines(const std::vector<std::string>& lines);

  uint64_t hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace prism
