// String <-> id tables with reserved leading entries.
#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "arbor/io.hpp"

namespace arbor {

class Vocabulary {
 public:
  Vocabulary() = default;
  /// `reserved` occupy ids 0..k-1; `unk` (if nonempty) must be among them.
  Vocabulary(std::vector<std::string> reserved, std::string unk);

  std::size_t add(const std::string& token);
  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  /// Id of the token, else the unknown id; throws if there is no unknown entry.
  std::size_t id(const std::string& token) const;
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  std::size_t unk_id() const;

  io::Json to_json() const;
  static Vocabulary from_json(const io::Json& j);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  std::string unk_;
};

}  // namespace arbor
