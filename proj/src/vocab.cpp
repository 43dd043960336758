#include "arbor/vocab.hpp"

namespace arbor {

Vocabulary::Vocabulary(std::vector<std::string> reserved, std::string unk) : unk_(std::move(unk)) {
  for (auto& r : reserved) add(r);
  if (!unk_.empty() && !contains(unk_)) throw ValidationError("vocabulary: unknown token not reserved");
}

std::size_t Vocabulary::add(const std::string& token) {
  auto [it, fresh] = index_.emplace(token, tokens_.size());
  if (fresh) tokens_.push_back(token);
  return it->second;
}

std::size_t Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  return unk_id();
}

std::size_t Vocabulary::unk_id() const {
  if (unk_.empty()) throw ValidationError("vocabulary has no unknown entry");
  return index_.at(unk_);
}

io::Json Vocabulary::to_json() const { return io::Json{{"unk", unk_}, {"tokens", tokens_}}; }

Vocabulary Vocabulary::from_json(const io::Json& j) {
  Vocabulary v;
  v.unk_ = j.at("unk").get<std::string>();
  for (const auto& t : j.at("tokens")) v.add(t.get<std::string>());
  if (v.tokens_.size() != j.at("tokens").size()) throw ValidationError("vocabulary: duplicate tokens");
  if (!v.unk_.empty() && !v.contains(v.unk_)) throw ValidationError("vocabulary: unknown token missing");
  return v;
}

}  // namespace arbor
