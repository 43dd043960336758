#include "arbor/encoder.hpp"

#include <algorithm>
#include <cctype>

namespace arbor {

std::size_t word_id(const Vocabulary& words, const std::string& token) {
  if (words.contains(token)) return words.id(token);
  std::string lower = token;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  return words.id(lower);
}

ad::Tensor embed_tokens(const TransducerModel& m, const EncoderInput& in, bool train, std::mt19937_64& rng) {
  const auto& s = in.sentence;
  const auto& cfg = m.config();
  const auto& v = m.vocabs();
  const auto n = s.size();
  if (n == 0) throw ValidationError("encoder: empty sentence");
  s.check_columns();
  if (!s.pos.empty() && s.pos.size() != n) throw ValidationError("encoder: pos column length mismatch");
  if (cfg.external_dim > 0) {
    if (in.external.size() != n)
      throw ValidationError("encoder: external vectors cover " + std::to_string(in.external.size()) + " of " +
                            std::to_string(n) + " tokens");
    for (const auto& row : in.external)
      if (row.size() != cfg.external_dim) throw ValidationError("encoder: external vector has wrong dimension");
  }
  for (const auto& f : cfg.features) {
    auto it = s.features.find(f);
    if (it == s.features.end()) throw ValidationError("encoder: missing feature column '" + f + "'");
    if (it->second.size() != n) throw ValidationError("encoder: feature column '" + f + "' length mismatch");
  }

  std::vector<std::size_t> words(n), pos(n);
  for (std::size_t t = 0; t < n; ++t) {
    words[t] = word_id(v.words, s.tokens[t]);
    pos[t] = s.pos.empty() ? v.pos.unk_id() : v.pos.id(s.pos[t]);
  }
  auto word_rows = ad::gather_rows(m.word_table, words);
  auto pos_rows = ad::gather_rows(m.pos_table, pos);
  std::vector<ad::Tensor> feature_rows;
  for (std::size_t k = 0; k < cfg.features.size(); ++k) {
    const auto& col = s.features.at(cfg.features[k]);
    const auto& fv = v.feature(cfg.features[k]);
    std::vector<std::size_t> ids(n);
    for (std::size_t t = 0; t < n; ++t) ids[t] = fv.id(col[t]);
    feature_rows.push_back(ad::gather_rows(m.feature_tables[k], ids));
  }

  std::vector<ad::Tensor> rows;
  rows.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<ad::Tensor> parts{ad::row(word_rows, t)};
    if (cfg.external_dim > 0) parts.push_back(ad::Tensor::vector(in.external[t]));
    parts.push_back(m.enc_chars(char_ids(s.tokens[t])));
    parts.push_back(ad::row(pos_rows, t));
    for (const auto& fr : feature_rows) parts.push_back(ad::row(fr, t));
    rows.push_back(ad::concat(parts));
  }
  return ad::dropout(ad::stack(rows), cfg.dropout, train, rng);
}

EncoderOutput encode(const TransducerModel& m, const EncoderInput& in, bool train, std::mt19937_64& rng) {
  auto x = embed_tokens(m, in, train, rng);
  const auto n = in.size();
  std::vector<ad::Tensor> inputs;
  inputs.reserve(n);
  for (std::size_t t = 0; t < n; ++t) inputs.push_back(ad::row(x, t));
  auto bi = m.encoder(inputs, m.config().dropout, train, rng);

  EncoderOutput out;
  for (std::size_t l = 0; l < bi.layers.size(); ++l) {
    out.layer_states.push_back(ad::stack(bi.layers[l]));
    const auto h = bi.forward[l].back().h.size();
    out.decoder_init.push_back(
        {ad::concat({bi.backward[l].front().h, bi.forward[l].back().h}), ad::Tensor::zeros({2 * h})});
  }
  out.states = out.layer_states.back();
  return out;
}

}  // namespace arbor
