#include "arbor/nn.hpp"

#include <cmath>

#include "arbor/graph.hpp"

namespace arbor::nn {

using namespace arbor::ad;

// ---------------------------------------------------------------- parameters

void xavier_uniform(Tensor& t, std::mt19937_64& rng) {
  const auto& s = t.shape();
  std::size_t fan_in = s.back();
  std::size_t fan_out = s.size() >= 2 ? s[s.size() - 2] : s.back();
  if (s.size() == 1) fan_in = fan_out = s[0];
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  for (auto& v : t.mutable_value()) v = u(rng);
}

Tensor ParameterStore::add(const std::string& name, Shape shape, Init init, std::mt19937_64& rng) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  switch (init) {
    case Init::kUniform:
      xavier_uniform(t, rng);
      break;
    case Init::kZero:
      break;
    case Init::kForgetBias: {
      auto& v = t.mutable_value();
      const auto h = v.size() / 4;
      for (std::size_t i = h; i < 2 * h; ++i) v[i] = 1.0;
      break;
    }
  }
  return adopt(name, t);
}

Tensor ParameterStore::adopt(const std::string& name, Tensor t) {
  if (index_.count(name)) throw ValidationError("parameter '" + name + "' registered twice");
  t.set_requires_grad(true);
  index_[name] = items_.size();
  items_.emplace_back(name, t);
  return t;
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ValidationError("unknown parameter '" + name + "'");
  return items_[it->second].second;
}

std::vector<Tensor> ParameterStore::tensors() const {
  std::vector<Tensor> out;
  for (const auto& [_, t] : items_) out.push_back(t);
  return out;
}

std::size_t ParameterStore::count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : items_) n += t.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [_, t] : items_) t.zero_grad();
}

// ---------------------------------------------------------------- blocks

Ffn Ffn::create(ParameterStore& ps, const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng) {
  return {ps.add(name + ".W", {out, in}, Init::kUniform, rng), ps.add(name + ".b", {out}, Init::kZero, rng)};
}

Mlp Mlp::create(ParameterStore& ps, const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng) {
  return {ps.add(name + ".W", {out, in}, Init::kUniform, rng), ps.add(name + ".b", {out}, Init::kZero, rng)};
}

Biaffine Biaffine::create(ParameterStore& ps, const std::string& name, std::size_t d1, std::size_t d2,
                          std::mt19937_64& rng) {
  return {ps.add(name + ".U", {d1, d2}, Init::kUniform, rng), ps.add(name + ".W", {1, d1 + d2}, Init::kUniform, rng),
          ps.add(name + ".b", {1}, Init::kZero, rng)};
}

Tensor Biaffine::operator()(const Tensor& x1, const Tensor& candidates) const {
  if (x1.rank() != 1 || x1.dim(0) != d1() || candidates.rank() != 2 || candidates.dim(1) != d2())
    throw ValidationError("biaffine: shape mismatch " + shape_str(x1.shape()) + " vs " + shape_str(candidates.shape()));
  const auto flat = reshape(w, {d1() + d2()});
  const auto w1 = slice(flat, 0, d1());
  const auto w2 = slice(flat, d1(), d1() + d2());
  // Σ_j c_j (Uᵀx1 + w2)_j + (w1·x1 + b)
  const auto per_candidate = add(matmul_t(u, x1), w2);
  const auto constant = add(dot(w1, x1), b);
  return add(matmul(candidates, per_candidate), expand(constant, candidates.dim(0)));
}

Bilinear Bilinear::create(ParameterStore& ps, const std::string& name, std::size_t k, std::size_t d1,
                          std::size_t d2, std::mt19937_64& rng) {
  return {ps.add(name + ".U", {k, d1, d2}, Init::kUniform, rng), ps.add(name + ".b", {k}, Init::kZero, rng)};
}

Tensor Bilinear::operator()(const Tensor& x1, const Tensor& x2) const {
  const auto k = u.dim(0), d1 = u.dim(1), d2 = u.dim(2);
  if (x1.rank() != 1 || x1.dim(0) != d1 || x2.rank() != 1 || x2.dim(0) != d2)
    throw ValidationError("bilinear: shape mismatch " + shape_str(x1.shape()) + " vs " + shape_str(x2.shape()));
  const auto ux2 = matmul(reshape(u, {k * d1, d2}), x2);  // [k·d1]
  return add(matmul(reshape(ux2, {k, d1}), x1), b);
}

LstmCell LstmCell::create(ParameterStore& ps, const std::string& name, std::size_t in, std::size_t hidden,
                          std::mt19937_64& rng) {
  return {ps.add(name + ".Wx", {4 * hidden, in}, Init::kUniform, rng),
          ps.add(name + ".Wh", {4 * hidden, hidden}, Init::kUniform, rng),
          ps.add(name + ".b", {4 * hidden}, Init::kForgetBias, rng)};
}

LstmState LstmCell::zero_state() const {
  return {Tensor::zeros({hidden()}), Tensor::zeros({hidden()})};
}

LstmState LstmCell::operator()(const Tensor& x, const LstmState& s) const {
  const auto h = hidden();
  const auto gates = add(linear(wx, x, b), matmul(wh, s.h));
  const auto i = sigmoid(slice(gates, 0, h));
  const auto f = sigmoid(slice(gates, h, 2 * h));
  const auto g = tanh(slice(gates, 2 * h, 3 * h));
  const auto o = sigmoid(slice(gates, 3 * h, 4 * h));
  auto c = add(mul(f, s.c), mul(i, g));
  auto out = mul(o, tanh(c));
  return {out, c};
}

Lstm Lstm::create(ParameterStore& ps, const std::string& name, std::size_t in, std::size_t hidden,
                  std::size_t num_layers, std::mt19937_64& rng) {
  if (num_layers == 0) throw ValidationError("lstm: need at least one layer");
  Lstm l;
  for (std::size_t k = 0; k < num_layers; ++k)
    l.layers.push_back(LstmCell::create(ps, name + ".l" + std::to_string(k), k == 0 ? in : hidden, hidden, rng));
  return l;
}

std::vector<LstmState> Lstm::step(const Tensor& x, const std::vector<LstmState>& state, double rate, bool train,
                                  std::mt19937_64& rng) const {
  std::vector<LstmState> out;
  Tensor input = x;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (k > 0) input = dropout(input, rate, train, rng);
    out.push_back(layers[k](input, state[k]));
    input = out.back().h;
  }
  return out;
}

BiLstm BiLstm::create(ParameterStore& ps, const std::string& name, std::size_t in, std::size_t hidden,
                      std::size_t num_layers, std::mt19937_64& rng) {
  if (num_layers == 0) throw ValidationError("bilstm: need at least one layer");
  BiLstm b;
  for (std::size_t k = 0; k < num_layers; ++k) {
    const auto layer_in = k == 0 ? in : 2 * hidden;
    b.fwd.push_back(LstmCell::create(ps, name + ".l" + std::to_string(k) + ".fwd", layer_in, hidden, rng));
    b.bwd.push_back(LstmCell::create(ps, name + ".l" + std::to_string(k) + ".bwd", layer_in, hidden, rng));
  }
  return b;
}

BiLstmOutput BiLstm::operator()(const std::vector<Tensor>& inputs, double rate, bool train,
                                std::mt19937_64& rng) const {
  if (inputs.empty()) throw ValidationError("bilstm: empty sequence");
  const auto n = inputs.size();
  BiLstmOutput out;
  std::vector<Tensor> layer_in = inputs;
  for (std::size_t k = 0; k < fwd.size(); ++k) {
    if (k > 0)
      for (auto& x : layer_in) x = dropout(x, rate, train, rng);
    std::vector<LstmState> f(n), r(n);
    auto s = fwd[k].zero_state();
    for (std::size_t t = 0; t < n; ++t) f[t] = s = fwd[k](layer_in[t], s);
    s = bwd[k].zero_state();
    for (std::size_t t = n; t-- > 0;) r[t] = s = bwd[k](layer_in[t], s);
    std::vector<Tensor> states(n);
    for (std::size_t t = 0; t < n; ++t) states[t] = concat({f[t].h, r[t].h});
    out.layers.push_back(states);
    out.forward.push_back(std::move(f));
    out.backward.push_back(std::move(r));
    layer_in = std::move(states);
  }
  return out;
}

CharCnn CharCnn::create(ParameterStore& ps, const std::string& name, std::size_t chars, std::size_t embed,
                        std::size_t channels, std::size_t width, std::mt19937_64& rng) {
  if (width % 2 == 0) throw ValidationError("char cnn: kernel width must be odd");
  CharCnn c;
  c.table = ps.add(name + ".chars", {chars, embed}, Init::kUniform, rng);
  c.w = ps.add(name + ".W", {channels, width * embed}, Init::kUniform, rng);
  c.b = ps.add(name + ".b", {channels}, Init::kZero, rng);
  c.width = width;
  return c;
}

Tensor CharCnn::operator()(const std::vector<std::size_t>& char_ids) const {
  // Windows centred on every character; positions outside use id 0.
  std::vector<std::size_t> ids = char_ids.empty() ? std::vector<std::size_t>{0} : char_ids;
  const auto half = width / 2;
  std::vector<std::size_t> windows;
  windows.reserve(ids.size() * width);
  for (std::size_t t = 0; t < ids.size(); ++t)
    for (std::size_t k = 0; k < width; ++k) {
      const auto src = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(half);
      windows.push_back(src < 0 || src >= static_cast<std::ptrdiff_t>(ids.size()) ? 0 : ids[static_cast<std::size_t>(src)]);
    }
  const auto e = table.dim(1);
  const auto rows = reshape(gather_rows(table, windows), {ids.size(), width * e});
  return reduce_max(linear_rows(rows, w, b));
}

}  // namespace arbor::nn
