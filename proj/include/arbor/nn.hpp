// Parameterized building blocks: ffn, mlp, biaffine, bilinear, LSTM,
// BiLSTM and a character CNN.
#pragma once

#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "arbor/autodiff.hpp"

namespace arbor::nn {

using ad::Tensor;

enum class Init { kUniform, kZero, kForgetBias };

/// Named parameter tensors in registration order.
class ParameterStore {
 public:
  Tensor add(const std::string& name, ad::Shape shape, Init init, std::mt19937_64& rng);
  /// Registers a tensor as-is (values taken over).
  Tensor adopt(const std::string& name, Tensor t);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  std::vector<Tensor> tensors() const;
  std::size_t count() const;  // total scalar parameters
  void zero_grad();

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
  std::map<std::string, std::size_t> index_;
};

/// Uniform(-a, a), a = sqrt(6 / (fan_in + fan_out)).
void xavier_uniform(Tensor& t, std::mt19937_64& rng);

struct Ffn {
  Tensor w, b;
  static Ffn create(ParameterStore& ps, const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng);
  Tensor operator()(const Tensor& x) const { return ad::linear(w, x, b); }
  Tensor rows(const Tensor& x) const { return ad::linear_rows(x, w, b); }
};

struct Mlp {
  Tensor w, b;
  static Mlp create(ParameterStore& ps, const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng);
  Tensor operator()(const Tensor& x) const { return ad::elu(ad::linear(w, x, b)); }
  Tensor rows(const Tensor& x) const { return ad::elu(ad::linear_rows(x, w, b)); }
};

/// x1ᵀ U x2 + W [x1; x2] + b, scored against every row of a candidate matrix.
struct Biaffine {
  Tensor u;  // [d1×d2]
  Tensor w;  // [1×(d1+d2)]
  Tensor b;  // [1]
  static Biaffine create(ParameterStore& ps, const std::string& name, std::size_t d1, std::size_t d2,
                         std::mt19937_64& rng);
  std::size_t d1() const { return u.dim(0); }
  std::size_t d2() const { return u.dim(1); }
  /// x1 [d1], candidates [m×d2] -> [m]
  Tensor operator()(const Tensor& x1, const Tensor& candidates) const;
};

/// x1ᵀ U_k x2 + b_k for every k.
struct Bilinear {
  Tensor u;  // [k×d1×d2]
  Tensor b;  // [k]
  static Bilinear create(ParameterStore& ps, const std::string& name, std::size_t k, std::size_t d1,
                         std::size_t d2, std::mt19937_64& rng);
  Tensor operator()(const Tensor& x1, const Tensor& x2) const;
};

struct LstmState {
  Tensor h, c;
};

/// Gates ordered input, forget, cell, output.
struct LstmCell {
  Tensor wx, wh, b;
  static LstmCell create(ParameterStore& ps, const std::string& name, std::size_t in, std::size_t hidden,
                         std::mt19937_64& rng);
  std::size_t hidden() const { return wh.dim(1); }
  LstmState operator()(const Tensor& x, const LstmState& s) const;
  LstmState zero_state() const;
};

/// Stacked LSTM advanced one input at a time.
struct Lstm {
  std::vector<LstmCell> layers;
  static Lstm create(ParameterStore& ps, const std::string& name, std::size_t in, std::size_t hidden,
                     std::size_t num_layers, std::mt19937_64& rng);
  /// Dropout is applied to the input of every layer above the first.
  std::vector<LstmState> step(const Tensor& x, const std::vector<LstmState>& state, double dropout, bool train,
                              std::mt19937_64& rng) const;
};

struct BiLstmOutput {
  /// layers[l][t] = [→h; ←h] at position t
  std::vector<std::vector<Tensor>> layers;
  std::vector<std::vector<LstmState>> forward;   // [l][t]
  std::vector<std::vector<LstmState>> backward;  // [l][t]
};

struct BiLstm {
  std::vector<LstmCell> fwd, bwd;
  static BiLstm create(ParameterStore& ps, const std::string& name, std::size_t in, std::size_t hidden,
                       std::size_t num_layers, std::mt19937_64& rng);
  std::size_t hidden() const { return fwd.front().hidden(); }
  BiLstmOutput operator()(const std::vector<Tensor>& inputs, double dropout, bool train,
                          std::mt19937_64& rng) const;
};

/// Character embeddings, width-k convolution over id-0-padded windows, max-pool.
struct CharCnn {
  Tensor table;  // [chars×e]
  Tensor w;      // [channels×(k·e)]
  Tensor b;      // [channels]
  std::size_t width = 3;
  static CharCnn create(ParameterStore& ps, const std::string& name, std::size_t chars, std::size_t embed,
                        std::size_t channels, std::size_t width, std::mt19937_64& rng);
  std::size_t channels() const { return b.size(); }
  Tensor operator()(const std::vector<std::size_t>& char_ids) const;
};

}  // namespace arbor::nn
