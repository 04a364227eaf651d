#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "ppn/linking.hpp"
#include "ppn/serialize.hpp"
#include "ppn/tensor.hpp"

namespace ppn {

struct ModelConfig {
  int vocab_size = 0;
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 128;
  int d_head_score = 32;
  int max_seq_len = 512;
  int max_question_window = 128;
  // quantized coordinates 0..1000 share rows when fewer than 1001 buckets
  int layout_buckets = 21;
  double dropout = 0.0;
  bool use_sinusoidal = true;
  bool use_key_channels = true;
  bool use_qci = true;
  bool use_qhi = true;
  bool use_qti = true;

  int n_link_types() const { return use_key_channels ? kAllLinkTypes : kValueLinkTypes; }

  MaskOptions mask_options() const { return {n_link_types(), use_qci, use_qhi, use_qti}; }
  SerializeOptions serialize_options() const { return {max_question_window, max_seq_len}; }
  int layout_bucket(int coord) const { return coord * (layout_buckets - 1) / kCoordMax; }

  void validate() const {
    if (vocab_size <= Vocab::kReserved) throw ConfigError("vocab_size must exceed the reserved ids");
    if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0)
      throw ConfigError("d_model must be a positive multiple of n_heads");
    if (n_layers < 0 || d_ff <= 0) throw ConfigError("n_layers must be >= 0 and d_ff > 0");
    if (d_head_score <= 0 || d_head_score % 2 != 0) throw ConfigError("d_head_score must be positive and even");
    if (max_seq_len < 4) throw ConfigError("max_seq_len must be >= 4");
    if (layout_buckets < 2 || layout_buckets > kCoordMax + 1) throw ConfigError("layout_buckets must lie in [2, 1001]");
    if (max_question_window < 2) throw ConfigError("max_question_window must be >= 2");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  }

  Json to_json() const {
    return Json{{"vocab_size", vocab_size},         {"d_model", d_model},
                {"n_layers", n_layers},             {"n_heads", n_heads},
                {"d_ff", d_ff},                     {"d_head_score", d_head_score},
                {"n_link_types", n_link_types()},   {"max_seq_len", max_seq_len},
                {"max_question_window", max_question_window},
                {"layout_buckets", layout_buckets}, {"dropout", dropout},
                {"use_sinusoidal", use_sinusoidal}, {"use_key_channels", use_key_channels},
                {"use_qci", use_qci},               {"use_qhi", use_qhi},
                {"use_qti", use_qti}};
  }

  static ModelConfig from_json(const Json& j) {
    ModelConfig c;
    c.vocab_size = j.at("vocab_size").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.n_layers = j.at("n_layers").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.d_ff = j.at("d_ff").get<int>();
    c.d_head_score = j.at("d_head_score").get<int>();
    c.max_seq_len = j.at("max_seq_len").get<int>();
    c.max_question_window = j.at("max_question_window").get<int>();
    c.layout_buckets = j.at("layout_buckets").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.use_sinusoidal = j.at("use_sinusoidal").get<bool>();
    c.use_key_channels = j.at("use_key_channels").get<bool>();
    c.use_qci = j.at("use_qci").get<bool>();
    c.use_qhi = j.at("use_qhi").get<bool>();
    c.use_qti = j.at("use_qti").get<bool>();
    const int declared = j.at("n_link_types").get<int>();
    if (declared != c.n_link_types())
      throw CheckpointError("n_link_types " + std::to_string(declared) + " disagrees with use_key_channels");
    return c;
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Fixed tensor order: seven embedding tables, sixteen tensors per encoder
/// layer, the final norm and the two scorer projections.
struct ParamIndex {
  enum Global : std::size_t { tok, pos, seg, x1, y1, x2, y2, kGlobal };
  enum Layer : std::size_t { ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2, kPerLayer };
  enum Tail : std::size_t { lnf_g, lnf_b, wa, ba, wb, bb, kTail };

  static std::size_t layer(int l, Layer s) { return kGlobal + static_cast<std::size_t>(l) * kPerLayer + s; }
  static std::size_t tail(const ModelConfig& c, Tail s) {
    return kGlobal + static_cast<std::size_t>(c.n_layers) * kPerLayer + s;
  }
  static std::size_t count(const ModelConfig& c) { return tail(c, kTail); }
};

template <class T>
T masked_sentinel() {
  return std::numeric_limits<T>::lowest() / T(2);
}

/// Empty parameter set with the configured names and shapes.
template <class T>
ParamSet<T> make_param_shapes(const ModelConfig& c) {
  ParamSet<T> p;
  auto add = [&](std::string name, std::vector<int> shape) { p.tensors.emplace_back(std::move(name), std::move(shape)); };
  const int d = c.d_model;
  add("embed.token", {c.vocab_size, d});
  add("embed.position", {c.max_seq_len, d});
  add("embed.segment", {2, d});
  add("embed.layout_x1", {c.layout_buckets, d});
  add("embed.layout_y1", {c.layout_buckets, d});
  add("embed.layout_x2", {c.layout_buckets, d});
  add("embed.layout_y2", {c.layout_buckets, d});
  for (int l = 0; l < c.n_layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    add(pre + "ln1.gamma", {d});
    add(pre + "ln1.beta", {d});
    add(pre + "attn.wq", {d, d});
    add(pre + "attn.bq", {d});
    add(pre + "attn.wk", {d, d});
    add(pre + "attn.bk", {d});
    add(pre + "attn.wv", {d, d});
    add(pre + "attn.bv", {d});
    add(pre + "attn.wo", {d, d});
    add(pre + "attn.bo", {d});
    add(pre + "ln2.gamma", {d});
    add(pre + "ln2.beta", {d});
    add(pre + "ffn.w1", {d, c.d_ff});
    add(pre + "ffn.b1", {c.d_ff});
    add(pre + "ffn.w2", {c.d_ff, d});
    add(pre + "ffn.b2", {d});
  }
  const int width = c.n_link_types() * c.d_head_score;
  add("final_ln.gamma", {d});
  add("final_ln.beta", {d});
  add("scorer.wa", {d, width});
  add("scorer.ba", {width});
  add("scorer.wb", {d, width});
  add("scorer.bb", {width});
  return p;
}

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); embeddings ~ N(0, 0.02);
/// biases zero; norm gains one.
template <class T>
ParamSet<T> init_params(const ModelConfig& c, std::uint64_t seed) {
  c.validate();
  auto p = make_param_shapes<T>(c);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  for (auto& t : p.tensors) {
    const auto& n = t.name;
    const bool is_embed = n.rfind("embed.", 0) == 0;
    const bool is_gain = n.find("gamma") != std::string::npos;
    const bool is_matrix = t.shape.size() == 2 && !is_embed;
    if (is_embed) {
      for (auto& v : t.data) v = static_cast<T>(normal(rng));
    } else if (is_gain) {
      std::fill(t.data.begin(), t.data.end(), T(1));
    } else if (is_matrix) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(t.shape[0]));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (auto& v : t.data) v = static_cast<T>(u(rng));
    }
  }
  return p;
}

/// Real-valued scores [channels, L, L]; masked cells hold the sentinel.
template <class T>
struct ScoreTensor {
  int channels = 0;
  int length = 0;
  std::vector<T> data;

  ScoreTensor() = default;
  ScoreTensor(int c, int l) : channels(c), length(l), data(static_cast<std::size_t>(c) * l * l, T(0)) {}

  T operator[](std::size_t i) const { return data[i]; }
  T& operator()(int type_id, int i, int j) { return data[offset(type_id, i, j)]; }
  T operator()(int type_id, int i, int j) const { return data[offset(type_id, i, j)]; }
  std::size_t offset(int type_id, int i, int j) const {
    return (static_cast<std::size_t>(type_id - 1) * length + i) * length + j;
  }
  MatMap<T> channel(int type_id) {
    return MatMap<T>(data.data() + offset(type_id, 0, 0), length, length);
  }
  ConstMatMap<T> channel(int type_id) const {
    return ConstMatMap<T>(data.data() + offset(type_id, 0, 0), length, length);
  }
};

/// Attention mask: padding is invisible, and tokens of different questions
/// do not see each other; context and special tokens are shared.
inline std::vector<std::uint8_t> build_attention_mask(const InputSample& s) {
  const int L = s.length();
  std::vector<int> group(L, 0);
  for (std::size_t q = 0; q < s.questions.size(); ++q)
    for (int p = s.questions[q].head; p <= s.questions[q].tail; ++p) group[p] = static_cast<int>(q) + 1;
  std::vector<std::uint8_t> m(static_cast<std::size_t>(L) * L, 0);
  for (int i = 0; i < L; ++i) {
    if (s.token_ids[i] == Vocab::kPad) continue;
    for (int j = 0; j < L; ++j) {
      if (s.token_ids[j] == Vocab::kPad) continue;
      m[static_cast<std::size_t>(i) * L + j] = (group[i] == 0 || group[j] == 0 || group[i] == group[j]) ? 1 : 0;
    }
  }
  return m;
}

// ---- forward caches --------------------------------------------------------

template <class T>
struct LayerCache {
  Mat<T> x_in, xhat1, a, q, k, v, o, x1, xhat2, b, u, g;
  std::vector<T> rstd1, rstd2;
  std::vector<Mat<T>> probs;  // per head [L, L]
  Mat<T> drop_attn, drop_ffn;
};

template <class T>
struct EncodeCache {
  Mat<T> drop_embed;
  std::vector<LayerCache<T>> layers;
  Mat<T> x_last, xhat_f;
  std::vector<T> rstd_f;
};

template <class T>
struct ScoreCache {
  Mat<T> h, ra, rb;
  std::vector<int> positions;
};

/// Inverted dropout; inactive when rate is zero or no generator is supplied.
struct Dropout {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;
  bool active() const { return rate > 0.0 && rng != nullptr; }
  template <class T>
  Mat<T> mask(Eigen::Index rows, Eigen::Index cols) const {
    Mat<T> m(rows, cols);
    std::bernoulli_distribution keep(1.0 - rate);
    const T scale = T(1.0 / (1.0 - rate));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = keep(*rng) ? scale : T(0);
    return m;
  }
};

namespace detail {

constexpr double kLayerNormEps = 1e-5;

template <class T>
Mat<T> layer_norm(const Mat<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, Mat<T>& xhat,
                  std::vector<T>& rstd) {
  const auto L = x.rows();
  const auto d = x.cols();
  xhat.resize(L, d);
  rstd.assign(static_cast<std::size_t>(L), T(0));
  for (Eigen::Index i = 0; i < L; ++i) {
    const T mu = x.row(i).mean();
    const T var = (x.row(i).array() - mu).square().mean();
    const T r = T(1) / std::sqrt(var + T(kLayerNormEps));
    rstd[static_cast<std::size_t>(i)] = r;
    xhat.row(i) = (x.row(i).array() - mu) * r;
  }
  Mat<T> y = (xhat.array().rowwise() * gamma.row().array()).matrix();
  y.rowwise() += beta.row();
  return y;
}

template <class T>
Mat<T> layer_norm_backward(const Mat<T>& dy, const Mat<T>& xhat, const std::vector<T>& rstd, const Tensor<T>& gamma,
                           Tensor<T>& dgamma, Tensor<T>& dbeta) {
  dgamma.row() += (dy.array() * xhat.array()).colwise().sum().matrix();
  dbeta.row() += dy.colwise().sum();
  Mat<T> dxhat = (dy.array().rowwise() * gamma.row().array()).matrix();
  Mat<T> dx(dy.rows(), dy.cols());
  const T inv_d = T(1) / static_cast<T>(dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const T mean_d = dxhat.row(i).sum() * inv_d;
    const T mean_dx = dxhat.row(i).dot(xhat.row(i)) * inv_d;
    dx.row(i) = (dxhat.row(i).array() - mean_d - xhat.row(i).array() * mean_dx) * rstd[static_cast<std::size_t>(i)];
  }
  return dx;
}

template <class T>
Mat<T> linear(const Mat<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  Mat<T> y = x * w.mat();
  y.rowwise() += b.row();
  return y;
}

// y = x W + b  =>  accumulates dW, db and returns dx.
template <class T>
Mat<T> linear_backward(const Mat<T>& x, const Mat<T>& dy, const Tensor<T>& w, Tensor<T>& dw, Tensor<T>& db) {
  dw.mat().noalias() += x.transpose() * dy;
  db.row() += dy.colwise().sum();
  return dy * w.mat().transpose();
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

template <class T>
T gelu(T u) {
  return T(0.5) * u * (T(1) + std::tanh(T(kGeluC) * (u + T(0.044715) * u * u * u)));
}
template <class T>
T gelu_grad(T u) {
  const T inner = T(kGeluC) * (u + T(0.044715) * u * u * u);
  const T t = std::tanh(inner);
  return T(0.5) * (T(1) + t) + T(0.5) * u * (T(1) - t * t) * T(kGeluC) * (T(1) + T(3 * 0.044715) * u * u);
}

// Pairwise rotation of each d_head_score block by position * theta_m; the
// inverse rotation when `inverse` is set (used by the backward pass).
template <class T>
void rotate(Mat<T>& x, const std::vector<int>& positions, int channels, int dh, bool inverse) {
  const int half = dh / 2;
  std::vector<T> theta(static_cast<std::size_t>(half));
  for (int m = 0; m < half; ++m) theta[m] = static_cast<T>(std::pow(10000.0, -2.0 * m / dh));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const T pos = static_cast<T>(positions[static_cast<std::size_t>(i)]);
    for (int m = 0; m < half; ++m) {
      const T angle = pos * theta[m];
      const T c = std::cos(angle);
      const T s = inverse ? -std::sin(angle) : std::sin(angle);
      for (int k = 0; k < channels; ++k) {
        T& a = x(i, k * dh + 2 * m);
        T& b = x(i, k * dh + 2 * m + 1);
        const T a0 = a, b0 = b;
        a = a0 * c - b0 * s;
        b = a0 * s + b0 * c;
      }
    }
  }
}

}  // namespace detail

// ---- forward ---------------------------------------------------------------

/// Sum of token, 1D position, segment and the four layout-coordinate embeddings.
template <class T>
Mat<T> embed(const ParamSet<T>& p, const ModelConfig& c, const InputSample& s) {
  const int L = s.length();
  if (L > c.max_seq_len) throw InputError("sample of length " + std::to_string(L) + " exceeds max_seq_len");
  Mat<T> h = Mat<T>::Zero(L, c.d_model);
  const auto& tok = p[ParamIndex::tok];
  const auto& pos = p[ParamIndex::pos];
  const auto& seg = p[ParamIndex::seg];
  for (int i = 0; i < L; ++i) {
    const int id = s.token_ids[i];
    if (id < 0 || id >= c.vocab_size) throw InputError("token id " + std::to_string(id) + " out of vocabulary range");
    if (s.segment_ids[i] < 0 || s.segment_ids[i] > 1) throw InputError("segment id out of range");
    h.row(i) += tok.mat().row(id);
    h.row(i) += pos.mat().row(s.position_ids[i]);
    h.row(i) += seg.mat().row(s.segment_ids[i]);
    for (int k = 0; k < 4; ++k) {
      const int coord = s.layout[i][k];
      if (coord < 0 || coord > kCoordMax) throw InputError("layout coordinate out of range");
      h.row(i) += p[ParamIndex::x1 + static_cast<std::size_t>(k)].mat().row(c.layout_bucket(coord));
    }
  }
  return h;
}

/// Pre-norm transformer stack. The final norm belongs to the stack, so zero
/// layers is the identity.
template <class T>
Mat<T> encode(const ParamSet<T>& p, const ModelConfig& c, const Mat<T>& hidden,
              const std::vector<std::uint8_t>& attention_mask, EncodeCache<T>* cache = nullptr,
              const Dropout& dropout = {}) {
  const auto L = hidden.rows();
  const int d = c.d_model;
  const int dk = d / c.n_heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dk));
  Mat<T> x = hidden;
  if (dropout.active()) {
    Mat<T> m = dropout.mask<T>(L, d);
    x = (x.array() * m.array()).matrix();
    if (cache) cache->drop_embed = std::move(m);
  }
  if (c.n_layers == 0) return x;

  // Rows with nothing visible attend to themselves.
  std::vector<std::uint8_t> allowed = attention_mask;
  for (Eigen::Index i = 0; i < L; ++i) {
    bool any = false;
    for (Eigen::Index j = 0; j < L; ++j) any |= allowed[static_cast<std::size_t>(i * L + j)] != 0;
    if (!any) allowed[static_cast<std::size_t>(i * L + i)] = 1;
  }

  if (cache) cache->layers.resize(static_cast<std::size_t>(c.n_layers));
  for (int l = 0; l < c.n_layers; ++l) {
    LayerCache<T> local;
    LayerCache<T>& lc = cache ? cache->layers[static_cast<std::size_t>(l)] : local;
    auto P = [&](ParamIndex::Layer s) -> const Tensor<T>& { return p[ParamIndex::layer(l, s)]; };
    lc.x_in = x;
    lc.a = detail::layer_norm(x, P(ParamIndex::ln1_g), P(ParamIndex::ln1_b), lc.xhat1, lc.rstd1);
    lc.q = detail::linear(lc.a, P(ParamIndex::wq), P(ParamIndex::bq));
    lc.k = detail::linear(lc.a, P(ParamIndex::wk), P(ParamIndex::bk));
    lc.v = detail::linear(lc.a, P(ParamIndex::wv), P(ParamIndex::bv));
    lc.o.resize(L, d);
    lc.probs.resize(static_cast<std::size_t>(c.n_heads));
    for (int h = 0; h < c.n_heads; ++h) {
      Mat<T> s = (lc.q.middleCols(h * dk, dk) * lc.k.middleCols(h * dk, dk).transpose()) * scale;
      for (Eigen::Index i = 0; i < L; ++i) {
        T mx = std::numeric_limits<T>::lowest();
        for (Eigen::Index j = 0; j < L; ++j)
          if (allowed[static_cast<std::size_t>(i * L + j)]) mx = std::max(mx, s(i, j));
        T sum = 0;
        for (Eigen::Index j = 0; j < L; ++j) {
          const T e = allowed[static_cast<std::size_t>(i * L + j)] ? std::exp(s(i, j) - mx) : T(0);
          s(i, j) = e;
          sum += e;
        }
        s.row(i) /= sum;
      }
      lc.o.middleCols(h * dk, dk).noalias() = s * lc.v.middleCols(h * dk, dk);
      lc.probs[static_cast<std::size_t>(h)] = std::move(s);
    }
    Mat<T> y = detail::linear(lc.o, P(ParamIndex::wo), P(ParamIndex::bo));
    if (dropout.active()) {
      lc.drop_attn = dropout.mask<T>(L, d);
      y = (y.array() * lc.drop_attn.array()).matrix();
    }
    lc.x1 = x + y;
    lc.b = detail::layer_norm(lc.x1, P(ParamIndex::ln2_g), P(ParamIndex::ln2_b), lc.xhat2, lc.rstd2);
    lc.u = detail::linear(lc.b, P(ParamIndex::w1), P(ParamIndex::b1));
    lc.g = lc.u.unaryExpr([](T v) { return detail::gelu(v); });
    Mat<T> f = detail::linear(lc.g, P(ParamIndex::w2), P(ParamIndex::b2));
    if (dropout.active()) {
      lc.drop_ffn = dropout.mask<T>(L, d);
      f = (f.array() * lc.drop_ffn.array()).matrix();
    }
    x = lc.x1 + f;
  }
  Mat<T> xhat;
  std::vector<T> rstd;
  Mat<T> out = detail::layer_norm(x, p[ParamIndex::tail(c, ParamIndex::lnf_g)], p[ParamIndex::tail(c, ParamIndex::lnf_b)],
                                  xhat, rstd);
  if (cache) {
    cache->x_last = std::move(x);
    cache->xhat_f = std::move(xhat);
    cache->rstd_f = std::move(rstd);
  }
  return out;
}

/// Per-link-type bilinear scores Z[k][i][j] = <R_i a_k(i), R_j b_k(j)> with
/// rotary position R when enabled; masked cells get the sentinel.
template <class T>
ScoreTensor<T> score(const ParamSet<T>& p, const ModelConfig& c, const Mat<T>& h, const MaskTensor& mask,
                     const std::vector<int>& positions, ScoreCache<T>* cache = nullptr) {
  const int C = c.n_link_types();
  const int dh = c.d_head_score;
  const auto L = static_cast<int>(h.rows());
  if (mask.channels() != C || mask.length() != L) throw InputError("mask shape does not match the score tensor");
  Mat<T> ra = detail::linear(h, p[ParamIndex::tail(c, ParamIndex::wa)], p[ParamIndex::tail(c, ParamIndex::ba)]);
  Mat<T> rb = detail::linear(h, p[ParamIndex::tail(c, ParamIndex::wb)], p[ParamIndex::tail(c, ParamIndex::bb)]);
  if (c.use_sinusoidal) {
    detail::rotate(ra, positions, C, dh, false);
    detail::rotate(rb, positions, C, dh, false);
  }
  ScoreTensor<T> z(C, L);
  for (int k = 1; k <= C; ++k)
    z.channel(k).noalias() = ra.middleCols((k - 1) * dh, dh) * rb.middleCols((k - 1) * dh, dh).transpose();
  const auto& m = mask.data();
  for (std::size_t i = 0; i < z.data.size(); ++i)
    if (!m[i]) z.data[i] = masked_sentinel<T>();
  if (cache) {
    cache->h = h;
    cache->ra = std::move(ra);
    cache->rb = std::move(rb);
    cache->positions = positions;
  }
  return z;
}

/// log(1 + sum_neg e^z) + log(1 + sum_pos e^-z) over unmasked cells, each term
/// evaluated as a log-sum-exp that includes the implicit zero logit. When
/// `grad` is given it receives dLoss/dZ (zero on masked cells).
template <class T>
double circle_loss(const ScoreTensor<T>& z, const LinkMatrix& gold, const MaskTensor& mask,
                   std::vector<T>* grad = nullptr) {
  const auto& m = mask.data();
  const auto& g = gold.data();
  if (m.size() != z.data.size() || g.size() != z.data.size())
    throw InputError("circle loss: score, gold and mask shapes differ");
  double neg_max = 0.0, pos_max = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    const double v = static_cast<double>(z.data[i]);
    if (g[i]) pos_max = std::max(pos_max, -v);
    else neg_max = std::max(neg_max, v);
  }
  double neg_sum = std::exp(-neg_max), pos_sum = std::exp(-pos_max);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    const double v = static_cast<double>(z.data[i]);
    if (g[i]) pos_sum += std::exp(-v - pos_max);
    else neg_sum += std::exp(v - neg_max);
  }
  const double neg_lse = neg_max + std::log(neg_sum);
  const double pos_lse = pos_max + std::log(pos_sum);
  if (grad) {
    grad->assign(z.data.size(), T(0));
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!m[i]) continue;
      const double v = static_cast<double>(z.data[i]);
      (*grad)[i] = g[i] ? static_cast<T>(-std::exp(-v - pos_lse)) : static_cast<T>(std::exp(v - neg_lse));
    }
  }
  return neg_lse + pos_lse;
}

// ---- backward --------------------------------------------------------------

/// Returns dLoss/dH and accumulates scorer gradients.
template <class T>
Mat<T> score_backward(const ParamSet<T>& p, const ModelConfig& c, const ScoreCache<T>& cache,
                      const std::vector<T>& dz, ParamSet<T>& grads) {
  const int C = c.n_link_types();
  const int dh = c.d_head_score;
  const auto L = cache.h.rows();
  Mat<T> dra = Mat<T>::Zero(L, C * dh);
  Mat<T> drb = Mat<T>::Zero(L, C * dh);
  for (int k = 1; k <= C; ++k) {
    ConstMatMap<T> g(dz.data() + static_cast<std::size_t>(k - 1) * L * L, L, L);
    dra.middleCols((k - 1) * dh, dh).noalias() = g * cache.rb.middleCols((k - 1) * dh, dh);
    drb.middleCols((k - 1) * dh, dh).noalias() = g.transpose() * cache.ra.middleCols((k - 1) * dh, dh);
  }
  if (c.use_sinusoidal) {
    detail::rotate(dra, cache.positions, C, dh, true);
    detail::rotate(drb, cache.positions, C, dh, true);
  }
  Mat<T> dh_out = detail::linear_backward(cache.h, dra, p[ParamIndex::tail(c, ParamIndex::wa)],
                                          grads[ParamIndex::tail(c, ParamIndex::wa)],
                                          grads[ParamIndex::tail(c, ParamIndex::ba)]);
  dh_out += detail::linear_backward(cache.h, drb, p[ParamIndex::tail(c, ParamIndex::wb)],
                                    grads[ParamIndex::tail(c, ParamIndex::wb)],
                                    grads[ParamIndex::tail(c, ParamIndex::bb)]);
  return dh_out;
}

/// Returns dLoss/dHidden and accumulates encoder gradients.
template <class T>
Mat<T> encode_backward(const ParamSet<T>& p, const ModelConfig& c, const EncodeCache<T>& cache, const Mat<T>& dout,
                       ParamSet<T>& grads) {
  Mat<T> dx = dout;
  if (c.n_layers > 0) {
    dx = detail::layer_norm_backward(dout, cache.xhat_f, cache.rstd_f, p[ParamIndex::tail(c, ParamIndex::lnf_g)],
                                     grads[ParamIndex::tail(c, ParamIndex::lnf_g)],
                                     grads[ParamIndex::tail(c, ParamIndex::lnf_b)]);
    const int d = c.d_model;
    const int dk = d / c.n_heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dk));
    for (int l = c.n_layers - 1; l >= 0; --l) {
      const auto& lc = cache.layers[static_cast<std::size_t>(l)];
      auto P = [&](ParamIndex::Layer s) -> const Tensor<T>& { return p[ParamIndex::layer(l, s)]; };
      auto G = [&](ParamIndex::Layer s) -> Tensor<T>& { return grads[ParamIndex::layer(l, s)]; };
      const auto L = lc.x_in.rows();

      // feed-forward branch
      Mat<T> df = dx;
      if (lc.drop_ffn.size()) df = (df.array() * lc.drop_ffn.array()).matrix();
      Mat<T> dg = detail::linear_backward(lc.g, df, P(ParamIndex::w2), G(ParamIndex::w2), G(ParamIndex::b2));
      Mat<T> du = (dg.array() * lc.u.unaryExpr([](T v) { return detail::gelu_grad(v); }).array()).matrix();
      Mat<T> db = detail::linear_backward(lc.b, du, P(ParamIndex::w1), G(ParamIndex::w1), G(ParamIndex::b1));
      Mat<T> dx1 = dx + detail::layer_norm_backward(db, lc.xhat2, lc.rstd2, P(ParamIndex::ln2_g), G(ParamIndex::ln2_g),
                                                    G(ParamIndex::ln2_b));

      // attention branch
      Mat<T> dy = dx1;
      if (lc.drop_attn.size()) dy = (dy.array() * lc.drop_attn.array()).matrix();
      Mat<T> dov = detail::linear_backward(lc.o, dy, P(ParamIndex::wo), G(ParamIndex::wo), G(ParamIndex::bo));
      Mat<T> dq(L, d), dk_m(L, d), dv(L, d);
      for (int h = 0; h < c.n_heads; ++h) {
        const auto& prob = lc.probs[static_cast<std::size_t>(h)];
        const auto doh = dov.middleCols(h * dk, dk);
        Mat<T> dp = doh * lc.v.middleCols(h * dk, dk).transpose();
        dv.middleCols(h * dk, dk).noalias() = prob.transpose() * doh;
        Mat<T> ds = prob.cwiseProduct(dp);
        const Eigen::Matrix<T, Eigen::Dynamic, 1> rowdot = ds.rowwise().sum();
        ds -= (prob.array().colwise() * rowdot.array()).matrix();
        ds *= scale;
        dq.middleCols(h * dk, dk).noalias() = ds * lc.k.middleCols(h * dk, dk);
        dk_m.middleCols(h * dk, dk).noalias() = ds.transpose() * lc.q.middleCols(h * dk, dk);
      }
      Mat<T> da = detail::linear_backward(lc.a, dq, P(ParamIndex::wq), G(ParamIndex::wq), G(ParamIndex::bq));
      da += detail::linear_backward(lc.a, dk_m, P(ParamIndex::wk), G(ParamIndex::wk), G(ParamIndex::bk));
      da += detail::linear_backward(lc.a, dv, P(ParamIndex::wv), G(ParamIndex::wv), G(ParamIndex::bv));
      dx = dx1 + detail::layer_norm_backward(da, lc.xhat1, lc.rstd1, P(ParamIndex::ln1_g), G(ParamIndex::ln1_g),
                                             G(ParamIndex::ln1_b));
    }
  }
  if (cache.drop_embed.size()) dx = (dx.array() * cache.drop_embed.array()).matrix();
  return dx;
}

template <class T>
void embed_backward(const ModelConfig& c, const InputSample& s, const Mat<T>& dh, ParamSet<T>& grads) {
  for (int i = 0; i < s.length(); ++i) {
    grads[ParamIndex::tok].mat().row(s.token_ids[i]) += dh.row(i);
    grads[ParamIndex::pos].mat().row(s.position_ids[i]) += dh.row(i);
    grads[ParamIndex::seg].mat().row(s.segment_ids[i]) += dh.row(i);
    for (int k = 0; k < 4; ++k) grads[ParamIndex::x1 + static_cast<std::size_t>(k)].mat().row(c.layout_bucket(s.layout[i][k])) += dh.row(i);
  }
}

// ---- whole-sample helpers --------------------------------------------------

/// Everything the model needs for one window besides its parameters.
struct PreparedSample {
  InputSample sample;
  std::vector<std::uint8_t> attention;
  MaskTensor mask;
  LinkMatrix gold;  // empty at inference time
};

inline PreparedSample prepare(InputSample s, const ModelConfig& c) {
  PreparedSample out;
  out.attention = build_attention_mask(s);
  out.mask = build_masks(s, c.mask_options());
  out.sample = std::move(s);
  return out;
}

template <class T>
ScoreTensor<T> forward_scores(const ParamSet<T>& p, const ModelConfig& c, const PreparedSample& ps) {
  const Mat<T> hidden = embed(p, c, ps.sample);
  const Mat<T> h = encode(p, c, hidden, ps.attention);
  return score(p, c, h, ps.mask, ps.sample.position_ids);
}

/// Forward + circle loss + backward for one window; gradients are added to `grads`
/// scaled by `weight`. Returns the unweighted loss.
template <class T>
double loss_and_grad(const ParamSet<T>& p, const ModelConfig& c, const PreparedSample& ps, ParamSet<T>& grads,
                     T weight = T(1), const Dropout& dropout = {}) {
  EncodeCache<T> ec;
  ScoreCache<T> sc;
  const Mat<T> hidden = embed(p, c, ps.sample);
  const Mat<T> h = encode(p, c, hidden, ps.attention, &ec, dropout);
  const auto z = score(p, c, h, ps.mask, ps.sample.position_ids, &sc);
  std::vector<T> dz;
  const double loss = circle_loss(z, ps.gold, ps.mask, &dz);
  if (weight != T(1))
    for (auto& v : dz) v *= weight;
  const Mat<T> dh = score_backward(p, c, sc, dz, grads);
  const Mat<T> dhidden = encode_backward(p, c, ec, dh, grads);
  embed_backward(c, ps.sample, dhidden, grads);
  return loss;
}

template <class T>
double loss_only(const ParamSet<T>& p, const ModelConfig& c, const PreparedSample& ps) {
  return circle_loss(forward_scores(p, c, ps), ps.gold, ps.mask);
}

}  // namespace ppn
