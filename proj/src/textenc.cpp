#include "textddi/textenc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "textddi/tokenizer.hpp"

namespace textddi {

void SparseRows::add(std::uint32_t r, std::span<const double> values, double scale) {
  auto& row = rows[r];
  if (row.empty()) row.assign(cols, 0.0);
  for (std::size_t c = 0; c < cols; ++c) row[c] += scale * values[c];
}

double SparseRows::at(std::uint32_t r, std::size_t c) const {
  auto it = rows.find(r);
  return it == rows.end() ? 0.0 : it->second[c];
}

EncoderParams EncoderParams::init(std::uint32_t dim_hash, std::uint32_t dim_embed, Rng& rng) {
  if (dim_hash == 0 || (dim_hash & (dim_hash - 1)) != 0) {
    throw DataError("dim_hash must be a power of two");
  }
  if (dim_embed == 0) throw DataError("dim_embed must be positive");
  EncoderParams p;
  p.dim_hash = dim_hash;
  p.dim_embed = dim_embed;
  p.table = Matrix(dim_hash, dim_embed);
  const double a = 0.5 / dim_embed;
  for (double& x : p.table.data) x = -a + 2.0 * a * uniform01(rng);
  return p;
}

std::vector<double> encode_hashes(std::span<const std::uint64_t> hashes,
                                  const EncoderParams& params) {
  std::vector<double> out(params.dim_embed, 0.0);
  if (hashes.empty()) return out;
  for (std::uint64_t h : hashes) {
    auto row = params.table.row(params.bucket(h));
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += row[c];
  }
  const double inv = 1.0 / static_cast<double>(hashes.size());
  for (double& x : out) x *= inv;
  return out;
}

std::vector<double> encode(std::string_view text, const EncoderParams& params) {
  return encode_hashes(token_hashes(text), params);
}

void backprop_encoding(std::span<const std::uint64_t> hashes, const EncoderParams& params,
                       std::span<const double> d_encoding, SparseRows& d_table) {
  if (hashes.empty()) return;
  d_table.cols = params.dim_embed;
  const double inv = 1.0 / static_cast<double>(hashes.size());
  for (std::uint64_t h : hashes) d_table.add(params.bucket(h), d_encoding, inv);
}

PredictorParams init_predictor(std::size_t num_types, std::uint32_t dim_hash,
                               std::uint32_t dim_embed, std::uint64_t seed) {
  if (num_types == 0) throw DataError("predictor needs at least one interaction type");
  Rng rng(derive_seed(seed, 0x707265));
  PredictorParams p;
  p.encoder = EncoderParams::init(dim_hash, dim_embed, rng);
  p.head = Matrix(num_types, dim_embed);
  p.bias.assign(num_types, 0.0);
  return p;
}

namespace {

std::vector<double> logits_from_encoding(std::span<const double> e, const PredictorParams& p) {
  std::vector<double> z(p.num_types());
  for (std::size_t i = 0; i < z.size(); ++i) {
    auto w = p.head.row(i);
    double acc = p.bias[i];
    for (std::size_t c = 0; c < e.size(); ++c) acc += w[c] * e[c];
    z[i] = acc;
  }
  return z;
}

void check_label(const PredictorParams& p, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= p.num_types()) {
    throw DataError("label " + std::to_string(label) + " outside [0, " +
                    std::to_string(p.num_types()) + ")");
  }
}

}  // namespace

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double mx = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& x : p) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : p) x /= sum;
  return p;
}

std::vector<double> predictor_logits(std::span<const std::uint64_t> hashes,
                                     const PredictorParams& params) {
  return logits_from_encoding(encode_hashes(hashes, params.encoder), params);
}

std::vector<double> predictor_forward_hashes(std::span<const std::uint64_t> hashes,
                                             const PredictorParams& params) {
  return softmax(predictor_logits(hashes, params));
}

std::vector<double> predictor_forward(std::string_view text, const PredictorParams& params) {
  return predictor_forward_hashes(token_hashes(text), params);
}

HashedExample hash_example(const LabeledText& sample) {
  return {token_hashes(sample.text), sample.label};
}

double predictor_loss(const PredictorParams& params, std::span<const HashedExample> batch) {
  double loss = 0.0;
  for (const auto& ex : batch) {
    check_label(params, ex.label);
    auto z = predictor_logits(ex.hashes, params);
    const double mx = *std::max_element(z.begin(), z.end());
    double lse = 0.0;
    for (double x : z) lse += std::exp(x - mx);
    loss += mx + std::log(lse) - z[static_cast<std::size_t>(ex.label)];
  }
  return loss;
}

PredictorGrad gradient(const PredictorParams& params, std::span<const HashedExample> batch) {
  const std::size_t d = params.encoder.dim_embed;
  PredictorGrad g;
  g.table.cols = d;
  g.head = Matrix(params.num_types(), d);
  g.bias.assign(params.num_types(), 0.0);
  std::vector<double> de(d);
  for (const auto& ex : batch) {
    check_label(params, ex.label);
    auto e = encode_hashes(ex.hashes, params.encoder);
    auto p = softmax(logits_from_encoding(e, params));
    p[static_cast<std::size_t>(ex.label)] -= 1.0;  // dz = p - onehot
    std::fill(de.begin(), de.end(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
      g.bias[i] += p[i];
      auto gh = g.head.row(i);
      auto w = params.head.row(i);
      for (std::size_t c = 0; c < d; ++c) {
        gh[c] += p[i] * e[c];
        de[c] += p[i] * w[c];
      }
    }
    backprop_encoding(ex.hashes, params.encoder, de, g.table);
  }
  return g;
}

PredictorGrad gradient(const PredictorParams& params, std::span<const LabeledText> batch) {
  std::vector<HashedExample> hashed;
  hashed.reserve(batch.size());
  for (const auto& s : batch) hashed.push_back(hash_example(s));
  return gradient(params, hashed);
}

// ---------------------------------------------------------------------------

Optimizer::Moments& Optimizer::moments(std::size_t block, std::size_t n) {
  auto& m = state_[block];
  if (m.m.size() != n) {
    m.m.assign(n, 0.0);
    m.v.assign(n, 0.0);
  }
  return m;
}

void Optimizer::dense(std::size_t block, std::span<double> param, std::span<const double> grad,
                      double scale) {
  const double lr = cfg_.lr;
  const double decay = 1.0 - lr * cfg_.weight_decay;
  if (!cfg_.adam) {
    for (std::size_t k = 0; k < param.size(); ++k) {
      param[k] = param[k] * decay - lr * scale * grad[k];
    }
    return;
  }
  auto& st = moments(block, param.size());
  const double t = static_cast<double>(std::max<long>(step_, 1));
  const double c1 = 1.0 - std::pow(cfg_.beta1, t);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t);
  for (std::size_t k = 0; k < param.size(); ++k) {
    const double g = scale * grad[k];
    st.m[k] = cfg_.beta1 * st.m[k] + (1.0 - cfg_.beta1) * g;
    st.v[k] = cfg_.beta2 * st.v[k] + (1.0 - cfg_.beta2) * g * g;
    const double update = (st.m[k] / c1) / (std::sqrt(st.v[k] / c2) + cfg_.eps);
    param[k] = param[k] * decay - lr * update;
  }
}

void Optimizer::sparse(std::size_t block, Matrix& param, const SparseRows& grad, double scale) {
  const double lr = cfg_.lr;
  const double decay = 1.0 - lr * cfg_.weight_decay;
  const std::size_t cols = param.cols;
  if (!cfg_.adam) {
    if (decay != 1.0) {
      for (double& x : param.data) x *= decay;
    }
    for (const auto& [r, g] : grad.rows) {
      auto row = param.row(r);
      for (std::size_t c = 0; c < cols; ++c) row[c] -= lr * scale * g[c];
    }
    return;
  }
  // Rows without a gradient still see their moments decay (dense Adam).
  auto& st = moments(block, param.data.size());
  const double t = static_cast<double>(std::max<long>(step_, 1));
  const double c1 = 1.0 - std::pow(cfg_.beta1, t);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t);
  auto it = grad.rows.begin();
  for (std::size_t r = 0; r < param.rows; ++r) {
    const double* g = nullptr;
    if (it != grad.rows.end() && it->first == r) {
      g = it->second.data();
      ++it;
    }
    const std::size_t base = r * cols;
    bool idle = g == nullptr;
    for (std::size_t c = 0; c < cols && idle; ++c) {
      idle = st.m[base + c] == 0.0 && st.v[base + c] == 0.0;
    }
    if (idle) {
      if (decay != 1.0) {
        for (std::size_t c = 0; c < cols; ++c) param.data[base + c] *= decay;
      }
      continue;
    }
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t k = base + c;
      const double gk = g ? scale * g[c] : 0.0;
      st.m[k] = cfg_.beta1 * st.m[k] + (1.0 - cfg_.beta1) * gk;
      st.v[k] = cfg_.beta2 * st.v[k] + (1.0 - cfg_.beta2) * gk * gk;
      const double update = (st.m[k] / c1) / (std::sqrt(st.v[k] / c2) + cfg_.eps);
      param.data[k] = param.data[k] * decay - lr * update;
    }
  }
}

void apply_gradient(Optimizer& opt, PredictorParams& params, const PredictorGrad& grad,
                    double scale) {
  opt.next();
  opt.sparse(0, params.encoder.table, grad.table, scale);
  opt.dense(1, params.head.data, grad.head.data, scale);
  opt.dense(2, params.bias, grad.bias, scale);
}

PredictorParams train_predictor(std::span<const HashedExample> samples, PredictorParams params,
                                const OptConfig& cfg, TrainReport* report) {
  Optimizer opt(cfg);
  return train_predictor(samples, std::move(params), cfg, opt, report);
}

PredictorParams train_predictor(std::span<const HashedExample> samples, PredictorParams params,
                                const OptConfig& cfg, Optimizer& opt, TrainReport* report) {
  if (samples.empty()) throw DataError("train_predictor: empty sample set");
  if (cfg.batch_size == 0) throw DataError("train_predictor: batch_size must be positive");
  for (const auto& s : samples) check_label(params, s.label);

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<HashedExample> batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, 0x65706f, epoch));
    shuffle_in_place(order, rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(samples[order[k]]);
      const double loss = predictor_loss(params, batch);
      if (!std::isfinite(loss)) {
        throw NumericalError("non-finite predictor loss in epoch " + std::to_string(epoch) +
                             ", batch starting at sample " + std::to_string(start));
      }
      epoch_loss += loss;
      auto g = gradient(params, batch);
      apply_gradient(opt, params, g, 1.0 / static_cast<double>(batch.size()));
    }
    if (report) report->epoch_loss.push_back(epoch_loss / static_cast<double>(samples.size()));
  }
  return params;
}

PredictorParams train_predictor(std::span<const LabeledText> samples, PredictorParams params,
                                const OptConfig& cfg, TrainReport* report) {
  std::vector<HashedExample> hashed;
  hashed.reserve(samples.size());
  for (const auto& s : samples) hashed.push_back(hash_example(s));
  return train_predictor(std::span<const HashedExample>(hashed), std::move(params), cfg, report);
}

// ---------------------------------------------------------------------------

namespace detail {

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

void put_f64s(std::string& out, std::span<const double> values) {
  for (double x : values) {
    auto bits = std::bit_cast<std::uint64_t>(x);
    for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((bits >> (8 * k)) & 0xff));
  }
}

std::uint32_t ByteReader::u32() {
  if (pos_ + 4 > bytes_.size()) throw DataError("checkpoint truncated");
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + k])) << (8 * k);
  }
  pos_ += 4;
  return v;
}

void ByteReader::f64s(std::span<double> out) {
  if (pos_ + 8 * out.size() > bytes_.size()) throw DataError("checkpoint truncated");
  for (double& x : out) {
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + k])) << (8 * k);
    }
    x = std::bit_cast<double>(bits);
    pos_ += 8;
  }
}

void ByteReader::expect_magic(std::string_view magic) {
  if (bytes_.substr(0, magic.size()) != magic) {
    throw DataError("bad checkpoint magic, expected " + std::string(magic));
  }
  pos_ = magic.size();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace detail

std::string predictor_to_bytes(const PredictorParams& params) {
  std::string out = "TXE1";
  detail::put_u32(out, 3);
  detail::put_u32(out, params.encoder.dim_hash);
  detail::put_u32(out, params.encoder.dim_embed);
  detail::put_u32(out, static_cast<std::uint32_t>(params.num_types()));
  detail::put_f64s(out, params.encoder.table.data);
  detail::put_f64s(out, params.head.data);
  detail::put_f64s(out, params.bias);
  return out;
}

PredictorParams predictor_from_bytes(std::string_view bytes) {
  detail::ByteReader in(bytes);
  in.expect_magic("TXE1");
  if (in.u32() != 3) throw DataError("predictor checkpoint must carry 3 dims");
  PredictorParams p;
  p.encoder.dim_hash = in.u32();
  p.encoder.dim_embed = in.u32();
  const std::uint32_t types = in.u32();
  if (p.encoder.dim_hash == 0 || (p.encoder.dim_hash & (p.encoder.dim_hash - 1)) != 0 ||
      p.encoder.dim_embed == 0 || types == 0) {
    throw DataError("predictor checkpoint has invalid dims");
  }
  p.encoder.table = Matrix(p.encoder.dim_hash, p.encoder.dim_embed);
  p.head = Matrix(types, p.encoder.dim_embed);
  p.bias.assign(types, 0.0);
  in.f64s(p.encoder.table.data);
  in.f64s(p.head.data);
  in.f64s(p.bias);
  if (!in.done()) throw DataError("trailing bytes in predictor checkpoint");
  return p;
}

void save_predictor(const PredictorParams& params, const std::filesystem::path& path) {
  detail::write_file(path, predictor_to_bytes(params));
}

PredictorParams load_predictor(const std::filesystem::path& path) {
  return predictor_from_bytes(detail::read_file(path));
}

}  // namespace textddi
