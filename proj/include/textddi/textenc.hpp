#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "textddi/common.hpp"

namespace textddi {

/// Row-major dense matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

/// Gradient of a large table stored as its non-zero rows only.
struct SparseRows {
  std::size_t cols = 0;
  std::map<std::uint32_t, std::vector<double>> rows;

  void add(std::uint32_t r, std::span<const double> values, double scale);
  double at(std::uint32_t r, std::size_t c) const;
};

// ---------------------------------------------------------------------------
// Encoder: hashed bag of tokens, mean pooled.

struct EncoderParams {
  std::uint32_t dim_hash = 1u << 18;
  std::uint32_t dim_embed = 64;
  Matrix table;  // dim_hash x dim_embed

  /// Entries i.i.d. uniform in [-0.5/dim_embed, 0.5/dim_embed].
  static EncoderParams init(std::uint32_t dim_hash, std::uint32_t dim_embed, Rng& rng);

  std::uint32_t bucket(std::uint64_t token_hash) const {
    return static_cast<std::uint32_t>(token_hash & (dim_hash - 1));
  }
  bool operator==(const EncoderParams&) const = default;
};

/// Mean of table[hash(token) mod dim_hash] over the tokens of text; the zero
/// vector for text without tokens.
std::vector<double> encode(std::string_view text, const EncoderParams& params);
std::vector<double> encode_hashes(std::span<const std::uint64_t> hashes,
                                  const EncoderParams& params);

/// Accumulates d(loss)/d(table) given d(loss)/d(encoding) for one text.
void backprop_encoding(std::span<const std::uint64_t> hashes, const EncoderParams& params,
                       std::span<const double> d_encoding, SparseRows& d_table);

// ---------------------------------------------------------------------------
// Predictor: softmax(head * encode(text) + bias)

struct PredictorParams {
  EncoderParams encoder;
  Matrix head;               // num_types x dim_embed
  std::vector<double> bias;  // num_types

  std::size_t num_types() const { return bias.size(); }
  bool operator==(const PredictorParams&) const = default;
};

/// Table uniform as EncoderParams::init; head and bias zero.
PredictorParams init_predictor(std::size_t num_types, std::uint32_t dim_hash,
                               std::uint32_t dim_embed, std::uint64_t seed);

std::vector<double> predictor_logits(std::span<const std::uint64_t> hashes,
                                     const PredictorParams& params);
std::vector<double> predictor_forward(std::string_view text, const PredictorParams& params);
std::vector<double> predictor_forward_hashes(std::span<const std::uint64_t> hashes,
                                             const PredictorParams& params);

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

struct LabeledText {
  std::string text;
  int label = 0;
};

struct HashedExample {
  std::vector<std::uint64_t> hashes;
  int label = 0;
};

HashedExample hash_example(const LabeledText& sample);

struct PredictorGrad {
  SparseRows table;
  Matrix head;
  std::vector<double> bias;
};

/// Summed cross-entropy  sum_b -log P(label_b | text_b).
double predictor_loss(const PredictorParams& params, std::span<const HashedExample> batch);

/// Analytic gradient of predictor_loss (sum over the batch).
PredictorGrad gradient(const PredictorParams& params, std::span<const HashedExample> batch);
PredictorGrad gradient(const PredictorParams& params, std::span<const LabeledText> batch);

// ---------------------------------------------------------------------------
// Optimization

struct OptConfig {
  double lr = 1e-5;
  double weight_decay = 6e-6;
  std::size_t batch_size = 128;
  int epochs = 1;
  bool adam = false;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
};

/// Gradient descent with decoupled weight decay (AdamW-style when
/// cfg.adam). State is kept per block id; call next() once per step.
class Optimizer {
 public:
  explicit Optimizer(const OptConfig& cfg) : cfg_(cfg) {}

  void next() { ++step_; }
  void dense(std::size_t block, std::span<double> param, std::span<const double> grad,
             double scale);
  void sparse(std::size_t block, Matrix& param, const SparseRows& grad, double scale);

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  Moments& moments(std::size_t block, std::size_t n);

  OptConfig cfg_;
  long step_ = 0;
  std::map<std::size_t, Moments> state_;
};

void apply_gradient(Optimizer& opt, PredictorParams& params, const PredictorGrad& grad,
                    double scale);

struct TrainReport {
  std::vector<double> epoch_loss;  // mean loss per sample, one per epoch
};

/// Mini-batch descent on the cross-entropy, mean gradient per batch,
/// reshuffled each epoch from cfg.seed. Throws DataError on an empty sample
/// set or invalid label, NumericalError on a non-finite batch loss.
PredictorParams train_predictor(std::span<const HashedExample> samples, PredictorParams params,
                                const OptConfig& cfg, TrainReport* report = nullptr);
PredictorParams train_predictor(std::span<const LabeledText> samples, PredictorParams params,
                                const OptConfig& cfg, TrainReport* report = nullptr);
/// Continues with an existing optimizer (moments carry over between calls).
PredictorParams train_predictor(std::span<const HashedExample> samples, PredictorParams params,
                                const OptConfig& cfg, Optimizer& opt,
                                TrainReport* report = nullptr);

// ---------------------------------------------------------------------------
// Checkpoints: magic, u32 dim count, u32 dims, then row-major f64 blocks,
// all little-endian.

std::string predictor_to_bytes(const PredictorParams& params);
PredictorParams predictor_from_bytes(std::string_view bytes);
void save_predictor(const PredictorParams& params, const std::filesystem::path& path);
PredictorParams load_predictor(const std::filesystem::path& path);

namespace detail {
void put_u32(std::string& out, std::uint32_t v);
void put_f64s(std::string& out, std::span<const double> values);
class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}
  std::uint32_t u32();
  void f64s(std::span<double> out);
  void expect_magic(std::string_view magic);
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);
}  // namespace detail

}  // namespace textddi
