#ifndef FAIRSAMPLE_MADE_HPP
#define FAIRSAMPLE_MADE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairsample/error.hpp"
#include "fairsample/random.hpp"
#include "fairsample/spin_config.hpp"

namespace fairsample {

struct TrainConfig {
  std::size_t epochs = 500;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::vector<std::size_t> hidden_sizes;  // empty: one layer of width 4N
  std::uint64_t seed = 0;
  std::size_t plateau_epochs = 50;        // early stop after this many epochs ...
  double plateau_tolerance = 1e-5;        // ... without this much NLL improvement
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

/// Affine map out = W in + b whose weights are multiplied by a 0/1 mask.
struct MaskedLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;      // out x in, row-major
  std::vector<double> biases;       // out
  std::vector<std::uint8_t> mask;   // out x in

  std::size_t at(std::size_t o, std::size_t i) const noexcept { return o * in + i; }
};

/// Masked autoencoder for distribution estimation over N binary variables.
///
/// q(b) = prod_r q(b_{o_r} | b_{o_1..o_{r-1}}) where o is `order`. Hidden
/// units use ReLU; each output passes through a sigmoid giving
/// P(b_d = 1 | earlier variables). Conditionals are clamped to
/// [kClamp, 1 - kClamp] in log_prob and sample, so every configuration has
/// probability at least kClamp^N.
class MadeNetwork {
 public:
  static constexpr double kClamp = 1e-7;

  MadeNetwork() = default;

  /// All weights and biases zero: every conditional is 1/2.
  MadeNetwork(std::size_t n_inputs, std::vector<std::size_t> hidden_sizes,
              std::vector<std::size_t> order = {})
      : n_(n_inputs), hidden_(std::move(hidden_sizes)), order_(std::move(order)) {
    if (n_ == 0 || n_ > SpinConfig::kMaxSites) throw CapacityError("MADE needs 1..64 inputs");
    if (order_.empty()) {
      order_.resize(n_);
      std::iota(order_.begin(), order_.end(), std::size_t{0});
    }
    check_order();
    build_masks();
  }

  std::size_t n_inputs() const noexcept { return n_; }
  const std::vector<std::size_t>& order() const noexcept { return order_; }
  const std::vector<std::size_t>& hidden_sizes() const noexcept { return hidden_; }
  const std::vector<MaskedLayer>& layers() const noexcept { return layers_; }
  std::vector<MaskedLayer>& layers() noexcept { return layers_; }

  std::size_t parameter_count() const noexcept {
    std::size_t c = 0;
    for (const auto& l : layers_) c += l.weights.size() + l.biases.size();
    return c;
  }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) on all weights and biases.
  void initialize(Rng& rng) {
    for (auto& l : layers_) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
      for (auto& w : l.weights) w = uniform_real(rng, -bound, bound);
      for (auto& b : l.biases) b = uniform_real(rng, -bound, bound);
    }
  }

  /// Output logits for input bits; activations of every layer are written to
  /// `acts` (acts[0] = input, acts.back() = logits) when non-null.
  std::vector<double> logits(std::uint64_t bits, std::vector<std::vector<double>>* acts = nullptr) const {
    std::vector<double> x(n_);
    for (std::size_t d = 0; d < n_; ++d) x[d] = static_cast<double>((bits >> d) & 1U);
    if (acts) {
      acts->clear();
      acts->push_back(x);
    }
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      const auto& l = layers_[li];
      std::vector<double> y(l.out);
      for (std::size_t o = 0; o < l.out; ++o) {
        double a = l.biases[o];
        const std::size_t row = o * l.in;
        for (std::size_t i = 0; i < l.in; ++i) {
          if (l.mask[row + i]) a += l.weights[row + i] * x[i];
        }
        const bool hidden = li + 1 < layers_.size();
        y[o] = hidden ? std::max(0.0, a) : a;
      }
      x = std::move(y);
      if (acts) acts->push_back(x);
    }
    return x;
  }

  /// Unclamped P(b_d = 1 | preceding bits), indexed by variable.
  std::vector<double> conditionals(const SpinConfig& config) const {
    check_size(config);
    auto a = logits(config.bits());
    for (auto& v : a) v = sigmoid(v);
    return a;
  }

  double log_prob(const SpinConfig& config) const {
    check_size(config);
    return log_prob_bits(config.bits());
  }

  double log_prob_bits(std::uint64_t bits) const {
    const auto a = logits(bits);
    double lp = 0.0;
    for (std::size_t d = 0; d < n_; ++d) {
      const double p = clamp(sigmoid(a[d]));
      lp += ((bits >> d) & 1U) ? std::log(p) : std::log1p(-p);
    }
    return lp;
  }

  /// Ancestral draw following `order`.
  SpinConfig sample(Rng& rng) const {
    std::uint64_t bits = 0;
    for (std::size_t d : order_) {
      const double p = clamp(sigmoid(logits(bits)[d]));
      if (uniform01(rng) < p) bits |= std::uint64_t{1} << d;
    }
    return SpinConfig(n_, bits);
  }

  /// True when the composed masks let output d see only inputs that come
  /// before d in `order`.
  bool masks_are_autoregressive() const {
    // reach[u][i]: unit u of the current layer is connected to input i.
    std::vector<std::vector<std::uint8_t>> reach(n_, std::vector<std::uint8_t>(n_, 0));
    for (std::size_t i = 0; i < n_; ++i) reach[i][i] = 1;
    for (const auto& l : layers_) {
      std::vector<std::vector<std::uint8_t>> next(l.out, std::vector<std::uint8_t>(n_, 0));
      for (std::size_t o = 0; o < l.out; ++o) {
        for (std::size_t u = 0; u < l.in; ++u) {
          if (!l.mask[l.at(o, u)]) continue;
          for (std::size_t i = 0; i < n_; ++i) next[o][i] |= reach[u][i];
        }
      }
      reach = std::move(next);
    }
    const auto rank = ranks();
    for (std::size_t d = 0; d < n_; ++d) {
      for (std::size_t i = 0; i < n_; ++i) {
        if (reach[d][i] && rank[i] >= rank[d]) return false;
      }
    }
    return true;
  }

  static double sigmoid(double a) noexcept {
    return a >= 0 ? 1.0 / (1.0 + std::exp(-a)) : std::exp(a) / (1.0 + std::exp(a));
  }
  static double clamp(double p) noexcept { return std::min(std::max(p, kClamp), 1.0 - kClamp); }

  /// Position of each variable in `order`, 1-based.
  std::vector<std::size_t> ranks() const {
    std::vector<std::size_t> r(n_);
    for (std::size_t pos = 0; pos < n_; ++pos) r[order_[pos]] = pos + 1;
    return r;
  }

 private:
  void check_size(const SpinConfig& c) const {
    if (c.size() != n_) {
      throw DimensionError("configuration has " + std::to_string(c.size()) + " sites, network has " +
                           std::to_string(n_));
    }
  }

  void check_order() const {
    if (order_.size() != n_) throw ContractError("variable order must be a permutation of 0..N-1");
    std::vector<std::uint8_t> seen(n_, 0);
    for (auto d : order_) {
      if (d >= n_ || seen[d]) throw ContractError("variable order must be a permutation of 0..N-1");
      seen[d] = 1;
    }
  }

  void build_masks() {
    layers_.clear();
    const auto rank = ranks();
    std::vector<std::size_t> prev_degree(rank.begin(), rank.end());
    std::size_t prev = n_;
    const std::size_t cycle = std::max<std::size_t>(1, n_ - 1);
    for (std::size_t width : hidden_) {
      if (width == 0) throw ContractError("hidden layers must be non-empty");
      MaskedLayer l{prev, width, std::vector<double>(prev * width, 0.0), std::vector<double>(width, 0.0),
                    std::vector<std::uint8_t>(prev * width, 0)};
      std::vector<std::size_t> degree(width);
      for (std::size_t k = 0; k < width; ++k) degree[k] = k % cycle + 1;
      for (std::size_t o = 0; o < width; ++o) {
        for (std::size_t i = 0; i < prev; ++i) l.mask[l.at(o, i)] = degree[o] >= prev_degree[i];
      }
      layers_.push_back(std::move(l));
      prev_degree = std::move(degree);
      prev = width;
    }
    MaskedLayer out{prev, n_, std::vector<double>(prev * n_, 0.0), std::vector<double>(n_, 0.0),
                    std::vector<std::uint8_t>(prev * n_, 0)};
    for (std::size_t d = 0; d < n_; ++d) {
      for (std::size_t i = 0; i < prev; ++i) out.mask[out.at(d, i)] = rank[d] > prev_degree[i];
    }
    layers_.push_back(std::move(out));
  }

  std::size_t n_ = 0;
  std::vector<std::size_t> hidden_;
  std::vector<std::size_t> order_;
  std::vector<MaskedLayer> layers_;
};

// ---------------------------------------------------------------------------
// Training

/// Mean binary cross-entropy of the unclamped conditionals over `samples`
/// (the training objective), i.e. mean negative log-likelihood.
inline double mean_nll(const MadeNetwork& net, std::span<const SpinConfig> samples) {
  double total = 0.0;
  for (const auto& s : samples) {
    const auto a = net.logits(s.bits());
    for (std::size_t d = 0; d < a.size(); ++d) {
      const double softplus = a[d] > 0 ? a[d] + std::log1p(std::exp(-a[d])) : std::log1p(std::exp(a[d]));
      total += softplus - (s.bit(d) ? a[d] : 0.0);
    }
  }
  return total / static_cast<double>(samples.size());
}

/// Gradient of mean_nll with respect to every layer's weights and biases,
/// laid out as [w0, b0, w1, b1, ...]. Masked-out weights get zero gradient.
inline std::vector<double> nll_gradient(const MadeNetwork& net, std::span<const SpinConfig> samples) {
  const auto& layers = net.layers();
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const auto& l : layers) {
    offsets.push_back(total);
    total += l.weights.size() + l.biases.size();
  }
  std::vector<double> grad(total, 0.0);
  std::vector<std::vector<double>> acts;
  for (const auto& s : samples) {
    const auto a = net.logits(s.bits(), &acts);
    std::vector<double> delta(a.size());
    for (std::size_t d = 0; d < a.size(); ++d) delta[d] = MadeNetwork::sigmoid(a[d]) - (s.bit(d) ? 1.0 : 0.0);
    for (std::size_t li = layers.size(); li-- > 0;) {
      const auto& l = layers[li];
      const auto& input = acts[li];
      double* gw = grad.data() + offsets[li];
      double* gb = gw + l.weights.size();
      std::vector<double> back(l.in, 0.0);
      for (std::size_t o = 0; o < l.out; ++o) {
        if (delta[o] == 0.0) continue;
        gb[o] += delta[o];
        const std::size_t row = o * l.in;
        for (std::size_t i = 0; i < l.in; ++i) {
          if (!l.mask[row + i]) continue;
          gw[row + i] += delta[o] * input[i];
          back[i] += delta[o] * l.weights[row + i];
        }
      }
      if (li == 0) break;
      // ReLU derivative of the layer below.
      for (std::size_t i = 0; i < l.in; ++i) {
        if (input[i] <= 0.0) back[i] = 0.0;
      }
      delta = std::move(back);
    }
  }
  const double scale = 1.0 / static_cast<double>(samples.size());
  for (auto& g : grad) g *= scale;
  return grad;
}

/// Flattened parameter views in the layout of nll_gradient.
inline std::vector<double*> parameter_pointers(MadeNetwork& net) {
  std::vector<double*> p;
  for (auto& l : net.layers()) {
    for (auto& w : l.weights) p.push_back(&w);
    for (auto& b : l.biases) p.push_back(&b);
  }
  return p;
}

/// FNV-1a over the packed sample words; identifies a training set.
inline std::uint64_t sample_digest(std::span<const SpinConfig> samples) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& s : samples) {
    for (int byte = 0; byte < 8; ++byte) {
      h ^= (s.bits() >> (8 * byte)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

struct TrainResult {
  MadeNetwork net;
  std::vector<double> loss_curve;  // epoch-average minibatch NLL
  double initial_nll = 0.0;        // full-data NLL before the first update
  double final_nll = 0.0;          // full-data NLL of the returned network
  std::size_t epochs_run = 0;
  std::uint64_t data_digest = 0;
  TrainConfig config;
};

/// Adam on mean NLL with shuffled minibatches. The network with the lowest
/// full-data NLL seen at epoch boundaries is returned, so final_nll <=
/// initial_nll.
inline TrainResult train(std::span<const SpinConfig> samples, const TrainConfig& cfg) {
  if (samples.empty()) throw ContractError("training needs at least one sample");
  const std::size_t n = samples.front().size();
  for (const auto& s : samples) {
    if (s.size() != n) throw DimensionError("training samples differ in length");
  }
  if (cfg.epochs == 0 || cfg.batch_size == 0 || !(cfg.learning_rate > 0.0)) {
    throw ContractError("epochs, batch size and learning rate must be positive");
  }
  auto hidden = cfg.hidden_sizes.empty() ? std::vector<std::size_t>{4 * n} : cfg.hidden_sizes;
  Rng rng(cfg.seed);
  MadeNetwork net(n, hidden);
  net.initialize(rng);

  TrainResult result;
  result.config = cfg;
  result.config.hidden_sizes = hidden;
  result.data_digest = sample_digest(samples);
  result.initial_nll = mean_nll(net, samples);
  if (!std::isfinite(result.initial_nll)) throw TrainingError("non-finite initial loss");

  MadeNetwork best = net;
  double best_nll = result.initial_nll;
  double plateau_ref = best_nll;
  std::size_t plateau_count = 0;

  auto params = parameter_pointers(net);
  std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0);
  std::vector<std::size_t> index(samples.size());
  std::iota(index.begin(), index.end(), std::size_t{0});
  std::vector<SpinConfig> batch;
  std::size_t t = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(index), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < index.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(index.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(samples[index[i]]);
      epoch_loss += mean_nll(net, batch) * static_cast<double>(batch.size());
      const auto g = nll_gradient(net, batch);
      ++t;
      const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t));
      const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t));
      for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
        v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
        *params[i] -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.adam_epsilon);
      }
    }
    epoch_loss /= static_cast<double>(samples.size());
    if (!std::isfinite(epoch_loss)) throw TrainingError("loss became non-finite at epoch " + std::to_string(epoch));
    result.loss_curve.push_back(epoch_loss);
    result.epochs_run = epoch + 1;

    const double full = mean_nll(net, samples);
    if (full < best_nll) {
      best_nll = full;
      best = net;
    }
    if (plateau_ref - full > cfg.plateau_tolerance) {
      plateau_ref = full;
      plateau_count = 0;
    } else if (++plateau_count >= cfg.plateau_epochs) {
      break;
    }
  }
  result.net = std::move(best);
  result.final_nll = best_nll;
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline nlohmann::json to_checkpoint(const MadeNetwork& net, const TrainConfig* cfg = nullptr,
                                    std::uint64_t digest = 0) {
  nlohmann::json j;
  j["format"] = "fairsample-made";
  j["version"] = 1;
  j["n_inputs"] = net.n_inputs();
  j["order"] = net.order();
  j["hidden_sizes"] = net.hidden_sizes();
  auto layers = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    layers.push_back({{"in", l.in}, {"out", l.out}, {"weights", l.weights}, {"biases", l.biases}, {"mask", l.mask}});
  }
  j["layers"] = std::move(layers);
  if (cfg) {
    j["config"] = {{"epochs", cfg->epochs},
                   {"batch_size", cfg->batch_size},
                   {"learning_rate", cfg->learning_rate},
                   {"hidden_sizes", cfg->hidden_sizes},
                   {"seed", cfg->seed},
                   {"plateau_epochs", cfg->plateau_epochs},
                   {"plateau_tolerance", cfg->plateau_tolerance}};
  }
  j["training_digest"] = digest;
  return j;
}

/// Masks are read back verbatim; masks_are_autoregressive() tells whether
/// they still describe a valid factorization.
inline MadeNetwork from_checkpoint(const nlohmann::json& j) {
  try {
    if (j.at("format") != "fairsample-made" || j.at("version") != 1) {
      throw FormatError("unsupported MADE checkpoint format");
    }
    MadeNetwork net(j.at("n_inputs").get<std::size_t>(), j.at("hidden_sizes").get<std::vector<std::size_t>>(),
                    j.at("order").get<std::vector<std::size_t>>());
    auto& layers = net.layers();
    const auto& jl = j.at("layers");
    if (jl.size() != layers.size()) throw FormatError("checkpoint layer count mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      auto& l = layers[i];
      l.weights = jl[i].at("weights").get<std::vector<double>>();
      l.biases = jl[i].at("biases").get<std::vector<double>>();
      l.mask = jl[i].at("mask").get<std::vector<std::uint8_t>>();
      if (l.weights.size() != l.in * l.out || l.biases.size() != l.out || l.mask.size() != l.in * l.out) {
        throw FormatError("checkpoint layer " + std::to_string(i) + " has wrong shape");
      }
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed MADE checkpoint: ") + e.what());
  }
}

}  // namespace fairsample

#endif  // FAIRSAMPLE_MADE_HPP
