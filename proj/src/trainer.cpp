#include "mib/trainer.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mib/errors.hpp"
#include "mib/log.hpp"
#include "mib/objective.hpp"
#include "mib/rng.hpp"
#include "mib/text.hpp"

namespace mib {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
  if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(cap > 0.0)) throw std::invalid_argument("cap must be > 0");
  if (!(coherence_weight >= 0.0)) throw std::invalid_argument("coherence_weight must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw std::invalid_argument("adam_beta1 must be in [0,1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw std::invalid_argument("adam_beta2 must be in [0,1)");
  if (!(adam_eps > 0.0)) throw std::invalid_argument("adam_eps must be > 0");
  if (checkpoint_every < 1) throw std::invalid_argument("checkpoint_every must be >= 1");
  if (window_stride < 1) throw std::invalid_argument("window_stride must be >= 1");
}

AdamOptimizer::AdamOptimizer(const ModelConfig& config, double learning_rate,
                             double beta1, double beta2, double eps)
    : lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      m_(zero_params(config)),
      v_(zero_params(config)) {}

void AdamOptimizer::step(ModelParams& params, ModelParams& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto ps = param_tensors(params);
  auto gs = param_tensors(grads);
  auto ms = param_tensors(m_);
  auto vs = param_tensors(v_);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    auto p = ps[i].map();
    auto g = gs[i].map();
    auto m = ms[i].map();
    auto v = vs[i].map();
    m.array() = beta1_ * m.array() + (1.0 - beta1_) * g.array();
    v.array() = beta2_ * v.array() + (1.0 - beta2_) * g.array().square();
    p.array() -= lr_ * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps_);
  }
}

double clip_gradients(ModelParams& grads, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("max_norm must be > 0");
  double sq = 0.0;
  auto gs = param_tensors(grads);
  for (auto& g : gs) sq += g.map().squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& g : gs) g.map() *= scale;
  }
  return norm;
}

// --------------------------------------------------------------------
// Checkpoint format. Binary file with '\n'-terminated text lines at the
// top, then per-tensor header lines each followed by a raw payload of
// little-endian IEEE-754 doubles in column-major order.

namespace {

constexpr char kMagic[] = "MICVAE1";

void put_le_doubles(std::ostream& out, const double* data, Eigen::Index n) {
  std::vector<unsigned char> buf(static_cast<std::size_t>(n) * 8);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(data[i]);
    for (int b = 0; b < 8; ++b)
      buf[static_cast<std::size_t>(i) * 8 + b] =
          static_cast<unsigned char>((bits >> (8 * b)) & 0xff);
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
}

void get_le_doubles(std::istream& in, double* data, Eigen::Index n,
                    const std::string& path, const std::string& group) {
  std::vector<unsigned char> buf(static_cast<std::size_t>(n) * 8);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size()))
    throw DataError(path + ": truncated checkpoint in group " + group);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= static_cast<std::uint64_t>(buf[static_cast<std::size_t>(i) * 8 + b])
              << (8 * b);
    data[i] = std::bit_cast<double>(bits);
  }
}

std::string read_header_line(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line))
    throw DataError(path + ": truncated checkpoint header");
  return line;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const ModelConfig& config, const Normalizer& normalizer) {
  config.validate();
  if (normalizer.mean.size() != config.d || normalizer.std.size() != config.d)
    throw std::invalid_argument("normalizer dimension does not match config");
  ModelParams copy = params;  // enumeration needs mutable refs
  auto tensors = param_tensors(copy);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << kMagic << "\n";
  out << "d=" << config.d << " hidden_size=" << config.hidden_size
      << " latent_size=" << config.latent_size
      << " gap_length=" << config.gap_length
      << " condition_length=" << config.condition_length << "\n";
  out << "groups=" << tensors.size() + 2 << "\n";
  for (const auto& t : tensors) {
    out << t.name << " " << t.rows << " " << t.cols << "\n";
    put_le_doubles(out, t.data, t.size());
  }
  out << "norm.mean " << normalizer.mean.size() << " 1\n";
  put_le_doubles(out, normalizer.mean.data(), normalizer.mean.size());
  out << "norm.std " << normalizer.std.size() << " 1\n";
  put_le_doubles(out, normalizer.std.data(), normalizer.std.size());
  out.flush();
  if (!out) throw DataError(path + ": write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open checkpoint");

  if (read_header_line(in, path) != kMagic)
    throw DataError(path + ": not a checkpoint or unsupported version (want " +
                    std::string(kMagic) + ")");

  Checkpoint ck;
  {
    const std::string line = read_header_line(in, path);
    bool seen[5] = {};
    for (auto token : split_tokens(line)) {
      const auto eq = token.find('=');
      if (eq == std::string_view::npos)
        throw DataError(path + ": malformed config entry '" + std::string(token) + "'");
      const std::string_view key = token.substr(0, eq);
      long value = 0;
      try {
        value = parse_long(token.substr(eq + 1));
      } catch (const std::invalid_argument&) {
        throw DataError(path + ": malformed config entry '" + std::string(token) + "'");
      }
      if (key == "d") { ck.config.d = static_cast<int>(value); seen[0] = true; }
      else if (key == "hidden_size") { ck.config.hidden_size = static_cast<int>(value); seen[1] = true; }
      else if (key == "latent_size") { ck.config.latent_size = static_cast<int>(value); seen[2] = true; }
      else if (key == "gap_length") { ck.config.gap_length = static_cast<int>(value); seen[3] = true; }
      else if (key == "condition_length") { ck.config.condition_length = static_cast<int>(value); seen[4] = true; }
      else throw DataError(path + ": unknown config key '" + std::string(key) + "'");
    }
    for (bool s : seen)
      if (!s) throw DataError(path + ": incomplete checkpoint config line");
    try {
      ck.config.validate();
    } catch (const std::invalid_argument& e) {
      throw DataError(path + ": bad checkpoint config: " + e.what());
    }
  }

  ck.params = zero_params(ck.config);
  auto tensors = param_tensors(ck.params);

  {
    const std::string line = read_header_line(in, path);
    const auto tokens = split_tokens(line);
    if (tokens.size() != 1 || tokens[0].substr(0, 7) != "groups=")
      throw DataError(path + ": missing group count");
    long n = parse_long(tokens[0].substr(7));
    if (n != static_cast<long>(tensors.size()) + 2)
      throw DataError(path + ": unexpected group count " + std::to_string(n));
  }

  auto read_group = [&](const std::string& want_name, double* data,
                        Eigen::Index rows, Eigen::Index cols) {
    const std::string line = read_header_line(in, path);
    const auto tokens = split_tokens(line);
    if (tokens.size() != 3)
      throw DataError(path + ": malformed group header '" + line + "'");
    if (tokens[0] != want_name)
      throw DataError(path + ": expected group " + want_name + ", found " +
                      std::string(tokens[0]));
    long r = 0, c = 0;
    try {
      r = parse_long(tokens[1]);
      c = parse_long(tokens[2]);
    } catch (const std::invalid_argument&) {
      throw DataError(path + ": malformed group header '" + line + "'");
    }
    if (r != rows || c != cols)
      throw DataError(path + ": shape mismatch in group " + want_name +
                      " (file " + std::to_string(r) + "x" + std::to_string(c) +
                      ", expected " + std::to_string(rows) + "x" +
                      std::to_string(cols) + ")");
    get_le_doubles(in, data, rows * cols, path, want_name);
  };

  for (auto& t : tensors) read_group(t.name, t.data, t.rows, t.cols);
  ck.normalizer.mean.resize(ck.config.d);
  ck.normalizer.std.resize(ck.config.d);
  read_group("norm.mean", ck.normalizer.mean.data(), ck.config.d, 1);
  read_group("norm.std", ck.normalizer.std.data(), ck.config.d, 1);
  for (Eigen::Index i = 0; i < ck.normalizer.std.size(); ++i)
    if (!(ck.normalizer.std[i] > 0.0))
      throw DataError(path + ": non-positive entry in norm.std");

  char extra;
  if (in.read(&extra, 1) && in.gcount() == 1)
    throw DataError(path + ": trailing data after last group");
  return ck;
}

// --------------------------------------------------------------------

void parse_config_file(const std::string& path, ModelConfig* model,
                       TrainConfig* train) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open config file");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string_view::npos)
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected 'key = value'");
    const std::string key(trim(stripped.substr(0, eq)));
    const std::string_view value = trim(stripped.substr(eq + 1));
    try {
      if (key == "d") model->d = static_cast<int>(parse_long(value));
      else if (key == "hidden_size") model->hidden_size = static_cast<int>(parse_long(value));
      else if (key == "latent_size") model->latent_size = static_cast<int>(parse_long(value));
      else if (key == "gap_length") model->gap_length = static_cast<int>(parse_long(value));
      else if (key == "condition_length") model->condition_length = static_cast<int>(parse_long(value));
      else if (key == "epochs") train->epochs = static_cast<int>(parse_long(value));
      else if (key == "learning_rate") train->learning_rate = parse_double(value);
      else if (key == "lambda") train->lambda = parse_double(value);
      else if (key == "batch_size") train->batch_size = static_cast<int>(parse_long(value));
      else if (key == "seed") train->seed = static_cast<std::uint64_t>(parse_long(value));
      else if (key == "cap") train->cap = parse_double(value);
      else if (key == "coherence_weight") train->coherence_weight = parse_double(value);
      else if (key == "adam_beta1") train->adam_beta1 = parse_double(value);
      else if (key == "adam_beta2") train->adam_beta2 = parse_double(value);
      else if (key == "adam_eps") train->adam_eps = parse_double(value);
      else if (key == "checkpoint_every") train->checkpoint_every = static_cast<int>(parse_long(value));
      else if (key == "window_stride") train->window_stride = static_cast<int>(parse_long(value));
      else
        throw DataError(path + ":" + std::to_string(line_no) +
                        ": unknown config key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": bad value for '" + key + "'");
    }
  }
}

void write_loss_csv(const std::string& path,
                    const std::vector<LossBreakdown>& log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << "step,reconstruction,kl,diversity,coherence,total\n";
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& l = log[i];
    out << i + 1 << "," << format_double(l.reconstruction) << ","
        << format_double(l.kl) << "," << format_double(l.diversity) << ","
        << format_double(l.coherence) << "," << format_double(l.total) << "\n";
  }
  if (!out) throw DataError(path + ": write failed");
}

// --------------------------------------------------------------------

TrainResult train(const Corpus& corpus, const ModelConfig& model_config,
                  const TrainConfig& train_config, const TrainOptions& options) {
  model_config.validate();
  train_config.validate();
  if (corpus.items.empty()) throw DataError("training corpus is empty");
  if (corpus.dim() != model_config.d)
    throw DataError("corpus pose dimension " + std::to_string(corpus.dim()) +
                    " does not match configured d=" +
                    std::to_string(model_config.d));

  TrainResult result;
  result.normalizer = fit_normalizer(corpus);

  Corpus normalized;
  normalized.split = corpus.split;
  normalized.items.reserve(corpus.items.size());
  for (const auto& item : corpus.items)
    normalized.items.push_back(
        {item.subject, item.action, apply_normalizer(result.normalizer, item.sequence)});

  const std::vector<WindowTask> windows =
      make_windows(normalized, model_config.condition_length,
                   model_config.gap_length, train_config.window_stride);
  if (windows.empty())
    throw DataError("corpus yields no training windows: need sequences of at "
                    "least " + std::to_string(model_config.window_length()) +
                    " frames");
  log_info("training on " + std::to_string(windows.size()) + " windows from " +
           std::to_string(corpus.items.size()) + " sequences");

  Rng init_rng(mix_seed(train_config.seed, 1));
  Rng shuffle_rng(mix_seed(train_config.seed, 2));
  Rng noise_rng(mix_seed(train_config.seed, 3));

  result.params = init_params(model_config, init_rng);
  AdamOptimizer adam(model_config, train_config.learning_rate,
                     train_config.adam_beta1, train_config.adam_beta2,
                     train_config.adam_eps);

  std::vector<std::size_t> order(windows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const auto checkpoint = [&]() {
    if (!options.checkpoint_path.empty())
      save_checkpoint(options.checkpoint_path, result.params, model_config,
                      result.normalizer);
  };

  long step = 0;
  for (int epoch = 1; epoch <= train_config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_total = 0.0;
    long epoch_steps = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(train_config.batch_size)) {
      const std::size_t end = std::min(
          order.size(), begin + static_cast<std::size_t>(train_config.batch_size));
      std::vector<const InterpolationTask*> batch;
      batch.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i)
        batch.push_back(&windows[order[i]].task);

      const StepNoise noise = draw_step_noise(
          model_config.latent_size, static_cast<int>(batch.size()), noise_rng);
      ModelParams grads = zero_params(model_config);
      LossBreakdown loss;
      ++step;
      try {
        loss = composite_objective(result.params, batch, noise,
                                   train_config.lambda, train_config.cap,
                                   &grads, train_config.coherence_weight);
      } catch (const NonFiniteLossError& e) {
        throw NonFiniteLossError("epoch " + std::to_string(epoch) + " step " +
                                 std::to_string(step) + ": " + e.what());
      }
      if (!std::isfinite(loss.total))
        throw NonFiniteLossError(
            "epoch " + std::to_string(epoch) + " step " + std::to_string(step) +
            ": non-finite total loss (reconstruction=" +
            format_double(loss.reconstruction) + " kl=" + format_double(loss.kl) +
            " diversity=" + format_double(loss.diversity) + " coherence=" +
            format_double(loss.coherence) + ")");
      if (!params_all_finite(grads))
        throw NonFiniteLossError("epoch " + std::to_string(epoch) + " step " +
                                 std::to_string(step) +
                                 ": non-finite gradient");

      clip_gradients(grads, kGradClipNorm);
      adam.step(result.params, grads);
      result.log.push_back(loss);
      epoch_total += loss.total;
      ++epoch_steps;
      log_debug("epoch " + std::to_string(epoch) + " step " +
                std::to_string(step) + " total=" + format_double(loss.total) +
                " recon=" + format_double(loss.reconstruction) + " kl=" +
                format_double(loss.kl) + " div=" + format_double(loss.diversity) +
                " coh=" + format_double(loss.coherence));
    }
    if (epoch_steps > 0)
      log_info("epoch " + std::to_string(epoch) + "/" +
               std::to_string(train_config.epochs) + " mean total=" +
               format_double(epoch_total / static_cast<double>(epoch_steps)));
    if (epoch % train_config.checkpoint_every == 0) checkpoint();
  }
  checkpoint();
  if (!options.log_csv_path.empty()) write_loss_csv(options.log_csv_path, result.log);
  return result;
}

}  // namespace mib
