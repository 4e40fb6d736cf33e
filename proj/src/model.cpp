#include "mib/model.hpp"

#include <cmath>
#include <stdexcept>

namespace mib {

void ModelConfig::validate() const {
  if (d < 1 || hidden_size < 1 || latent_size < 1 || gap_length < 1 ||
      condition_length < 1) {
    throw std::invalid_argument("all model sizes must be >= 1");
  }
}

const std::vector<ParamGroup>& all_param_groups() {
  static const std::vector<ParamGroup> groups = {
      ParamGroup::kCondition, ParamGroup::kEncoder, ParamGroup::kDecoder};
  return groups;
}

std::string param_group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::kCondition: return "condition";
    case ParamGroup::kEncoder: return "encoder";
    case ParamGroup::kDecoder: return "decoder";
  }
  return "?";
}

namespace {

void add_matrix(std::vector<TensorRef>& out, const std::string& name,
                Eigen::MatrixXd& m) {
  out.push_back({name, m.data(), m.rows(), m.cols()});
}

void add_vector(std::vector<TensorRef>& out, const std::string& name,
                Eigen::VectorXd& v) {
  out.push_back({name, v.data(), v.size(), 1});
}

void add_gru(std::vector<TensorRef>& out, const std::string& prefix,
             GruParams& g) {
  add_matrix(out, prefix + ".wr", g.wr);
  add_matrix(out, prefix + ".wu", g.wu);
  add_matrix(out, prefix + ".wn", g.wn);
  add_matrix(out, prefix + ".ur", g.ur);
  add_matrix(out, prefix + ".uu", g.uu);
  add_matrix(out, prefix + ".un", g.un);
  add_vector(out, prefix + ".br", g.br);
  add_vector(out, prefix + ".bu", g.bu);
  add_vector(out, prefix + ".bn", g.bn);
}

void add_affine(std::vector<TensorRef>& out, const std::string& prefix,
                AffineParams& a) {
  add_matrix(out, prefix + ".w", a.w);
  add_vector(out, prefix + ".b", a.b);
}

bool is_bias_name(const std::string& name) {
  const auto dot = name.rfind('.');
  return dot != std::string::npos && name[dot + 1] == 'b';
}

GruParams zero_gru(int hidden, int input) {
  GruParams g;
  g.wr = Eigen::MatrixXd::Zero(hidden, input);
  g.wu = Eigen::MatrixXd::Zero(hidden, input);
  g.wn = Eigen::MatrixXd::Zero(hidden, input);
  g.ur = Eigen::MatrixXd::Zero(hidden, hidden);
  g.uu = Eigen::MatrixXd::Zero(hidden, hidden);
  g.un = Eigen::MatrixXd::Zero(hidden, hidden);
  g.br = Eigen::VectorXd::Zero(hidden);
  g.bu = Eigen::VectorXd::Zero(hidden);
  g.bn = Eigen::VectorXd::Zero(hidden);
  return g;
}

}  // namespace

std::vector<TensorRef> param_tensors(ModelParams& p, ParamGroup group) {
  std::vector<TensorRef> out;
  switch (group) {
    case ParamGroup::kCondition:
      add_gru(out, "cond.start", p.cond_start);
      add_gru(out, "cond.end", p.cond_end);
      break;
    case ParamGroup::kEncoder:
      add_gru(out, "enc.gru", p.enc_gru);
      add_affine(out, "enc.head", p.enc_head);
      break;
    case ParamGroup::kDecoder:
      add_affine(out, "dec.init", p.dec_init);
      add_gru(out, "dec.gru", p.dec_gru);
      add_affine(out, "dec.head", p.dec_head);
      break;
  }
  return out;
}

std::vector<TensorRef> param_tensors(ModelParams& p) {
  std::vector<TensorRef> out;
  for (ParamGroup g : all_param_groups()) {
    auto part = param_tensors(p, g);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

ModelParams zero_params(const ModelConfig& config) {
  config.validate();
  const int d = config.d;
  const int h = config.hidden_size;
  const int l = config.latent_size;
  ModelParams p;
  p.cond_start = zero_gru(h, d);
  p.cond_end = zero_gru(h, d);
  p.enc_gru = zero_gru(h, d);
  p.enc_head.w = Eigen::MatrixXd::Zero(2 * l, 3 * h);
  p.enc_head.b = Eigen::VectorXd::Zero(2 * l);
  p.dec_init.w = Eigen::MatrixXd::Zero(h, l + 2 * h);
  p.dec_init.b = Eigen::VectorXd::Zero(h);
  p.dec_gru = zero_gru(h, d);
  p.dec_head.w = Eigen::MatrixXd::Zero(d, h);
  p.dec_head.b = Eigen::VectorXd::Zero(d);
  return p;
}

ModelParams init_params(const ModelConfig& config, Rng& rng) {
  ModelParams p = zero_params(config);
  for (const TensorRef& t : param_tensors(p)) {
    if (is_bias_name(t.name)) continue;  // biases stay zero
    const double scale = 1.0 / std::sqrt(static_cast<double>(t.cols));
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      t.data[i] = rng.uniform(-scale, scale);
    }
  }
  return p;
}

long param_count(const ModelConfig& config) {
  ModelParams p = zero_params(config);
  long count = 0;
  for (const TensorRef& t : param_tensors(p)) count += t.size();
  return count;
}

bool params_all_finite(const ModelParams& p) {
  auto& mutable_p = const_cast<ModelParams&>(p);
  for (const TensorRef& t : param_tensors(mutable_p)) {
    if (!t.map().allFinite()) return false;
  }
  return true;
}

int params_pose_dim(const ModelParams& p) {
  return static_cast<int>(p.dec_head.w.rows());
}

int params_hidden_size(const ModelParams& p) {
  return static_cast<int>(p.cond_start.ur.rows());
}

int params_latent_size(const ModelParams& p) {
  return static_cast<int>(p.enc_head.w.rows()) / 2;
}

Frames to_frames(const std::vector<const MotionSequence*>& batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const int T = batch.front()->length();
  const int d = batch.front()->dim();
  for (const MotionSequence* s : batch) {
    if (s->length() != T || s->dim() != d) {
      throw std::invalid_argument("batch sequences must share shape");
    }
  }
  Frames frames(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t) {
    Eigen::MatrixXd m(d, static_cast<Eigen::Index>(batch.size()));
    for (size_t b = 0; b < batch.size(); ++b) {
      m.col(static_cast<Eigen::Index>(b)) = batch[b]->frames.col(t);
    }
    frames[static_cast<size_t>(t)] = std::move(m);
  }
  return frames;
}

namespace {

inline Eigen::ArrayXXd sigmoid(const Eigen::MatrixXd& a) {
  return 1.0 / (1.0 + (-a.array()).exp());
}

}  // namespace

Eigen::MatrixXd gru_step(const GruParams& p, const Eigen::MatrixXd& x,
                         const Eigen::MatrixXd& h_prev, GruStepCache* cache) {
  if (x.rows() != p.wr.cols() || h_prev.rows() != p.ur.rows() ||
      x.cols() != h_prev.cols()) {
    throw std::invalid_argument("gru_step dimension mismatch");
  }
  const Eigen::MatrixXd r =
      sigmoid(((p.wr * x + p.ur * h_prev).colwise() + p.br)).matrix();
  const Eigen::MatrixXd u =
      sigmoid(((p.wu * x + p.uu * h_prev).colwise() + p.bu)).matrix();
  const Eigen::MatrixXd hr = (r.array() * h_prev.array()).matrix();
  const Eigen::MatrixXd n =
      ((p.wn * x + p.un * hr).colwise() + p.bn).array().tanh().matrix();
  Eigen::MatrixXd h =
      (u.array() * h_prev.array() + (1.0 - u.array()) * n.array()).matrix();
  if (cache != nullptr) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->r = r;
    cache->u = u;
    cache->n = n;
    cache->hr = hr;
  }
  return h;
}

void gru_step_backward(const GruParams& p, const GruStepCache& c,
                       const Eigen::MatrixXd& dh, GruParams& grads,
                       Eigen::MatrixXd* dx, Eigen::MatrixXd& dh_prev) {
  const Eigen::ArrayXXd dha = dh.array();
  const Eigen::ArrayXXd du = dha * (c.h_prev.array() - c.n.array());
  const Eigen::ArrayXXd dn = dha * (1.0 - c.u.array());
  Eigen::ArrayXXd dhp = dha * c.u.array();

  // candidate branch: n = tanh(wn x + un hr + bn)
  const Eigen::MatrixXd dan = (dn * (1.0 - c.n.array().square())).matrix();
  grads.wn += dan * c.x.transpose();
  grads.un += dan * c.hr.transpose();
  grads.bn += dan.rowwise().sum();
  const Eigen::MatrixXd dhr = p.un.transpose() * dan;
  const Eigen::ArrayXXd dr = dhr.array() * c.h_prev.array();
  dhp += dhr.array() * c.r.array();

  // update gate
  const Eigen::MatrixXd dau =
      (du * c.u.array() * (1.0 - c.u.array())).matrix();
  grads.wu += dau * c.x.transpose();
  grads.uu += dau * c.h_prev.transpose();
  grads.bu += dau.rowwise().sum();
  dhp += (p.uu.transpose() * dau).array();

  // reset gate
  const Eigen::MatrixXd dar =
      (dr * c.r.array() * (1.0 - c.r.array())).matrix();
  grads.wr += dar * c.x.transpose();
  grads.ur += dar * c.h_prev.transpose();
  grads.br += dar.rowwise().sum();
  dhp += (p.ur.transpose() * dar).array();

  dh_prev = dhp.matrix();
  if (dx != nullptr) {
    *dx = p.wn.transpose() * dan + p.wu.transpose() * dau +
          p.wr.transpose() * dar;
  }
}

Eigen::MatrixXd gru_encode(const GruParams& p, const Frames& inputs,
                           GruSequenceCache* cache) {
  if (inputs.empty()) throw std::invalid_argument("gru_encode: no frames");
  const Eigen::Index batch = inputs.front().cols();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(p.ur.rows(), batch);
  if (cache != nullptr) {
    cache->steps.clear();
    cache->steps.resize(inputs.size());
  }
  for (size_t t = 0; t < inputs.size(); ++t) {
    h = gru_step(p, inputs[t], h, cache != nullptr ? &cache->steps[t]
                                                   : nullptr);
  }
  return h;
}

void gru_encode_backward(const GruParams& p, const GruSequenceCache& cache,
                         const Eigen::MatrixXd& dh_final, GruParams& grads) {
  Eigen::MatrixXd dh = dh_final;
  Eigen::MatrixXd dh_prev;
  for (size_t t = cache.steps.size(); t-- > 0;) {
    gru_step_backward(p, cache.steps[t], dh, grads, nullptr, dh_prev);
    dh = std::move(dh_prev);
  }
}

Eigen::MatrixXd encode_condition_batch(const ModelParams& p,
                                       const Frames& start, const Frames& end,
                                       ConditionCache* cache) {
  if (start.empty() || end.empty()) {
    throw std::invalid_argument("condition clips must be nonempty");
  }
  Frames end_reversed(end.rbegin(), end.rend());
  const Eigen::MatrixXd hs =
      gru_encode(p.cond_start, start, cache != nullptr ? &cache->start
                                                       : nullptr);
  const Eigen::MatrixXd he = gru_encode(
      p.cond_end, end_reversed, cache != nullptr ? &cache->end : nullptr);
  Eigen::MatrixXd cond(hs.rows() + he.rows(), hs.cols());
  cond << hs, he;
  return cond;
}

void encode_condition_backward(const ModelParams& p,
                               const ConditionCache& cache,
                               const Eigen::MatrixXd& dcond,
                               ModelParams& grads) {
  const Eigen::Index h = p.cond_start.ur.rows();
  gru_encode_backward(p.cond_start, cache.start, dcond.topRows(h),
                      grads.cond_start);
  gru_encode_backward(p.cond_end, cache.end, dcond.bottomRows(h),
                      grads.cond_end);
}

void posterior_batch(const ModelParams& p, const Frames& target,
                     const Eigen::MatrixXd& cond, Eigen::MatrixXd* mean,
                     Eigen::MatrixXd* log_variance, PosteriorCache* cache) {
  if (cond.rows() != 2 * params_hidden_size(p)) {
    throw std::invalid_argument("condition dimension mismatch");
  }
  const Eigen::MatrixXd h =
      gru_encode(p.enc_gru, target, cache != nullptr ? &cache->gru : nullptr);
  Eigen::MatrixXd head_in(h.rows() + cond.rows(), h.cols());
  head_in << h, cond;
  const Eigen::MatrixXd raw = (p.enc_head.w * head_in).colwise() + p.enc_head.b;
  const Eigen::Index l = raw.rows() / 2;
  *mean = raw.topRows(l);
  const Eigen::MatrixXd raw_logvar = raw.bottomRows(l);
  *log_variance =
      raw_logvar.array().min(kLogVarClamp).max(-kLogVarClamp).matrix();
  if (cache != nullptr) {
    cache->head_in = std::move(head_in);
    cache->raw_logvar = raw_logvar;
  }
}

void posterior_backward(const ModelParams& p, const PosteriorCache& cache,
                        const Eigen::MatrixXd& dmean,
                        const Eigen::MatrixXd& dlogvar, ModelParams& grads,
                        Eigen::MatrixXd& dcond) {
  // Gradient through the clamp is zero wherever it saturated.
  const Eigen::ArrayXXd inside =
      (cache.raw_logvar.array() > -kLogVarClamp &&
       cache.raw_logvar.array() < kLogVarClamp)
          .cast<double>();
  Eigen::MatrixXd draw(dmean.rows() + dlogvar.rows(), dmean.cols());
  draw << dmean, (dlogvar.array() * inside).matrix();
  grads.enc_head.w += draw * cache.head_in.transpose();
  grads.enc_head.b += draw.rowwise().sum();
  const Eigen::MatrixXd dhead_in = p.enc_head.w.transpose() * draw;
  const Eigen::Index h = p.enc_gru.ur.rows();
  gru_encode_backward(p.enc_gru, cache.gru, dhead_in.topRows(h),
                      grads.enc_gru);
  dcond += dhead_in.bottomRows(dhead_in.rows() - h);
}

Eigen::MatrixXd reparameterize_batch(const Eigen::MatrixXd& mean,
                                     const Eigen::MatrixXd& log_variance,
                                     const Eigen::MatrixXd& noise) {
  if (mean.rows() != noise.rows() || mean.cols() != noise.cols()) {
    throw std::invalid_argument("noise shape mismatch");
  }
  return mean.array() +
         (0.5 * log_variance.array()).exp() * noise.array();
}

void reparameterize_backward(const Eigen::MatrixXd& log_variance,
                             const Eigen::MatrixXd& noise,
                             const Eigen::MatrixXd& dz, Eigen::MatrixXd& dmean,
                             Eigen::MatrixXd& dlogvar) {
  dmean += dz;
  dlogvar += (dz.array() * noise.array() * 0.5 *
              (0.5 * log_variance.array()).exp())
                 .matrix();
}

std::vector<Eigen::MatrixXd> decode_batch(const ModelParams& p,
                                          const Eigen::MatrixXd& z,
                                          const Eigen::MatrixXd& cond,
                                          const Eigen::MatrixXd& last_start,
                                          int gap_length, DecodeCache* cache) {
  if (gap_length < 1) throw std::invalid_argument("gap_length must be >= 1");
  if (z.cols() != cond.cols() || z.cols() != last_start.cols()) {
    throw std::invalid_argument("decode batch size mismatch");
  }
  Eigen::MatrixXd init_in(z.rows() + cond.rows(), z.cols());
  init_in << z, cond;
  if (init_in.rows() != p.dec_init.w.cols()) {
    throw std::invalid_argument("decode latent/condition size mismatch");
  }
  Eigen::MatrixXd h = (p.dec_init.w * init_in).colwise() + p.dec_init.b;
  Eigen::MatrixXd prev = last_start;
  std::vector<Eigen::MatrixXd> outputs;
  outputs.reserve(static_cast<size_t>(gap_length));
  if (cache != nullptr) {
    cache->init_in = init_in;
    cache->last_start = last_start;
    cache->steps.resize(static_cast<size_t>(gap_length));
    cache->hidden.clear();
    cache->outputs.clear();
    cache->hidden.reserve(static_cast<size_t>(gap_length));
    cache->outputs.reserve(static_cast<size_t>(gap_length));
  }
  for (int i = 0; i < gap_length; ++i) {
    h = gru_step(p.dec_gru, prev, h,
                 cache != nullptr ? &cache->steps[static_cast<size_t>(i)]
                                  : nullptr);
    Eigen::MatrixXd out = prev + ((p.dec_head.w * h).colwise() + p.dec_head.b);
    if (cache != nullptr) {
      cache->hidden.push_back(h);
      cache->outputs.push_back(out);
    }
    outputs.push_back(out);
    prev = std::move(out);
  }
  return outputs;
}

void decode_backward(const ModelParams& p, const DecodeCache& cache,
                     const std::vector<Eigen::MatrixXd>& doutputs,
                     ModelParams& grads, Eigen::MatrixXd* dz,
                     Eigen::MatrixXd& dcond) {
  const size_t steps = cache.steps.size();
  if (doutputs.size() != steps) {
    throw std::invalid_argument("decode_backward gradient count mismatch");
  }
  const Eigen::Index d = cache.last_start.rows();
  const Eigen::Index batch = cache.last_start.cols();
  const Eigen::Index hidden = p.dec_gru.ur.rows();
  Eigen::MatrixXd dprev_carry = Eigen::MatrixXd::Zero(d, batch);
  Eigen::MatrixXd dh_carry = Eigen::MatrixXd::Zero(hidden, batch);
  Eigen::MatrixXd dx, dh_prev;
  for (size_t i = steps; i-- > 0;) {
    const Eigen::MatrixXd dout_total = doutputs[i] + dprev_carry;
    grads.dec_head.w += dout_total * cache.hidden[i].transpose();
    grads.dec_head.b += dout_total.rowwise().sum();
    const Eigen::MatrixXd dh_total =
        dh_carry + p.dec_head.w.transpose() * dout_total;
    gru_step_backward(p.dec_gru, cache.steps[i], dh_total, grads.dec_gru, &dx,
                      dh_prev);
    // prev feeds both the residual sum and the GRU input.
    dprev_carry = dout_total + dx;
    dh_carry = std::move(dh_prev);
  }
  grads.dec_init.w += dh_carry * cache.init_in.transpose();
  grads.dec_init.b += dh_carry.rowwise().sum();
  const Eigen::MatrixXd dinit_in = p.dec_init.w.transpose() * dh_carry;
  const Eigen::Index l = p.dec_init.w.cols() - 2 * hidden;
  if (dz != nullptr) *dz += dinit_in.topRows(l);
  dcond += dinit_in.bottomRows(2 * hidden);
}

PosteriorParams make_posterior_params(const Eigen::VectorXd& mean,
                                      const Eigen::VectorXd& log_variance) {
  if (mean.size() != log_variance.size()) {
    throw std::invalid_argument("posterior mean/log_variance size mismatch");
  }
  if (!mean.allFinite() || !log_variance.allFinite()) {
    throw std::invalid_argument("posterior params must be finite");
  }
  PosteriorParams out;
  out.mean = mean;
  out.log_variance =
      log_variance.array().min(kLogVarClamp).max(-kLogVarClamp).matrix();
  return out;
}

Eigen::VectorXd encode_condition(const ModelParams& p,
                                 const MotionSequence& start,
                                 const MotionSequence& end) {
  if (start.length() < 1 || end.length() < 1) {
    throw std::invalid_argument("condition clips must be nonempty");
  }
  if (start.dim() != params_pose_dim(p) || end.dim() != params_pose_dim(p)) {
    throw std::invalid_argument("condition pose dimension mismatch");
  }
  const std::vector<const MotionSequence*> s{&start};
  const std::vector<const MotionSequence*> e{&end};
  return encode_condition_batch(p, to_frames(s), to_frames(e), nullptr);
}

PosteriorParams posterior(const ModelParams& p, const MotionSequence& target,
                          const Eigen::VectorXd& condition) {
  if (target.dim() != params_pose_dim(p)) {
    throw std::invalid_argument("target pose dimension mismatch");
  }
  const std::vector<const MotionSequence*> t{&target};
  Eigen::MatrixXd mean, logvar;
  posterior_batch(p, to_frames(t), condition, &mean, &logvar, nullptr);
  PosteriorParams out;
  out.mean = mean.col(0);
  out.log_variance = logvar.col(0);
  return out;
}

LatentSample reparameterize(const PosteriorParams& post,
                            const Eigen::VectorXd& noise) {
  if (noise.size() != post.mean.size()) {
    throw std::invalid_argument("noise length mismatch");
  }
  LatentSample s;
  s.z = post.mean.array() +
        (0.5 * post.log_variance.array()).exp() * noise.array();
  s.origin = LatentOrigin::kPosterior;
  return s;
}

LatentSample sample_prior(int latent_size, Rng& rng) {
  LatentSample s;
  s.z = rng.normal_vector(latent_size);
  s.origin = LatentOrigin::kPrior;
  return s;
}

MotionSequence decode(const ModelParams& p, const LatentSample& z,
                      const Eigen::VectorXd& condition,
                      const Pose& last_start_pose, int gap_length,
                      double frame_rate_hz) {
  if (last_start_pose.size() != params_pose_dim(p)) {
    throw std::invalid_argument("last_start_pose dimension mismatch");
  }
  if (z.z.size() != params_latent_size(p)) {
    throw std::invalid_argument("latent size mismatch");
  }
  const auto outputs = decode_batch(p, z.z, condition, last_start_pose,
                                    gap_length, nullptr);
  MotionSequence seq;
  seq.frame_rate_hz = frame_rate_hz;
  seq.frames.resize(last_start_pose.size(),
                    static_cast<Eigen::Index>(outputs.size()));
  for (size_t i = 0; i < outputs.size(); ++i) {
    seq.frames.col(static_cast<Eigen::Index>(i)) = outputs[i].col(0);
  }
  return seq;
}

}  // namespace mib
