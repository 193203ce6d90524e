// Copyright 2026 The ssl-lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "ssl_lab/trainer.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <string>

#include "ssl_lab/errors.hpp"
#include "ssl_lab/oracles.hpp"
#include "ssl_lab/rng.hpp"

namespace ssl_lab {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

NormalizationHook parse_normalization_hook(std::string_view name) {
  if (name == "none") return NormalizationHook::kNone;
  if (name == "rows") return NormalizationHook::kRows;
  if (name == "columns") return NormalizationHook::kColumns;
  throw ParameterError("unknown normalization hook '" + std::string(name) + "'");
}

GradientMode parse_gradient_mode(std::string_view name) {
  if (name == "empirical") return GradientMode::kEmpirical;
  if (name == "population") return GradientMode::kPopulation;
  throw ParameterError("unknown gradient mode '" + std::string(name) + "'");
}

InitKind parse_init_kind(std::string_view name) {
  if (name == "gaussian_random") return InitKind::kGaussianRandom;
  if (name == "warm_start") return InitKind::kWarmStart;
  throw ParameterError("unknown init '" + std::string(name) + "'");
}

PredictorInit parse_predictor_init(std::string_view name) {
  if (name == "gaussian_random") return PredictorInit::kGaussianRandom;
  if (name == "identity") return PredictorInit::kIdentity;
  throw ParameterError("unknown predictor init '" + std::string(name) + "'");
}

std::string_view to_string(NormalizationHook h) {
  switch (h) {
    case NormalizationHook::kNone: return "none";
    case NormalizationHook::kRows: return "rows";
    case NormalizationHook::kColumns: return "columns";
  }
  return "?";
}

std::string_view to_string(GradientMode g) {
  return g == GradientMode::kEmpirical ? "empirical" : "population";
}

std::string_view to_string(InitKind k) {
  return k == InitKind::kGaussianRandom ? "gaussian_random" : "warm_start";
}

std::string_view to_string(PredictorInit k) {
  return k == PredictorInit::kGaussianRandom ? "gaussian_random" : "identity";
}

namespace {

bool population_linear(const TrainConfig& c) {
  return c.gradient_mode == GradientMode::kPopulation && c.loss.kind == LossKind::kLinearNclWd;
}

bool population_srelu(const TrainConfig& c) {
  return c.gradient_mode == GradientMode::kPopulation && c.loss.kind == LossKind::kNclInner &&
         c.activation == Activation::kSrelu;
}

}  // namespace

void TrainConfig::validate() const {
  loss.validate();
  if (p < 1 || d < 1 || m < 1) throw DimensionError("p, d and m must be positive");
  if (p < d) throw DimensionError("p must be at least d");
  if (latent.d != d) throw DimensionError("latent dimension must equal d");
  latent.validate();
  if (noise_sigma && !(*noise_sigma >= 0.0)) throw ParameterError("noise sigma must be nonnegative");
  if (!(mask_alpha > 0.0 && mask_alpha <= 1.0)) throw ParameterError("mask alpha must lie in (0, 1]");
  if (dataset_size < 1) throw ParameterError("dataset size must be positive");
  if (!(srelu_bias >= 0.0)) throw ParameterError("srelu bias must be nonnegative");
  if (epochs < 1) throw ParameterError("epochs must be at least 1");
  if (batch_size < 1) throw ParameterError("batch size must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ParameterError("learning rate must be finite and nonnegative");
  }
  if (weight_decay && !(*weight_decay > 0.0 && *weight_decay <= 1.0)) {
    throw ParameterError("weight decay factor must lie in (0, 1]");
  }
  if (alternate_every < 1) throw ParameterError("alternate_every must be at least 1");
  if (record_every < 1) throw ParameterError("record_every must be at least 1");
  if (hidden_width < 0) throw ParameterError("hidden width must be nonnegative");
  if (uses_predictor(loss.kind) && !predictor) {
    throw ParameterError(std::string(to_string(loss.kind)) + " needs predictor = true");
  }
  if (requires_linear_activation(loss.kind) && activation != Activation::kLinear) {
    throw ParameterError(std::string(to_string(loss.kind)) + " needs a linear activation");
  }
  if (loss.kind == LossKind::kClInfiniteBatch) {
    throw ParameterError("the infinite-batch surrogate is an oracle objective, not trainable");
  }
  if (gradient_mode == GradientMode::kPopulation) {
    if (!population_linear(*this) && !population_srelu(*this)) {
      throw ParameterError(
          "population gradients exist only for linear_ncl_wd and srelu ncl_inner");
    }
    if (batch_norm || predictor || hidden_width > 0) {
      throw ParameterError("population mode needs a plain single-layer encoder");
    }
    if (latent.kind != LatentKind::kSymmetric) {
      throw ParameterError("population mode needs symmetric latents");
    }
    if (population_srelu(*this) && (p != d || m != d || dictionary != DictionaryMode::kIdentity)) {
      throw ParameterError("srelu population mode needs p = d = m and M = I");
    }
  }
}

EncoderState init_random(Index m, Index p, Index d, Rng& rng) {
  if (m < 1 || p < 1 || d < 1) throw DimensionError("init_random: dimensions must be positive");
  const double scale = 1.0 / std::sqrt(static_cast<double>(p * d));
  return make_encoder(scale * standard_normal(m, p, rng), Activation::kLinear);
}

EncoderState init_random(Index m, Index p, Index d, std::uint64_t seed) {
  Rng rng = make_stream(seed, Stream::kInit);
  return init_random(m, p, d, rng);
}

double warm_start_sigma(Index p, double c) {
  return std::pow(static_cast<double>(p), -0.5 * c);
}

EncoderState init_warm(const DictionaryMatrix& M, Index m, double c, Rng& rng,
                       std::optional<double> sigma) {
  if (m < 1) throw DimensionError("init_warm: m must be positive");
  const double s = sigma ? *sigma : warm_start_sigma(M.p(), c);
  if (!(s >= 0.0)) throw ParameterError("init_warm: sigma must be nonnegative");
  std::uniform_int_distribution<Index> pick(0, M.d() - 1);
  MatrixXd W(m, M.p());
  for (Index i = 0; i < m; ++i) W.row(i) = M.entries().col(pick(rng)).transpose();
  W += s * standard_normal(m, M.p(), rng);
  return make_encoder(std::move(W), Activation::kLinear);
}

EncoderState init_warm(const DictionaryMatrix& M, Index m, double c, std::uint64_t seed,
                       std::optional<double> sigma) {
  Rng rng = make_stream(seed, Stream::kInit);
  return init_warm(M, m, c, rng, sigma);
}

namespace {

void apply_hook(EncoderState& enc, NormalizationHook hook) {
  switch (hook) {
    case NormalizationHook::kNone: break;
    case NormalizationHook::kRows: enc.W = normalize_rows(enc.W); break;
    case NormalizationHook::kColumns: enc.W = normalize_columns(enc.W); break;
  }
}

BranchParams make_branch(const TrainConfig& c, const DictionaryMatrix& M, Rng& rng) {
  BranchParams b;
  if (c.hidden_width > 0) {
    // Stacked linear layers: hidden (k x p) then W (m x k).
    const EncoderState in = c.init == InitKind::kWarmStart
                                ? init_warm(M, c.hidden_width, c.warm_c, rng, c.warm_sigma)
                                : init_random(c.hidden_width, c.p, c.d, rng);
    b.enc = init_random(c.m, c.hidden_width, c.d, rng);
    b.enc.W_in = in.W;
  } else {
    b.enc = c.init == InitKind::kWarmStart ? init_warm(M, c.m, c.warm_c, rng, c.warm_sigma)
                                           : init_random(c.m, c.p, c.d, rng);
  }
  b.enc.activation = c.activation;
  b.enc.srelu_bias = VectorXd::Constant(c.m, c.srelu_bias);
  if (c.batch_norm) b.bn = BatchNormState::identity(c.m);
  apply_hook(b.enc, c.normalization_hook);
  return b;
}

}  // namespace

ModelParams initialize_model(const TrainConfig& config, const DictionaryMatrix& M, Rng& rng) {
  config.validate();
  if (M.p() != config.p || M.d() != config.d) throw DimensionError("dictionary shape mismatch");
  ModelParams params;
  params.online = make_branch(config, M, rng);
  if (!uses_shared_encoder(config.loss.kind)) params.target = make_branch(config, M, rng);
  if (config.predictor) {
    PredictorState pred;
    if (config.predictor_init == PredictorInit::kIdentity) {
      pred.Wp = MatrixXd::Identity(config.m, config.m);
    } else {
      pred.Wp = standard_normal(config.m, config.m, rng) /
                std::sqrt(static_cast<double>(config.p * config.d));
    }
    pred.bp = VectorXd::Zero(config.m);
    params.predictor = std::move(pred);
  }
  return params;
}

namespace {

void step_branch(BranchParams& b, const BranchGrad& g, const TrainConfig& c) {
  const double eta = c.learning_rate;
  const double decay = c.weight_decay ? *c.weight_decay : 1.0;
  b.enc.W = decay * b.enc.W - eta * g.W;
  if (c.train_bias) b.enc.b -= eta * g.b;
  if (b.enc.W_in) *b.enc.W_in = decay * *b.enc.W_in - eta * g.W_in;
  if (b.bn) {
    b.bn->gamma -= eta * g.gamma;
    b.bn->beta -= eta * g.beta;
  }
  apply_hook(b.enc, c.normalization_hook);
}

void step_predictor(PredictorState& p, const PredictorGrad& g, const TrainConfig& c) {
  const double decay = c.weight_decay ? *c.weight_decay : 1.0;
  p.Wp = decay * p.Wp - c.learning_rate * g.Wp;
  p.bp -= c.learning_rate * g.bp;
}

class Clock {
 public:
  explicit Clock(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    if (!enabled_) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

TrainRecord make_record(int epoch, double loss, const EncoderState& enc, const DictionaryMatrix& M,
                        const Clock& clock, std::uint64_t seed) {
  const MaxCosineStats s = max_cosine_stats(enc.effective_weights(), M);
  return {epoch, loss, s.min, s.median, s.max, clock.seconds(), seed};
}

[[noreturn]] void diverged(int epoch, Index step, double loss) {
  std::ostringstream os;
  os << "training diverged: loss = " << loss << " at epoch " << epoch << ", step " << step;
  throw DivergenceError(os.str());
}

void emit(TrainResult& result, const RecordSink& sink, TrainRecord rec) {
  if (sink) sink(rec);
  result.records.push_back(rec);
}

TrainResult train_population(const TrainConfig& c, const DictionaryMatrix& M, ModelParams params,
                             const RecordSink& sink) {
  TrainResult result;
  const Clock clock(c.wall_clock);
  const double sigma0 = c.effective_noise_sigma();
  const double alpha = c.mask_alpha, kappa = c.latent.sparsity;
  const bool linear = population_linear(c);
  bool swapped = false;
  auto loss_now = [&]() {
    const BranchParams& a = swapped ? params.target : params.online;
    const BranchParams& b = swapped ? params.online : params.target;
    if (linear) {
      return population_loss_linear(a.enc.W, b.enc.W, M, alpha, kappa, sigma0, c.loss.lambda);
    }
    return population_loss_srelu_warm(a.enc.W, b.enc.W, a.enc.srelu_bias, b.enc.srelu_bias, alpha,
                                      kappa, sigma0);
  };
  emit(result, sink, make_record(0, loss_now(), params.online.enc, M, clock, c.seed));
  for (int epoch = 1; epoch <= c.epochs; ++epoch) {
    double loss = 0.0;
    if (linear) {
      const GradientSet g = population_gradient_linear(params.online.enc.W, params.target.enc.W, M,
                                                       alpha, kappa, sigma0, 1.0);
      loss = loss_now();
      if (c.learning_rate != 0.0) {
        const double lambda = c.loss.lambda;
        params.online.enc.W = lambda * params.online.enc.W - c.learning_rate * g.online.W;
        params.target.enc.W = lambda * params.target.enc.W - c.learning_rate * g.target->W;
        apply_hook(params.online.enc, c.normalization_hook);
        apply_hook(params.target.enc, c.normalization_hook);
      }
    } else {
      const bool want_swap = ((epoch - 1) / c.alternate_every) % 2 == 1;
      if (want_swap != swapped) {
        std::swap(params.online, params.target);
        swapped = want_swap;
      }
      const GradientSet g = population_gradient_srelu_warm(
          params.online.enc.W, params.target.enc.W, params.online.enc.srelu_bias,
          params.target.enc.srelu_bias, alpha, kappa, sigma0);
      loss = g.loss;
      if (c.learning_rate != 0.0) {
        params.online.enc.W -= c.learning_rate * g.online.W;
        apply_hook(params.online.enc, c.normalization_hook);
      }
    }
    if (!std::isfinite(loss)) diverged(epoch, 0, loss);
    if (epoch % c.record_every == 0 || epoch == c.epochs) {
      const EncoderState& a = swapped ? params.target.enc : params.online.enc;
      emit(result, sink, make_record(epoch, loss, a, M, clock, c.seed));
    }
  }
  if (swapped) std::swap(params.online, params.target);
  result.params = std::move(params);
  return result;
}

}  // namespace

TrainResult train(const TrainConfig& c, const Dataset& data, const DictionaryMatrix& M,
                  const RecordSink& sink) {
  c.validate();
  if (M.p() != c.p || M.d() != c.d) throw DimensionError("dictionary shape mismatch");
  RngStreams rng(c.seed);
  ModelParams params = initialize_model(c, M, rng.init);
  if (c.gradient_mode == GradientMode::kPopulation) {
    return train_population(c, M, std::move(params), sink);
  }
  if (data.X.rows() != c.p || data.size() < 1) throw DimensionError("dataset shape mismatch");

  TrainResult result;
  const Clock clock(c.wall_clock);
  const Index n = data.size();
  const Index B = c.batch_size;
  const Index steps_per_epoch = (n + B - 1) / B;
  const bool shared = uses_shared_encoder(c.loss.kind);
  std::uniform_int_distribution<Index> pick(0, n - 1);
  const LossSpec& spec = c.loss;

  bool swapped = false;
  Index global_step = 0;
  MatrixXd Xb(c.p, B);
  for (int epoch = 1; epoch <= c.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (Index s = 0; s < steps_per_epoch; ++s, ++global_step) {
      for (Index k = 0; k < B; ++k) Xb.col(k) = data.X.col(pick(rng.batches));
      const ViewBatchPair v = sample_views(Xb, c.mask_scheme, c.mask_alpha, rng.masks);
      const ViewBatch views{v.a1, v.a2, MatrixXd()};
      if (!shared) {
        const bool want_swap = (global_step / c.alternate_every) % 2 == 1;
        if (want_swap != swapped) {
          std::swap(params.online, params.target);
          swapped = want_swap;
        }
      }
      const GradientSet g = empirical_gradient(spec, params, views);
      if (!std::isfinite(g.loss)) diverged(epoch, s, g.loss);
      if (global_step == 0) {
        const EncoderState& a = swapped ? params.target.enc : params.online.enc;
        emit(result, sink, make_record(0, g.loss, a, M, clock, c.seed));
      }
      loss_sum += g.loss;
      if (c.learning_rate == 0.0) continue;
      step_branch(params.online, g.online, c);
      if (g.target) step_branch(params.target, *g.target, c);
      if (g.predictor) step_predictor(*params.predictor, *g.predictor, c);
    }
    if (epoch % c.record_every == 0 || epoch == c.epochs) {
      const EncoderState& a = swapped ? params.target.enc : params.online.enc;
      emit(result, sink,
           make_record(epoch, loss_sum / static_cast<double>(steps_per_epoch), a, M, clock,
                       c.seed));
    }
  }
  if (swapped) std::swap(params.online, params.target);
  result.params = std::move(params);
  return result;
}

TrainResult run_training(const TrainConfig& config, const RecordSink& sink) {
  config.validate();
  RngStreams rng(config.seed);
  const DictionaryMatrix M = generate_dictionary(config.p, config.d, config.dictionary,
                                                 rng.dictionary);
  if (config.gradient_mode == GradientMode::kPopulation) return train(config, Dataset{}, M, sink);
  const Dataset data = generate_dataset(M, config.latent, config.effective_noise_sigma(),
                                        config.dataset_size, rng.latents, rng.noise);
  return train(config, data, M, sink);
}

// ---------------------------------------------------------------------------

AlternatingResult alternating_optimize(const MatrixXd& W_online, const MatrixXd& W_target,
                                       const VectorXd& bias_online, const VectorXd& bias_target,
                                       const AlternatingConfig& cfg) {
  const int d = static_cast<int>(W_online.rows());
  if (!(cfg.eta > 0.0)) throw ParameterError("eta must be positive");
  if (cfg.max_inner < 1 || cfg.max_outer < 1) throw ParameterError("iteration caps must be positive");
  const AssumptionReport start =
      check_assumptions(W_online, W_target, bias_online, bias_target, cfg.sigma0, d);
  if (!start.all_pass()) throw PreconditionError(start.first_violation());

  AlternatingResult res;
  MatrixXd Wo = W_online, Wt = W_target;
  auto inner = [&](bool online_phase, int& iters) {
    MatrixXd& W = online_phase ? Wo : Wt;
    double change = 0.0;
    for (iters = 1; iters <= cfg.max_inner; ++iters) {
      const GradientSet g = population_gradient_srelu_warm(Wo, Wt, bias_online, bias_target,
                                                           cfg.alpha, cfg.kappa, cfg.sigma0);
      const MatrixXd& G = online_phase ? g.online.W : g.target->W;
      MatrixXd next = normalize_rows(MatrixXd(W - cfg.eta * G));
      change = (next - W).cwiseAbs().maxCoeff();
      W = std::move(next);
      if (change < cfg.inner_tol) return;
    }
    std::ostringstream os;
    os << "inner loop on the " << (online_phase ? "online" : "target")
       << " branch hit " << cfg.max_inner << " iterations; last change " << change;
    throw NonConvergenceError(os.str());
  };
  for (int round = 0; round < cfg.max_outer; ++round) {
    AlternatingRound r;
    const MatrixXd prev_o = Wo, prev_t = Wt;
    r.a_online = srelu_warm_ratio(Wt, bias_target, cfg.alpha, cfg.kappa, cfg.sigma0);
    inner(true, r.inner_online);
    r.a_target = srelu_warm_ratio(Wo, bias_online, cfg.alpha, cfg.kappa, cfg.sigma0);
    inner(false, r.inner_target);
    r.online_change = (Wo - prev_o).cwiseAbs().maxCoeff();
    r.target_change = (Wt - prev_t).cwiseAbs().maxCoeff();
    r.online = Wo;
    r.target = Wt;
    const bool done = std::max(r.online_change, r.target_change) < cfg.outer_tol;
    res.rounds.push_back(std::move(r));
    if (done) {
      res.converged = true;
      break;
    }
  }
  if (!res.converged) {
    std::ostringstream os;
    os << "outer loop hit " << cfg.max_outer << " rounds; last changes "
       << res.rounds.back().online_change << ", " << res.rounds.back().target_change;
    throw NonConvergenceError(os.str());
  }
  res.online = std::move(Wo);
  res.target = std::move(Wt);
  return res;
}

}  // namespace ssl_lab
